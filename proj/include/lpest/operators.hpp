// Discrete operators on the Q1 space: L2 projectors onto V and V_0, the
// discrete elliptic operator and the norms used by the estimators.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "lpest/linalg.hpp"
#include "lpest/mesh.hpp"

namespace lpest {

/// Backward difference (w_curr - w_prev) / tau.
inline Vector discrete_time_derivative(const Vector& w_curr, const Vector& w_prev, double tau) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("discrete_time_derivative: tau must be positive");
  }
  if (w_curr.size() != w_prev.size()) {
    throw std::invalid_argument("discrete_time_derivative: dimension mismatch");
  }
  Vector out(w_curr.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (w_curr[i] - w_prev[i]) / tau;
  }
  return out;
}

/// Mass and stiffness forms of one mesh together with the solves that turn
/// them into operators on V and V_0.
class DiscreteOperatorSet {
 public:
  DiscreteOperatorSet(UniformQuadMesh mesh, CoefficientField coeff, CgOptions solver = {})
      : mesh_(std::move(mesh)),
        dofs_(mesh_),
        coeff_(coeff),
        solver_(solver),
        rhs_rule_(QuadratureRule::gauss(3)),
        mass_(assemble_mass(mesh_, dofs_)),
        stiffness_(assemble_stiffness(mesh_, dofs_, coeff_)),
        mass0_(mass_.principal_submatrix(dofs_.interior_mask())),
        stiffness0_(stiffness_.principal_submatrix(dofs_.interior_mask())) {}

  [[nodiscard]] const UniformQuadMesh& mesh() const noexcept { return mesh_; }
  [[nodiscard]] const DofMap& dofs() const noexcept { return dofs_; }
  [[nodiscard]] const CoefficientField& coefficients() const noexcept { return coeff_; }
  [[nodiscard]] const CgOptions& solver_options() const noexcept { return solver_; }
  [[nodiscard]] const SparseOperator& mass() const noexcept { return mass_; }
  [[nodiscard]] const SparseOperator& stiffness() const noexcept { return stiffness_; }
  /// Interior principal blocks M_0 and K_0 (interior numbering).
  [[nodiscard]] const SparseOperator& interior_mass() const noexcept { return mass0_; }
  [[nodiscard]] const SparseOperator& interior_stiffness() const noexcept { return stiffness0_; }

  /// b_i = int g phi_i over all dofs, by the 3x3 Gauss rule.
  [[nodiscard]] Vector load(const SpatialField& g) const {
    Vector b(dofs_.n_dofs(), 0.0);
    const double s = mesh_.side();
    const double area = s * s;
    for (std::size_t e = 0; e < mesh_.n_elements(); ++e) {
      const Point o = mesh_.element_origin(e);
      const auto verts = mesh_.element_vertices(e);
      for (std::size_t q = 0; q < rhs_rule_.size(); ++q) {
        const Point& ref = rhs_rule_.points[q];
        const double gq = g(o.x + s * ref.x, o.y + s * ref.y) * rhs_rule_.weights[q] * area;
        const auto phi = q1::values(ref.x, ref.y);
        for (std::size_t a = 0; a < 4; ++a) {
          b[verts[a]] += gq * phi[a];
        }
      }
    }
    return b;
  }

  /// Solves M x = b over all dofs.
  [[nodiscard]] Vector solve_mass(const Vector& b) const { return cg_solve(mass_, b, solver_.tolerance, solver_.max_iterations); }

  /// Solves M_0 x = b_I and extends by zero.
  [[nodiscard]] Vector solve_interior_mass(const Vector& full_rhs) const {
    const Vector x = cg_solve(mass0_, dofs_.restrict_to_interior(full_rhs), solver_.tolerance,
                              solver_.max_iterations);
    return dofs_.extend_by_zero(x);
  }

  /// P g
  [[nodiscard]] Vector l2_project(const SpatialField& g) const { return solve_mass(load(g)); }
  /// P applied to a finite element function (identity up to solver tolerance).
  [[nodiscard]] Vector l2_project(const Vector& nodal) const { return solve_mass(mass_ * nodal); }

  /// P_0 g
  [[nodiscard]] Vector l2_project_bc(const SpatialField& g) const { return solve_interior_mass(load(g)); }
  [[nodiscard]] Vector l2_project_bc(const Vector& nodal) const { return solve_interior_mass(mass_ * nodal); }

  /// z in V_0 with (z, phi) = -a(w, phi) for all phi in V_0.
  [[nodiscard]] Vector discrete_laplacian(const Vector& w) const {
    require_zero_boundary(w, "discrete_laplacian");
    Vector rhs = stiffness_ * w;
    for (double& v : rhs) {
      v = -v;
    }
    return solve_interior_mass(rhs);
  }

  /// ||v||_{L2} of a finite element function.
  [[nodiscard]] double l2_norm(const Vector& v) const { return std::sqrt(std::max(0.0, mass_.inner(v, v))); }

  /// |||v||| = a(v, v)^{1/2}
  [[nodiscard]] double triple_norm(const Vector& v) const {
    return std::sqrt(std::max(0.0, stiffness_.inner(v, v)));
  }

 private:
  void require_zero_boundary(const Vector& w, const char* who) const {
    if (w.size() != dofs_.n_dofs()) {
      throw std::invalid_argument(std::string(who) + ": dimension mismatch");
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!dofs_.is_interior(i) && w[i] != 0.0) {
        throw std::invalid_argument(std::string(who) + ": argument must vanish on the boundary");
      }
    }
  }

  UniformQuadMesh mesh_;
  DofMap dofs_;
  CoefficientField coeff_;
  CgOptions solver_;
  QuadratureRule rhs_rule_;
  SparseOperator mass_;
  SparseOperator stiffness_;
  SparseOperator mass0_;
  SparseOperator stiffness0_;
};

}  // namespace lpest
