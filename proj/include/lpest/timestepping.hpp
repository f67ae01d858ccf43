// Backward Euler and Crank-Nicolson marching for u_t - div(A grad u) + mu u = f
// with homogeneous Dirichlet data, plus the per-node and per-step caches the
// estimators consume.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpest/linalg.hpp"
#include "lpest/mesh.hpp"
#include "lpest/operators.hpp"

namespace lpest {

/// Field f(t, x, y).
using SpaceTimeField = std::function<double(double, double, double)>;

inline SpatialField at_time(const SpaceTimeField& f, double t) {
  return [&f, t](double x, double y) { return f(t, x, y); };
}

enum class SchemeKind { BackwardEuler, CrankNicolson };

inline std::string to_string(SchemeKind s) { return s == SchemeKind::BackwardEuler ? "be" : "cn"; }

/// Data of a parabolic model problem.
struct ParabolicProblem {
  SpaceTimeField forcing;
  SpatialField initial;
  double final_time = 1.0;
  CoefficientField coeff{};
};

/// Uniform time grid with tau = T / N.
struct TimeGrid {
  double final_time = 0.0;
  std::size_t n_steps = 0;
  double tau = 0.0;

  [[nodiscard]] double time(std::size_t n) const noexcept {
    return n == n_steps ? final_time : static_cast<double>(n) * tau;
  }
};

/// Snaps a target step so that N = ceil(T / tau_target) steps hit T exactly.
inline TimeGrid make_time_grid(double final_time, double tau_target) {
  if (!(final_time > 0.0) || !(tau_target > 0.0)) {
    throw std::invalid_argument("make_time_grid: final time and step must be positive");
  }
  // Relative slack so that T / tau landing a rounding error above an integer
  // does not add a step.
  const double ratio = final_time / tau_target;
  auto n = static_cast<std::size_t>(std::ceil(ratio * (1.0 - 1e-12)));
  n = std::max<std::size_t>(n, 1);
  return {final_time, n, final_time / static_cast<double>(n)};
}

/// How the step size is tied to the mesh size h.
struct TauRule {
  enum class Kind { HSquared, H, RootH, Fixed };
  Kind kind = Kind::HSquared;
  double value = 0.0;

  [[nodiscard]] double target(double h) const {
    switch (kind) {
      case Kind::HSquared:
        return h * h;
      case Kind::H:
        return h;
      case Kind::RootH:
        return std::sqrt(h);
      case Kind::Fixed:
        return value;
    }
    return value;
  }

  [[nodiscard]] std::string name() const {
    switch (kind) {
      case Kind::HSquared:
        return "hsq";
      case Kind::H:
        return "h";
      case Kind::RootH:
        return "hroot";
      case Kind::Fixed: {
        std::ostringstream s;
        s << "fixed=" << value;
        return s.str();
      }
    }
    return "";
  }
};

/// Temporal hat values on step [t^{n-1}, t^n]: curr = l^n(t), prev = l^{n-1}(t).
struct StepHats {
  double curr = 0.0;
  double prev = 1.0;
};

inline StepHats hats(double t_prev, double tau, double t) {
  const double c = (t - t_prev) / tau;
  return {c, 1.0 - c};
}

/// Quantities attached to one time node t^n.
struct NodeState {
  std::size_t index = 0;
  double t = 0.0;
  Vector U;     // U^n (zero boundary entries)
  Vector load;  // (f^n, phi_i), all dofs
  Vector Pf;    // P f^n
  Vector P0f;   // P_0 f^n
  Vector lapU;  // Delta_h U^n
};

/// Quantities attached to one step (t^{n-1}, t^n].
struct StepState {
  std::size_t n = 0;
  double tau = 0.0;
  SchemeKind scheme = SchemeKind::BackwardEuler;
  /// L2 norm of the pointwise-form scheme residual.
  double residual = 0.0;
  std::size_t cg_iterations = 0;
  // Crank-Nicolson only.
  double t_mid = 0.0;
  Vector P0f_mid;  // P_0 f^{n-1/2}
  Vector w;        // dbar(Delta_h U^n + P_0 f^n)
  Vector lap_w;    // Delta_h w
};

/// Solver for one scheme on a fixed mesh and step size; keeps the step
/// matrices on the interior block.
/// Relative tolerance of the time-step solves. Tighter than the projection
/// solves because the discrete time derivative divides the solve error by tau.
inline constexpr double kStepSolveTolerance = 1e-14;

class SchemeSystem {
 public:
  SchemeSystem(const DiscreteOperatorSet& ops, SchemeKind scheme, double tau)
      : ops_(&ops), scheme_(scheme), tau_(tau) {
    if (!(tau > 0.0)) {
      throw std::invalid_argument("SchemeSystem: tau must be positive");
    }
    const double theta = scheme == SchemeKind::BackwardEuler ? 1.0 : 0.5;
    lhs_ = SparseOperator::combine(1.0, ops.interior_mass(), theta * tau, ops.interior_stiffness());
    rhs_ = SparseOperator::combine(1.0, ops.interior_mass(), -(1.0 - theta) * tau,
                                   ops.interior_stiffness());
  }

  [[nodiscard]] SchemeKind scheme() const noexcept { return scheme_; }
  [[nodiscard]] double tau() const noexcept { return tau_; }

  /// Advances U_prev given the load vector (f^*, phi_i) at the scheme's
  /// sampling time (t^n for BE, t^{n-1/2} for CN). Returns the new state.
  Vector step(const Vector& U_prev, const Vector& load, std::size_t* iterations = nullptr) const {
    const DofMap& dofs = ops_->dofs();
    const Vector u_old = dofs.restrict_to_interior(U_prev);
    Vector b = rhs_ * u_old;
    const Vector l = dofs.restrict_to_interior(load);
    axpy(tau_, l, b);
    Vector x = u_old;
    CgOptions opts = ops_->solver_options();
    opts.tolerance = std::min(opts.tolerance, kStepSolveTolerance);
    const std::size_t it = cg_solve_into(lhs_, b, x, nullptr, opts);
    if (iterations != nullptr) {
      *iterations = it;
    }
    return dofs.extend_by_zero(x);
  }

 private:
  const DiscreteOperatorSet* ops_;
  SchemeKind scheme_;
  double tau_;
  SparseOperator lhs_;
  SparseOperator rhs_;
};

/// One backward Euler step: (M_0 + tau K_0) U^n = M_0 U^{n-1} + tau b(f^n).
inline Vector step_backward_euler(const Vector& U_prev, double t_curr, double tau,
                                  const DiscreteOperatorSet& ops, const SpaceTimeField& f) {
  const SchemeSystem sys(ops, SchemeKind::BackwardEuler, tau);
  return sys.step(U_prev, ops.load(at_time(f, t_curr)));
}

/// One Crank-Nicolson step:
/// (M_0 + tau/2 K_0) U^n = (M_0 - tau/2 K_0) U^{n-1} + tau b(f^{n-1/2}).
inline Vector step_crank_nicolson(const Vector& U_prev, double t_curr, double tau,
                                  const DiscreteOperatorSet& ops, const SpaceTimeField& f) {
  const SchemeSystem sys(ops, SchemeKind::CrankNicolson, tau);
  return sys.step(U_prev, ops.load(at_time(f, t_curr - 0.5 * tau)));
}

/// Interpolates u_0 into V_0 (vertex values, boundary entries zeroed).
inline Vector initial_state(const DiscreteOperatorSet& ops, const SpatialField& u0) {
  Vector U = interpolate_nodal(ops.mesh(), u0);
  for (std::size_t i = 0; i < U.size(); ++i) {
    if (!ops.dofs().is_interior(i)) {
      U[i] = 0.0;
    }
  }
  return U;
}

/// Streams the discrete solution one step at a time, keeping the two node
/// states bracketing the current step.
class Marcher {
 public:
  Marcher(const DiscreteOperatorSet& ops, const ParabolicProblem& problem, SchemeKind scheme,
          TimeGrid grid)
      : ops_(&ops), problem_(&problem), scheme_(scheme), grid_(grid), system_(ops, scheme, grid.tau) {
    curr_ = make_node(0, initial_state(ops, problem.initial));
  }

  [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] SchemeKind scheme() const noexcept { return scheme_; }
  [[nodiscard]] const DiscreteOperatorSet& operators() const noexcept { return *ops_; }
  [[nodiscard]] const ParabolicProblem& problem() const noexcept { return *problem_; }
  [[nodiscard]] bool done() const noexcept { return curr_.index >= grid_.n_steps; }
  /// Node t^{n-1} of the last completed step (invalid before the first step).
  [[nodiscard]] const NodeState& previous() const noexcept { return prev_; }
  /// Node t^n (t^0 before the first step).
  [[nodiscard]] const NodeState& current() const noexcept { return curr_; }
  [[nodiscard]] const StepState& step() const noexcept { return step_; }

  void advance() {
    if (done()) {
      throw std::logic_error("Marcher::advance: final time already reached");
    }
    const std::size_t n = curr_.index + 1;
    const double tau = grid_.tau;
    StepState st;
    st.n = n;
    st.tau = tau;
    st.scheme = scheme_;
    Vector U;
    try {
      if (scheme_ == SchemeKind::BackwardEuler) {
        const double t = grid_.time(n);
        Vector load = ops_->load(at_time(problem_->forcing, t));
        U = system_.step(curr_.U, load, &st.cg_iterations);
        prev_ = std::move(curr_);
        curr_ = make_node(n, std::move(U), std::move(load));
      } else {
        st.t_mid = 0.5 * (grid_.time(n - 1) + grid_.time(n));
        const Vector load_mid = ops_->load(at_time(problem_->forcing, st.t_mid));
        U = system_.step(curr_.U, load_mid, &st.cg_iterations);
        st.P0f_mid = ops_->solve_interior_mass(load_mid);
        prev_ = std::move(curr_);
        curr_ = make_node(n, std::move(U));
        Vector a = curr_.lapU;
        axpy(1.0, curr_.P0f, a);
        Vector b = prev_.lapU;
        axpy(1.0, prev_.P0f, b);
        st.w = discrete_time_derivative(a, b, tau);
        st.lap_w = ops_->discrete_laplacian(st.w);
      }
    } catch (const SolverError& e) {
      std::ostringstream msg;
      msg << "step " << n << ": " << e.what();
      throw SolverError(msg.str(), e.residual(), e.iterations());
    }
    st.residual = scheme_residual(st);
    step_ = std::move(st);
  }

 private:
  NodeState make_node(std::size_t index, Vector U, Vector load = {}) const {
    NodeState node;
    node.index = index;
    node.t = grid_.time(index);
    node.U = std::move(U);
    node.load = load.empty() ? ops_->load(at_time(problem_->forcing, node.t)) : std::move(load);
    node.Pf = ops_->solve_mass(node.load);
    node.P0f = ops_->solve_interior_mass(node.load);
    node.lapU = ops_->discrete_laplacian(node.U);
    return node;
  }

  [[nodiscard]] double scheme_residual(const StepState& st) const {
    Vector r = discrete_time_derivative(curr_.U, prev_.U, st.tau);
    if (scheme_ == SchemeKind::BackwardEuler) {
      axpy(-1.0, curr_.lapU, r);
      axpy(-1.0, curr_.P0f, r);
    } else {
      axpy(-0.5, curr_.lapU, r);
      axpy(-0.5, prev_.lapU, r);
      axpy(-1.0, st.P0f_mid, r);
    }
    return ops_->l2_norm(r);
  }

  const DiscreteOperatorSet* ops_;
  const ParabolicProblem* problem_;
  SchemeKind scheme_;
  TimeGrid grid_;
  SchemeSystem system_;
  NodeState prev_;
  NodeState curr_;
  StepState step_;
};

/// Full discrete solution {U^n} on its time grid, with optional caches.
struct Trajectory {
  SchemeKind scheme = SchemeKind::BackwardEuler;
  TimeGrid grid;
  std::vector<double> times;
  std::vector<Vector> states;
  /// Populated when caches are requested: nodes[n] for n = 0..N and
  /// steps[n - 1] for n = 1..N.
  std::vector<NodeState> nodes;
  std::vector<StepState> steps;
};

inline Trajectory run(const DiscreteOperatorSet& ops, const ParabolicProblem& problem, SchemeKind scheme,
                      TimeGrid grid, bool keep_caches = true) {
  Marcher marcher(ops, problem, scheme, grid);
  Trajectory traj;
  traj.scheme = scheme;
  traj.grid = grid;
  traj.times.push_back(marcher.current().t);
  traj.states.push_back(marcher.current().U);
  if (keep_caches) {
    traj.nodes.push_back(marcher.current());
  }
  while (!marcher.done()) {
    marcher.advance();
    traj.times.push_back(marcher.current().t);
    traj.states.push_back(marcher.current().U);
    if (keep_caches) {
      traj.nodes.push_back(marcher.current());
      traj.steps.push_back(marcher.step());
    }
  }
  return traj;
}

/// Convenience overload: mesh of M cells per side, step from the tau rule.
inline Trajectory run(const ParabolicProblem& problem, SchemeKind scheme, int cells_per_side,
                      const TauRule& tau_rule, bool keep_caches = true) {
  const DiscreteOperatorSet ops(UniformQuadMesh(cells_per_side), problem.coeff);
  const UniformQuadMesh& mesh = ops.mesh();
  return run(ops, problem, scheme, make_time_grid(problem.final_time, tau_rule.target(mesh.h())),
             keep_caches);
}

}  // namespace lpest
