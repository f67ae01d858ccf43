// Uniform Q1 discretisation of the unit square: mesh topology, dof map,
// tensor Gauss rules and nodal interpolation.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace lpest {

using Vector = std::vector<double>;

/// Scalar field g(x, y) on the spatial domain.
using SpatialField = std::function<double(double, double)>;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Tensor-product Gauss rule on the reference square [0,1]^2.
struct QuadratureRule {
  std::vector<Point> points;
  std::vector<double> weights;

  [[nodiscard]] std::size_t size() const noexcept { return points.size(); }

  /// n-point Gauss-Legendre in each direction (exact for degree 2n-1 per
  /// direction). Supported n: 1..5.
  static QuadratureRule gauss(int n) {
    const auto [nodes, w] = gauss_1d(n);
    QuadratureRule rule;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        rule.points.push_back({nodes[i], nodes[j]});
        rule.weights.push_back(w[i] * w[j]);
      }
    }
    return rule;
  }

  /// Gauss-Legendre nodes and weights on [0,1].
  static std::pair<std::vector<double>, std::vector<double>> gauss_1d(int n) {
    std::vector<double> x;
    std::vector<double> w;
    switch (n) {
      case 1:
        x = {0.0};
        w = {2.0};
        break;
      case 2: {
        const double a = 1.0 / std::sqrt(3.0);
        x = {-a, a};
        w = {1.0, 1.0};
        break;
      }
      case 3: {
        const double a = std::sqrt(3.0 / 5.0);
        x = {-a, 0.0, a};
        w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
        break;
      }
      case 4: {
        const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
        const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
        const double wa = (18.0 + std::sqrt(30.0)) / 36.0;
        const double wb = (18.0 - std::sqrt(30.0)) / 36.0;
        x = {-b, -a, a, b};
        w = {wb, wa, wa, wb};
        break;
      }
      case 5: {
        const double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
        const double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
        const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
        const double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
        x = {-b, -a, 0.0, a, b};
        w = {wb, wa, 128.0 / 225.0, wa, wb};
        break;
      }
      default:
        throw std::invalid_argument("QuadratureRule::gauss: supported point counts are 1..5");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = 0.5 * (x[i] + 1.0);
      w[i] *= 0.5;
    }
    return {x, w};
  }
};

/// Bilinear shape functions on the reference square, corners ordered
/// counter-clockwise from (0,0).
namespace q1 {

inline std::array<double, 4> values(double xi, double eta) noexcept {
  return {(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta, (1.0 - xi) * eta};
}

/// Reference gradients d/dxi, d/deta.
inline std::array<std::array<double, 2>, 4> gradients(double xi, double eta) noexcept {
  return {{{-(1.0 - eta), -(1.0 - xi)},
           {(1.0 - eta), -xi},
           {eta, xi},
           {-eta, (1.0 - xi)}}};
}

}  // namespace q1

enum class EdgeOrientation { Vertical, Horizontal };

/// Interior edge shared by two elements. For vertical edges `minus` is the
/// left element, for horizontal edges the lower one.
struct InteriorEdge {
  std::size_t plus = 0;
  std::size_t minus = 0;
  EdgeOrientation orientation = EdgeOrientation::Vertical;
};

/// Uniform partition of (0,1)^2 into M x M squares.
class UniformQuadMesh {
 public:
  explicit UniformQuadMesh(int cells_per_side) : m_(cells_per_side) {
    if (cells_per_side < 1) {
      throw std::invalid_argument("UniformQuadMesh: cells_per_side must be >= 1");
    }
    const auto m = static_cast<std::size_t>(m_);
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 1; i < m; ++i) {
        edges_.push_back({element(i, j), element(i - 1, j), EdgeOrientation::Vertical});
      }
    }
    for (std::size_t j = 1; j < m; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        edges_.push_back({element(i, j), element(i, j - 1), EdgeOrientation::Horizontal});
      }
    }
  }

  [[nodiscard]] int cells_per_side() const noexcept { return m_; }
  [[nodiscard]] double side() const noexcept { return 1.0 / m_; }
  /// Element diameter; constant over the mesh.
  [[nodiscard]] double h() const noexcept { return std::sqrt(2.0) / m_; }
  /// Edge diameter.
  [[nodiscard]] double edge_h() const noexcept { return side(); }

  [[nodiscard]] std::size_t n_elements() const noexcept {
    return static_cast<std::size_t>(m_) * static_cast<std::size_t>(m_);
  }
  [[nodiscard]] std::size_t n_vertices() const noexcept {
    return static_cast<std::size_t>(m_ + 1) * static_cast<std::size_t>(m_ + 1);
  }
  [[nodiscard]] std::size_t n_boundary_edges() const noexcept { return 4 * static_cast<std::size_t>(m_); }
  [[nodiscard]] const std::vector<InteriorEdge>& interior_edges() const noexcept { return edges_; }

  [[nodiscard]] std::size_t element(std::size_t i, std::size_t j) const noexcept {
    return i + static_cast<std::size_t>(m_) * j;
  }
  [[nodiscard]] std::size_t vertex(std::size_t i, std::size_t j) const noexcept {
    return i + static_cast<std::size_t>(m_ + 1) * j;
  }

  /// Global vertex indices of element e, counter-clockwise from lower left.
  [[nodiscard]] std::array<std::size_t, 4> element_vertices(std::size_t e) const noexcept {
    const std::size_t i = e % static_cast<std::size_t>(m_);
    const std::size_t j = e / static_cast<std::size_t>(m_);
    return {vertex(i, j), vertex(i + 1, j), vertex(i + 1, j + 1), vertex(i, j + 1)};
  }

  [[nodiscard]] Point element_origin(std::size_t e) const noexcept {
    const std::size_t i = e % static_cast<std::size_t>(m_);
    const std::size_t j = e / static_cast<std::size_t>(m_);
    return {static_cast<double>(i) * side(), static_cast<double>(j) * side()};
  }

  [[nodiscard]] Point vertex_point(std::size_t v) const noexcept {
    const std::size_t i = v % static_cast<std::size_t>(m_ + 1);
    const std::size_t j = v / static_cast<std::size_t>(m_ + 1);
    return {static_cast<double>(i) * side(), static_cast<double>(j) * side()};
  }

  [[nodiscard]] bool is_boundary_vertex(std::size_t v) const noexcept {
    const std::size_t n = static_cast<std::size_t>(m_);
    const std::size_t i = v % (n + 1);
    const std::size_t j = v / (n + 1);
    return i == 0 || j == 0 || i == n || j == n;
  }

 private:
  int m_;
  std::vector<InteriorEdge> edges_;
};

inline UniformQuadMesh build_mesh(int cells_per_side) { return UniformQuadMesh(cells_per_side); }

/// Vertex-based dof numbering with the interior (V_0) subset.
class DofMap {
 public:
  explicit DofMap(const UniformQuadMesh& mesh) : interior_mask_(mesh.n_vertices(), false) {
    interior_index_.assign(mesh.n_vertices(), kNone);
    for (std::size_t v = 0; v < mesh.n_vertices(); ++v) {
      if (!mesh.is_boundary_vertex(v)) {
        interior_mask_[v] = true;
        interior_index_[v] = interior_dofs_.size();
        interior_dofs_.push_back(v);
      }
    }
  }

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  [[nodiscard]] std::size_t n_dofs() const noexcept { return interior_mask_.size(); }
  [[nodiscard]] std::size_t n_interior_dofs() const noexcept { return interior_dofs_.size(); }
  [[nodiscard]] const std::vector<bool>& interior_mask() const noexcept { return interior_mask_; }
  [[nodiscard]] bool is_interior(std::size_t dof) const { return interior_mask_[dof]; }
  /// Position of a dof inside the interior block, or kNone.
  [[nodiscard]] std::size_t interior_index(std::size_t dof) const { return interior_index_[dof]; }
  [[nodiscard]] const std::vector<std::size_t>& interior_dofs() const noexcept { return interior_dofs_; }

  [[nodiscard]] Vector restrict_to_interior(const Vector& full) const {
    Vector out(interior_dofs_.size());
    for (std::size_t k = 0; k < interior_dofs_.size(); ++k) {
      out[k] = full[interior_dofs_[k]];
    }
    return out;
  }

  /// Embed an interior block into a full vector with zero boundary entries.
  [[nodiscard]] Vector extend_by_zero(const Vector& interior) const {
    Vector out(n_dofs(), 0.0);
    for (std::size_t k = 0; k < interior_dofs_.size(); ++k) {
      out[interior_dofs_[k]] = interior[k];
    }
    return out;
  }

 private:
  std::vector<bool> interior_mask_;
  std::vector<std::size_t> interior_index_;
  std::vector<std::size_t> interior_dofs_;
};

/// Vertex interpolation; dof numbering coincides with vertex numbering.
inline Vector interpolate_nodal(const UniformQuadMesh& mesh, const SpatialField& g) {
  Vector out(mesh.n_vertices());
  for (std::size_t v = 0; v < mesh.n_vertices(); ++v) {
    const Point p = mesh.vertex_point(v);
    out[v] = g(p.x, p.y);
  }
  return out;
}

/// Values of a Q1 function at every quadrature point, element by element
/// (layout: e * rule.size() + q).
inline Vector evaluate_at_quadrature(const UniformQuadMesh& mesh, const Vector& v,
                                     const QuadratureRule& rule) {
  Vector out(mesh.n_elements() * rule.size());
  std::vector<std::array<double, 4>> shape(rule.size());
  for (std::size_t q = 0; q < rule.size(); ++q) {
    shape[q] = q1::values(rule.points[q].x, rule.points[q].y);
  }
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const auto verts = mesh.element_vertices(e);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      double s = 0.0;
      for (std::size_t a = 0; a < 4; ++a) {
        s += shape[q][a] * v[verts[a]];
      }
      out[e * rule.size() + q] = s;
    }
  }
  return out;
}

/// Values of an analytic field at every quadrature point, same layout as
/// evaluate_at_quadrature.
inline Vector sample_at_quadrature(const UniformQuadMesh& mesh, const SpatialField& g,
                                   const QuadratureRule& rule) {
  Vector out(mesh.n_elements() * rule.size());
  const double s = mesh.side();
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const Point o = mesh.element_origin(e);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      out[e * rule.size() + q] = g(o.x + s * rule.points[q].x, o.y + s * rule.points[q].y);
    }
  }
  return out;
}

/// Squared L2 norm of a field given by its quadrature-point values.
inline double quadrature_norm_squared(const UniformQuadMesh& mesh, const Vector& values,
                                      const QuadratureRule& rule) {
  const double area = mesh.side() * mesh.side();
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double val = values[e * rule.size() + q];
      local += rule.weights[q] * val * val;
    }
    total += area * local;
  }
  return total;
}

/// L2 inner product of two fields given by quadrature-point values.
inline double quadrature_inner(const UniformQuadMesh& mesh, const Vector& a, const Vector& b,
                               const QuadratureRule& rule) {
  const double area = mesh.side() * mesh.side();
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      local += rule.weights[q] * a[e * rule.size() + q] * b[e * rule.size() + q];
    }
    total += area * local;
  }
  return total;
}

/// (sum_K int_K (v_h - g)^2)^{1/2} by elementwise quadrature.
inline double element_l2_error(const UniformQuadMesh& mesh, const Vector& v_h, const SpatialField& g,
                               const QuadratureRule& rule) {
  Vector diff = evaluate_at_quadrature(mesh, v_h, rule);
  const Vector exact = sample_at_quadrature(mesh, g, rule);
  for (std::size_t k = 0; k < diff.size(); ++k) {
    diff[k] -= exact[k];
  }
  return std::sqrt(quadrature_norm_squared(mesh, diff, rule));
}

}  // namespace lpest
