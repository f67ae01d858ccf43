// Compressed-row symmetric operators, Q1 mass/stiffness assembly and a
// Jacobi-preconditioned conjugate gradient solver.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpest/mesh.hpp"

namespace lpest {

inline double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

inline double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

/// y <- y + a * x
inline void axpy(double a, const Vector& x, Vector& y) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] += a * x[i];
  }
}

/// a * x + b * y
inline Vector lincomb(double a, const Vector& x, double b, const Vector& y) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = a * x[i] + b * y[i];
  }
  return out;
}

/// Square sparse matrix in compressed-row layout with sorted column indices.
class SparseOperator {
 public:
  SparseOperator() = default;

  /// Builds an all-zero operator with the given (per-row sorted) pattern.
  SparseOperator(std::size_t n, std::vector<std::size_t> row_offsets, std::vector<std::size_t> columns)
      : n_(n), offsets_(std::move(row_offsets)), cols_(std::move(columns)), vals_(cols_.size(), 0.0) {
    if (offsets_.size() != n_ + 1 || offsets_.back() != cols_.size()) {
      throw std::invalid_argument("SparseOperator: inconsistent compressed-row layout");
    }
  }

  [[nodiscard]] std::size_t dimension() const noexcept { return n_; }
  [[nodiscard]] std::size_t nonzeros() const noexcept { return vals_.size(); }
  [[nodiscard]] const std::vector<std::size_t>& row_offsets() const noexcept { return offsets_; }
  [[nodiscard]] const std::vector<std::size_t>& columns() const noexcept { return cols_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return vals_; }

  /// Position of (i, j) in the value array, or npos when structurally zero.
  [[nodiscard]] std::size_t find(std::size_t i, std::size_t j) const {
    const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
    const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
    const auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) {
      return npos;
    }
    return static_cast<std::size_t>(it - cols_.begin());
  }

  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const {
    const std::size_t k = find(i, j);
    return k == npos ? 0.0 : vals_[k];
  }

  void add(std::size_t i, std::size_t j, double value) {
    const std::size_t k = find(i, j);
    if (k == npos) {
      throw std::out_of_range("SparseOperator::add: entry outside sparsity pattern");
    }
    vals_[k] += value;
  }

  void apply(const Vector& x, Vector& y) const {
    y.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
        s += vals_[k] * x[cols_[k]];
      }
      y[i] = s;
    }
  }

  [[nodiscard]] Vector operator*(const Vector& x) const {
    Vector y;
    apply(x, y);
    return y;
  }

  /// x^T A y
  [[nodiscard]] double inner(const Vector& x, const Vector& y) const { return dot(x, (*this) * y); }

  [[nodiscard]] Vector diagonal() const {
    Vector d(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      d[i] = (*this)(i, i);
    }
    return d;
  }

  [[nodiscard]] bool is_symmetric(double tol) const {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
        const std::size_t j = cols_[k];
        const std::size_t kt = find(j, i);
        if (kt == npos || std::abs(vals_[k] - vals_[kt]) > tol) {
          return false;
        }
      }
    }
    return true;
  }

  /// Principal submatrix on the rows/columns flagged in `keep`, renumbered
  /// in increasing order.
  [[nodiscard]] SparseOperator principal_submatrix(const std::vector<bool>& keep) const {
    std::vector<std::size_t> index(n_, npos);
    std::size_t m = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (keep[i]) {
        index[i] = m++;
      }
    }
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    for (std::size_t i = 0; i < n_; ++i) {
      if (!keep[i]) {
        continue;
      }
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
        if (index[cols_[k]] != npos) {
          cols.push_back(index[cols_[k]]);
          vals.push_back(vals_[k]);
        }
      }
      offsets.push_back(cols.size());
    }
    SparseOperator sub(m, std::move(offsets), std::move(cols));
    sub.vals_ = std::move(vals);
    return sub;
  }

  /// a * A + b * B for operators sharing one sparsity pattern.
  [[nodiscard]] static SparseOperator combine(double a, const SparseOperator& A, double b,
                                              const SparseOperator& B) {
    if (A.offsets_ != B.offsets_ || A.cols_ != B.cols_) {
      throw std::invalid_argument("SparseOperator::combine: sparsity patterns differ");
    }
    SparseOperator out = A;
    for (std::size_t k = 0; k < out.vals_.size(); ++k) {
      out.vals_[k] = a * A.vals_[k] + b * B.vals_[k];
    }
    return out;
  }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> cols_;
  std::vector<double> vals_;
};

/// Constant coefficients of a(v,w) = (A grad v, grad w) + (mu v, w).
struct CoefficientField {
  std::array<std::array<double, 2>, 2> A{{{1.0, 0.0}, {0.0, 1.0}}};
  double mu = 0.0;

  static CoefficientField identity() { return {}; }

  void validate() const {
    if (std::abs(A[0][1] - A[1][0]) > 1e-14) {
      throw std::invalid_argument("CoefficientField: A must be symmetric");
    }
    const double det = A[0][0] * A[1][1] - A[0][1] * A[1][0];
    if (!(A[0][0] > 0.0) || !(det > 0.0)) {
      throw std::invalid_argument("CoefficientField: A must be positive definite");
    }
    if (!(mu >= 0.0)) {
      throw std::invalid_argument("CoefficientField: mu must be non-negative");
    }
  }
};

/// Sparsity of the Q1 vertex coupling (3x3 vertex stencil).
inline SparseOperator q1_pattern(const UniformQuadMesh& mesh) {
  const auto n1 = static_cast<std::size_t>(mesh.cells_per_side() + 1);
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < n1; ++j) {
    for (std::size_t i = 0; i < n1; ++i) {
      for (std::size_t jj = (j == 0 ? 0 : j - 1); jj <= std::min(j + 1, n1 - 1); ++jj) {
        for (std::size_t ii = (i == 0 ? 0 : i - 1); ii <= std::min(i + 1, n1 - 1); ++ii) {
          cols.push_back(ii + n1 * jj);
        }
      }
      offsets.push_back(cols.size());
    }
  }
  return SparseOperator(n1 * n1, std::move(offsets), std::move(cols));
}

using ElementMatrix = std::array<std::array<double, 4>, 4>;

/// int_K phi_a phi_b on a square of side s.
inline ElementMatrix element_mass(double side, const QuadratureRule& rule) {
  ElementMatrix m{};
  const double area = side * side;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto phi = q1::values(rule.points[q].x, rule.points[q].y);
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) {
        m[a][b] += rule.weights[q] * area * phi[a] * phi[b];
      }
    }
  }
  return m;
}

/// int_K (A grad phi_b).grad phi_a + mu phi_a phi_b on a square of side s.
inline ElementMatrix element_stiffness(double side, const CoefficientField& coeff,
                                       const QuadratureRule& rule) {
  ElementMatrix k{};
  const double area = side * side;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto phi = q1::values(rule.points[q].x, rule.points[q].y);
    const auto grad = q1::gradients(rule.points[q].x, rule.points[q].y);
    for (std::size_t a = 0; a < 4; ++a) {
      const double gax = grad[a][0] / side;
      const double gay = grad[a][1] / side;
      for (std::size_t b = 0; b < 4; ++b) {
        const double gbx = grad[b][0] / side;
        const double gby = grad[b][1] / side;
        const double agx = coeff.A[0][0] * gbx + coeff.A[0][1] * gby;
        const double agy = coeff.A[1][0] * gbx + coeff.A[1][1] * gby;
        k[a][b] += rule.weights[q] * area * (agx * gax + agy * gay + coeff.mu * phi[a] * phi[b]);
      }
    }
  }
  return k;
}

namespace detail {

inline SparseOperator scatter(const UniformQuadMesh& mesh, const ElementMatrix& local) {
  SparseOperator global = q1_pattern(mesh);
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const auto verts = mesh.element_vertices(e);
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) {
        global.add(verts[a], verts[b], local[a][b]);
      }
    }
  }
  return global;
}

}  // namespace detail

/// Global mass matrix over all dofs. Element matrices are identical on a
/// uniform mesh, so one local matrix is scattered everywhere.
inline SparseOperator assemble_mass(const UniformQuadMesh& mesh, const DofMap& /*dofs*/) {
  return detail::scatter(mesh, element_mass(mesh.side(), QuadratureRule::gauss(3)));
}

inline SparseOperator assemble_stiffness(const UniformQuadMesh& mesh, const DofMap& /*dofs*/,
                                         const CoefficientField& coeff) {
  coeff.validate();
  return detail::scatter(mesh, element_stiffness(mesh.side(), coeff, QuadratureRule::gauss(3)));
}

/// Raised when CG exhausts its iteration budget.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual, std::size_t iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

  [[nodiscard]] double residual() const noexcept { return residual_; }
  [[nodiscard]] std::size_t iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

struct CgOptions {
  double tolerance = 1e-12;
  /// 0 selects 10 * (number of free unknowns).
  std::size_t max_iterations = 0;
};

/// Solves A x = b by Jacobi-preconditioned CG, starting from the incoming x.
/// Dofs with free[i] == false keep x[i] = b[i]; the remaining rows are solved
/// with those values moved to the right-hand side. Stops once
/// ||b_F - (A x)_F||_2 <= tol * ||b_F||_2. Returns the iteration count.
inline std::size_t cg_solve_into(const SparseOperator& A, const Vector& b, Vector& x,
                                 const std::vector<bool>* free, CgOptions options = {}) {
  const std::size_t n = A.dimension();
  if (b.size() != n) {
    throw std::invalid_argument("cg_solve: dimension mismatch");
  }
  if (!(options.tolerance > 0.0)) {
    throw std::invalid_argument("cg_solve: tolerance must be positive");
  }
  x.resize(n, 0.0);
  const auto is_free = [&](std::size_t i) { return free == nullptr || (*free)[i]; };
  std::size_t n_free = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_free(i)) {
      ++n_free;
    } else {
      x[i] = b[i];
    }
  }
  const std::size_t max_it = options.max_iterations == 0 ? 10 * std::max<std::size_t>(n_free, 1)
                                                         : options.max_iterations;

  double b_norm_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_free(i)) {
      b_norm_sq += b[i] * b[i];
    }
  }
  const double b_norm = std::sqrt(b_norm_sq);

  Vector r(n, 0.0);
  Vector Ax;
  A.apply(x, Ax);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = is_free(i) ? b[i] - Ax[i] : 0.0;
  }
  const double target = options.tolerance * b_norm;
  double r_norm = norm2(r);
  if (r_norm <= target) {
    return 0;
  }

  const Vector diag = A.diagonal();
  Vector z(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = is_free(i) ? r[i] / diag[i] : 0.0;
  }
  Vector p = z;
  Vector Ap(n, 0.0);
  double rz = dot(r, z);

  for (std::size_t it = 1; it <= max_it; ++it) {
    A.apply(p, Ap);
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_free(i)) {
        Ap[i] = 0.0;
      }
    }
    const double alpha = rz / dot(p, Ap);
    axpy(alpha, p, x);
    axpy(-alpha, Ap, r);
    r_norm = norm2(r);
    if (r_norm <= target) {
      return it;
    }
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = is_free(i) ? r[i] / diag[i] : 0.0;
    }
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = z[i] + beta * p[i];
    }
  }
  std::ostringstream msg;
  msg << "cg_solve: no convergence after " << max_it << " iterations (residual " << r_norm
      << ", target " << target << ")";
  throw SolverError(msg.str(), r_norm, max_it);
}

inline Vector cg_solve(const SparseOperator& A, const Vector& b, double tol = 1e-12,
                       std::size_t maxit = 0) {
  Vector x(b.size(), 0.0);
  cg_solve_into(A, b, x, nullptr, {tol, maxit});
  return x;
}

/// Constrained variant: entries with free[i] == false are passed through.
inline Vector cg_solve(const SparseOperator& A, const Vector& b, const std::vector<bool>& free,
                       double tol = 1e-12, std::size_t maxit = 0) {
  Vector x(b.size(), 0.0);
  cg_solve_into(A, b, x, &free, {tol, maxit});
  return x;
}

}  // namespace lpest
