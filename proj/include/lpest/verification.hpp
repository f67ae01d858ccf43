// Manufactured-solution benchmarks, the error/estimator driver for one mesh
// level, and the rate and effectivity post-processing.
#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpest/accumulation.hpp"
#include "lpest/estimators.hpp"
#include "lpest/mesh.hpp"
#include "lpest/operators.hpp"
#include "lpest/timestepping.hpp"

namespace lpest {

/// Exact solution u(t, x, y) with the derivatives needed to manufacture f.
struct ExactSolution {
  SpaceTimeField u;
  SpaceTimeField u_t;
  SpaceTimeField u_xx;
  SpaceTimeField u_yy;
  SpaceTimeField u_xy;
};

/// f = u_t - div(A grad u) + mu u for constant A, mu.
inline SpaceTimeField manufactured_forcing(const ExactSolution& sol, const CoefficientField& c) {
  return [sol, c](double t, double x, double y) {
    const double div = c.A[0][0] * sol.u_xx(t, x, y) + (c.A[0][1] + c.A[1][0]) * sol.u_xy(t, x, y) +
                       c.A[1][1] * sol.u_yy(t, x, y);
    return sol.u_t(t, x, y) - div + c.mu * sol.u(t, x, y);
  };
}

struct BenchmarkProblem {
  std::string name;
  ExactSolution exact;
  SpaceTimeField forcing;
  SpatialField initial;
  double final_time = 15.0;
  CoefficientField coeff{};

  [[nodiscard]] ParabolicProblem problem() const { return {forcing, initial, final_time, coeff}; }
};

/// u = sin(pi t) sin(pi x) sin(pi y) on (0, 15].
inline BenchmarkProblem sinusoidal_benchmark(const CoefficientField& coeff = {}) {
  using std::numbers::pi;
  ExactSolution s;
  s.u = [](double t, double x, double y) { return std::sin(pi * t) * std::sin(pi * x) * std::sin(pi * y); };
  s.u_t = [](double t, double x, double y) { return pi * std::cos(pi * t) * std::sin(pi * x) * std::sin(pi * y); };
  s.u_xx = [](double t, double x, double y) {
    return -pi * pi * std::sin(pi * t) * std::sin(pi * x) * std::sin(pi * y);
  };
  s.u_yy = s.u_xx;
  s.u_xy = [](double t, double x, double y) {
    return pi * pi * std::sin(pi * t) * std::cos(pi * x) * std::cos(pi * y);
  };
  BenchmarkProblem b;
  b.name = "sinusoidal";
  b.exact = s;
  b.coeff = coeff;
  b.forcing = manufactured_forcing(s, coeff);
  b.initial = [](double, double) { return 0.0; };
  b.final_time = 15.0;
  return b;
}

/// t(t-2)(t-4)(t-6)(t-8)(t-10)
inline double poly_time(double t) {
  double p = t;
  for (int k = 2; k <= 10; k += 2) {
    p *= (t - k);
  }
  return p;
}

inline double poly_time_derivative(double t) {
  // Product rule over the six linear factors.
  double sum = 0.0;
  for (int skip = 0; skip <= 10; skip += 2) {
    double prod = 1.0;
    for (int k = 0; k <= 10; k += 2) {
      if (k != skip) {
        prod *= (t - k);
      }
    }
    sum += prod;
  }
  return sum;
}

/// u = x(x-1) y(y-1) / 250 * t(t-2)(t-4)(t-6)(t-8)(t-10). The forcing is
/// manufactured from u; `printed_forcing` substitutes
/// f = (x(x-1) + y(y-1)) / 125 * P(t), which does not solve the equation.
inline BenchmarkProblem polynomial_benchmark(const CoefficientField& coeff = {}, bool printed_forcing = false) {
  ExactSolution s;
  s.u = [](double t, double x, double y) { return x * (x - 1.0) * y * (y - 1.0) / 250.0 * poly_time(t); };
  s.u_t = [](double t, double x, double y) {
    return x * (x - 1.0) * y * (y - 1.0) / 250.0 * poly_time_derivative(t);
  };
  s.u_xx = [](double t, double, double y) { return 2.0 * y * (y - 1.0) / 250.0 * poly_time(t); };
  s.u_yy = [](double t, double x, double) { return 2.0 * x * (x - 1.0) / 250.0 * poly_time(t); };
  s.u_xy = [](double t, double x, double y) { return (2.0 * x - 1.0) * (2.0 * y - 1.0) / 250.0 * poly_time(t); };
  BenchmarkProblem b;
  b.name = "polynomial";
  b.exact = s;
  b.coeff = coeff;
  if (printed_forcing) {
    b.forcing = [](double t, double x, double y) {
      return (x * (x - 1.0) + y * (y - 1.0)) / 125.0 * poly_time(t);
    };
  } else {
    b.forcing = manufactured_forcing(s, coeff);
  }
  b.initial = [](double, double) { return 0.0; };
  b.final_time = 15.0;
  return b;
}

/// u = 0, f = 0; smoke problem.
inline BenchmarkProblem zero_benchmark(const CoefficientField& coeff = {}) {
  ExactSolution s;
  const SpaceTimeField zero = [](double, double, double) { return 0.0; };
  s.u = s.u_t = s.u_xx = s.u_yy = s.u_xy = zero;
  BenchmarkProblem b;
  b.name = "zero";
  b.exact = s;
  b.coeff = coeff;
  b.forcing = zero;
  b.initial = [](double, double) { return 0.0; };
  b.final_time = 1.0;
  return b;
}

inline BenchmarkProblem make_benchmark(const std::string& name, const CoefficientField& coeff = {},
                                       bool printed_forcing = false) {
  if (name == "sinusoidal") {
    return sinusoidal_benchmark(coeff);
  }
  if (name == "polynomial") {
    return polynomial_benchmark(coeff, printed_forcing);
  }
  if (name == "zero") {
    return zero_benchmark(coeff);
  }
  throw std::invalid_argument("unknown benchmark '" + name + "'");
}

/// Running maximum of ||u(t) - U(t)|| over sampled times, with U(t) the
/// piecewise-linear interpolant of the nodal states.
class ErrorTracker {
 public:
  ErrorTracker(const DiscreteOperatorSet& ops, SpaceTimeField u_exact)
      : ops_(&ops), u_(std::move(u_exact)), rule_(QuadratureRule::gauss(5)) {}

  double observe(double t, const Vector& U_t) {
    const double e = error_at(t, U_t);
    running_max_ = std::max(running_max_, e);
    return e;
  }

  [[nodiscard]] double error_at(double t, const Vector& U_t) const {
    return element_l2_error(ops_->mesh(), U_t, at_time(u_, t), rule_);
  }

  [[nodiscard]] double running_max() const noexcept { return running_max_; }

 private:
  const DiscreteOperatorSet* ops_;
  SpaceTimeField u_;
  QuadratureRule rule_;
  double running_max_ = 0.0;
};

/// ||u - U||_{L^inf(0, t^n; L2)} sampled at `samples_per_step` equispaced
/// times per step, returned at every node.
inline std::vector<double> true_error_running_max(const DiscreteOperatorSet& ops, const Trajectory& traj,
                                                  const SpaceTimeField& u_exact, int samples_per_step = 3) {
  ErrorTracker tracker(ops, u_exact);
  std::vector<double> out;
  tracker.observe(traj.times.front(), traj.states.front());
  out.push_back(tracker.running_max());
  for (std::size_t n = 1; n < traj.states.size(); ++n) {
    const double t0 = traj.times[n - 1];
    const double tau = traj.times[n] - t0;
    for (int j = 1; j < samples_per_step; ++j) {
      const double t = j == samples_per_step - 1 ? traj.times[n]
                                                 : t0 + tau * static_cast<double>(j) / (samples_per_step - 1);
      const StepHats l = hats(t0, tau, t);
      tracker.observe(t, lincomb(l.curr, traj.states[n], l.prev, traj.states[n - 1]));
    }
    out.push_back(tracker.running_max());
  }
  return out;
}

/// (log F_i - log F_{i-1}) / (log h_i - log h_{i-1})
inline double convergence_rate(double F_i, double F_prev, double h_i, double h_prev) {
  if (!(F_i > 0.0) || !(F_prev > 0.0) || !(h_i > 0.0) || !(h_prev > 0.0)) {
    throw std::invalid_argument("convergence_rate: all inputs must be positive");
  }
  if (h_i == h_prev) {
    throw std::invalid_argument("convergence_rate: mesh sizes must differ");
  }
  return (std::log(F_i) - std::log(F_prev)) / (std::log(h_i) - std::log(h_prev));
}

/// Least-squares slope of log(value) against log(t) over t in [t_a, t_b];
/// non-positive or non-finite values are skipped.
inline double loglog_slope(const std::vector<double>& t, const std::vector<double>& value, double t_a, double t_b) {
  double sx = 0.0;
  double sy = 0.0;
  double sxx = 0.0;
  double sxy = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t_a || t[k] > t_b || !(t[k] > 0.0) || !(value[k] > 0.0) || !std::isfinite(value[k])) {
      continue;
    }
    const double x = std::log(t[k]);
    const double y = std::log(value[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) {
    throw std::invalid_argument("loglog_slope: fewer than two usable points in the window");
  }
  const double dn = static_cast<double>(n);
  const double denom = dn * sxx - sx * sx;
  if (denom == 0.0) {
    throw std::invalid_argument("loglog_slope: degenerate time window");
  }
  return (dn * sxy - sx * sy) / denom;
}

/// Estimator and error at one time node.
struct TimeRow {
  double t = 0.0;
  double error = 0.0;
  EstimateReport report;
};

/// Everything recorded for one mesh level.
struct RunRecord {
  std::string benchmark;
  SchemeKind scheme = SchemeKind::BackwardEuler;
  std::string tau_rule;
  int level = 0;
  int cells_per_side = 0;
  double h = 0.0;
  double tau = 0.0;
  std::size_t n_steps = 0;
  double initial_error = 0.0;
  double max_scheme_residual = 0.0;
  double wall_seconds = 0.0;
  std::vector<TimeRow> rows;

  [[nodiscard]] const TimeRow& final_row() const { return rows.back(); }

  [[nodiscard]] std::vector<double> times() const {
    std::vector<double> out;
    for (const TimeRow& r : rows) {
      out.push_back(r.t);
    }
    return out;
  }
};

inline double effectivity(double estimate, double error) {
  return error > 0.0 ? estimate / error : std::numeric_limits<double>::quiet_NaN();
}

/// estimator / error per row (NaN while the error is exactly zero).
inline std::vector<double> effectivity_series(const RunRecord& run, Strategy s) {
  std::vector<double> out;
  for (const TimeRow& r : run.rows) {
    out.push_back(effectivity(r.report.total(s), r.error));
  }
  return out;
}

/// Late-window log-log slope of an effectivity series.
inline double effectivity_slope(const RunRecord& run, Strategy s, double t_a, double t_b) {
  return loglog_slope(run.times(), effectivity_series(run, s), t_a, t_b);
}

struct LevelOptions {
  PSet pset = PSet::defaults();
  EstimatorOptions estimator{};
};

/// h_i = sqrt(2) / 2^i for the mesh with 2^i cells per side.
inline double level_mesh_size(int level) { return std::sqrt(2.0) / std::ldexp(1.0, level); }

/// Solves one benchmark on the 2^level x 2^level mesh, evaluating the
/// estimator, its accumulations and the true error at every node.
inline RunRecord simulate_level(const BenchmarkProblem& bench, SchemeKind scheme, int level, const TauRule& tau_rule,
                                const LevelOptions& options = {}) {
  if (level < 0 || level > 12) {
    throw std::invalid_argument("simulate_level: level out of range");
  }
  const auto start = std::chrono::steady_clock::now();
  const int m = 1 << level;
  const DiscreteOperatorSet ops(UniformQuadMesh(m), bench.coeff);
  const ParabolicProblem problem = bench.problem();
  const TimeGrid grid = make_time_grid(bench.final_time, tau_rule.target(ops.mesh().h()));

  RunRecord rec;
  rec.benchmark = bench.name;
  rec.scheme = scheme;
  rec.tau_rule = tau_rule.name();
  rec.level = level;
  rec.cells_per_side = m;
  rec.h = ops.mesh().h();
  rec.tau = grid.tau;
  rec.n_steps = grid.n_steps;

  Marcher marcher(ops, problem, scheme, grid);
  const EstimatorContext ctx(ops, problem.forcing, options.estimator);
  ErrorTracker errors(ops, bench.exact.u);
  const bool cn = scheme == SchemeKind::CrankNicolson;
  const int k = options.estimator.samples_per_step;

  rec.initial_error = errors.observe(0.0, marcher.current().U);
  EstimateAccumulator acc(options.pset, cn, options.estimator.constants.alpha(), rec.initial_error);
  NodeEstimateData prev_data = ctx.node_data(marcher.current());
  acc.observe_max(prev_data.eta_corrected, 0.0);
  rec.rows.push_back({marcher.current().t, errors.running_max(), acc.report(marcher.current().t)});

  try {
    while (!marcher.done()) {
      marcher.advance();
      const NodeState& prev = marcher.previous();
      const NodeState& curr = marcher.current();
      const StepState& step = marcher.step();
      rec.max_scheme_residual = std::max(rec.max_scheme_residual, step.residual);

      NodeEstimateData curr_data = ctx.node_data(curr);
      const StepTerms terms(ctx, prev, curr, step, prev_data, curr_data);
      const StepEstimate est = terms.estimate();
      acc.advance(step.tau, est.S, est.T, est.DT, est.DS, est.E, est.R);

      for (int j = 1; j < k; ++j) {
        const double t = terms.sample_time(j, k);
        if (j == k - 1) {
          errors.observe(t, curr.U);
        } else {
          const StepHats l = hats(prev.t, step.tau, t);
          errors.observe(t, lincomb(l.curr, curr.U, l.prev, prev.U));
        }
      }
      rec.rows.push_back({curr.t, errors.running_max(), acc.report(curr.t)});
      prev_data = std::move(curr_data);
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(bench.name + " level " + std::to_string(level) + ": " + e.what());
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

/// Final-time convergence rate between consecutive records of a quantity.
template <typename Quantity>
std::vector<double> final_rates(const std::vector<RunRecord>& runs, Quantity quantity) {
  std::vector<double> out;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    out.push_back(convergence_rate(quantity(runs[i].final_row()), quantity(runs[i - 1].final_row()), runs[i].h,
                                   runs[i - 1].h));
  }
  return out;
}

}  // namespace lpest
