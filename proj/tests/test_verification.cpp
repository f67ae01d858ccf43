#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lpest/verification.hpp"

using namespace lpest;

namespace {

// u_t - div(A grad u) + mu u by central differences of u alone.
double fd_forcing(const SpaceTimeField& u, const CoefficientField& c, double t, double x, double y) {
  const double d = 1e-4;
  const double ut = (u(t + d, x, y) - u(t - d, x, y)) / (2 * d);
  const double uxx = (u(t, x + d, y) - 2 * u(t, x, y) + u(t, x - d, y)) / (d * d);
  const double uyy = (u(t, x, y + d) - 2 * u(t, x, y) + u(t, x, y - d)) / (d * d);
  const double uxy = (u(t, x + d, y + d) - u(t, x + d, y - d) - u(t, x - d, y + d) + u(t, x - d, y - d)) / (4 * d * d);
  return ut - (c.A[0][0] * uxx + 2 * c.A[0][1] * uxy + c.A[1][1] * uyy) + c.mu * u(t, x, y);
}

}  // namespace

TEST(Benchmarks, ForcingMatchesFiniteDifferences) {
  CoefficientField general;
  general.A = {{{1.5, 0.3}, {0.3, 0.8}}};
  general.mu = 0.7;
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  std::uniform_real_distribution<double> time(0.1, 14.9);
  for (const CoefficientField& c : {CoefficientField::identity(), general}) {
    for (const BenchmarkProblem& b : {sinusoidal_benchmark(c), polynomial_benchmark(c)}) {
      for (int k = 0; k < 20; ++k) {
        const double t = time(gen);
        const double x = unit(gen);
        const double y = unit(gen);
        const double exact = b.forcing(t, x, y);
        const double fd = fd_forcing(b.exact.u, c, t, x, y);
        EXPECT_NEAR(exact, fd, 1e-6 * std::max(1.0, std::abs(exact))) << b.name << " t=" << t;
      }
    }
  }
}

TEST(Benchmarks, PolynomialTimeFactor) {
  EXPECT_DOUBLE_EQ(poly_time(15.0), 675675.0);
  for (double t : {0.0, 2.0, 4.0, 10.0}) {
    EXPECT_EQ(poly_time(t), 0.0);
  }
  for (double t : {0.3, 3.7, 11.2}) {
    const double d = 1e-5;
    EXPECT_NEAR(poly_time_derivative(t), (poly_time(t + d) - poly_time(t - d)) / (2 * d),
                1e-6 * std::max(1.0, std::abs(poly_time_derivative(t))));
  }
  const BenchmarkProblem b = polynomial_benchmark();
  EXPECT_NEAR(b.exact.u(15.0, 0.5, 0.5), 675675.0 / 4000.0, 1e-9);
}

TEST(Benchmarks, PrintedForcingVariant) {
  const BenchmarkProblem printed = polynomial_benchmark({}, true);
  const BenchmarkProblem derived = polynomial_benchmark({}, false);
  EXPECT_NEAR(printed.forcing(3.0, 0.2, 0.4), (0.2 * -0.8 + 0.4 * -0.6) / 125.0 * poly_time(3.0), 1e-12);
  EXPECT_GT(std::abs(printed.forcing(3.0, 0.2, 0.4) - derived.forcing(3.0, 0.2, 0.4)), 1e-3);
}

TEST(Benchmarks, InitialDataAndBoundaryValues) {
  for (const std::string name : {"sinusoidal", "polynomial", "zero"}) {
    const BenchmarkProblem b = make_benchmark(name);
    EXPECT_EQ(b.initial(0.3, 0.6), 0.0);
    EXPECT_NEAR(b.exact.u(0.0, 0.3, 0.6), 0.0, 1e-15);
    EXPECT_NEAR(b.exact.u(2.5, 0.0, 0.6), 0.0, 1e-15);
    EXPECT_NEAR(b.exact.u(2.5, 0.4, 1.0), 0.0, 1e-12);
  }
  EXPECT_EQ(make_benchmark("zero").final_time, 1.0);
  EXPECT_EQ(make_benchmark("sinusoidal").final_time, 15.0);
  // The polynomial forcing does not vanish on the boundary.
  EXPECT_NE(polynomial_benchmark().forcing(1.0, 0.0, 0.5), 0.0);
  EXPECT_THROW(make_benchmark("cubic"), std::invalid_argument);
}

TEST(Rates, ConvergenceRate) {
  EXPECT_NEAR(convergence_rate(0.25, 1.0, 0.5, 1.0), 2.0, 1e-15);
  EXPECT_NEAR(convergence_rate(0.5, 1.0, 0.5, 1.0), 1.0, 1e-15);
  EXPECT_THROW(convergence_rate(0.0, 1.0, 0.5, 1.0), std::invalid_argument);
  EXPECT_THROW(convergence_rate(1.0, -1.0, 0.5, 1.0), std::invalid_argument);
  EXPECT_THROW(convergence_rate(1.0, 1.0, 0.5, 0.5), std::invalid_argument);
  EXPECT_NEAR(level_mesh_size(3), std::sqrt(2.0) / 8.0, 1e-16);
}

TEST(Rates, LogLogSlope) {
  std::vector<double> t;
  std::vector<double> v;
  for (int k = 1; k <= 150; ++k) {
    t.push_back(0.1 * k);
    v.push_back(3.0 * std::pow(0.1 * k, 0.5));
  }
  EXPECT_NEAR(loglog_slope(t, v, 5.0, 15.0), 0.5, 1e-12);
  v[60] = std::nan("");
  v[70] = 0.0;
  EXPECT_NEAR(loglog_slope(t, v, 5.0, 15.0), 0.5, 1e-12);
  EXPECT_THROW(loglog_slope(t, v, 20.0, 30.0), std::invalid_argument);
}

TEST(Effectivity, UndefinedForZeroError) {
  EXPECT_TRUE(std::isnan(effectivity(1.0, 0.0)));
  EXPECT_DOUBLE_EQ(effectivity(3.0, 1.5), 2.0);
}

TEST(ErrorTracking, RunningMaxIsMonotone) {
  const BenchmarkProblem b = sinusoidal_benchmark();
  const DiscreteOperatorSet ops(UniformQuadMesh(4), b.coeff);
  ParabolicProblem p = b.problem();
  p.final_time = 2.0;
  const Trajectory traj = run(ops, p, SchemeKind::CrankNicolson, make_time_grid(2.0, 0.1), false);
  const std::vector<double> e = true_error_running_max(ops, traj, b.exact.u, 3);
  ASSERT_EQ(e.size(), traj.states.size());
  for (std::size_t n = 1; n < e.size(); ++n) {
    EXPECT_GE(e[n], e[n - 1]);
  }
  EXPECT_GT(e.back(), 0.0);
  ErrorTracker tracker(ops, b.exact.u);
  EXPECT_NEAR(tracker.error_at(2.0, traj.states.back()),
              element_l2_error(ops.mesh(), traj.states.back(), at_time(b.exact.u, 2.0), QuadratureRule::gauss(5)),
              1e-15);
}

TEST(SimulateLevel, ZeroBenchmarkIsIdenticallyZero) {
  TauRule rule;
  rule.kind = TauRule::Kind::H;
  for (SchemeKind s : {SchemeKind::BackwardEuler, SchemeKind::CrankNicolson}) {
    const RunRecord r = simulate_level(zero_benchmark(), s, 2, rule);
    EXPECT_EQ(r.rows.size(), r.n_steps + 1);
    for (const TimeRow& row : r.rows) {
      EXPECT_EQ(row.error, 0.0);
      for (Strategy st : kStrategies) {
        EXPECT_EQ(row.report.total(st), 0.0);
      }
    }
  }
}

TEST(SimulateLevel, RecordsAreConsistent) {
  BenchmarkProblem b = sinusoidal_benchmark();
  b.final_time = 3.0;
  TauRule rule;
  rule.kind = TauRule::Kind::H;
  const RunRecord r = simulate_level(b, SchemeKind::CrankNicolson, 3, rule);
  EXPECT_EQ(r.cells_per_side, 8);
  EXPECT_DOUBLE_EQ(r.h, std::sqrt(2.0) / 8.0);
  EXPECT_EQ(r.n_steps, make_time_grid(3.0, r.h).n_steps);
  EXPECT_EQ(r.rows.front().t, 0.0);
  EXPECT_EQ(r.final_row().t, 3.0);
  EXPECT_LE(r.max_scheme_residual, 1e-8);
  for (std::size_t k = 1; k < r.rows.size(); ++k) {
    EXPECT_GE(r.rows[k].error, r.rows[k - 1].error);
    EXPECT_GE(r.rows[k].report.total(Strategy::Min), r.rows[k].error);
    EXPECT_LE(r.rows[k].report.total(Strategy::Min), r.rows[k].report.total(Strategy::L2));
  }
  EXPECT_THROW(simulate_level(b, SchemeKind::CrankNicolson, -1, rule), std::invalid_argument);
}

TEST(SimulateLevel, FinalRatesHelper) {
  BenchmarkProblem b = sinusoidal_benchmark();
  b.final_time = 1.0;
  TauRule rule;
  rule.kind = TauRule::Kind::H;
  std::vector<RunRecord> runs;
  for (int level : {2, 3, 4}) {
    runs.push_back(simulate_level(b, SchemeKind::CrankNicolson, level, rule));
  }
  const auto rates = final_rates(runs, [](const TimeRow& r) { return r.error; });
  ASSERT_EQ(rates.size(), 2u);
  EXPECT_GT(rates.back(), 1.5);
}
