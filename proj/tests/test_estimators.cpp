#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lpest/estimators.hpp"

using namespace lpest;
using std::numbers::pi;

namespace {

ParabolicProblem sinusoidal_problem(double T) {
  return {[](double t, double x, double y) {
            return (pi * std::cos(pi * t) + 2 * pi * pi * std::sin(pi * t)) * std::sin(pi * x) * std::sin(pi * y);
          },
          [](double, double) { return 0.0; }, T, {}};
}

// Forcing that does not vanish on the boundary, so P f and P_0 f differ.
ParabolicProblem boundary_forcing_problem(double T) {
  return {[](double t, double x, double y) { return (1.0 + t) * (1.0 + x * y); }, [](double, double) { return 0.0; },
          T, {}};
}

}  // namespace

TEST(Constants, DerivedAndPresetAlpha) {
  EXPECT_DOUBLE_EQ(ConstantsConfig::derived().alpha(), 1.5);
  EXPECT_DOUBLE_EQ(ConstantsConfig::unit_alpha().alpha(), 1.0);
  ConstantsConfig c;
  c.C_PF = 2.0;
  c.lambda = 0.5;
  EXPECT_DOUBLE_EQ(c.alpha(), 2.0 * 0.5 / 4.0);
}

TEST(Constants, Validation) {
  ConstantsConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lambda = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.C_PF = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.C_clem = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.alpha_override = -0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(EllipticEstimator, HandComputedCentreHat) {
  const DiscreteOperatorSet ops(UniformQuadMesh(2), CoefficientField::identity());
  Vector v(9, 0.0);
  v[4] = 1.0;
  const EtaParts parts = eta_parts(ops, v, ops.discrete_laplacian(v));
  EXPECT_NEAR(parts.volume, 4.0, 1e-11);
  EXPECT_NEAR(parts.jump, std::pow(0.5, 1.5) * std::sqrt(32.0 / 3.0), 1e-13);
  EXPECT_NEAR(eta_residual(ops, v, nullptr, 2.0), 2.0 * (parts.volume + parts.jump), 1e-11);
}

TEST(EllipticEstimator, CorrectionCancelsTheVolumeResidual) {
  const DiscreteOperatorSet ops(UniformQuadMesh(2), CoefficientField::identity());
  Vector v(9, 0.0);
  v[4] = 1.0;
  const Vector lap = ops.discrete_laplacian(v);
  Vector corr = lap;
  for (double& c : corr) {
    c = -c;
  }
  EXPECT_NEAR(eta_parts(ops, v, lap, &corr).volume, 0.0, 1e-14);
}

TEST(EllipticEstimator, ZeroAndHomogeneity) {
  const DiscreteOperatorSet ops(UniformQuadMesh(8), CoefficientField::identity());
  const Vector zero(ops.dofs().n_dofs(), 0.0);
  EXPECT_EQ(eta_residual(ops, zero), 0.0);
  Vector v = interpolate_nodal(ops.mesh(), [](double x, double y) { return x * (1 - x) * std::sin(3 * y); });
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!ops.dofs().is_interior(i)) {
      v[i] = 0.0;
    }
  }
  const double base = eta_residual(ops, v);
  Vector w = v;
  for (double& x : w) {
    x *= -3.0;
  }
  EXPECT_NEAR(eta_residual(ops, w), 3.0 * base, 1e-12 * base);
}

TEST(EllipticEstimator, ConvergesAtSecondOrder) {
  // eta(u_h) for a fixed smooth function decays like h^2.
  std::vector<double> eta;
  for (int m : {8, 16, 32}) {
    const DiscreteOperatorSet ops(UniformQuadMesh(m), CoefficientField::identity());
    const Vector v = initial_state(ops, [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); });
    eta.push_back(eta_residual(ops, v));
  }
  EXPECT_NEAR(std::log2(eta[1] / eta[2]), 2.0, 0.2);
}

TEST(EllipticEstimator, MixedCoefficientEntersTheVolumeTerm) {
  CoefficientField c;
  c.A = {{{1.0, 0.4}, {0.4, 1.0}}};
  const DiscreteOperatorSet ops(UniformQuadMesh(4), c);
  Vector v(ops.dofs().n_dofs(), 0.0);
  v[ops.mesh().vertex(2, 2)] = 1.0;
  const Vector lap = ops.discrete_laplacian(v);
  // With the correction -lap only the element term 2 A12 v_xy remains:
  // v_xy = +-1/s^2 on each of the four elements around the vertex.
  Vector corr = lap;
  for (double& x : corr) {
    x = -x;
  }
  const double s = 0.25;
  const double expected = ops.mesh().h() * ops.mesh().h() * std::sqrt(4.0 * s * s * std::pow(2 * 0.4 / (s * s), 2));
  EXPECT_NEAR(eta_parts(ops, v, lap, &corr).volume, expected, 1e-11);
}

TEST(ReduceStep, TakesComponentwiseMaxima) {
  std::vector<EstimatorSample> s(3);
  s[0].S = 1.0;
  s[1].T = 2.0;
  s[2].DS = 3.0;
  s[1].E = 4.0;
  const StepEstimate r = reduce_step(s, 7);
  EXPECT_EQ(r.n, 7u);
  EXPECT_EQ(r.S, 1.0);
  EXPECT_EQ(r.T, 2.0);
  EXPECT_EQ(r.DS, 3.0);
  EXPECT_EQ(r.E, 4.0);
  EXPECT_THROW(reduce_step({s[0]}), std::invalid_argument);
}

TEST(EstimatorContext, RejectsInvalidOptions) {
  const DiscreteOperatorSet ops(UniformQuadMesh(2), CoefficientField::identity());
  EstimatorOptions o;
  o.samples_per_step = 1;
  EXPECT_THROW(EstimatorContext(ops, [](double, double, double) { return 0.0; }, o), std::invalid_argument);
  o = {};
  o.constants.C_equiv = -1.0;
  EXPECT_THROW(EstimatorContext(ops, [](double, double, double) { return 0.0; }, o), std::invalid_argument);
}

TEST(StepTerms, ZeroProblemGivesZeroTerms) {
  const DiscreteOperatorSet ops(UniformQuadMesh(4), CoefficientField::identity());
  const ParabolicProblem p{[](double, double, double) { return 0.0; }, [](double, double) { return 0.0; }, 1.0, {}};
  for (SchemeKind s : {SchemeKind::BackwardEuler, SchemeKind::CrankNicolson}) {
    const Trajectory traj = run(ops, p, s, make_time_grid(1.0, 0.25));
    const EstimatorContext ctx(ops, p.forcing);
    for (std::size_t n = 1; n <= 4; ++n) {
      const EstimatorSample e = s == SchemeKind::BackwardEuler ? sample_be_terms(ctx, traj, n, traj.times[n] - 0.1)
                                                               : sample_cn_terms(ctx, traj, n, traj.times[n] - 0.1);
      EXPECT_EQ(e.S + e.T + e.E + e.R + e.DT + e.DS, 0.0);
    }
  }
}

TEST(StepTerms, BackwardEulerIdentities) {
  const DiscreteOperatorSet ops(UniformQuadMesh(8), CoefficientField::identity());
  const ParabolicProblem p = boundary_forcing_problem(1.0);
  const Trajectory traj = run(ops, p, SchemeKind::BackwardEuler, make_time_grid(1.0, 0.1));
  const EstimatorContext ctx(ops, p.forcing);
  const std::size_t n = 5;
  const NodeState& prev = traj.nodes[n - 1];
  const NodeState& curr = traj.nodes[n];
  const double tau = curr.t - prev.t;

  const EstimatorSample at_end = sample_be_terms(ctx, traj, n, curr.t);
  const EstimatorSample at_begin = sample_be_terms(ctx, traj, n, prev.t);
  const EstimatorSample mid = sample_be_terms(ctx, traj, n, prev.t + 0.5 * tau);
  EXPECT_NEAR(at_end.E, ctx.node_data(curr).eta_corrected, 1e-14);
  EXPECT_NEAR(at_begin.E, ctx.node_data(prev).eta_corrected, 1e-14);
  EXPECT_NEAR(mid.E, 0.5 * (at_end.E + at_begin.E), 1e-14);
  EXPECT_EQ(at_end.DT, 0.0);
  EXPECT_EQ(at_end.R, 0.0);

  // T = tau || dbar(Delta_h U - P f + P_0 f) ||
  Vector g_curr = curr.lapU;
  axpy(-1.0, curr.Pf, g_curr);
  axpy(1.0, curr.P0f, g_curr);
  Vector g_prev = prev.lapU;
  axpy(-1.0, prev.Pf, g_prev);
  axpy(1.0, prev.P0f, g_prev);
  EXPECT_NEAR(mid.T, tau * ops.l2_norm(discrete_time_derivative(g_curr, g_prev, tau)), 1e-10);

  // D_T = || f(t) - f^n || by fine quadrature; f is linear in t here.
  const QuadratureRule rule = QuadratureRule::gauss(5);
  const Vector fvals = sample_at_quadrature(ops.mesh(), [](double x, double y) { return 1.0 + x * y; }, rule);
  EXPECT_NEAR(mid.DT, 0.5 * tau * std::sqrt(quadrature_norm_squared(ops.mesh(), fvals, rule)), 1e-13);
  EXPECT_NEAR(at_begin.DT, tau * std::sqrt(quadrature_norm_squared(ops.mesh(), fvals, rule)), 1e-13);
}

TEST(StepTerms, SpaceDataTermScalesWithClementConstant) {
  const DiscreteOperatorSet ops(UniformQuadMesh(4), CoefficientField::identity());
  const ParabolicProblem p = boundary_forcing_problem(0.5);
  const Trajectory traj = run(ops, p, SchemeKind::BackwardEuler, make_time_grid(0.5, 0.1));
  EstimatorOptions o;
  const EstimatorContext c1(ops, p.forcing, o);
  o.constants.C_clem = 2.0;
  const EstimatorContext c2(ops, p.forcing, o);
  const double a = sample_be_terms(c1, traj, 2, traj.times[2]).DS;
  const double b = sample_be_terms(c2, traj, 2, traj.times[2]).DS;
  EXPECT_GT(a, 0.0);
  EXPECT_NEAR(b, 2.0 * a, 1e-14);
}

TEST(StepTerms, CrankNicolsonIdentities) {
  const DiscreteOperatorSet ops(UniformQuadMesh(8), CoefficientField::identity());
  const ParabolicProblem p = sinusoidal_problem(1.0);
  const Trajectory traj = run(ops, p, SchemeKind::CrankNicolson, make_time_grid(1.0, 0.1));
  const EstimatorContext ctx(ops, p.forcing);
  const std::size_t n = 4;
  const StepState& st = traj.steps[n - 1];
  const double tau = st.tau;
  const double t0 = traj.times[n - 1];
  const EstimatorSample a = sample_cn_terms(ctx, traj, n, t0);
  const EstimatorSample m = sample_cn_terms(ctx, traj, n, t0 + 0.5 * tau);
  const EstimatorSample b = sample_cn_terms(ctx, traj, n, t0 + tau);

  // R is the reconstruction bound tau^2 / 8 ||w||.
  EXPECT_NEAR(m.R, tau * tau / 8.0 * ops.l2_norm(st.w), 1e-14);
  EXPECT_EQ(a.R, b.R);
  // S at the ends carries the full tau/2 eta(w) contribution, the midpoint none.
  const double eta_w = eta_residual(ops, st.w);
  EXPECT_NEAR(a.S - m.S, 0.5 * tau * eta_w, 1e-10 * (1.0 + eta_w));
  EXPECT_NEAR(b.S, a.S, 1e-12 * a.S);
  // E: hat-weighted nodal terms plus tau^2/2 l^n l^{n-1} eta(w) in the interior.
  const double en = ctx.node_data(traj.nodes[n]).eta_corrected;
  const double ep = ctx.node_data(traj.nodes[n - 1]).eta_corrected;
  EXPECT_NEAR(m.E, 0.5 * (en + ep) + 0.5 * tau * tau * 0.25 * eta_w, 1e-10 * (1.0 + m.E));
  EXPECT_NEAR(b.E, en, 1e-12 * (1.0 + en));
  // T = C_clem tau^2/8 (|||w||| + h ||Delta_h w||)
  EXPECT_NEAR(m.T, tau * tau / 8.0 * (ops.triple_norm(st.w) + ops.mesh().h() * ops.l2_norm(st.lap_w)), 1e-12);
}

TEST(StepTerms, PairingsAgreeAtTheMidpoint) {
  const DiscreteOperatorSet ops(UniformQuadMesh(4), CoefficientField::identity());
  const ParabolicProblem p = boundary_forcing_problem(1.0);
  const Trajectory traj = run(ops, p, SchemeKind::CrankNicolson, make_time_grid(1.0, 0.25));
  EstimatorOptions crossed;
  EstimatorOptions matched;
  matched.cn_data_pairing = DataPairing::Matched;
  const EstimatorContext c1(ops, p.forcing, crossed);
  const EstimatorContext c2(ops, p.forcing, matched);
  const double t0 = traj.times[2];
  EXPECT_NEAR(sample_cn_terms(c1, traj, 3, t0 + 0.125).DS, sample_cn_terms(c2, traj, 3, t0 + 0.125).DS, 1e-15);
  // At t^n the crossed pairing weights the previous node's oscillation.
  const double osc_prev = std::sqrt(c1.node_data(traj.nodes[2]).oscillation_sq);
  EXPECT_NEAR(sample_cn_terms(c1, traj, 3, traj.times[3]).DS, ops.mesh().h() * osc_prev, 1e-13);
}

TEST(StepTerms, TrajectoryAccessErrors) {
  const DiscreteOperatorSet ops(UniformQuadMesh(4), CoefficientField::identity());
  const ParabolicProblem p = sinusoidal_problem(1.0);
  const Trajectory be = run(ops, p, SchemeKind::BackwardEuler, make_time_grid(1.0, 0.25));
  const Trajectory nocache = run(ops, p, SchemeKind::BackwardEuler, make_time_grid(1.0, 0.25), false);
  const EstimatorContext ctx(ops, p.forcing);
  EXPECT_THROW(sample_cn_terms(ctx, be, 1, 0.1), std::invalid_argument);
  EXPECT_THROW(sample_be_terms(ctx, be, 0, 0.0), std::out_of_range);
  EXPECT_THROW(sample_be_terms(ctx, be, 5, 1.0), std::out_of_range);
  EXPECT_THROW(sample_be_terms(ctx, be, 1, 0.5), std::invalid_argument);
  EXPECT_THROW(sample_be_terms(ctx, nocache, 1, 0.1), std::out_of_range);
}

TEST(StepTerms, SampleTimesCoverTheStep) {
  const DiscreteOperatorSet ops(UniformQuadMesh(2), CoefficientField::identity());
  const ParabolicProblem p = sinusoidal_problem(1.0);
  Marcher m(ops, p, SchemeKind::BackwardEuler, make_time_grid(1.0, 0.5));
  const EstimatorContext ctx(ops, p.forcing);
  const NodeEstimateData d0 = ctx.node_data(m.current());
  m.advance();
  const NodeEstimateData d1 = ctx.node_data(m.current());
  const StepTerms terms(ctx, m.previous(), m.current(), m.step(), d0, d1);
  EXPECT_EQ(terms.sample_time(0, 5), 0.0);
  EXPECT_EQ(terms.sample_time(4, 5), 0.5);
  EXPECT_DOUBLE_EQ(terms.sample_time(2, 5), 0.25);
  EXPECT_EQ(terms.samples(4).size(), 4u);
}
