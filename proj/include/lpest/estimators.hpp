// Residual estimator for the elliptic reconstruction error and the
// per-step estimator terms of the backward Euler and Crank-Nicolson schemes.
//
// Every term is evaluated from per-node and per-step caches. Within a step
// the scheme-generated terms are polynomials of degree <= 2 in t assembled
// from a handful of cached norms; only the time data term needs the forcing
// re-sampled at interior times.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lpest/mesh.hpp"
#include "lpest/operators.hpp"
#include "lpest/timestepping.hpp"

namespace lpest {

/// Constants weighting the estimator terms, and the exponential rate alpha.
struct ConstantsConfig {
  double C_clem = 1.0;
  double C_elip = 1.0;
  double C_equiv = 1.0;
  double C_PF = 1.0;
  double lambda = 0.25;
  /// When set, replaces the derived alpha (used to reproduce alpha = 1 studies).
  std::optional<double> alpha_override;

  /// alpha = 2 (1 - lambda) / (C_equiv C_PF)^2 unless overridden.
  [[nodiscard]] double alpha() const {
    if (alpha_override) {
      return *alpha_override;
    }
    const double c = C_equiv * C_PF;
    return 2.0 * (1.0 - lambda) / (c * c);
  }

  void validate() const {
    if (!(C_clem >= 0.0) || !(C_elip >= 0.0)) {
      throw std::invalid_argument("ConstantsConfig: C_clem and C_elip must be non-negative");
    }
    if (!(C_equiv > 0.0) || !(C_PF > 0.0)) {
      throw std::invalid_argument("ConstantsConfig: C_equiv and C_PF must be positive");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
      throw std::invalid_argument("ConstantsConfig: lambda must lie in [0, 1]");
    }
    if (alpha_override && !(*alpha_override >= 0.0)) {
      throw std::invalid_argument("ConstantsConfig: alpha must be non-negative");
    }
  }

  static ConstantsConfig derived() { return {}; }

  /// alpha = 1, as assumed in the synthetic accumulation comparison.
  static ConstantsConfig unit_alpha() {
    ConstantsConfig c;
    c.alpha_override = 1.0;
    return c;
  }
};

/// Pairing of hat functions with nodal data oscillations in the CN space
/// data term. `Crossed` weights level n-1 oscillation by l^n (and vice versa);
/// `Matched` weights each level by its own hat.
enum class DataPairing { Crossed, Matched };

struct EstimatorOptions {
  ConstantsConfig constants{};
  DataPairing cn_data_pairing = DataPairing::Crossed;
  /// Equispaced sample times per step, endpoints included.
  int samples_per_step = 3;
};

/// Volume and jump parts of the elliptic residual estimator, before C_elip.
struct EtaParts {
  double volume = 0.0;  // ||h^2 r||_T
  double jump = 0.0;    // ||h^{3/2} [A grad v]||_Sigma

  [[nodiscard]] double total(double c_elip) const { return c_elip * (volume + jump); }
};

/// Residual parts for v in V_0 with precomputed lap_v = Delta_h v and an
/// optional finite element correction added to the volume residual.
inline EtaParts eta_parts(const DiscreteOperatorSet& ops, const Vector& v, const Vector& lap_v,
                          const Vector* correction = nullptr) {
  const UniformQuadMesh& mesh = ops.mesh();
  const CoefficientField& c = ops.coefficients();
  const double s = mesh.side();
  const double area = s * s;
  static const QuadratureRule rule = QuadratureRule::gauss(3);
  static const auto edge_rule = QuadratureRule::gauss_1d(2);

  double volume_sq = 0.0;
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const auto verts = mesh.element_vertices(e);
    // Bilinear v: v_xx = v_yy = 0, v_xy constant on the element.
    const double v_xy = (v[verts[0]] - v[verts[1]] + v[verts[2]] - v[verts[3]]) / area;
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto phi = q1::values(rule.points[q].x, rule.points[q].y);
      double z = 0.0;
      double vq = 0.0;
      for (std::size_t a = 0; a < 4; ++a) {
        z += phi[a] * lap_v[verts[a]];
        vq += phi[a] * v[verts[a]];
        if (correction != nullptr) {
          z += phi[a] * (*correction)[verts[a]];
        }
      }
      const double lv = 2.0 * c.A[0][1] * v_xy - c.mu * vq;
      const double r = z - lv;
      local += rule.weights[q] * r * r;
    }
    volume_sq += area * local;
  }

  const auto flux = [&](std::size_t e, double xi, double eta) {
    const auto verts = mesh.element_vertices(e);
    const auto g = q1::gradients(xi, eta);
    double vx = 0.0;
    double vy = 0.0;
    for (std::size_t a = 0; a < 4; ++a) {
      vx += g[a][0] * v[verts[a]];
      vy += g[a][1] * v[verts[a]];
    }
    vx /= s;
    vy /= s;
    return std::pair{c.A[0][0] * vx + c.A[0][1] * vy, c.A[1][0] * vx + c.A[1][1] * vy};
  };

  double jump_sq = 0.0;
  const auto& [gp, gw] = edge_rule;
  for (const InteriorEdge& edge : mesh.interior_edges()) {
    double local = 0.0;
    for (std::size_t k = 0; k < gp.size(); ++k) {
      double jmp = 0.0;
      if (edge.orientation == EdgeOrientation::Vertical) {
        // minus on the left (outward normal +x), plus on the right.
        jmp = flux(edge.minus, 1.0, gp[k]).first - flux(edge.plus, 0.0, gp[k]).first;
      } else {
        // minus below (outward normal +y), plus above.
        jmp = flux(edge.minus, gp[k], 1.0).second - flux(edge.plus, gp[k], 0.0).second;
      }
      local += gw[k] * s * jmp * jmp;
    }
    jump_sq += local;
  }

  const double h = mesh.h();
  const double he = mesh.edge_h();
  return {h * h * std::sqrt(volume_sq), std::pow(he, 1.5) * std::sqrt(jump_sq)};
}

/// C_elip (||h^2 (Delta_h v [+ correction] - L v)||_T + ||h^{3/2} [A grad v]||_Sigma)
/// for v in V_0, where L v = div(A grad v) - mu v elementwise.
inline double eta_residual(const DiscreteOperatorSet& ops, const Vector& v,
                           const Vector* correction = nullptr, double c_elip = 1.0) {
  return eta_parts(ops, v, ops.discrete_laplacian(v), correction).total(c_elip);
}

/// Values of every estimator term at one time inside a step. Terms a scheme
/// does not have are zero.
struct EstimatorSample {
  double t = 0.0;
  double S = 0.0;
  double T = 0.0;
  double E = 0.0;
  double R = 0.0;
  double DT = 0.0;
  double DS = 0.0;
};

/// Per-step representatives F^n (maximum over the step's samples).
struct StepEstimate {
  std::size_t n = 0;
  double S = 0.0;
  double T = 0.0;
  double E = 0.0;
  double R = 0.0;
  double DT = 0.0;
  double DS = 0.0;
};

inline StepEstimate reduce_step(const std::vector<EstimatorSample>& samples, std::size_t n = 0) {
  if (samples.size() < 2) {
    throw std::invalid_argument("reduce_step: need at least two samples per step");
  }
  StepEstimate out;
  out.n = n;
  for (const EstimatorSample& s : samples) {
    out.S = std::max(out.S, s.S);
    out.T = std::max(out.T, s.T);
    out.E = std::max(out.E, s.E);
    out.R = std::max(out.R, s.R);
    out.DT = std::max(out.DT, s.DT);
    out.DS = std::max(out.DS, s.DS);
  }
  return out;
}

/// Estimator quantities attached to a single time node.
struct NodeEstimateData {
  /// eta of U^n with the P_0 f^n - P f^n correction.
  double eta_corrected = 0.0;
  /// f^n at the fine quadrature points.
  Vector f_values;
  /// f^n - P f^n at the fine quadrature points.
  Vector oscillation;
  double oscillation_sq = 0.0;
};

/// Shared state for evaluating estimator terms on one discretisation.
class EstimatorContext {
 public:
  EstimatorContext(const DiscreteOperatorSet& ops, SpaceTimeField forcing, EstimatorOptions options = {})
      : ops_(&ops), forcing_(std::move(forcing)), options_(std::move(options)), rule_(QuadratureRule::gauss(5)) {
    options_.constants.validate();
    if (options_.samples_per_step < 2) {
      throw std::invalid_argument("EstimatorContext: samples_per_step must be >= 2");
    }
  }

  [[nodiscard]] const DiscreteOperatorSet& operators() const noexcept { return *ops_; }
  [[nodiscard]] const EstimatorOptions& options() const noexcept { return options_; }
  [[nodiscard]] const QuadratureRule& fine_rule() const noexcept { return rule_; }
  [[nodiscard]] const SpaceTimeField& forcing() const noexcept { return forcing_; }

  [[nodiscard]] Vector forcing_values(double t) const {
    return sample_at_quadrature(ops_->mesh(), at_time(forcing_, t), rule_);
  }

  [[nodiscard]] NodeEstimateData node_data(const NodeState& node) const {
    NodeEstimateData d;
    Vector corr = node.P0f;
    axpy(-1.0, node.Pf, corr);
    d.eta_corrected = eta_parts(*ops_, node.U, node.lapU, &corr).total(options_.constants.C_elip);
    d.f_values = forcing_values(node.t);
    d.oscillation = evaluate_at_quadrature(ops_->mesh(), node.Pf, rule_);
    for (std::size_t k = 0; k < d.oscillation.size(); ++k) {
      d.oscillation[k] = d.f_values[k] - d.oscillation[k];
    }
    d.oscillation_sq = quadrature_norm_squared(ops_->mesh(), d.oscillation, rule_);
    return d;
  }

 private:
  const DiscreteOperatorSet* ops_;
  SpaceTimeField forcing_;
  EstimatorOptions options_;
  QuadratureRule rule_;
};

/// Estimator terms on one step [t^{n-1}, t^n], sampled at arbitrary t.
class StepTerms {
 public:
  StepTerms(const EstimatorContext& ctx, const NodeState& prev, const NodeState& curr, const StepState& step,
            const NodeEstimateData& prev_data, const NodeEstimateData& curr_data)
      : ctx_(&ctx), prev_(&prev), curr_(&curr), prev_data_(&prev_data), curr_data_(&curr_data) {
    const DiscreteOperatorSet& ops = ctx.operators();
    const ConstantsConfig& k = ctx.options().constants;
    scheme_ = step.scheme;
    tau_ = step.tau;
    t_prev_ = prev.t;
    const double h = ops.mesh().h();

    // dbar U and its corrected elliptic residual; shared by both schemes.
    const Vector dU = discrete_time_derivative(curr.U, prev.U, tau_);
    const Vector d_lapU = discrete_time_derivative(curr.lapU, prev.lapU, tau_);
    Vector corr_curr = curr.P0f;
    axpy(-1.0, curr.Pf, corr_curr);
    Vector corr_prev = prev.P0f;
    axpy(-1.0, prev.Pf, corr_prev);
    const Vector d_corr = discrete_time_derivative(corr_curr, corr_prev, tau_);
    eta_dU_ = eta_parts(ops, dU, d_lapU, &d_corr).total(k.C_elip);

    const double osc_cross = quadrature_inner(ops.mesh(), prev_data.oscillation, curr_data.oscillation,
                                              ctx.fine_rule());
    osc_prev_sq_ = prev_data.oscillation_sq;
    osc_curr_sq_ = curr_data.oscillation_sq;
    osc_cross_ = osc_cross;

    if (scheme_ == SchemeKind::BackwardEuler) {
      // tau || dbar(Delta_h U - P f + P_0 f) ||
      Vector g = d_lapU;
      axpy(1.0, d_corr, g);
      time_ = tau_ * ops.l2_norm(g);
      space_data_ = k.C_clem * h * std::sqrt(std::max(0.0, osc_curr_sq_));
    } else {
      const double q = tau_ * tau_ / 8.0;
      eta_w_ = eta_parts(ops, step.w, step.lap_w, nullptr).total(k.C_elip);
      time_ = k.C_clem * q * (ops.triple_norm(step.w) + h * ops.l2_norm(step.lap_w));
      recon_ = q * ops.l2_norm(step.w);
      Vector mid = step.P0f_mid;
      axpy(-0.5, curr.P0f, mid);
      axpy(-0.5, prev.P0f, mid);
      mid_data_ = ops.l2_norm(mid);
    }
  }

  [[nodiscard]] double tau() const noexcept { return tau_; }
  [[nodiscard]] double t_begin() const noexcept { return t_prev_; }
  [[nodiscard]] double t_end() const noexcept { return curr_->t; }

  [[nodiscard]] EstimatorSample sample(double t) const {
    const StepHats l = hats(t_prev_, tau_, t);
    const ConstantsConfig& k = ctx_->options().constants;
    const double h = ctx_->operators().mesh().h();
    EstimatorSample s;
    s.t = t;
    s.T = time_;
    s.R = recon_;
    if (scheme_ == SchemeKind::BackwardEuler) {
      s.S = eta_dU_;
      s.E = l.curr * curr_data_->eta_corrected + l.prev * prev_data_->eta_corrected;
      s.DT = data_time_distance(t, l, /*interpolate=*/false);
      s.DS = space_data_;
    } else {
      // d/dt (l^n l^{n-1}) = (l^{n-1} - l^n) / tau
      s.S = eta_dU_ + 0.5 * tau_ * std::abs(l.prev - l.curr) * eta_w_;
      s.E = l.curr * curr_data_->eta_corrected + l.prev * prev_data_->eta_corrected +
            0.5 * tau_ * tau_ * l.curr * l.prev * eta_w_;
      s.DT = data_time_distance(t, l, /*interpolate=*/true) + mid_data_;
      // || a osc^{n-1} + b osc^n ||
      double a = l.curr;
      double b = l.prev;
      if (ctx_->options().cn_data_pairing == DataPairing::Matched) {
        std::swap(a, b);
      }
      const double sq = a * a * osc_prev_sq_ + 2.0 * a * b * osc_cross_ + b * b * osc_curr_sq_;
      s.DS = k.C_clem * h * std::sqrt(std::max(0.0, sq));
    }
    return s;
  }

  /// Samples at `count` equispaced times covering the step.
  [[nodiscard]] std::vector<EstimatorSample> samples(int count) const {
    std::vector<EstimatorSample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
      out.push_back(sample(sample_time(j, count)));
    }
    return out;
  }

  [[nodiscard]] double sample_time(int j, int count) const {
    if (j == 0) {
      return t_prev_;
    }
    if (j == count - 1) {
      return curr_->t;
    }
    return t_prev_ + tau_ * static_cast<double>(j) / static_cast<double>(count - 1);
  }

  [[nodiscard]] StepEstimate estimate() const {
    return reduce_step(samples(ctx_->options().samples_per_step), curr_->index);
  }

 private:
  /// ||f(t) - f^n|| (BE) or ||f(t) - l^n f^n - l^{n-1} f^{n-1}|| (CN).
  [[nodiscard]] double data_time_distance(double t, const StepHats& l, bool interpolate) const {
    const Vector& fc = curr_data_->f_values;
    const Vector& fp = prev_data_->f_values;
    if (t == curr_->t) {
      return 0.0;
    }
    Vector ft;
    const Vector* f_at_t = nullptr;
    if (t == t_prev_) {
      f_at_t = &fp;
    } else {
      ft = ctx_->forcing_values(t);
      f_at_t = &ft;
    }
    Vector diff(fc.size());
    for (std::size_t k = 0; k < diff.size(); ++k) {
      const double target = interpolate ? l.curr * fc[k] + l.prev * fp[k] : fc[k];
      diff[k] = (*f_at_t)[k] - target;
    }
    return std::sqrt(quadrature_norm_squared(ctx_->operators().mesh(), diff, ctx_->fine_rule()));
  }

  const EstimatorContext* ctx_;
  const NodeState* prev_;
  const NodeState* curr_;
  const NodeEstimateData* prev_data_;
  const NodeEstimateData* curr_data_;
  SchemeKind scheme_ = SchemeKind::BackwardEuler;
  double tau_ = 0.0;
  double t_prev_ = 0.0;
  double eta_dU_ = 0.0;
  double eta_w_ = 0.0;
  double time_ = 0.0;
  double recon_ = 0.0;
  double space_data_ = 0.0;
  double mid_data_ = 0.0;
  double osc_prev_sq_ = 0.0;
  double osc_curr_sq_ = 0.0;
  double osc_cross_ = 0.0;
};

namespace detail {

inline EstimatorSample sample_from_trajectory(const EstimatorContext& ctx, const Trajectory& traj,
                                              std::size_t n, double t) {
  if (n == 0 || n >= traj.nodes.size() || traj.steps.size() < n) {
    throw std::out_of_range("sample terms: step index outside the cached trajectory");
  }
  const NodeState& prev = traj.nodes[n - 1];
  const NodeState& curr = traj.nodes[n];
  if (t < prev.t - 1e-12 * std::max(1.0, std::abs(prev.t)) || t > curr.t + 1e-12 * std::max(1.0, curr.t)) {
    throw std::invalid_argument("sample terms: t outside [t^{n-1}, t^n]");
  }
  const NodeEstimateData pd = ctx.node_data(prev);
  const NodeEstimateData cd = ctx.node_data(curr);
  const StepTerms terms(ctx, prev, curr, traj.steps[n - 1], pd, cd);
  return terms.sample(t);
}

}  // namespace detail

/// Backward Euler terms on step n at time t, from a trajectory with caches.
inline EstimatorSample sample_be_terms(const EstimatorContext& ctx, const Trajectory& traj, std::size_t n,
                                       double t) {
  if (traj.scheme != SchemeKind::BackwardEuler) {
    throw std::invalid_argument("sample_be_terms: trajectory was not computed by backward Euler");
  }
  return detail::sample_from_trajectory(ctx, traj, n, t);
}

/// Crank-Nicolson terms on step n at time t, from a trajectory with caches.
inline EstimatorSample sample_cn_terms(const EstimatorContext& ctx, const Trajectory& traj, std::size_t n,
                                       double t) {
  if (traj.scheme != SchemeKind::CrankNicolson) {
    throw std::invalid_argument("sample_cn_terms: trajectory was not computed by Crank-Nicolson");
  }
  return detail::sample_from_trajectory(ctx, traj, n, t);
}

}  // namespace lpest
