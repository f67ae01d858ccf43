// L^p-in-time accumulation of per-step estimator values, the exponential
// accumulation control coefficients c_{p,r}, and the total estimate.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lpest {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Hoelder conjugate q with 1/p + 1/q = 1 (q = inf for p = 1).
inline double conjugate_exponent(double p) {
  if (!(p >= 1.0)) {
    throw std::invalid_argument("conjugate_exponent: p must be >= 1");
  }
  if (p == 1.0) {
    return kInfinity;
  }
  if (std::isinf(p)) {
    return 1.0;
  }
  return p / (p - 1.0);
}

/// c_{p,r} = ||exp(alpha (s - r))||_{L^q(0,r)}.
inline double accumulation_coefficient(double p, double r, double alpha) {
  if (!(r >= 0.0)) {
    throw std::invalid_argument("accumulation_coefficient: r must be non-negative");
  }
  if (!(alpha >= 0.0)) {
    throw std::invalid_argument("accumulation_coefficient: alpha must be non-negative");
  }
  const double q = conjugate_exponent(p);
  if (std::isinf(q)) {
    return 1.0;
  }
  if (alpha == 0.0) {
    return std::pow(r, 1.0 / q);
  }
  const double qa = q * alpha;
  // -expm1(-x) keeps precision for small q alpha r.
  return std::pow(-std::expm1(-qa * r) / qa, 1.0 / q);
}

/// Admissible exponent range of a term, with its weight:
/// FromOne uses c_{p,r} over p in [1, inf]; FromTwo uses (c_{p/2,r})^{1/2}
/// over p in [2, inf].
enum class PDomain { FromOne, FromTwo };

inline double accumulation_weight(double p, PDomain domain, double r, double alpha) {
  if (domain == PDomain::FromOne) {
    return accumulation_coefficient(p, r, alpha);
  }
  if (p < 2.0) {
    throw std::invalid_argument("accumulation_weight: p must be >= 2 on the [2, inf] domain");
  }
  return std::sqrt(accumulation_coefficient(p / 2.0, r, alpha));
}

inline bool in_domain(double p, PDomain domain) { return domain == PDomain::FromOne ? p >= 1.0 : p >= 2.0; }

/// Finite set of accumulation exponents.
struct PSet {
  std::vector<double> values{1.0, 2.0, 4.0, 8.0, 16.0, kInfinity};

  static PSet defaults() { return {}; }

  void validate() const {
    if (values.empty()) {
      throw std::invalid_argument("PSet: at least one exponent required");
    }
    for (double p : values) {
      if (!(p >= 1.0)) {
        throw std::invalid_argument("PSet: exponents must be >= 1");
      }
    }
  }

  /// Sorted, de-duplicated copy.
  [[nodiscard]] PSet normalized() const {
    PSet out = *this;
    std::sort(out.values.begin(), out.values.end());
    out.values.erase(std::unique(out.values.begin(), out.values.end()), out.values.end());
    return out;
  }

  [[nodiscard]] bool contains(double p) const {
    return std::find(values.begin(), values.end(), p) != values.end();
  }
};

inline std::string format_exponent(double p) {
  if (std::isinf(p)) {
    return "inf";
  }
  std::string s = std::to_string(p);
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.') {
    s.pop_back();
  }
  return s;
}

/// One step of the incremental rule:
/// (||F||^p + tau F_n^p)^{1/p} for finite p, max(||F||, F_n) for p = inf.
inline double lp_update(double current, double p, double F_n, double tau) {
  if (!(F_n >= 0.0) || !(tau > 0.0)) {
    throw std::invalid_argument("lp_update: need F_n >= 0 and tau > 0");
  }
  if (std::isinf(p)) {
    return std::max(current, F_n);
  }
  return std::pow(std::pow(current, p) + tau * std::pow(F_n, p), 1.0 / p);
}

/// Running ||F||_{L^p(0,t)} for a piecewise-constant stream and one p.
/// Finite p keeps sum tau (F/scale)^p with scale the running maximum, which
/// avoids overflow of large powers.
class LpAccumulator {
 public:
  explicit LpAccumulator(double p) : p_(p) {
    if (!(p >= 1.0)) {
      throw std::invalid_argument("LpAccumulator: p must be >= 1");
    }
  }

  [[nodiscard]] double p() const noexcept { return p_; }

  void update(double F_n, double tau) {
    if (!(F_n >= 0.0) || !(tau > 0.0)) {
      throw std::invalid_argument("LpAccumulator::update: need F_n >= 0 and tau > 0");
    }
    if (std::isinf(p_)) {
      scale_ = std::max(scale_, F_n);
      return;
    }
    if (F_n > scale_) {
      if (scale_ > 0.0) {
        sum_ *= std::pow(scale_ / F_n, p_);
      }
      scale_ = F_n;
    }
    if (scale_ > 0.0) {
      sum_ += tau * std::pow(F_n / scale_, p_);
    }
  }

  [[nodiscard]] double value() const {
    if (std::isinf(p_)) {
      return scale_;
    }
    if (scale_ == 0.0) {
      return 0.0;
    }
    return scale_ * std::pow(sum_, 1.0 / p_);
  }

 private:
  double p_;
  double scale_ = 0.0;
  double sum_ = 0.0;
};

/// Accumulators for one estimator term over a set of exponents.
class TermAccumulator {
 public:
  TermAccumulator(const PSet& pset, PDomain domain) : domain_(domain) {
    PSet all = pset;
    // The fixed strategies always need p in {1, 2, inf}.
    all.values.insert(all.values.end(), {1.0, 2.0, kInfinity});
    for (double p : all.normalized().values) {
      if (in_domain(p, domain)) {
        acc_.emplace_back(p);
        in_set_.push_back(pset.contains(p));
      }
    }
  }

  [[nodiscard]] PDomain domain() const noexcept { return domain_; }

  void update(double F_n, double tau) {
    for (LpAccumulator& a : acc_) {
      a.update(F_n, tau);
    }
  }

  [[nodiscard]] std::size_t size() const noexcept { return acc_.size(); }
  [[nodiscard]] double p(std::size_t k) const { return acc_[k].p(); }
  [[nodiscard]] double norm(std::size_t k) const { return acc_[k].value(); }
  [[nodiscard]] bool in_pset(std::size_t k) const { return in_set_[k]; }

  [[nodiscard]] double norm_for(double p) const {
    for (const LpAccumulator& a : acc_) {
      if (a.p() == p) {
        return a.value();
      }
    }
    throw std::out_of_range("TermAccumulator: exponent not tracked");
  }

  [[nodiscard]] double weighted(double p, double r, double alpha) const {
    return accumulation_weight(p, domain_, r, alpha) * norm_for(p);
  }

 private:
  PDomain domain_;
  std::vector<LpAccumulator> acc_;
  std::vector<bool> in_set_;
};

struct WeightedMin {
  double value = 0.0;
  double argmin_p = kInfinity;
};

/// min over the configured exponents (restricted to the term's domain) of
/// weight(p, r) ||F||_{L^p(0,r)}; ties go to the larger p.
inline WeightedMin weighted_min_accumulation(const TermAccumulator& term, double r, double alpha) {
  WeightedMin best{kInfinity, kInfinity};
  bool found = false;
  for (std::size_t k = 0; k < term.size(); ++k) {
    if (!term.in_pset(k)) {
      continue;
    }
    const double v = accumulation_weight(term.p(k), term.domain(), r, alpha) * term.norm(k);
    if (!found || v <= best.value) {
      best = {v, term.p(k)};
      found = true;
    }
  }
  if (!found) {
    throw std::invalid_argument("weighted_min_accumulation: no exponent of the set lies in the term's domain");
  }
  return best;
}

enum class Strategy { Min, L1, L2, LInf };

inline constexpr std::array<Strategy, 4> kStrategies{Strategy::Min, Strategy::L1, Strategy::L2, Strategy::LInf};

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Min:
      return "min";
    case Strategy::L1:
      return "l1";
    case Strategy::L2:
      return "l2";
    case Strategy::LInf:
      return "linf";
  }
  return "";
}

/// Weighted accumulation of a term under a strategy. L1 means the least
/// admissible exponent of the term (1, or 2 on the [2, inf] domain).
inline WeightedMin strategy_accumulation(const TermAccumulator& term, Strategy s, double r, double alpha) {
  switch (s) {
    case Strategy::Min:
      return weighted_min_accumulation(term, r, alpha);
    case Strategy::L1: {
      const double p = term.domain() == PDomain::FromOne ? 1.0 : 2.0;
      return {term.weighted(p, r, alpha), p};
    }
    case Strategy::L2:
      return {term.weighted(2.0, r, alpha), 2.0};
    case Strategy::LInf:
      return {term.weighted(kInfinity, r, alpha), kInfinity};
  }
  return {};
}

/// Accumulated terms of the total estimate.
enum class Term { S = 0, T = 1, DT = 2, DS = 3 };
inline constexpr std::array<const char*, 4> kTermNames{"S", "T", "DT", "DS"};

/// Exponent domains of (S, T, DT, DS). The terms paired with the energy norm
/// of the parabolic error use [2, inf].
inline std::array<PDomain, 4> term_domains(bool crank_nicolson) {
  return {PDomain::FromOne, crank_nicolson ? PDomain::FromTwo : PDomain::FromOne, PDomain::FromOne,
          PDomain::FromTwo};
}

struct EstimateReport {
  double t = 0.0;
  double initial_error = 0.0;
  double E_max = 0.0;
  double R_max = 0.0;
  /// [strategy][term] weighted accumulation and exponent used.
  std::array<std::array<WeightedMin, 4>, 4> terms{};
  /// Total estimator per strategy, indexed like kStrategies.
  std::array<double, 4> totals{};
  /// Per term, (p, weighted accumulation) for each configured p in its domain.
  std::array<std::vector<std::pair<double, double>>, 4> by_exponent{};

  [[nodiscard]] double total(Strategy s) const { return totals[static_cast<std::size_t>(s)]; }
  [[nodiscard]] const WeightedMin& term(Strategy s, Term k) const {
    return terms[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)];
  }
};

/// Running state of the whole estimate: four accumulated terms plus the
/// L^inf-in-time terms.
class EstimateAccumulator {
 public:
  EstimateAccumulator(const PSet& pset, bool crank_nicolson, double alpha, double initial_error)
      : alpha_(alpha), initial_error_(initial_error), crank_nicolson_(crank_nicolson) {
    pset.validate();
    const auto domains = term_domains(crank_nicolson);
    for (std::size_t k = 0; k < 4; ++k) {
      terms_.emplace_back(pset, domains[k]);
    }
  }

  /// Includes an L^inf-in-time value (e.g. E at t = 0) without advancing time.
  void observe_max(double E, double R) {
    E_max_ = std::max(E_max_, E);
    R_max_ = std::max(R_max_, R);
  }

  void advance(double tau, double S, double T, double DT, double DS, double E, double R) {
    terms_[0].update(S, tau);
    terms_[1].update(T, tau);
    terms_[2].update(DT, tau);
    terms_[3].update(DS, tau);
    observe_max(E, R);
  }

  [[nodiscard]] const TermAccumulator& term(Term k) const { return terms_[static_cast<std::size_t>(k)]; }
  [[nodiscard]] double alpha() const noexcept { return alpha_; }

  /// Report at time r (normally the current node time).
  [[nodiscard]] EstimateReport report(double r) const {
    EstimateReport rep;
    rep.t = r;
    rep.initial_error = initial_error_;
    rep.E_max = E_max_;
    rep.R_max = crank_nicolson_ ? R_max_ : 0.0;
    for (std::size_t s = 0; s < kStrategies.size(); ++s) {
      double sum = 0.0;
      for (std::size_t k = 0; k < 4; ++k) {
        rep.terms[s][k] = strategy_accumulation(terms_[k], kStrategies[s], r, alpha_);
        sum += rep.terms[s][k].value;
      }
      rep.totals[s] = initial_error_ + rep.E_max + rep.R_max + std::sqrt(2.0) * sum;
    }
    for (std::size_t k = 0; k < 4; ++k) {
      const TermAccumulator& term = terms_[k];
      for (std::size_t j = 0; j < term.size(); ++j) {
        if (term.in_pset(j)) {
          rep.by_exponent[k].emplace_back(term.p(j), term.weighted(term.p(j), r, alpha_));
        }
      }
    }
    return rep;
  }

 private:
  double alpha_;
  double initial_error_;
  bool crank_nicolson_;
  double E_max_ = 0.0;
  double R_max_ = 0.0;
  std::vector<TermAccumulator> terms_;
};

/// Synthetic per-step streams for comparing accumulation types.
enum class StudyKind { Ones, Random, LargeInitial };

inline std::string to_string(StudyKind k) {
  switch (k) {
    case StudyKind::Ones:
      return "ones";
    case StudyKind::Random:
      return "random";
    case StudyKind::LargeInitial:
      return "large_initial";
  }
  return "";
}

struct AccumulationTable {
  std::vector<double> exponents;
  std::vector<double> stream;  // F^n, n = 1..N
  std::vector<double> times;   // t^m, m = 1..N
  /// [m][k]: ||F||_{L^p_k(0,t^m)} and c_{p_k,t^m} ||F||_{L^p_k(0,t^m)}.
  std::vector<std::vector<double>> raw;
  std::vector<std::vector<double>> weighted;
  std::vector<double> argmin_weighted;
};

/// F^n = 1; F^n ~ U[0,10] (seeded); or the same random stream with F^1 = 30.
inline std::vector<double> synthetic_stream(StudyKind kind, std::size_t n_steps, std::uint64_t seed) {
  std::vector<double> f(n_steps, 1.0);
  if (kind == StudyKind::Ones) {
    return f;
  }
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(0.0, 10.0);
  for (double& v : f) {
    v = dist(gen);
  }
  if (kind == StudyKind::LargeInitial && !f.empty()) {
    f[0] = 30.0;
  }
  return f;
}

inline AccumulationTable synthetic_accumulation_study(StudyKind kind, double tau, double final_time, double alpha,
                                                      std::uint64_t seed, const PSet& pset = PSet::defaults()) {
  if (!(tau > 0.0) || !(final_time > 0.0)) {
    throw std::invalid_argument("synthetic_accumulation_study: tau and final time must be positive");
  }
  const auto n_steps = static_cast<std::size_t>(std::llround(std::ceil(final_time / tau * (1.0 - 1e-12))));
  AccumulationTable table;
  table.exponents = pset.normalized().values;
  table.stream = synthetic_stream(kind, n_steps, seed);
  std::vector<LpAccumulator> acc;
  for (double p : table.exponents) {
    acc.emplace_back(p);
  }
  for (std::size_t m = 0; m < n_steps; ++m) {
    const double t = static_cast<double>(m + 1) * tau;
    std::vector<double> raw;
    std::vector<double> weighted;
    double best = kInfinity;
    double best_p = kInfinity;
    for (std::size_t k = 0; k < acc.size(); ++k) {
      acc[k].update(table.stream[m], tau);
      raw.push_back(acc[k].value());
      weighted.push_back(accumulation_coefficient(table.exponents[k], t, alpha) * raw.back());
      if (weighted.back() <= best) {
        best = weighted.back();
        best_p = table.exponents[k];
      }
    }
    table.times.push_back(t);
    table.raw.push_back(std::move(raw));
    table.weighted.push_back(std::move(weighted));
    table.argmin_weighted.push_back(best_p);
  }
  return table;
}

}  // namespace lpest
