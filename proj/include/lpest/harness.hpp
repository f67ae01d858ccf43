// Experiment configuration, orchestration over mesh levels, and the CSV and
// JSON reports consumed by the plotting scripts and the acceptance suite.
#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "lpest/accumulation.hpp"
#include "lpest/estimators.hpp"
#include "lpest/timestepping.hpp"
#include "lpest/verification.hpp"

namespace lpest {

using Json = nlohmann::json;

enum class StudyType { Pde, Accumulation };

/// Shortest decimal string that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

inline TauRule parse_tau_rule(const std::string& s) {
  TauRule r;
  if (s == "hsq") {
    r.kind = TauRule::Kind::HSquared;
  } else if (s == "h") {
    r.kind = TauRule::Kind::H;
  } else if (s == "hroot") {
    r.kind = TauRule::Kind::RootH;
  } else if (s.rfind("fixed=", 0) == 0 || s.rfind("fixed:", 0) == 0) {
    const std::string num = s.substr(6);
    double v = 0.0;
    const auto res = std::from_chars(num.data(), num.data() + num.size(), v);
    if (res.ec != std::errc{} || res.ptr != num.data() + num.size() || !(v > 0.0)) {
      throw std::invalid_argument("invalid fixed time step '" + num + "'");
    }
    r.kind = TauRule::Kind::Fixed;
    r.value = v;
  } else {
    throw std::invalid_argument("unknown tau rule '" + s + "' (expected hsq, h, hroot or fixed=<v>)");
  }
  return r;
}

inline SchemeKind parse_scheme(const std::string& s) {
  if (s == "be") {
    return SchemeKind::BackwardEuler;
  }
  if (s == "cn") {
    return SchemeKind::CrankNicolson;
  }
  throw std::invalid_argument("unknown scheme '" + s + "' (expected be or cn)");
}

/// "lo..hi" or a single level.
inline std::pair<int, int> parse_levels(const std::string& s) {
  const auto parse_int = [&](std::string_view part) {
    int v = 0;
    const auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    if (res.ec != std::errc{} || res.ptr != part.data() + part.size()) {
      throw std::invalid_argument("invalid level range '" + s + "'");
    }
    return v;
  };
  const std::string_view view(s);
  const auto dots = view.find("..");
  if (dots == std::string_view::npos) {
    const int v = parse_int(view);
    return {v, v};
  }
  return {parse_int(view.substr(0, dots)), parse_int(view.substr(dots + 2))};
}

/// Comma-separated exponents; "inf" denotes infinity.
inline PSet parse_pset(const std::string& s) {
  PSet out;
  out.values.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) {
      throw std::invalid_argument("empty entry in exponent list '" + s + "'");
    }
    item = item.substr(b, e - b + 1);
    if (item == "inf" || item == "infinity") {
      out.values.push_back(kInfinity);
      continue;
    }
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc{} || res.ptr != item.data() + item.size()) {
      throw std::invalid_argument("invalid exponent '" + item + "'");
    }
    out.values.push_back(v);
  }
  out.validate();
  return out.normalized();
}

inline StudyKind parse_study_kind(const std::string& s) {
  if (s == "ones") {
    return StudyKind::Ones;
  }
  if (s == "random") {
    return StudyKind::Random;
  }
  if (s == "large_initial") {
    return StudyKind::LargeInitial;
  }
  throw std::invalid_argument("unknown accumulation stream '" + s + "'");
}

struct ExperimentConfig {
  StudyType study = StudyType::Pde;
  std::string benchmark = "sinusoidal";
  SchemeKind scheme = SchemeKind::BackwardEuler;
  TauRule tau{};
  int level_lo = 2;
  int level_hi = 5;
  PSet pset = PSet::defaults();
  ConstantsConfig constants{};
  CoefficientField coeff{};
  /// "derived" or "paper51"; empty picks the study's default.
  std::string alpha_preset;
  std::uint64_t seed = 0;
  int samples_per_step = 3;
  bool printed_forcing = false;
  DataPairing ds_pairing = DataPairing::Crossed;
  /// Synthetic accumulation study.
  double study_tau = 0.1;
  double study_final_time = 10.0;
  std::filesystem::path out_dir = "out";

  [[nodiscard]] std::string resolved_alpha_preset() const {
    if (!alpha_preset.empty()) {
      return alpha_preset;
    }
    return study == StudyType::Accumulation ? "paper51" : "derived";
  }

  [[nodiscard]] ConstantsConfig resolved_constants() const {
    ConstantsConfig c = constants;
    const std::string preset = resolved_alpha_preset();
    if (preset == "paper51") {
      c.alpha_override = 1.0;
    } else if (preset != "derived") {
      throw std::invalid_argument("unknown alpha preset '" + preset + "' (expected paper51 or derived)");
    }
    return c;
  }

  [[nodiscard]] EstimatorOptions estimator_options() const {
    EstimatorOptions o;
    o.constants = resolved_constants();
    o.cn_data_pairing = ds_pairing;
    o.samples_per_step = samples_per_step;
    return o;
  }

  void validate() const {
    if (study == StudyType::Pde) {
      if (benchmark != "sinusoidal" && benchmark != "polynomial" && benchmark != "zero") {
        throw std::invalid_argument("unknown benchmark '" + benchmark + "'");
      }
      if (level_lo < 1 || level_hi < level_lo || level_hi > 10) {
        throw std::invalid_argument("levels must satisfy 1 <= lo <= hi <= 10");
      }
      if (tau.kind == TauRule::Kind::RootH && scheme == SchemeKind::BackwardEuler) {
        throw std::invalid_argument("tau = sqrt(h) is only meaningful for Crank-Nicolson");
      }
      if (tau.kind == TauRule::Kind::Fixed && !(tau.value > 0.0)) {
        throw std::invalid_argument("fixed time step must be positive");
      }
      coeff.validate();
    } else if (!(study_tau > 0.0) || !(study_final_time > 0.0)) {
      throw std::invalid_argument("accumulation study needs positive tau and final time");
    }
    if (samples_per_step < 3) {
      throw std::invalid_argument("samples per step must be at least 3");
    }
    pset.validate();
    resolved_constants().validate();
  }

  /// Fully resolved configuration; the output directory is excluded so that
  /// the hash identifies the computation only.
  [[nodiscard]] Json to_json() const {
    Json j;
    j["study"] = study == StudyType::Pde ? "pde" : "accumulation";
    j["benchmark"] = benchmark;
    j["scheme"] = to_string(scheme);
    j["tau"] = tau.name();
    j["levels"] = {level_lo, level_hi};
    Json ps = Json::array();
    for (double p : pset.normalized().values) {
      ps.push_back(format_exponent(p));
    }
    j["pset"] = ps;
    const ConstantsConfig c = resolved_constants();
    j["constants"] = {{"C_clem", c.C_clem}, {"C_elip", c.C_elip}, {"C_equiv", c.C_equiv},
                      {"C_PF", c.C_PF},     {"lambda", c.lambda}, {"alpha", c.alpha()}};
    j["alpha_preset"] = resolved_alpha_preset();
    j["coefficients"] = {{"A", {{coeff.A[0][0], coeff.A[0][1]}, {coeff.A[1][0], coeff.A[1][1]}}}, {"mu", coeff.mu}};
    j["seed"] = seed;
    j["samples_per_step"] = samples_per_step;
    j["printed_forcing"] = printed_forcing;
    j["ds_pairing"] = ds_pairing == DataPairing::Crossed ? "crossed" : "matched";
    j["study_tau"] = study_tau;
    j["study_final_time"] = study_final_time;
    return j;
  }

  /// FNV-1a (64 bit) over the canonical JSON dump, as 16 hex digits.
  [[nodiscard]] std::string hash() const {
    const std::string text = to_json().dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
  }
};

/// Applies a constants JSON object (inline text or a file path) to a config.
/// Recognised keys: C_clem, C_elip, C_equiv, C_PF, lambda, alpha, A, mu.
inline void apply_constants_json(ExperimentConfig& cfg, const std::string& text_or_path) {
  Json j;
  try {
    if (!text_or_path.empty() && text_or_path.front() == '{') {
      j = Json::parse(text_or_path);
    } else {
      std::ifstream in(text_or_path);
      if (!in) {
        throw std::invalid_argument("cannot open constants file '" + text_or_path + "'");
      }
      j = Json::parse(in);
    }
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(std::string("constants JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw std::invalid_argument("constants JSON must be an object");
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "C_clem") {
      cfg.constants.C_clem = value.get<double>();
    } else if (key == "C_elip") {
      cfg.constants.C_elip = value.get<double>();
    } else if (key == "C_equiv") {
      cfg.constants.C_equiv = value.get<double>();
    } else if (key == "C_PF") {
      cfg.constants.C_PF = value.get<double>();
    } else if (key == "lambda") {
      cfg.constants.lambda = value.get<double>();
    } else if (key == "alpha") {
      cfg.constants.alpha_override = value.get<double>();
    } else if (key == "A") {
      const auto a = value.get<std::vector<std::vector<double>>>();
      if (a.size() != 2 || a[0].size() != 2 || a[1].size() != 2) {
        throw std::invalid_argument("constants JSON: A must be a 2x2 array");
      }
      cfg.coeff.A = {{{a[0][0], a[0][1]}, {a[1][0], a[1][1]}}};
    } else if (key == "mu") {
      cfg.coeff.mu = value.get<double>();
    } else {
      throw std::invalid_argument("constants JSON: unknown key '" + key + "'");
    }
  }
}

/// Minimal CSV writer: every row ends with the configuration hash.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header, std::string hash)
      : out_(path, std::ios::binary), hash_(std::move(hash)) {
    if (!out_) {
      throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    header.emplace_back("config_hash");
    write_cells(header);
  }

  void row(const std::vector<std::string>& cells) {
    std::vector<std::string> all = cells;
    all.push_back(hash_);
    write_cells(all);
  }

 private:
  void write_cells(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      out_ << (k ? "," : "") << cells[k];
    }
    out_ << '\n';
  }

  std::ofstream out_;
  std::string hash_;
};

inline const std::vector<std::string>& timeseries_columns() {
  static const std::vector<std::string> cols{
      "level",  "t",      "error_linf_l2", "est_min",    "est_l1",     "est_l2",      "est_linf",
      "eff_min", "eff_l1", "eff_l2",        "eff_linf",   "S_acc",      "T_acc",       "E_max",
      "R_max",  "DT_acc", "DS_acc",        "argmin_p_S", "argmin_p_T", "argmin_p_DT", "argmin_p_DS"};
  return cols;
}

inline void write_timeseries_csv(const RunRecord& run, const std::filesystem::path& path, const std::string& hash) {
  CsvWriter csv(path, timeseries_columns(), hash);
  const std::string level = std::to_string(run.level);
  for (const TimeRow& row : run.rows) {
    const EstimateReport& r = row.report;
    std::vector<std::string> c{level, format_double(row.t), format_double(row.error)};
    for (Strategy s : kStrategies) {
      c.push_back(format_double(r.total(s)));
    }
    for (Strategy s : kStrategies) {
      c.push_back(format_double(effectivity(r.total(s), row.error)));
    }
    c.push_back(format_double(r.term(Strategy::Min, Term::S).value));
    c.push_back(format_double(r.term(Strategy::Min, Term::T).value));
    c.push_back(format_double(r.E_max));
    c.push_back(format_double(r.R_max));
    c.push_back(format_double(r.term(Strategy::Min, Term::DT).value));
    c.push_back(format_double(r.term(Strategy::Min, Term::DS).value));
    for (Term k : {Term::S, Term::T, Term::DT, Term::DS}) {
      c.push_back(format_exponent(r.term(Strategy::Min, k).argmin_p));
    }
    csv.row(c);
  }
}

/// Weighted accumulation of every term for every configured exponent.
inline void write_components_csv(const RunRecord& run, const std::filesystem::path& path, const std::string& hash) {
  if (run.rows.empty()) {
    return;
  }
  std::vector<std::string> header{"level", "t", "error_linf_l2", "initial_error", "E_max", "R_max"};
  const EstimateReport& first = run.rows.front().report;
  for (std::size_t k = 0; k < 4; ++k) {
    for (const auto& [p, v] : first.by_exponent[k]) {
      header.push_back(std::string(kTermNames[k]) + "_p" + format_exponent(p));
    }
  }
  CsvWriter csv(path, header, hash);
  for (const TimeRow& row : run.rows) {
    const EstimateReport& r = row.report;
    std::vector<std::string> c{std::to_string(run.level), format_double(row.t), format_double(row.error),
                               format_double(r.initial_error), format_double(r.E_max), format_double(r.R_max)};
    for (std::size_t k = 0; k < 4; ++k) {
      for (const auto& [p, v] : r.by_exponent[k]) {
        c.push_back(format_double(v));
      }
    }
    csv.row(c);
  }
}

/// Per strategy: total, effectivity, and each term with its exponent.
inline void write_comparison_csv(const RunRecord& run, const std::filesystem::path& path, const std::string& hash) {
  std::vector<std::string> header{"level", "t", "error_linf_l2"};
  for (Strategy s : kStrategies) {
    const std::string n = to_string(s);
    header.push_back("est_" + n);
    header.push_back("eff_" + n);
    for (const char* term : kTermNames) {
      header.push_back(n + "_" + term);
      header.push_back(n + "_p_" + term);
    }
  }
  CsvWriter csv(path, header, hash);
  for (const TimeRow& row : run.rows) {
    std::vector<std::string> c{std::to_string(run.level), format_double(row.t), format_double(row.error)};
    for (Strategy s : kStrategies) {
      c.push_back(format_double(row.report.total(s)));
      c.push_back(format_double(effectivity(row.report.total(s), row.error)));
      for (Term k : {Term::S, Term::T, Term::DT, Term::DS}) {
        const WeightedMin& w = row.report.term(s, k);
        c.push_back(format_double(w.value));
        c.push_back(format_exponent(w.argmin_p));
      }
    }
    csv.row(c);
  }
}

inline Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json safe_rate(double F_i, double F_prev, double h_i, double h_prev) {
  if (!(F_i > 0.0) || !(F_prev > 0.0)) {
    return nullptr;
  }
  return convergence_rate(F_i, F_prev, h_i, h_prev);
}

/// Rates per level pair, late-window effectivity slopes and final values.
inline Json summarize(const ExperimentConfig& cfg, const std::vector<RunRecord>& runs, double wall_seconds) {
  Json s;
  s["config"] = cfg.to_json();
  s["config_hash"] = cfg.hash();
  Json levels = Json::array();
  for (const RunRecord& r : runs) {
    Json l;
    l["level"] = r.level;
    l["cells_per_side"] = r.cells_per_side;
    l["h"] = r.h;
    l["tau"] = r.tau;
    l["n_steps"] = r.n_steps;
    l["initial_error"] = r.initial_error;
    l["max_scheme_residual"] = r.max_scheme_residual;
    l["wall_seconds"] = r.wall_seconds;
    const TimeRow& fin = r.final_row();
    l["final_error"] = fin.error;
    for (Strategy st : kStrategies) {
      l["final_est_" + to_string(st)] = fin.report.total(st);
    }
    levels.push_back(l);
  }
  s["levels"] = levels;

  Json rates = Json::array();
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const RunRecord& a = runs[i - 1];
    const RunRecord& b = runs[i];
    Json r;
    r["levels"] = {a.level, b.level};
    r["error"] = safe_rate(b.final_row().error, a.final_row().error, b.h, a.h);
    for (Strategy st : kStrategies) {
      r["est_" + to_string(st)] =
          safe_rate(b.final_row().report.total(st), a.final_row().report.total(st), b.h, a.h);
    }
    for (Term k : {Term::S, Term::T, Term::DT, Term::DS}) {
      r[std::string(kTermNames[static_cast<std::size_t>(k)]) + "_acc"] =
          safe_rate(b.final_row().report.term(Strategy::Min, k).value,
                    a.final_row().report.term(Strategy::Min, k).value, b.h, a.h);
    }
    r["E_max"] = safe_rate(b.final_row().report.E_max, a.final_row().report.E_max, b.h, a.h);
    r["R_max"] = safe_rate(b.final_row().report.R_max, a.final_row().report.R_max, b.h, a.h);
    rates.push_back(r);
  }
  s["rates"] = rates;
  s["rate_final"] = rates.empty() ? Json(nullptr) : rates.back()["error"];
  s["rate_final_est_min"] = rates.empty() ? Json(nullptr) : rates.back()["est_min"];

  Json slopes = Json::object();
  Json finals = Json::object();
  for (const RunRecord& r : runs) {
    const double T = r.final_row().t;
    Json sl;
    Json fe;
    for (Strategy st : kStrategies) {
      try {
        sl[to_string(st)] = effectivity_slope(r, st, T / 3.0, T);
      } catch (const std::invalid_argument&) {
        sl[to_string(st)] = nullptr;
      }
      fe[to_string(st)] = json_number(effectivity(r.final_row().report.total(st), r.final_row().error));
    }
    slopes[std::to_string(r.level)] = sl;
    finals[std::to_string(r.level)] = fe;
  }
  s["effectivity_slope_window"] = runs.empty() ? Json(nullptr) : Json({runs.back().final_row().t / 3.0,
                                                                       runs.back().final_row().t});
  s["effectivity_slopes"] = slopes;
  s["final_effectivities"] = finals;
  s["wall_seconds"] = wall_seconds;
  return s;
}

struct ExperimentResult {
  std::vector<RunRecord> runs;
  Json summary;
  std::vector<std::filesystem::path> files;
};

inline ExperimentResult run_accumulation_study(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  std::filesystem::create_directories(cfg.out_dir);
  const std::string hash = cfg.hash();
  const double alpha = cfg.resolved_constants().alpha();
  ExperimentResult result;
  for (StudyKind kind : {StudyKind::Ones, StudyKind::Random, StudyKind::LargeInitial}) {
    const AccumulationTable table =
        synthetic_accumulation_study(kind, cfg.study_tau, cfg.study_final_time, alpha, cfg.seed, cfg.pset);
    std::vector<std::string> header{"t", "F"};
    for (double p : table.exponents) {
      header.push_back("raw_p" + format_exponent(p));
    }
    for (double p : table.exponents) {
      header.push_back("weighted_p" + format_exponent(p));
    }
    header.emplace_back("argmin_p");
    const auto path = cfg.out_dir / ("accumulation_" + to_string(kind) + ".csv");
    CsvWriter csv(path, header, hash);
    for (std::size_t m = 0; m < table.times.size(); ++m) {
      std::vector<std::string> c{format_double(table.times[m]), format_double(table.stream[m])};
      for (double v : table.raw[m]) {
        c.push_back(format_double(v));
      }
      for (double v : table.weighted[m]) {
        c.push_back(format_double(v));
      }
      c.push_back(format_exponent(table.argmin_weighted[m]));
      csv.row(c);
    }
    result.files.push_back(path);
  }
  result.summary["config"] = cfg.to_json();
  result.summary["config_hash"] = hash;
  result.summary["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto summary_path = cfg.out_dir / "summary.json";
  std::ofstream(summary_path) << result.summary.dump(2) << '\n';
  result.files.push_back(summary_path);
  return result;
}

/// Runs every level of a PDE study and writes its reports.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.study == StudyType::Accumulation) {
    return run_accumulation_study(cfg);
  }
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  std::filesystem::create_directories(cfg.out_dir);
  const std::string hash = cfg.hash();
  const BenchmarkProblem bench = make_benchmark(cfg.benchmark, cfg.coeff, cfg.printed_forcing);
  LevelOptions opts;
  opts.pset = cfg.pset;
  opts.estimator = cfg.estimator_options();

  ExperimentResult result;
  for (int level = cfg.level_lo; level <= cfg.level_hi; ++level) {
    RunRecord run = simulate_level(bench, cfg.scheme, level, cfg.tau, opts);
    const std::string suffix = "_L" + std::to_string(level) + ".csv";
    const auto ts = cfg.out_dir / ("timeseries" + suffix);
    const auto comp = cfg.out_dir / ("components" + suffix);
    const auto cmp = cfg.out_dir / ("comparison" + suffix);
    write_timeseries_csv(run, ts, hash);
    write_components_csv(run, comp, hash);
    write_comparison_csv(run, cmp, hash);
    result.files.insert(result.files.end(), {ts, comp, cmp});
    result.runs.push_back(std::move(run));
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.summary = summarize(cfg, result.runs, wall);
  const auto summary_path = cfg.out_dir / "summary.json";
  std::ofstream(summary_path) << result.summary.dump(2) << '\n';
  result.files.push_back(summary_path);
  return result;
}

}  // namespace lpest
