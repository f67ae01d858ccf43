#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lpest/harness.hpp"

using namespace lpest;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    out.push_back(cell);
  }
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lpest_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Formatting, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5, 0.0}) {
    const std::string s = format_double(v);
    EXPECT_EQ(std::stod(s), v) << s;
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(format_double(kInfinity), "inf");
}

TEST(Parsing, TauRules) {
  EXPECT_EQ(parse_tau_rule("hsq").kind, TauRule::Kind::HSquared);
  EXPECT_EQ(parse_tau_rule("h").kind, TauRule::Kind::H);
  EXPECT_EQ(parse_tau_rule("hroot").kind, TauRule::Kind::RootH);
  const TauRule f = parse_tau_rule("fixed=0.05");
  EXPECT_EQ(f.kind, TauRule::Kind::Fixed);
  EXPECT_EQ(f.value, 0.05);
  EXPECT_THROW(parse_tau_rule("fixed=abc"), std::invalid_argument);
  EXPECT_THROW(parse_tau_rule("fixed=-1"), std::invalid_argument);
  EXPECT_THROW(parse_tau_rule("h2"), std::invalid_argument);
}

TEST(Parsing, LevelsSchemesAndExponents) {
  EXPECT_EQ(parse_levels("2..5"), (std::pair<int, int>{2, 5}));
  EXPECT_EQ(parse_levels("3"), (std::pair<int, int>{3, 3}));
  EXPECT_THROW(parse_levels("2-5"), std::invalid_argument);
  EXPECT_THROW(parse_levels("a..b"), std::invalid_argument);
  EXPECT_EQ(parse_scheme("cn"), SchemeKind::CrankNicolson);
  EXPECT_THROW(parse_scheme("rk4"), std::invalid_argument);
  EXPECT_EQ(parse_pset("inf, 2,1").values, (std::vector<double>{1.0, 2.0, kInfinity}));
  EXPECT_THROW(parse_pset("1,,2"), std::invalid_argument);
  EXPECT_THROW(parse_pset("0.5"), std::invalid_argument);
  EXPECT_THROW(parse_pset("x"), std::invalid_argument);
  EXPECT_EQ(parse_study_kind("large_initial"), StudyKind::LargeInitial);
  EXPECT_THROW(parse_study_kind("gaussian"), std::invalid_argument);
}

TEST(Config, ValidationErrors) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  c.level_lo = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.level_hi = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.tau.kind = TauRule::Kind::RootH;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.scheme = SchemeKind::CrankNicolson;
  EXPECT_NO_THROW(c.validate());
  c = {};
  c.samples_per_step = 2;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.benchmark = "cubic";
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.alpha_preset = "other";
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Config, AlphaPresets) {
  ExperimentConfig c;
  EXPECT_DOUBLE_EQ(c.resolved_constants().alpha(), 1.5);
  c.alpha_preset = "paper51";
  EXPECT_DOUBLE_EQ(c.resolved_constants().alpha(), 1.0);
  ExperimentConfig study;
  study.study = StudyType::Accumulation;
  EXPECT_EQ(study.resolved_alpha_preset(), "paper51");
}

TEST(Config, HashIdentifiesTheComputation) {
  ExperimentConfig a;
  ExperimentConfig b;
  b.out_dir = "elsewhere";
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  b.seed = 1;
  EXPECT_NE(a.hash(), b.hash());
  const Json j = a.to_json();
  EXPECT_EQ(j["constants"]["alpha"], 1.5);
  EXPECT_EQ(j["pset"].back(), "inf");
}

TEST(Config, ConstantsJson) {
  ExperimentConfig c;
  apply_constants_json(c, R"({"C_clem": 2.0, "lambda": 0.5, "A": [[2, 0], [0, 1]], "mu": 0.5})");
  EXPECT_EQ(c.constants.C_clem, 2.0);
  EXPECT_EQ(c.constants.lambda, 0.5);
  EXPECT_EQ(c.coeff.A[0][0], 2.0);
  EXPECT_EQ(c.coeff.mu, 0.5);
  apply_constants_json(c, R"({"alpha": 0.25})");
  EXPECT_EQ(c.resolved_constants().alpha(), 0.25);
  EXPECT_THROW(apply_constants_json(c, R"({"C_unknown": 1})"), std::invalid_argument);
  EXPECT_THROW(apply_constants_json(c, R"({"C_clem": )"), std::invalid_argument);
  EXPECT_THROW(apply_constants_json(c, R"({"A": [[1, 0]]})"), std::invalid_argument);
  EXPECT_THROW(apply_constants_json(c, "/nonexistent/constants.json"), std::invalid_argument);

  const fs::path file = scratch("constants.json");
  std::ofstream(file) << R"({"C_elip": 3.0})";
  apply_constants_json(c, file.string());
  EXPECT_EQ(c.constants.C_elip, 3.0);
  fs::remove(file);
}

TEST(RunExperiment, ZeroSmokeWritesAllZeroSeries) {
  ExperimentConfig c;
  c.benchmark = "zero";
  c.tau = parse_tau_rule("h");
  c.level_lo = 1;
  c.level_hi = 2;
  c.out_dir = scratch("zero");
  const ExperimentResult r = run_experiment(c);
  EXPECT_EQ(r.files.size(), 7u);
  std::ifstream in(c.out_dir / "timeseries_L2.csv");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> expected = timeseries_columns();
  expected.emplace_back("config_hash");
  EXPECT_EQ(split(line), expected);
  int rows = 0;
  while (std::getline(in, line)) {
    const auto cells = split(line);
    ASSERT_EQ(cells.size(), expected.size());
    EXPECT_EQ(cells[0], "2");
    EXPECT_EQ(cells[2], "0");
    EXPECT_EQ(cells[3], "0");
    EXPECT_EQ(cells[7], "nan");
    EXPECT_EQ(cells.back(), c.hash());
    ++rows;
  }
  EXPECT_EQ(rows, static_cast<int>(r.runs.back().n_steps + 1));
  const Json s = Json::parse(slurp(c.out_dir / "summary.json"));
  EXPECT_EQ(s["config_hash"], c.hash());
  EXPECT_TRUE(s["rate_final"].is_null());
  EXPECT_TRUE(s.contains("wall_seconds"));
  fs::remove_all(c.out_dir);
}

TEST(RunExperiment, DeterministicOutput) {
  ExperimentConfig c;
  c.benchmark = "polynomial";
  c.scheme = SchemeKind::CrankNicolson;
  c.tau = parse_tau_rule("h");
  c.level_lo = 1;
  c.level_hi = 2;
  c.out_dir = scratch("det_a");
  const ExperimentResult a = run_experiment(c);
  c.out_dir = scratch("det_b");
  const ExperimentResult b = run_experiment(c);
  for (std::size_t k = 0; k + 1 < a.files.size(); ++k) {
    EXPECT_EQ(slurp(a.files[k]), slurp(b.files[k])) << a.files[k];
  }
  // Components and comparison files carry one column per exponent / strategy term.
  std::ifstream comp(a.files[1]);
  std::string header;
  std::getline(comp, header);
  EXPECT_NE(header.find("DS_pinf"), std::string::npos);
  EXPECT_EQ(header.find("DS_p1,"), std::string::npos);
  std::ifstream cmp(a.files[2]);
  std::getline(cmp, header);
  EXPECT_NE(header.find("linf_p_DT"), std::string::npos);
  fs::remove_all(scratch("det_a"));
  fs::remove_all(scratch("det_b"));
}

TEST(RunAccumulationStudy, WritesThreeTables) {
  ExperimentConfig c;
  c.study = StudyType::Accumulation;
  c.seed = 9;
  c.study_final_time = 2.0;
  c.out_dir = scratch("acc");
  const ExperimentResult r = run_experiment(c);
  ASSERT_EQ(r.files.size(), 4u);
  std::ifstream in(c.out_dir / "accumulation_ones.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("t,F,raw_p1,", 0), 0u);
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
  }
  EXPECT_EQ(rows, 20);
  fs::remove_all(c.out_dir);
}
