// Command-line front end for the PDE and accumulation studies.
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lpest/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Lp-in-time a posteriori error estimator experiments"};

  std::string study = "pde";
  std::string benchmark = "sinusoidal";
  std::string scheme = "be";
  std::string tau = "hsq";
  std::string levels = "2..5";
  std::string pset = "1,2,4,8,16,inf";
  std::string constants;
  std::string alpha_preset;
  std::string ds_pairing = "crossed";
  std::uint64_t seed = 0;
  int samples = 3;
  bool printed_forcing = false;
  double study_tau = 0.1;
  double study_final_time = 10.0;
  std::string out = "out";

  app.add_option("--study", study, "pde or accumulation")->check(CLI::IsMember({"pde", "accumulation"}));
  app.add_option("--benchmark", benchmark, "sinusoidal, polynomial or zero")
      ->check(CLI::IsMember({"sinusoidal", "polynomial", "zero"}));
  app.add_option("--scheme", scheme, "be or cn")->check(CLI::IsMember({"be", "cn"}));
  app.add_option("--tau", tau, "hsq, h, hroot or fixed=<value>");
  app.add_option("--levels", levels, "mesh levels lo..hi (2^i cells per side)");
  app.add_option("--pset", pset, "comma-separated exponents, inf allowed");
  app.add_option("--constants", constants, "JSON object or path to a JSON file");
  app.add_option("--alpha-preset", alpha_preset, "derived or paper51 (alpha = 1)")
      ->check(CLI::IsMember({"derived", "paper51"}));
  app.add_option("--seed", seed, "seed of the synthetic streams");
  app.add_option("--out", out, "output directory");
  app.add_option("--samples-per-step", samples, "time samples per step (at least 3)")->check(CLI::Range(3, 1000));
  app.add_flag("--printed-forcing", printed_forcing, "polynomial benchmark with the alternative printed forcing");
  app.add_option("--ds-pairing", ds_pairing, "crossed or matched hat pairing in the CN space data term")
      ->check(CLI::IsMember({"crossed", "matched"}));
  app.add_option("--study-tau", study_tau, "time step of the accumulation study");
  app.add_option("--study-final-time", study_final_time, "final time of the accumulation study");

  CLI11_PARSE(app, argc, argv);

  try {
    lpest::ExperimentConfig cfg;
    cfg.study = study == "pde" ? lpest::StudyType::Pde : lpest::StudyType::Accumulation;
    cfg.benchmark = benchmark;
    cfg.scheme = lpest::parse_scheme(scheme);
    cfg.tau = lpest::parse_tau_rule(tau);
    std::tie(cfg.level_lo, cfg.level_hi) = lpest::parse_levels(levels);
    cfg.pset = lpest::parse_pset(pset);
    if (!constants.empty()) {
      lpest::apply_constants_json(cfg, constants);
    }
    cfg.alpha_preset = alpha_preset;
    cfg.ds_pairing = ds_pairing == "crossed" ? lpest::DataPairing::Crossed : lpest::DataPairing::Matched;
    cfg.seed = seed;
    cfg.samples_per_step = samples;
    cfg.printed_forcing = printed_forcing;
    cfg.study_tau = study_tau;
    cfg.study_final_time = study_final_time;
    cfg.out_dir = out;

    const lpest::ExperimentResult result = lpest::run_experiment(cfg);
    for (const auto& f : result.files) {
      std::cout << f.string() << '\n';
    }
    if (result.summary.contains("rates")) {
      for (const auto& r : result.summary["rates"]) {
        std::cout << "levels " << r["levels"][0] << "->" << r["levels"][1] << ": error rate " << r["error"]
                  << ", estimator (min) rate " << r["est_min"] << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
