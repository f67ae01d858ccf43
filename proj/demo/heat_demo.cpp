// Solves the sinusoidal heat problem on three meshes with Crank-Nicolson and
// prints the error, the estimator under each accumulation strategy, and the
// effectivity index at the final time.
#include <cstdio>

#include "lpest/verification.hpp"

int main() {
  using namespace lpest;

  BenchmarkProblem bench = sinusoidal_benchmark();
  bench.final_time = 5.0;
  TauRule tau;
  tau.kind = TauRule::Kind::H;

  std::printf("%5s %6s %12s %12s %12s %12s %12s %8s\n", "level", "steps", "error", "est_min", "est_l1", "est_l2",
              "est_linf", "eff_min");
  for (int level = 2; level <= 5; ++level) {
    const RunRecord run = simulate_level(bench, SchemeKind::CrankNicolson, level, tau);
    const TimeRow& fin = run.final_row();
    std::printf("%5d %6zu %12.4e %12.4e %12.4e %12.4e %12.4e %8.1f\n", level, run.n_steps, fin.error,
                fin.report.total(Strategy::Min), fin.report.total(Strategy::L1), fin.report.total(Strategy::L2),
                fin.report.total(Strategy::LInf), effectivity(fin.report.total(Strategy::Min), fin.error));
  }
  return 0;
}
