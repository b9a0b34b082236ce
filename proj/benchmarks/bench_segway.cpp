#include <benchmark/benchmark.h>

#include "segway/controller.hpp"
#include "segway/hinf_analysis.hpp"
#include "segway/lmi_synthesis.hpp"
#include "segway/simulation.hpp"

using namespace segway;

namespace {

void BM_FeasibilityAtPaperLevel(benchmark::State& state) {
  const auto ss = preset_ecp220();
  for (auto _ : state) benchmark::DoNotOptimize(lmi::solve_feasibility(ss, 8.2));
}
BENCHMARK(BM_FeasibilityAtPaperLevel)->Unit(benchmark::kMillisecond);

void BM_MinimizeGamma(benchmark::State& state) {
  const auto ss = preset_ecp220();
  for (auto _ : state) benchmark::DoNotOptimize(lmi::minimize_gamma(ss, 0.1, 100.0, 0.1));
}
BENCHMARK(BM_MinimizeGamma)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_HinfNorm(benchmark::State& state) {
  const auto loop = hinf::full_information_loop(preset_ecp220(), lmi::paper_gain_set().k_bar);
  for (auto _ : state) benchmark::DoNotOptimize(hinf::hinf_norm(loop));
}
BENCHMARK(BM_HinfNorm)->Unit(benchmark::kMicrosecond);

void BM_ControllerStep(benchmark::State& state) {
  const auto cfg = paper_controller();
  ObserverState s;
  double theta = 0.0;
  for (auto _ : state) {
    const auto out = controller_step(cfg, s, theta, 0.0);
    s = out.next;
    theta += 1e-4;
    benchmark::DoNotOptimize(out.v1);
  }
}
BENCHMARK(BM_ControllerStep);

// 15 s maneuver at 1 ms, the workload of the default scenario.
void BM_ManeuverSimulation(benchmark::State& state) {
  const auto ss = preset_ecp220();
  const auto controller = paper_controller();
  const auto tilt = sim::DisturbanceProfile::maneuver(0.15);
  sim::SimConfig cfg;
  cfg.quantize = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(sim::run_closed_loop(ss, controller, tilt, cfg));
}
BENCHMARK(BM_ManeuverSimulation)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
