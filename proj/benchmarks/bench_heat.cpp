#include "porerom/heat.hpp"

#include <benchmark/benchmark.h>

using namespace porerom;

namespace {

const HeatModel& model() {
  static const HeatModel h = assemble_heat(generate_synthetic_geometry(GeometrySpec{}));
  return h;
}

void BM_HeatAssemble(benchmark::State& state) {
  const MaterialGrid g = generate_synthetic_geometry(GeometrySpec{});
  for (auto _ : state) benchmark::DoNotOptimize(assemble_heat(g));
}
BENCHMARK(BM_HeatAssemble)->Unit(benchmark::kMillisecond);

void BM_HeatSolve(benchmark::State& state) {
  const HeatModel& h = model();
  for (auto _ : state) benchmark::DoNotOptimize(heat_solve(h, 2.0));
}
BENCHMARK(BM_HeatSolve)->Unit(benchmark::kMillisecond);

void BM_BlockRomSolve(benchmark::State& state) {
  const HeatModel& h = model();
  static const BlockReducedModel brm = [&] {
    const Partition p = partition_subdomains(generate_synthetic_geometry(GeometrySpec{}), {4, 2, 2});
    GreedyOptions o;
    o.training = {0.1, 2.575, 5.05, 7.525, 10.0};
    return build_block_rom(h, pod_greedy(h, GreedyMode::Lrbms, o, &p).local);
  }();
  for (auto _ : state) benchmark::DoNotOptimize(block_rom_solve(brm, 3.0));
  state.SetLabel("n=" + std::to_string(brm.size()));
}
BENCHMARK(BM_BlockRomSolve)->Unit(benchmark::kMicrosecond);

}  // namespace
