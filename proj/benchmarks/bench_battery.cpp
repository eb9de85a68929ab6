#include "porerom/battery_fom.hpp"
#include "porerom/battery_rom.hpp"

#include <benchmark/benchmark.h>

using namespace porerom;

namespace {

struct Desk {
  MaterialGrid grid = generate_synthetic_geometry(GeometrySpec{});
  InterfaceSet interfaces = extract_interfaces(grid);
  PhysicalConstants constants;
  double phi_ref = reference_potential(constants, {});
  OperatorDecomposition d = assemble_decomposition(grid, interfaces, constants, phi_ref);
  Vector c0 = initial_concentration(d, {});
  Vector x;

  Desk() {
    x.resize(d.size());
    x << c0, equilibrium_potential(d, c0);
  }
};

const Desk& desk() {
  static const Desk k;
  return k;
}

// Trained once: POD of a few trajectories and EI on their Newton stages.
struct Rom {
  ReducedBatteryModel model;
  Vector a0;

  Rom(Index k, Index m) {
    const auto& d = desk().d;
    std::vector<Trajectory> train;
    for (double mu : {0.0003, 0.0007, 0.0012}) train.push_back(simulate(d, mu, desk().c0, 20.0, 600.0, {}, true));
    Index ns = 0, ne = 0;
    for (const auto& t : train) {
      ns += t.n_states();
      ne += t.stages.count();
    }
    DenseMatrix sc(d.layout.n_c, ns), sp(d.layout.n_phi, ns);
    DenseMatrix e1(static_cast<Index>(d.one_over_c.support().size()), ne);
    DenseMatrix eb(static_cast<Index>(d.butler_volmer.support().size()), ne);
    Index col = 0, ecol = 0;
    for (const auto& t : train) {
      sc.middleCols(col, t.n_states()) = t.c;
      sp.middleCols(col, t.n_states()) = t.phi;
      col += t.n_states();
      e1.middleCols(ecol, t.stages.count()) = t.stages.one_over_c;
      eb.middleCols(ecol, t.stages.count()) = t.stages.butler_volmer;
      ecol += t.stages.count();
    }
    EIOptions o;
    o.max_size = m;
    auto dep1 = [&](Index i) { return d.one_over_c.dependencies(i); };
    auto depb = [&](Index i) { return d.butler_volmer.dependencies(i); };
    model = build_rom(d, pod(sc, PodOptions::fixed(k)), pod(sp, PodOptions::fixed(k)),
                      ei_greedy(e1, d.one_over_c.support(), d.size(), o, dep1),
                      ei_greedy(eb, d.butler_volmer.support(), d.size(), o, depb), desk().c0);
    a0 = project_concentration(model, desk().c0);
  }
};

void BM_Residual(benchmark::State& state) {
  const auto& k = desk();
  for (auto _ : state) benchmark::DoNotOptimize(k.d.apply(0.001, k.x));
  state.SetItemsProcessed(state.iterations() * k.d.size());
}
BENCHMARK(BM_Residual);

void BM_Jacobian(benchmark::State& state) {
  const auto& k = desk();
  for (auto _ : state) benchmark::DoNotOptimize(assemble_jacobian(k.d, 0.001, k.x, 20.0));
}
BENCHMARK(BM_Jacobian);

void BM_FomTrajectory(benchmark::State& state) {
  const auto& k = desk();
  for (auto _ : state) benchmark::DoNotOptimize(simulate(k.d, 0.001, k.c0, 20.0, 200.0));
}
BENCHMARK(BM_FomTrajectory)->Unit(benchmark::kMillisecond);

void BM_RomTrajectory(benchmark::State& state) {
  static const Rom small(10, 50);
  static const Rom large(20, 150);
  const Rom& r = state.range(0) == 0 ? small : large;
  for (auto _ : state) benchmark::DoNotOptimize(rom_simulate(r.model, 0.001, r.a0, 20.0, 200.0));
  state.SetLabel("k=" + std::to_string(r.model.k_c()) + " M=" + std::to_string(r.model.ei_bv.size()));
}
BENCHMARK(BM_RomTrajectory)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
