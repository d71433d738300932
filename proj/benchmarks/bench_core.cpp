#include <benchmark/benchmark.h>

#include <vector>

#include "aoisched/decomp.hpp"
#include "aoisched/exact_solver.hpp"
#include "aoisched/model.hpp"
#include "aoisched/simulate.hpp"

using namespace aoisched;

namespace {

DeviceParams device(int packets, double reliability, int cap) {
  DeviceParams p;
  p.packets_per_update = packets;
  p.channel_reliability = reliability;
  p.cap_device = cap;
  p.cap_receiver = cap;
  p.cap_buffer = cap;
  return p;
}

SystemConfig pair_config(int cap) {
  SystemConfig c;
  c.variant = ModelVariant::GenerateAtWill;
  c.max_scheduled = 1;
  c.devices = {device(3, 0.5, cap), device(3, 0.7, cap)};
  return c;
}

SystemConfig fleet_config(int devices, int max_scheduled) {
  SystemConfig c;
  c.variant = ModelVariant::GenerateAtWill;
  c.max_scheduled = max_scheduled;
  for (int k = 0; k < devices; ++k) c.devices.push_back(device(2, 0.8, 20));
  return c;
}

}  // namespace

// Kernel construction: all per-device transition tables for a fleet.
static void BM_ModelBuild(benchmark::State& state) {
  const SystemConfig cfg = fleet_config(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    SystemModel m(cfg);
    benchmark::DoNotOptimize(m.state_count());
  }
}
BENCHMARK(BM_ModelBuild)->Arg(4)->Arg(16)->Arg(64);

// Joint solve on a two-device instance; the age cap scales the state space.
static void BM_JointSolve(benchmark::State& state) {
  const SystemConfig cfg = pair_config(static_cast<int>(state.range(0)));
  SystemModel m(cfg);
  for (auto _ : state) {
    const ValueTable vt = rvia_solve(m);
    benchmark::DoNotOptimize(vt.theta);
  }
  state.SetComplexityN(static_cast<std::int64_t>(m.state_count()));
}
BENCHMARK(BM_JointSolve)->Arg(4)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond)->Complexity();

// Policy extraction with and without threshold propagation.
static void BM_ExtractFull(benchmark::State& state) {
  SystemModel m(pair_config(8));
  const ValueTable vt = rvia_solve(m);
  for (auto _ : state) benchmark::DoNotOptimize(extract_policy(m, vt.values));
}
BENCHMARK(BM_ExtractFull)->Unit(benchmark::kMillisecond);

static void BM_ExtractPropagating(benchmark::State& state) {
  SystemModel m(pair_config(8));
  const ValueTable vt = rvia_solve(m);
  for (auto _ : state) benchmark::DoNotOptimize(structure_aware_extract(m, vt.values));
}
BENCHMARK(BM_ExtractPropagating)->Unit(benchmark::kMillisecond);

// Per-slot decision of the decomposed rule on a fleet, the hot path of every
// large-scale simulation.
static void BM_DecomposedAction(benchmark::State& state) {
  const SystemConfig cfg = fleet_config(static_cast<int>(state.range(0)), 2);
  SystemModel m(cfg);
  const DecompositionTables tables = solve_decomposition(m, default_base_scheduling(cfg));
  SuboptimalActor actor(m, tables);

  std::vector<std::vector<std::uint32_t>> probes;
  JointOdometer it(m);
  for (int i = 0; i < 64; ++i) {
    probes.push_back(it.digits());
    for (int j = 0; j < 9973; ++j) it.advance();
  }
  std::size_t next = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(actor.act(probes[next]));
    next = (next + 1) % probes.size();
  }
}
BENCHMARK(BM_DecomposedAction)->Arg(4)->Arg(16)->Arg(64);

// End-to-end slot throughput of the simulator under the decomposed rule.
static void BM_SimulateSlots(benchmark::State& state) {
  const SystemConfig cfg = fleet_config(static_cast<int>(state.range(0)), 1);
  SystemModel m(cfg);
  const DecompositionTables tables = solve_decomposition(m, default_base_scheduling(cfg));
  const auto policy = make_suboptimal_policy(m, tables);

  SimOptions so;
  so.horizon = 2000;
  so.burn_in = 0;
  so.replications = 1;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    so.seed = seed++;
    benchmark::DoNotOptimize(simulate(m, *policy, so));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(so.horizon));
}
BENCHMARK(BM_SimulateSlots)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
