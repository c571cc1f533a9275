// Parallel kernels against their serial references.
//
//   bench_parallel --benchmark_filter=Select
//
// Thread count follows OMP_NUM_THREADS / COOPINTERSECT_THREADS.
#include <benchmark/benchmark.h>

#include <random>

#include "coopintersect/coordinator.hpp"
#include "coopintersect/experiment.hpp"
#include "support/qp_oracle.hpp"

namespace ci = coopintersect;

namespace {

struct SelectionCase {
  ci::Snapshot snapshot;
  std::vector<ci::PrioritySequence> candidates;
};

SelectionCase make_case(int vehicles) {
  std::mt19937_64 rng(17 + static_cast<unsigned>(vehicles));
  ci::testing::SnapshotOptions opt;
  opt.control = static_cast<std::size_t>(vehicles);
  opt.committed = 2;
  SelectionCase c;
  c.snapshot = ci::testing::random_snapshot(rng, opt);
  const ci::CoordinatorConfig cfg;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto more = ci::generate_candidates(c.snapshot.control, cfg.classes, cfg.auction, seed);
    c.candidates.insert(c.candidates.end(), more.begin(), more.end());
  }
  return c;
}

template <bool Parallel>
void BM_SelectOptimal(benchmark::State& state) {
  const SelectionCase c = make_case(static_cast<int>(state.range(0)));
  const ci::CoordinatorConfig cfg;
  for (auto _ : state) {
    ci::Selection s = Parallel ? ci::select_optimal(c.snapshot, c.candidates, cfg.classes, cfg.qp)
                               : ci::select_optimal_serial(c.snapshot, c.candidates, cfg.classes, cfg.qp);
    benchmark::DoNotOptimize(s);
  }
  state.counters["candidates"] = static_cast<double>(c.candidates.size());
}

template <bool Parallel>
void BM_RunCells(benchmark::State& state) {
  ci::ExperimentPlan plan;
  plan.controllers = {ci::ControllerKind::coop, ci::ControllerKind::traffic_light};
  plan.flows = {2000, 4000};
  plan.ratios = {1.0};
  plan.seeds = {1, 2};
  const auto cells = ci::expand(plan);
  ci::Scenario base;
  base.warmup = 20.0;
  for (auto _ : state) {
    auto r = Parallel ? ci::run_cells(cells, base, 90.0, false) : ci::run_cells_serial(cells, base, 90.0, false);
    benchmark::DoNotOptimize(r);
  }
}

}  // namespace

BENCHMARK(BM_SelectOptimal<true>)->Name("SelectOptimal/parallel")->Arg(10)->Arg(25)->Arg(40)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SelectOptimal<false>)->Name("SelectOptimal/serial")->Arg(10)->Arg(25)->Arg(40)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RunCells<true>)->Name("RunCells/parallel")->Unit(benchmark::kMillisecond)->Iterations(2);
BENCHMARK(BM_RunCells<false>)->Name("RunCells/serial")->Unit(benchmark::kMillisecond)->Iterations(2);

BENCHMARK_MAIN();
