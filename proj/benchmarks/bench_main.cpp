#include <benchmark/benchmark.h>

#include <vector>

#include "cbtsim/chain_core.hpp"
#include "cbtsim/metrics.hpp"
#include "cbtsim/rng.hpp"
#include "cbtsim/runner.hpp"
#include "cbtsim/sim_kernel.hpp"
#include "cbtsim/workload.hpp"

using namespace cbtsim;

namespace {

void BM_EventQueuePushPop(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  Rng rng(7);
  for (auto _ : state) {
    EventQueue q;
    for (std::int64_t i = 0; i < n; ++i) {
      SimEvent ev;
      ev.kind = EvKind::heartbeat_tick;
      ev.fire_at = Time(rng.below(1'000'000));
      q.push(ev);
    }
    Time last = 0;
    while (!q.empty()) {
      SimEvent ev = q.pop();
      benchmark::DoNotOptimize(last = ev.fire_at);
    }
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_EventQueuePushPop)->Arg(1 << 10)->Arg(1 << 14);

void BM_LongestBranch(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  ForkTree tree;
  ChainId chain{1};
  Block genesis;
  genesis.chain = chain;
  genesis.index = 0;
  genesis.block_id = compute_block_id(chain, 0, 0, {}, NodeId{1, 0}, 0);
  tree.add_block(genesis);
  Rng rng(11);
  BlockId parent = genesis.block_id;
  std::vector<BlockId> ids{parent};
  for (std::int64_t i = 1; i < n; ++i) {
    Block b;
    b.chain = chain;
    b.parent = ids[rng.chance(0.1) ? rng.below(ids.size()) : ids.size() - 1];
    b.index = tree.find(b.parent)->index + 1;
    b.created_at = Time(i) * 1000;
    b.block_id =
        compute_block_id(chain, b.index, b.parent, {}, NodeId{1, 0}, b.created_at);
    tree.add_block(b);
    ids.push_back(b.block_id);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(tree.longest_branch());
  }
}
BENCHMARK(BM_LongestBranch)->Arg(256)->Arg(4096);

void BM_PoissonPmf(benchmark::State& state) {
  for (auto _ : state) {
    double acc = 0;
    for (std::uint32_t k = 0; k <= 60; ++k)
      acc += poisson_failure_prob(3.0, k);
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(BM_PoissonPmf);

void BM_CivilRun(benchmark::State& state) {
  RunConfig cfg;
  cfg.protocol = state.range(0) ? ProtocolKind::sbp : ProtocolKind::rbp;
  cfg.n_chains = 4;
  cfg.nodes_per_chain = 3;
  cfg.entities_per_chain = 200;
  cfg.n_transactions = 500;
  cfg.arrival_rate = 150.0;
  cfg.seed = 5;
  for (auto _ : state) {
    ResultRecord rec = run_experiment(cfg);
    benchmark::DoNotOptimize(rec.trace.summary.trace_hash);
  }
  state.SetItemsProcessed(state.iterations() * cfg.n_transactions);
}
BENCHMARK(BM_CivilRun)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
