#include "doctest.h"

#include <string>

#include "cbtsim/runner.hpp"

using namespace cbtsim;

namespace {

// A rotating mix of protocols and environments, all inside the validated
// parameter space. Deterministic: the sweep picks settings by index.
RunConfig sweep_config(std::uint64_t i) {
  RunConfig cfg;
  const char* protocols[] = {"sbp", "rbp", "hub", "tpc"};
  protocol_from_string(protocols[i % 4], cfg.protocol);

  cfg.n_chains = 2 + std::uint32_t(i % 5);
  cfg.nodes_per_chain = 1 + std::uint32_t(i % 3);
  cfg.entities_per_chain = 40;
  cfg.n_transactions = 150;
  cfg.legs_per_txn = 2 + std::uint32_t(i % (cfg.n_chains - 1)) % 2;
  cfg.arrival_rate = 40 + double(i % 3) * 60;
  cfg.seed = 1000 + i;
  cfg.tau = ms(50);
  cfg.f = ms(800);
  cfg.delta = seconds(2) + ms(200) * Time(i % 4);
  cfg.sigma = ms(150);
  cfg.block_interval = ms(80) + ms(30) * Time(i % 3);

  // tpc tolerates neither forks nor crashes; hub tolerates crashes only.
  if (cfg.protocol != ProtocolKind::tpc) {
    cfg.lambda_budget = std::uint32_t(i % 2);
    cfg.crash_rate = cfg.lambda_budget ? 1.5 : 0.0;
    if (cfg.protocol != ProtocolKind::hub)
      cfg.fork_prob = (i % 3 == 2) ? 0.15 : 0.0;
  }
  return cfg;
}

}  // namespace

TEST_CASE("every swept run settles clean across its whole verdict set") {
  for (std::uint64_t i = 0; i < 24; ++i) {
    CAPTURE(i);
    RunConfig cfg = sweep_config(i);
    CAPTURE(config_to_text(cfg));
    ResultRecord rec = run_experiment(cfg);

    // The one line that summarizes everything the run claims about itself.
    CHECK(rec.clean());
    for (const auto& v : rec.audit.violations) { CAPTURE(v); CHECK(false); }
    for (const auto& v : rec.message_bounds.details) { CAPTURE(v); CHECK(false); }
    for (const auto& v : rec.latency_bounds.details) { CAPTURE(v); CHECK(false); }

    // Conservation, spelled out against the config rather than the trace.
    Amount expect = Amount(cfg.n_chains) * Amount(cfg.entities_per_chain) *
                    cfg.initial_balance;
    Amount total = 0;
    for (const auto& c : rec.trace.chains)
      for (Amount b : c.balances) total += b;
    CHECK(total == expect);

    // Terminality and mark exclusivity for every transaction.
    std::uint64_t committed = 0, aborted = 0;
    for (const auto& t : rec.trace.txns) {
      CHECK(t.committed != t.aborted);
      committed += t.committed;
      aborted += t.aborted;
      CHECK(std::uint64_t(t.lambda1) + t.lambda2 <= cfg.lambda_budget);
      if (t.committed) CHECK(t.commit_time > t.submit_time);
    }
    CHECK(committed == rec.trace.summary.committed);
    CHECK(aborted == rec.trace.summary.aborted);

    // No locks outlive the run.
    CHECK(rec.trace.lock_violations.empty());
  }
}

TEST_CASE("a sampled re-run of every fourth sweep point is bit-identical") {
  for (std::uint64_t i = 0; i < 24; i += 4) {
    CAPTURE(i);
    RunConfig cfg = sweep_config(i);
    ResultRecord a = run_experiment(cfg);
    ResultRecord b = run_experiment(cfg);
    CHECK(a.trace.summary.trace_hash == b.trace.summary.trace_hash);
    CHECK(serialize_result(a) == serialize_result(b));
  }
}

TEST_CASE("forks never un-finalize a leg") {
  RunConfig cfg;
  cfg.protocol = ProtocolKind::rbp;
  cfg.n_chains = 3;
  cfg.nodes_per_chain = 2;
  cfg.n_transactions = 400;
  cfg.arrival_rate = 120;
  cfg.fork_prob = 0.25;
  cfg.seed = 77;

  ResultRecord rec = run_experiment(cfg);
  CHECK(rec.clean());

  // Finalized legs must sit on the closing main branch inside the prefix:
  // exactly the durability clause, re-stated over the finalization log.
  for (const auto& c : rec.trace.chains) {
    std::uint64_t finalized = 0;
    for (const auto& b : c.main_branch)
      if (b.index <= c.finalized_prefix) finalized += b.txns.size();
    CHECK(c.finalized_legs.size() <= finalized);
    for (std::size_t k = 1; k < c.finalized_legs.size(); ++k)
      CHECK(c.finalized_legs[k - 1].at <= c.finalized_legs[k].at);
  }
}

TEST_CASE("probe overhead stays under one percent against long finality") {
  // Probe cadence scaled to a tenth of finality, a loaded arrival rate:
  // the regime where heartbeat noise is claimed negligible.
  RunConfig cfg;
  cfg.protocol = ProtocolKind::rbp;
  cfg.n_chains = 3;
  cfg.nodes_per_chain = 2;
  cfg.entities_per_chain = 400;
  cfg.n_transactions = 2000;
  cfg.arrival_rate = 400;
  cfg.delta = seconds(30);
  cfg.sigma = seconds(3);
  cfg.block_interval = ms(100);
  cfg.seed = 13;

  ResultRecord rec = run_experiment(cfg);
  CHECK(rec.clean());
  CHECK(rec.idle_heartbeat_frac < 0.01);
  CHECK(rec.idle_heartbeat_frac > 0.0);
}
