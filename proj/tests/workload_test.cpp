#include "doctest.h"

#include <set>

#include "cbtsim/workload.hpp"

using namespace cbtsim;

TEST_CASE("config text parses with comments, blanks, and overrides") {
  RunConfig cfg = parse_config_text(
      "# comment line\n"
      "protocol = rbp   # trailing comment\n"
      "\n"
      "n_chains = 4\n"
      "tau_ms = 25.5\n"
      "delta_ms.2 = 5000\n"
      "fork_prob.3 = 0.25\n"
      "literal_delta_wait = yes\n");
  CHECK(cfg.protocol == ProtocolKind::rbp);
  CHECK(cfg.n_chains == 4);
  CHECK(cfg.tau == 25'500);
  CHECK(cfg.delta_of(2) == seconds(5));
  CHECK(cfg.delta_of(1) == cfg.delta);
  CHECK(cfg.fork_prob_of(3) == 0.25);
  CHECK(cfg.fork_prob_of(1) == 0.0);
  CHECK(cfg.literal_delta_wait);
}

TEST_CASE("config rejects malformed input") {
  CHECK_THROWS_AS(parse_config_text("mystery_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("mystery_key.2 = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("protocol rbp\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("protocol =\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("protocol = quorum\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("tau_ms = fast\n"), ConfigError);
}

TEST_CASE("validation enforces structural and timing constraints") {
  RunConfig ok;  // defaults are valid
  CHECK_NOTHROW(validate(ok));

  auto reject = [](void (*mutate)(RunConfig&)) {
    RunConfig cfg;
    mutate(cfg);
    CHECK_THROWS_AS(validate(cfg), ConfigError);
  };
  reject([](RunConfig& c) { c.n_chains = 1; });
  reject([](RunConfig& c) { c.n_chains = 65; });
  reject([](RunConfig& c) { c.legs_per_txn = 1; });
  reject([](RunConfig& c) { c.legs_per_txn = c.n_chains + 1; });
  reject([](RunConfig& c) { c.arrival_rate = 0; });
  reject([](RunConfig& c) { c.latency_jitter = 1.0; });
  reject([](RunConfig& c) { c.hub_chain = 9; });
  reject([](RunConfig& c) { c.delta_override[2] = 0; });
  reject([](RunConfig& c) { c.delta_override[7] = seconds(1); });
  // Probe cadence must clear a round trip but stay well under finality.
  reject([](RunConfig& c) { c.sigma = ms(90); });   // 2*tau = 100ms
  reject([](RunConfig& c) { c.sigma = ms(300); });  // delta/10 = 200ms
  reject([](RunConfig& c) { c.fork_prob = 1.0; });
}

TEST_CASE("the no-failover baseline only runs in a benign environment") {
  RunConfig cfg;
  cfg.protocol = ProtocolKind::tpc;
  CHECK_NOTHROW(validate(cfg));
  SUBCASE("crash budget") {
    cfg.lambda_budget = 1;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
  }
  SUBCASE("forks") {
    cfg.fork_prob = 0.05;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
  }
  SUBCASE("per-chain fork override") {
    cfg.fork_prob_override[2] = 0.05;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
  }
}

TEST_CASE("canonical config text round-trips and digests stably") {
  RunConfig cfg;
  cfg.protocol = ProtocolKind::hub;
  cfg.n_chains = 5;
  cfg.seed = 99;
  cfg.delta_override[3] = seconds(4);
  cfg.fork_prob = 0.125;

  std::string text = config_to_text(cfg);
  RunConfig back = parse_config_text(text);
  CHECK(config_to_text(back) == text);
  CHECK(config_digest(back) == config_digest(cfg));

  RunConfig other = cfg;
  other.seed = 100;
  CHECK(config_digest(other) != config_digest(cfg));
  other = cfg;
  other.fork_prob = 0.25;
  CHECK(config_digest(other) != config_digest(cfg));
}

TEST_CASE("workloads are deterministic, zero-sum, and well-formed") {
  RunConfig cfg;
  cfg.n_chains = 6;
  cfg.legs_per_txn = 3;
  cfg.n_transactions = 500;
  cfg.seed = 31;

  auto w1 = generate_workload(cfg);
  auto w2 = generate_workload(cfg);
  REQUIRE(w1.size() == 500);
  REQUIRE(w2.size() == 500);

  Time prev = 0;
  for (std::size_t i = 0; i < w1.size(); ++i) {
    const TransactionRequest& r = w1[i];
    CHECK(r.uuid == i + 1);
    CHECK(r.uuid == w2[i].uuid);
    CHECK(r.submit_time == w2[i].submit_time);
    CHECK(r.legs.size() == 3);

    CHECK(r.submit_time > prev);  // strictly increasing arrivals
    prev = r.submit_time;

    Amount sum = 0;
    std::set<std::uint32_t> chains;
    for (const Leg& l : r.legs) {
      sum += l.delta;
      chains.insert(l.chain.index);
      CHECK(l.chain.index >= 1);
      CHECK(l.chain.index <= 6);
      CHECK(l.entity.chain == l.chain);
      CHECK(l.entity.account < cfg.entities_per_chain);
      CHECK(l.delta == w2[i].legs[&l - r.legs.data()].delta);
    }
    CHECK(sum == 0);
    CHECK(chains.size() == 3);  // one leg per chain
    CHECK(chains.count(r.coordinator.index) == 1);

    // The coordinator's own leg pays; receiving legs take 1..100 each.
    CHECK(r.legs[0].chain == r.coordinator);
    CHECK(r.legs[0].delta < 0);
    for (std::size_t k = 1; k < r.legs.size(); ++k) {
      CHECK(r.legs[k].delta >= 1);
      CHECK(r.legs[k].delta <= 100);
    }
  }

  SUBCASE("two chains force every transaction onto both") {
    RunConfig two;
    two.n_chains = 2;
    two.legs_per_txn = 2;
    two.n_transactions = 50;
    for (const auto& r : generate_workload(two)) {
      std::set<std::uint32_t> chains;
      for (const Leg& l : r.legs) chains.insert(l.chain.index);
      CHECK(chains == std::set<std::uint32_t>{1, 2});
    }
  }
  SUBCASE("zero transactions is a valid empty workload") {
    RunConfig none;
    none.n_transactions = 0;
    CHECK(generate_workload(none).empty());
  }
  SUBCASE("a different seed reshuffles the schedule") {
    RunConfig other = cfg;
    other.seed = 32;
    auto w3 = generate_workload(other);
    bool any_diff = false;
    for (std::size_t i = 0; i < w3.size(); ++i)
      any_diff |= w3[i].submit_time != w1[i].submit_time;
    CHECK(any_diff);
  }
}
