#include "doctest.h"

#include <sstream>

#include "cbtsim/runner.hpp"

#include <nlohmann/json.hpp>

using namespace cbtsim;

namespace {

RunConfig small_config(const char* protocol, std::uint64_t seed) {
  RunConfig cfg = parse_config_text(std::string("protocol = ") + protocol +
                                    "\n"
                                    "n_chains = 3\n"
                                    "nodes_per_chain = 2\n"
                                    "entities_per_chain = 100\n"
                                    "n_transactions = 120\n"
                                    "arrival_rate = 60\n"
                                    "tau_ms = 50\n"
                                    "f_ms = 1000\n"
                                    "delta_ms = 2000\n"
                                    "sigma_ms = 150\n"
                                    "block_interval_ms = 100\n");
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("an experiment bundles the trace with its verdicts") {
  RunConfig cfg = small_config("rbp", 5);
  ResultRecord rec = run_experiment(cfg);

  CHECK(rec.config_digest == config_digest(cfg));
  CHECK(rec.config_text == config_to_text(cfg));
  CHECK(rec.trace.txns.size() == 120);
  CHECK(rec.audit.all_ok());
  CHECK(rec.message_bounds.checked == 120);
  CHECK(rec.message_bounds.violations == 0);
  CHECK(rec.clean());
  CHECK(rec.latency.count == rec.trace.summary.committed);
  CHECK(rec.throughput_tx_s > 0.0);

  SUBCASE("identical configs replay to the identical record") {
    ResultRecord again = run_experiment(cfg);
    CHECK(serialize_result(again) == serialize_result(rec));
  }
  SUBCASE("re-deriving verdicts from the bare trace changes nothing") {
    ResultRecord derived = evaluate_trace(rec.trace);
    CHECK(derived.audit.all_ok() == rec.audit.all_ok());
    CHECK(derived.audit.violations == rec.audit.violations);
    CHECK(derived.message_bounds.checked == rec.message_bounds.checked);
    CHECK(derived.message_bounds.violations == rec.message_bounds.violations);
    CHECK(derived.latency_bounds.checked == rec.latency_bounds.checked);
    CHECK(derived.latency.median == rec.latency.median);
    CHECK(derived.throughput_tx_s == doctest::Approx(rec.throughput_tx_s));
  }
}

TEST_CASE("latency bounds are asserted only for the finality-waiting protocol") {
  ResultRecord rbp = run_experiment(small_config("rbp", 6));
  CHECK(rbp.latency_bounds.checked == 0);

  ResultRecord sbp = run_experiment(small_config("sbp", 6));
  CHECK(sbp.latency_bounds.checked == sbp.trace.summary.committed);
  CHECK(sbp.latency_bounds.violations == 0);
}

TEST_CASE("result documents round-trip byte for byte") {
  ResultRecord rec = run_experiment(small_config("sbp", 9));
  std::string doc = serialize_result(rec);

  ResultRecord back = parse_result(doc);
  CHECK(serialize_result(back) == doc);
  CHECK(back.config_digest == rec.config_digest);
  CHECK(back.trace.summary.trace_hash == rec.trace.summary.trace_hash);
  CHECK(back.trace.txns.size() == rec.trace.txns.size());
  CHECK(back.trace.chains.size() == rec.trace.chains.size());

  SUBCASE("a bare trace document is accepted and re-evaluated") {
    auto j = nlohmann::json::parse(doc);
    ResultRecord from_trace = parse_result(j.at("trace").dump());
    CHECK(from_trace.config_text.empty());
    CHECK(from_trace.audit.all_ok() == rec.audit.all_ok());
    CHECK(from_trace.message_bounds.violations == rec.message_bounds.violations);
    CHECK(from_trace.trace.summary.trace_hash == rec.trace.summary.trace_hash);
  }
  SUBCASE("malformed documents are config errors") {
    CHECK_THROWS_AS(parse_result("not json"), ConfigError);
    CHECK_THROWS_AS(parse_result("{}"), ConfigError);
    CHECK_THROWS_AS(parse_result(R"({"schema":"cbtsim-result-v1"})"), ConfigError);
  }
}

TEST_CASE("the per-transaction table carries one row per transaction") {
  ResultRecord rec = run_experiment(small_config("sbp", 12));
  std::string csv = txn_csv(rec.trace);

  std::istringstream in(csv);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "uuid,protocol,latency_ms,messages,lambda1,lambda2,recycles,committed");

  std::size_t rows = 0, committed = 0, blank_latency = 0;
  while (std::getline(in, line)) {
    rows++;
    if (line.back() == '1') committed++;
    // latency_ms is the third field; aborted rows leave it empty
    std::size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
    if (line[c2 + 1] == ',') blank_latency++;
  }
  CHECK(rows == rec.trace.txns.size());
  CHECK(committed == rec.trace.summary.committed);
  CHECK(blank_latency == rec.trace.summary.aborted);
  CHECK(committed + blank_latency == rows);
}

TEST_CASE("log-log slope recovers exact power laws") {
  CHECK(loglog_slope({{1, 2}, {2, 4}, {8, 16}}) == doctest::Approx(1.0));
  CHECK(loglog_slope({{1, 3}, {4, 6}, {16, 12}}) == doctest::Approx(0.5));
  CHECK(loglog_slope({{1, 5}, {2, 5}, {4, 5}}) == doctest::Approx(0.0));
  CHECK(loglog_slope({{1, 1}, {2, 8}}) == doctest::Approx(3.0));
}

TEST_CASE("the scaling driver grows arrivals with the consortium") {
  RunConfig base = small_config("rbp", 4);
  base.n_transactions = 60;
  base.arrival_rate = 30;  // per chain

  auto recs = run_scaling(base, {2, 4}, {ProtocolKind::rbp, ProtocolKind::tpc});
  REQUIRE(recs.size() == 4);

  // Row order: for each chain count, every protocol.
  CHECK(recs[0].trace.protocol == ProtocolKind::rbp);
  CHECK(recs[1].trace.protocol == ProtocolKind::tpc);
  CHECK(recs[0].trace.chains.size() == 2);
  CHECK(recs[2].trace.chains.size() == 4);

  for (const auto& r : recs) {
    CHECK(r.clean());
    CHECK(r.trace.txns.size() == 60);
  }

  // Same seed, same per-chain load: more chains finish the fixed batch
  // faster in aggregate.
  CHECK(recs[2].throughput_tx_s > recs[0].throughput_tx_s);
}
