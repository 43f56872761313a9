#pragma once

#include <string>
#include <vector>

#include "cbtsim/metrics.hpp"
#include "cbtsim/trace.hpp"
#include "cbtsim/workload.hpp"

namespace cbtsim {

// One experiment's complete output: the frozen trace plus every verdict the
// auditors and bound checks produce from it. Serializes to JSON and
// round-trips losslessly.
struct ResultRecord {
  std::string config_text;  // canonical form, sufficient for an exact re-run
  std::uint64_t config_digest = 0;
  RunTrace trace;
  AuditReport audit;
  // message bound applies to the two commit protocols; the latency bound is
  // a wait-for-finality claim only. checked == 0 where not applicable.
  BoundCheckSummary message_bounds;
  BoundCheckSummary latency_bounds;
  LatencyStats latency;
  double throughput_tx_s = 0.0;
  double idle_heartbeat_frac = 0.0;

  bool clean() const {
    return audit.all_ok() && message_bounds.violations == 0 &&
           latency_bounds.violations == 0 && !trace.summary.livelock;
  }
};

ResultRecord run_experiment(const RunConfig& cfg);

// Scaling study: for each chain count, runs every protocol in `protocols`
// with the base config's arrival_rate treated as a per-chain rate (total
// arrivals scale with the consortium). Points are independent runs.
std::vector<ResultRecord> run_scaling(const RunConfig& base,
                                      const std::vector<std::uint32_t>& counts,
                                      const std::vector<ProtocolKind>& protocols);

// Bounds reconstructed from a trace alone, so a saved file can be re-audited
// without its config. sigma_sup is not recoverable and stays 0; neither
// bound check uses it.
DerivedBounds derived_bounds_from_trace(const RunTrace& trace);

// Audit + bound verdicts for an already-run trace. Used by re-audits; the
// result's config_text is left empty when only a bare trace is available.
ResultRecord evaluate_trace(const RunTrace& trace);

std::string serialize_result(const ResultRecord& rec);
// Accepts a full ResultRecord document or a bare trace document (the value
// of its "trace" key). Throws ConfigError on malformed input.
ResultRecord parse_result(const std::string& text);

// One row per transaction:
//   uuid,protocol,latency_ms,messages,lambda1,lambda2,recycles,committed
// latency_ms is blank for uncommitted rows; committed is 0/1.
std::string txn_csv(const RunTrace& trace);

// Least-squares slope of log(y) against log(x); x, y > 0.
double loglog_slope(const std::vector<std::pair<double, double>>& points);

}  // namespace cbtsim
