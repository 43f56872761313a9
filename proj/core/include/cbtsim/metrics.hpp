#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbtsim/trace.hpp"
#include "cbtsim/types.hpp"
#include "cbtsim/workload.hpp"

namespace cbtsim {

// Quantities the bound checks derive from a configuration. The suprema are
// taken over every chain in the consortium, and total_nodes is the node sum
// the message bound multiplies.
struct DerivedBounds {
  Time delta_sup = 0;
  Time delta_inf = 0;
  Time sigma_sup = 0;
  std::uint64_t total_nodes = 0;
  std::uint32_t n_chains = 0;
};

DerivedBounds derived_bounds(const RunConfig& cfg);

// Message bound per terminal transaction:
//   messages_total <= 4 * max(1, lambda1 + lambda2) * total_nodes.
// max(1, .) keeps the bound meaningful on crash-free runs.
std::uint64_t message_bound(const TxnRecord& t, const DerivedBounds& b);
bool check_message_bound(const TxnRecord& t, const DerivedBounds& b);

// Latency bound per committed transaction under the wait-for-finality
// protocol:
//   latency <= 4*tau_max + max(1, lambda1+lambda2) * (f + delta_sup) + eps
// with eps = 2 * block_interval_max covering inclusion pickup delay and the
// finalization sweep granularity. tau_max is the maximum latency actually
// sampled during the run, so the inequality is literally assertable.
Time latency_bound(const TxnRecord& t, const DerivedBounds& b, Time tau_max,
                   Time f, Time block_interval_max);
bool check_latency_bound(const TxnRecord& t, const DerivedBounds& b,
                         Time tau_max, Time f, Time block_interval_max);

struct BoundCheckSummary {
  std::uint64_t checked = 0;
  std::uint64_t violations = 0;
  std::vector<std::string> details;  // first few violations, for reports
};

BoundCheckSummary check_all_message_bounds(const RunTrace& trace,
                                           const DerivedBounds& b);
// Applies to committed transactions; callers use it on wait-for-finality
// runs, where the bound is a protocol claim rather than a loose ceiling.
BoundCheckSummary check_all_latency_bounds(const RunTrace& trace,
                                           const DerivedBounds& b);

// P(k failures) = lambda^k e^{-lambda} / k!, evaluated in log space for
// large k so the tail stays finite and accurate.
double poisson_failure_prob(double lambda, std::uint32_t k);

// Throughput of one chain from its window occupancy: |entries| / delta.
// Returns transactions per second.
double window_throughput(std::size_t entries, Time delta);

struct AuditReport {
  bool atomicity = true;
  bool consistency = true;
  bool isolation = true;
  bool durability = true;
  std::vector<std::string> violations;

  bool all_ok() const {
    return atomicity && consistency && isolation && durability;
  }
};

// Pure function of the trace: re-auditing yields an identical report.
//  - atomicity: every transaction is all-or-nothing across final main
//    branches, and matches its committed/aborted mark
//  - consistency: balances conserve the initial total, none negative, and
//    wait-for-finality commits never went through a recycle
//  - isolation: the run recorded zero lock violations
//  - durability: every committed leg sits inside its chain's finalized prefix
AuditReport audit_acid(const RunTrace& trace);

struct LatencyStats {
  std::uint64_t count = 0;
  Time min = 0;
  Time median = 0;
  Time p99 = 0;
  Time max = 0;
  double mean = 0.0;
};

// Over committed transactions only.
LatencyStats latency_stats(const RunTrace& trace);

// Committed transactions per second over the whole run.
double committed_throughput(const RunTrace& trace);

// Idle (non-blocking) heartbeat traffic as a fraction of protocol messages.
double idle_heartbeat_fraction(const RunTrace& trace);

// Per-chain measured finalization rate vs the window estimate |T_i|/delta_i,
// both restricted to [t_lo, t_hi] of the run.
struct ChainRates {
  double measured = 0.0;  // finalized legs per second
  double estimated = 0.0; // mean window occupancy / delta
};
ChainRates chain_rates(const ChainRecord& chain, Time t_lo, Time t_hi);

}  // namespace cbtsim
