#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbtsim/chain_core.hpp"
#include "cbtsim/protocols.hpp"
#include "cbtsim/types.hpp"

namespace cbtsim {

// Everything the auditors and bound checks need, frozen after run().

struct TxnRecord {
  Uuid uuid = 0;
  std::uint32_t coordinator = 0;  // chain index
  std::vector<Leg> legs;
  Time submit_time = 0;
  bool committed = false;
  bool aborted = false;
  Time commit_time = -1;
  Time abort_time = -1;
  std::uint32_t lambda1 = 0;  // crashes charged while in phase I
  std::uint32_t lambda2 = 0;  // crashes charged while in phase II
  std::uint32_t recycles = 0;
  std::uint32_t attempts = 1;
  std::uint64_t messages_total = 0;       // cumulative over all attempts
  std::uint64_t messages_attempt_max = 0; // worst single two-phase execution
  std::uint64_t messages_phase1 = 0;
  std::uint64_t messages_phase2 = 0;

  Time latency() const { return committed ? commit_time - submit_time : -1; }
};

struct BlockRecord {
  std::int64_t index = 0;
  BlockId block_id = 0;
  Time created_at = 0;
  std::vector<Uuid> txns;
};

struct FinalizedLeg {
  Uuid txn = 0;
  Time at = 0;
};

struct WindowSample {
  Time at = 0;
  std::uint32_t size = 0;
};

struct ChainRecord {
  std::uint32_t chain = 0;
  std::uint32_t n_nodes = 0;
  Time delta = 0;
  std::vector<Amount> balances;          // final working balances
  std::vector<BlockRecord> main_branch;  // root to tip at quiescence
  std::int64_t finalized_prefix = kNoneFinalized;
  std::uint64_t blocks_total = 0;        // including abandoned branches
  std::uint64_t reorgs = 0;
  std::vector<FinalizedLeg> finalized_legs;
  std::vector<WindowSample> window_samples;
  std::uint64_t idle_heartbeats = 0;
  std::uint64_t blocked_heartbeats = 0;
};

struct RunSummary {
  std::uint64_t trace_hash = 0;
  std::uint64_t events = 0;
  Time makespan = 0;
  Time tau_max_sampled = 0;
  std::uint64_t messages_by_kind[16] = {};
  std::uint64_t crash_injections = 0;
  std::uint64_t crash_refused = 0;
  bool livelock = false;
  std::uint64_t committed = 0;
  std::uint64_t aborted = 0;
};

struct RunTrace {
  std::uint64_t config_digest = 0;
  ProtocolKind protocol = ProtocolKind::sbp;
  std::uint64_t seed = 0;
  Amount initial_total = 0;
  std::uint32_t lambda_budget = 0;
  Time tau = 0;
  Time f = 0;
  Time block_interval_max = 0;
  RunSummary summary;
  std::vector<TxnRecord> txns;
  std::vector<ChainRecord> chains;
  std::vector<std::string> lock_violations;  // empty on every healthy run
};

}  // namespace cbtsim
