#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "cbtsim/chain_core.hpp"
#include "cbtsim/types.hpp"

namespace cbtsim {

enum class ProtocolKind : std::uint8_t { sbp = 1, rbp = 2, tpc = 3, hub = 4 };

const char* to_string(ProtocolKind k);
bool protocol_from_string(std::string_view s, ProtocolKind& out);

// Stable numeric codes; recorded in traces.
enum class MsgKind : std::uint8_t {
  precommit = 1,
  ready = 2,
  abort_vote = 3,
  commit = 4,
  done = 5,
  abort_txn = 6,
  replicate = 7,
  hb_probe = 8,
  hb_ack = 9,
  hub_forward = 10,
  hub_ack = 11,
  recycle = 12,
  resume = 13,
};

const char* to_string(MsgKind k);

struct ProtoFlags {
  bool wait_finalize = false;   // done only after the leg's block is final
  bool failover = false;        // heartbeat probing + proxy re-election
  bool recycle_on_cut = false;  // cut legs are reverted and the txn restarted
};

ProtoFlags flags_for(ProtocolKind k);

enum class CoordPhase : std::uint8_t {
  init = 0,
  precommit_sent = 1,
  commit_sent = 2,
  committed = 3,
  aborted = 4,
};

enum class PartPhase : std::uint8_t {
  idle = 0,
  ready = 1,
  applied = 2,
  done_sent = 3,
  finished = 4,
  aborted = 5,
};

const char* to_string(CoordPhase p);
const char* to_string(PartPhase p);

// Chains are numbered 1..|C| <= 64, so participant sets fit a bitmask.
constexpr std::uint32_t kMaxChains = 64;

inline std::uint64_t chain_bit(ChainId c) { return 1ull << c.idx(); }

struct CoordState {
  Uuid txn = 0;
  CoordPhase phase = CoordPhase::init;
  std::uint64_t participant_mask = 0;
  std::uint64_t ready_mask = 0;
  std::uint64_t done_mask = 0;
  std::uint32_t attempt = 1;
  std::uint32_t timer_gen = 0;  // bumped on phase change; stale deadlines ignored
  bool restart_pending = false; // a recycle notice arrived mid-attempt
  bool never_abort = false;     // a leg is durable somewhere: only requeue
};

struct CoordEvent {
  enum class Kind : std::uint8_t {
    start = 0,
    ready = 1,
    abort_vote = 2,
    done = 3,
    deadline = 4,
    resume_query = 5,   // a re-elected participant proxy asks for the phase
    recycle_notice = 6, // a participant reverted a cut leg
  };
  Kind kind = Kind::start;
  ChainId from;
  std::uint32_t timer_gen = 0;
};

struct CoordActions {
  std::uint64_t send_precommit = 0;  // chain bitmasks
  std::uint64_t send_commit = 0;
  std::uint64_t send_abort = 0;
  bool schedule_p1_deadline = false;
  bool schedule_p2_deadline = false;
  bool committed = false;
  bool aborted = false;
  bool requeue = false;  // restart the whole transaction (recycle path)
};

// Pure transition; identical (state, event) pairs yield identical results.
// max_attempts bounds phase-I deadline retries; phase-II retries are
// unbounded (commit must push through).
CoordActions coordinator_step(CoordState& s, const CoordEvent& ev,
                              std::uint32_t max_attempts);

struct PartState {
  Uuid txn = 0;
  PartPhase phase = PartPhase::idle;
  bool lock_held = false;
  bool leg_applied = false;  // in the working ledger, not yet final
  bool leg_final = false;    // block inside the finalized prefix
};

struct PartEvent {
  enum class Kind : std::uint8_t {
    precommit = 0,
    commit = 1,
    abort_txn = 2,
    finalized_local = 3,  // the leg's block entered the finalized prefix
    cut_detected = 4,     // the leg's only blocks were on a cut branch
  };
  Kind kind = Kind::precommit;
  bool lock_ok = false;  // host's validate+lock outcome, for precommit
};

struct PartActions {
  bool send_ready = false;
  bool send_abort_vote = false;
  bool send_done = false;
  bool do_apply = false;   // host applies the leg and submits it to the mempool
  bool do_unlock = false;
  bool do_revert = false;  // host reverts the working-ledger leg
  bool send_recycle = false;
  bool replicate = false;  // host fans the state update out to chain peers
};

PartActions participant_step(PartState& s, const PartEvent& ev, ProtoFlags flags);

// Recent applied-but-unfinalized legs of one chain; size() is the |T_i| of
// the throughput formula.
struct WindowEntry {
  Uuid txn = 0;
  EntityId entity;
  Amount delta = 0;
  Time applied_at = 0;
  BlockId block = 0;            // 0 while waiting for inclusion
  std::int64_t block_index = -1;
};

class SlidingWindow {
 public:
  void add(WindowEntry e) { entries_.push_back(e); }
  bool erase(Uuid txn);
  WindowEntry* find(Uuid txn);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::vector<WindowEntry>& entries() { return entries_; }
  const std::vector<WindowEntry>& entries() const { return entries_; }

 private:
  std::vector<WindowEntry> entries_;
};

// Transactions awaiting (re)processing. Recycled transactions re-enter with
// their original uuid; recycle_count is tracked by the host.
struct PoolItem {
  Uuid txn = 0;
  Time not_before = 0;  // backoff
};

class RequestPool {
 public:
  void push(PoolItem item) { items_.push_back(item); }
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  PoolItem pop_front();
  bool contains(Uuid txn) const;
  bool remove(Uuid txn);

 private:
  std::deque<PoolItem> items_;
};

}  // namespace cbtsim
