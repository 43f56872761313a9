#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "cbtsim/chain_node.hpp"
#include "cbtsim/protocols.hpp"
#include "cbtsim/rng.hpp"
#include "cbtsim/sim_kernel.hpp"
#include "cbtsim/trace.hpp"
#include "cbtsim/workload.hpp"

namespace cbtsim {

enum class InjectResult : std::uint8_t {
  ok = 0,
  budget_exhausted = 1,  // an affected transaction would exceed λ_budget
  node_down = 2,         // target already down, or another window is open
  no_target = 3,         // chain had no live proxy to victimize
};

const char* to_string(InjectResult r);

// The simulation host. Owns the clock, the event queue, the chains, and one
// protocol-machine pair per transaction; interprets machine actions as
// ledger operations and network sends. run() drains to quiescence and
// freezes everything audit-relevant into a RunTrace.
class World {
 public:
  explicit World(const RunConfig& cfg);

  void submit(std::vector<TransactionRequest> reqs);

  // Crash `node` when the clock reaches `at`, under the same budget and
  // non-overlap rules as random injection. Verdicts are available after
  // run() in schedule order.
  void inject_crash(NodeId node, Time at);
  const std::vector<InjectResult>& injection_results() const {
    return injection_results_;
  }

  RunTrace run();

  Time now() const { return now_; }

 private:
  struct TxnLive {
    TransactionRequest req;
    CoordState coord;
    std::vector<PartState> parts;  // parallel to req.legs
    TxnRecord rec;
    bool open = false;        // arrived, not terminal
    bool hub_running = false; // occupies a hub slot
    std::uint64_t msgs_attempt = 0;
  };

  ChainState& chain_at(ChainId c) { return chains_[c.idx()]; }
  TxnLive& live(Uuid u) { return txns_[u - 1]; }
  ChainId coord_home(const TxnLive& t) const;
  int leg_index(const TxnLive& t, ChainId c) const;

  void seed_recurring_events();
  bool quiescent() const;
  void dispatch(const SimEvent& ev);
  void fold_event_hash(const SimEvent& ev);

  // network
  void send_to_chain(ChainId from, ChainId to, MsgKind kind, Uuid txn,
                     std::uint32_t attempt, std::int32_t arg = 0);
  void send_to_node(NodeId from, NodeId to, MsgKind kind, Uuid txn,
                    std::uint32_t epoch);
  void deliver(const Envelope& env);
  void deliver_to_proxy(ChainState& c, const Envelope& env);
  void node_msg(ChainState& c, const Envelope& env);
  void drain_inbox(ChainState& c);
  void elect(ChainState& c, std::uint32_t ordinal);

  // accounting
  void count_summary(MsgKind kind);
  void count_txn_msg(TxnLive& t, MsgKind kind, int phase, bool in_attempt);
  void count_heartbeat(ChainState& c, bool proxy_responsive);

  // coordinator side
  void on_arrival(Uuid u);
  void track_open(TxnLive& t, bool add);
  void coord_event(TxnLive& t, const CoordEvent& ev);
  void apply_coord_actions(TxnLive& t, const CoordActions& act);
  void schedule_deadline(TxnLive& t, Time delay, std::uint32_t gen);
  void mark_committed(TxnLive& t);
  void mark_aborted(TxnLive& t);
  void reopen(TxnLive& t);
  void requeue(TxnLive& t);
  void fold_attempt(TxnLive& t);
  void close_txn(TxnLive& t);

  // participant side
  void host_precommit(TxnLive& t, int leg);
  void host_commit(TxnLive& t, int leg);
  void host_abort(TxnLive& t, int leg);
  void host_finalized(TxnLive& t, int leg);
  void host_cut(TxnLive& t, int leg);
  void apply_part_actions(TxnLive& t, int leg, const PartActions& act);
  void replicate_intra(TxnLive& t, ChainId chain, int phase);

  // hub
  void hub_admit(Uuid txn);
  void hub_finish(TxnLive& t, bool committed);

  // failures
  InjectResult try_crash(NodeId node);
  void on_recover(NodeId node);

  // recurring events
  void on_block(ChainId c);
  void on_heartbeat(ChainId c);
  void on_crash_probe();

  RunTrace assemble_trace();

  RunConfig cfg_;
  ProtoFlags flags_;
  SimParams sim_;
  Rng rng_;
  EventQueue queue_;
  Time now_ = 0;

  std::vector<ChainState> chains_;
  std::vector<TxnLive> txns_;
  std::vector<std::set<Uuid>> open_by_chain_;  // txns touching the chain
  RequestPool pool_;

  Time p1_deadline_ = 0;
  Time p2_deadline_ = 0;
  Time sigma_bar_ = 0;
  Time delta_bar_ = 0;
  Time bi_max_ = 0;
  Time two_tau_ = 0;
  std::uint32_t max_attempts_ = 1;

  std::uint64_t open_txns_ = 0;
  std::uint64_t arrivals_pending_ = 0;
  std::uint64_t next_msg_id_ = 1;
  Time global_down_until_ = 0;

  // hub
  ChainId hub_chain_;
  std::uint32_t hub_slots_used_ = 0;
  std::vector<Uuid> hub_queue_;
  std::size_t hub_queue_head_ = 0;

  std::vector<InjectResult> injection_results_;

  // trace assembly
  RunSummary summary_;
  std::vector<std::vector<FinalizedLeg>> finalized_legs_;
  std::vector<std::vector<WindowSample>> window_samples_;
  std::vector<std::uint64_t> idle_heartbeats_;
  std::vector<std::uint64_t> blocked_heartbeats_;
  std::vector<std::string> lock_violations_;
  std::uint64_t trace_hash_ = kFnvOffset;
  Time tau_max_sampled_ = 0;
  std::uint64_t events_processed_ = 0;
  std::uint64_t event_cap_ = 0;
  bool ran_ = false;
};

}  // namespace cbtsim
