#include "cbtsim/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace cbtsim {

const char* to_string(InjectResult r) {
  switch (r) {
    case InjectResult::ok: return "ok";
    case InjectResult::budget_exhausted: return "budget_exhausted";
    case InjectResult::node_down: return "node_down";
    case InjectResult::no_target: return "no_target";
  }
  return "?";
}

World::World(const RunConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
  validate(cfg_);
  flags_ = flags_for(cfg_.protocol);
  sim_ = cfg_.sim_params();
  hub_chain_ = ChainId{cfg_.hub_chain};

  chains_.reserve(cfg_.n_chains);
  for (std::uint32_t c = 1; c <= cfg_.n_chains; ++c)
    chains_.emplace_back(cfg_.chain_params(c), cfg_.entities_per_chain,
                         cfg_.initial_balance);
  open_by_chain_.resize(cfg_.n_chains);
  finalized_legs_.resize(cfg_.n_chains);
  window_samples_.resize(cfg_.n_chains);
  idle_heartbeats_.assign(cfg_.n_chains, 0);
  blocked_heartbeats_.assign(cfg_.n_chains, 0);

  Time sig = 0;
  Time del = 0;
  for (std::uint32_t c = 1; c <= cfg_.n_chains; ++c) {
    sig += cfg_.sigma_of(c);
    del += cfg_.delta_of(c);
    bi_max_ = std::max(bi_max_, cfg_.block_interval_of(c));
  }
  sigma_bar_ = sig / cfg_.n_chains;
  delta_bar_ = del / cfg_.n_chains;
  two_tau_ = static_cast<Time>(
      std::ceil(2.0 * static_cast<double>(sim_.tau) * (1.0 + sim_.latency_jitter)));

  // One full exchange plus detection plus recovery: unreachable on a civil
  // run, generous against any single crash window.
  p1_deadline_ = two_tau_ + 2 * sigma_bar_ + sim_.f;
  // Phase II additionally rides out finality plus fork-driven re-inclusion.
  p2_deadline_ = p1_deadline_ + 2 * delta_bar_ + 64 * bi_max_;
  max_attempts_ = 1 + sim_.lambda_budget;

  event_cap_ = cfg_.livelock_cap_per_1k *
               std::max<std::uint64_t>(1, (cfg_.n_transactions + 999) / 1000);
}

ChainId World::coord_home(const TxnLive& t) const {
  return cfg_.protocol == ProtocolKind::hub ? hub_chain_ : t.req.coordinator;
}

int World::leg_index(const TxnLive& t, ChainId c) const {
  for (std::size_t i = 0; i < t.req.legs.size(); ++i)
    if (t.req.legs[i].chain == c) return static_cast<int>(i);
  return -1;
}

void World::submit(std::vector<TransactionRequest> reqs) {
  for (auto& r : reqs) {
    if (r.uuid != txns_.size() + 1)
      throw ConfigError("transaction uuids must be dense starting at 1");
    TxnLive t;
    t.req = std::move(r);
    t.coord.txn = t.req.uuid;
    for (const auto& l : t.req.legs) t.coord.participant_mask |= chain_bit(l.chain);
    t.parts.resize(t.req.legs.size());
    for (auto& p : t.parts) p.txn = t.req.uuid;
    t.rec.uuid = t.req.uuid;
    t.rec.coordinator = t.req.coordinator.index;
    t.rec.legs = t.req.legs;
    t.rec.submit_time = t.req.submit_time;

    SimEvent e;
    e.kind = EvKind::workload_arrival;
    e.txn = t.req.uuid;
    e.fire_at = t.req.submit_time;
    queue_.push(e);
    arrivals_pending_++;
    txns_.push_back(std::move(t));
  }
}

void World::inject_crash(NodeId node, Time at) {
  SimEvent e;
  e.kind = EvKind::node_crash;
  e.node = node;
  e.fire_at = at;
  queue_.push(e);
}

void World::seed_recurring_events() {
  for (std::uint32_t c = 1; c <= cfg_.n_chains; ++c) {
    SimEvent b;
    b.kind = EvKind::block_produce;
    b.chain = ChainId{c};
    b.fire_at = cfg_.block_interval_of(c);
    queue_.push(b);
    if (flags_.failover && cfg_.nodes_per_chain >= 2) {
      SimEvent h;
      h.kind = EvKind::heartbeat_tick;
      h.chain = ChainId{c};
      h.fire_at = cfg_.sigma_of(c);
      queue_.push(h);
    }
  }
  if (cfg_.crash_rate > 0) {
    SimEvent p;
    p.kind = EvKind::crash_probe;
    p.fire_at = rng_.exp_time(static_cast<Time>(1e6 / cfg_.crash_rate));
    queue_.push(p);
  }
}

bool World::quiescent() const {
  if (arrivals_pending_ || open_txns_ || !pool_.empty()) return false;
  if (hub_slots_used_ || hub_queue_head_ < hub_queue_.size()) return false;
  for (const auto& c : chains_)
    if (!c.window().empty()) return false;
  return true;
}

RunTrace World::run() {
  if (ran_) throw std::logic_error("World::run is single-shot");
  ran_ = true;
  seed_recurring_events();
  while (!queue_.empty()) {
    if (quiescent()) break;
    SimEvent ev = queue_.pop();
    now_ = ev.fire_at;
    fold_event_hash(ev);
    if (++events_processed_ > event_cap_) {
      summary_.livelock = true;
      break;
    }
    dispatch(ev);
  }
  return assemble_trace();
}

void World::fold_event_hash(const SimEvent& ev) {
  std::uint64_t h = trace_hash_;
  h = fnv1a_u64(h, static_cast<std::uint64_t>(ev.fire_at));
  h = fnv1a_u64(h, (static_cast<std::uint64_t>(ev.kind) << 8) |
                       static_cast<std::uint64_t>(ev.env.kind));
  h = fnv1a_u64(h, ev.env.msg_id);
  h = fnv1a_u64(h, ev.env.to_chain.index);
  h = fnv1a_u64(h, ev.env.to_node);
  h = fnv1a_u64(h, ev.txn ^ ev.env.txn);
  h = fnv1a_u64(h, ev.chain.index);
  h = fnv1a_u64(h, (static_cast<std::uint64_t>(ev.node.chain.index) << 8) |
                       ev.node.ordinal);
  h = fnv1a_u64(h, ev.timer_gen);
  trace_hash_ = h;
}

void World::dispatch(const SimEvent& ev) {
  switch (ev.kind) {
    case EvKind::message_delivery:
      deliver(ev.env);
      break;
    case EvKind::timer_fire:
      if (ev.timer == TimerKind::coord_deadline) {
        CoordEvent ce;
        ce.kind = CoordEvent::Kind::deadline;
        ce.timer_gen = ev.timer_gen;
        coord_event(live(ev.txn), ce);
      } else {
        TxnLive& t = live(ev.txn);
        int li = leg_index(t, ev.chain);
        if (li >= 0) host_finalized(t, li);
      }
      break;
    case EvKind::node_crash:
      injection_results_.push_back(try_crash(ev.node));
      break;
    case EvKind::node_recover:
      on_recover(ev.node);
      break;
    case EvKind::block_produce:
      on_block(ev.chain);
      break;
    case EvKind::workload_arrival:
      on_arrival(ev.txn);
      break;
    case EvKind::heartbeat_tick:
      on_heartbeat(ev.chain);
      break;
    case EvKind::crash_probe:
      on_crash_probe();
      break;
    case EvKind::pool_retry:
      if (pool_.remove(ev.txn)) {
        TxnLive& t = live(ev.txn);
        t.rec.attempts++;
        CoordEvent ce;
        ce.kind = CoordEvent::Kind::start;
        coord_event(t, ce);
      }
      break;
  }
}

// ---------------------------------------------------------------- network

void World::send_to_chain(ChainId from, ChainId to, MsgKind kind, Uuid txn,
                          std::uint32_t attempt, std::int32_t arg) {
  ChainState& fc = chain_at(from);
  Envelope env;
  env.msg_id = next_msg_id_++;
  env.from = {from, fc.proxy().current == ProxyState::kNoProxy
                        ? 0
                        : fc.proxy().current};
  env.to_chain = to;
  env.to_node = Envelope::kToProxy;
  env.kind = kind;
  env.txn = txn;
  env.attempt = attempt;
  env.arg = arg;
  count_summary(kind);

  SimEvent e;
  e.kind = EvKind::message_delivery;
  e.env = env;
  Time lat = sample_latency(rng_, sim_.tau, sim_.latency_jitter);
  tau_max_sampled_ = std::max(tau_max_sampled_, lat);
  e.fire_at = now_ + lat;
  queue_.push(e);
}

void World::send_to_node(NodeId from, NodeId to, MsgKind kind, Uuid txn,
                         std::uint32_t epoch) {
  Envelope env;
  env.msg_id = next_msg_id_++;
  env.from = from;
  env.to_chain = to.chain;
  env.to_node = to.ordinal;
  env.kind = kind;
  env.txn = txn;
  env.epoch = epoch;
  count_summary(kind);

  SimEvent e;
  e.kind = EvKind::message_delivery;
  e.env = env;
  Time lat = sample_latency(rng_, sim_.tau, sim_.latency_jitter);
  tau_max_sampled_ = std::max(tau_max_sampled_, lat);
  e.fire_at = now_ + lat;
  queue_.push(e);
}

void World::deliver(const Envelope& env) {
  ChainState& c = chain_at(env.to_chain);
  if (env.to_node != Envelope::kToProxy) {
    if (!c.node_up(env.to_node, now_)) {
      c.node_parked(env.to_node).push_back(env);
      return;
    }
    node_msg(c, env);
    return;
  }
  if (!c.proxy_live(now_)) {
    c.inbox().push_back(env);
    return;
  }
  deliver_to_proxy(c, env);
}

void World::node_msg(ChainState& c, const Envelope& env) {
  switch (env.kind) {
    case MsgKind::hb_probe:
      if (c.proxy().current == env.to_node && c.proxy().epoch == env.epoch) {
        count_heartbeat(c, false);
        send_to_node({c.id(), env.to_node}, env.from, MsgKind::hb_ack, 0,
                     env.epoch);
      }
      break;
    case MsgKind::hb_ack:
      if (env.epoch == c.proxy().epoch && env.to_node < c.params().n_nodes)
        c.last_ack()[env.to_node] = now_;
      break;
    default:
      break;  // replicate: the state update itself is modeled as instant
  }
}

void World::deliver_to_proxy(ChainState& c, const Envelope& env) {
  if (env.txn == 0 || env.txn > txns_.size()) return;
  TxnLive& t = live(env.txn);
  switch (env.kind) {
    case MsgKind::precommit:
      host_precommit(t, leg_index(t, c.id()));
      break;
    case MsgKind::commit:
      host_commit(t, leg_index(t, c.id()));
      break;
    case MsgKind::abort_txn:
      host_abort(t, leg_index(t, c.id()));
      break;
    case MsgKind::ready:
    case MsgKind::abort_vote:
    case MsgKind::done:
    case MsgKind::resume: {
      CoordEvent ce;
      ce.kind = env.kind == MsgKind::ready ? CoordEvent::Kind::ready
                : env.kind == MsgKind::abort_vote
                    ? CoordEvent::Kind::abort_vote
                    : env.kind == MsgKind::done ? CoordEvent::Kind::done
                                                : CoordEvent::Kind::resume_query;
      ce.from = env.from.chain;
      coord_event(t, ce);
      break;
    }
    case MsgKind::recycle: {
      CoordEvent ce;
      ce.kind = CoordEvent::Kind::recycle_notice;
      ce.from = env.from.chain;
      coord_event(t, ce);
      break;
    }
    case MsgKind::hub_forward:
      hub_admit(env.txn);
      break;
    case MsgKind::hub_ack:
      if (t.open) {
        if (env.arg)
          mark_committed(t);
        else
          mark_aborted(t);
      }
      break;
    default:
      break;
  }
}

void World::drain_inbox(ChainState& c) {
  std::vector<Envelope> box = std::exchange(c.inbox(), {});
  for (const auto& env : box) deliver_to_proxy(c, env);
}

void World::elect(ChainState& c, std::uint32_t ordinal) {
  c.proxy().current = ordinal;
  c.proxy().epoch++;
  for (auto& a : c.last_ack()) a = now_;
  drain_inbox(c);
  // The fresh proxy re-syncs every transaction still open on this chain:
  // parked traffic was just drained, so anything open here needs the
  // coordinator to restate the phase.
  std::vector<Uuid> open(open_by_chain_[c.id().idx()].begin(),
                         open_by_chain_[c.id().idx()].end());
  for (Uuid u : open) {
    TxnLive& t = live(u);
    if (!t.open || coord_home(t) == c.id() || !t.req.leg_on(c.id())) continue;
    int phase = (t.coord.phase == CoordPhase::commit_sent ||
                 t.coord.phase == CoordPhase::committed)
                    ? 2
                    : 1;
    count_txn_msg(t, MsgKind::resume, phase, true);
    send_to_chain(c.id(), coord_home(t), MsgKind::resume, u, t.coord.attempt);
  }
}

// ------------------------------------------------------------- accounting

void World::count_summary(MsgKind kind) {
  summary_.messages_by_kind[static_cast<std::size_t>(kind)]++;
}

void World::count_txn_msg(TxnLive& t, MsgKind kind, int phase, bool in_attempt) {
  (void)kind;
  t.rec.messages_total++;
  if (in_attempt) t.msgs_attempt++;
  if (phase == 1)
    t.rec.messages_phase1++;
  else if (phase == 2)
    t.rec.messages_phase2++;
}

void World::count_heartbeat(ChainState& c, bool blocked) {
  std::size_t ci = c.id().idx();
  if (blocked && !open_by_chain_[ci].empty()) {
    blocked_heartbeats_[ci]++;
    TxnLive& t = live(*open_by_chain_[ci].begin());
    int phase = (t.coord.phase == CoordPhase::commit_sent ||
                 t.coord.phase == CoordPhase::committed)
                    ? 2
                    : 1;
    count_txn_msg(t, MsgKind::hb_probe, phase, true);
  } else {
    idle_heartbeats_[ci]++;
  }
}

// ------------------------------------------------------------ coordinator

void World::on_arrival(Uuid u) {
  arrivals_pending_--;
  TxnLive& t = live(u);
  t.open = true;
  open_txns_++;
  track_open(t, true);

  if (cfg_.protocol == ProtocolKind::hub) {
    if (t.req.coordinator == hub_chain_) {
      hub_admit(u);
    } else {
      count_txn_msg(t, MsgKind::hub_forward, 1, true);
      send_to_chain(t.req.coordinator, hub_chain_, MsgKind::hub_forward, u, 1);
    }
    return;
  }
  CoordEvent ce;
  ce.kind = CoordEvent::Kind::start;
  coord_event(t, ce);
}

void World::track_open(TxnLive& t, bool add) {
  auto touch = [&](ChainId c) {
    auto& s = open_by_chain_[c.idx()];
    if (add)
      s.insert(t.req.uuid);
    else
      s.erase(t.req.uuid);
  };
  touch(t.req.coordinator);
  touch(coord_home(t));
  for (const auto& l : t.req.legs) touch(l.chain);
}

void World::coord_event(TxnLive& t, const CoordEvent& ev) {
  bool was_committed = (t.coord.phase == CoordPhase::committed);
  CoordActions act = coordinator_step(t.coord, ev, max_attempts_);
  if (ev.kind == CoordEvent::Kind::recycle_notice && act.requeue && was_committed)
    reopen(t);
  apply_coord_actions(t, act);
}

void World::apply_coord_actions(TxnLive& t, const CoordActions& act) {
  ChainId home = coord_home(t);
  // The generation of the phase this step entered. The in-process local leg
  // below can advance the coordinator further (and bump the generation), so
  // deadlines must be stamped with the value from before that happens.
  std::uint32_t gen = t.coord.timer_gen;
  // Remote sends go out before the local leg runs: the local leg's reply can
  // move the coordinator to the next phase mid-broadcast, and the remaining
  // recipients of this phase still need its message.
  auto fan = [&](std::uint64_t mask, MsgKind kind, int phase) {
    for (std::uint32_t i = 1; i <= cfg_.n_chains; ++i) {
      if (!(mask & (1ull << (i - 1)))) continue;
      ChainId c{i};
      if (c == home || leg_index(t, c) < 0) continue;
      count_txn_msg(t, kind, phase, true);
      send_to_chain(home, c, kind, t.req.uuid, t.coord.attempt);
    }
    int li = leg_index(t, home);
    if (li >= 0 && (mask & chain_bit(home))) {
      if (kind == MsgKind::precommit)
        host_precommit(t, li);
      else if (kind == MsgKind::commit)
        host_commit(t, li);
      else
        host_abort(t, li);
    }
  };
  if (act.send_abort) fan(act.send_abort, MsgKind::abort_txn, 1);
  if (act.send_precommit) fan(act.send_precommit, MsgKind::precommit, 1);
  if (act.send_commit) fan(act.send_commit, MsgKind::commit, 2);
  if (act.schedule_p1_deadline) schedule_deadline(t, p1_deadline_, gen);
  if (act.schedule_p2_deadline) schedule_deadline(t, p2_deadline_, gen);
  if (act.committed) {
    if (cfg_.protocol == ProtocolKind::hub)
      hub_finish(t, true);
    else
      mark_committed(t);
  }
  if (act.aborted) {
    if (cfg_.protocol == ProtocolKind::hub)
      hub_finish(t, false);
    else
      mark_aborted(t);
  }
  if (act.requeue) requeue(t);
}

void World::schedule_deadline(TxnLive& t, Time delay, std::uint32_t gen) {
  SimEvent e;
  e.kind = EvKind::timer_fire;
  e.timer = TimerKind::coord_deadline;
  e.txn = t.req.uuid;
  e.chain = coord_home(t);
  e.timer_gen = gen;
  e.fire_at = now_ + delay;
  queue_.push(e);
}

void World::fold_attempt(TxnLive& t) {
  t.rec.messages_attempt_max = std::max(t.rec.messages_attempt_max, t.msgs_attempt);
  t.msgs_attempt = 0;
}

void World::close_txn(TxnLive& t) {
  t.open = false;
  open_txns_--;
  track_open(t, false);
}

void World::mark_committed(TxnLive& t) {
  fold_attempt(t);
  t.rec.committed = true;
  t.rec.commit_time = now_;
  summary_.committed++;
  close_txn(t);
}

void World::mark_aborted(TxnLive& t) {
  fold_attempt(t);
  t.rec.aborted = true;
  t.rec.abort_time = now_;
  summary_.aborted++;
  close_txn(t);
}

void World::reopen(TxnLive& t) {
  t.rec.committed = false;
  t.rec.commit_time = -1;
  summary_.committed--;
  t.open = true;
  open_txns_++;
  track_open(t, true);
}

void World::requeue(TxnLive& t) {
  fold_attempt(t);
  t.rec.recycles++;
  Time backoff = chain_at(coord_home(t)).params().block_interval +
                 static_cast<Time>(rng_.below(
                     static_cast<std::uint64_t>(4 * sigma_bar_)));
  PoolItem item;
  item.txn = t.req.uuid;
  item.not_before = now_ + backoff;
  pool_.push(item);

  SimEvent e;
  e.kind = EvKind::pool_retry;
  e.txn = t.req.uuid;
  e.fire_at = item.not_before;
  queue_.push(e);
}

// ------------------------------------------------------------ participant

void World::host_precommit(TxnLive& t, int li) {
  if (li < 0) return;
  const Leg& leg = t.req.legs[li];
  ChainState& c = chain_at(leg.chain);
  PartState& p = t.parts[li];

  PartEvent ev;
  ev.kind = PartEvent::Kind::precommit;
  ev.lock_ok = false;
  bool fresh = !p.leg_applied && !p.leg_final &&
               (p.phase == PartPhase::idle || p.phase == PartPhase::aborted ||
                p.phase == PartPhase::done_sent);
  if (fresh) {
    // Unfinalized credits are not spendable: a later fork revert of those
    // credits must never be able to push the balance negative.
    bool funds_ok =
        leg.delta >= 0 || c.available(leg.entity.account) >= -leg.delta;
    if (funds_ok)
      ev.lock_ok = c.ledger().lock(leg.entity, t.req.uuid) == LedgerError::ok;
  }
  apply_part_actions(t, li, participant_step(p, ev, flags_));
}

void World::host_commit(TxnLive& t, int li) {
  if (li < 0) return;
  PartEvent ev;
  ev.kind = PartEvent::Kind::commit;
  apply_part_actions(t, li, participant_step(t.parts[li], ev, flags_));
}

void World::host_abort(TxnLive& t, int li) {
  if (li < 0) return;
  PartEvent ev;
  ev.kind = PartEvent::Kind::abort_txn;
  apply_part_actions(t, li, participant_step(t.parts[li], ev, flags_));
}

void World::host_finalized(TxnLive& t, int li) {
  if (li < 0) return;
  PartEvent ev;
  ev.kind = PartEvent::Kind::finalized_local;
  apply_part_actions(t, li, participant_step(t.parts[li], ev, flags_));
}

void World::host_cut(TxnLive& t, int li) {
  if (li < 0) return;
  PartEvent ev;
  ev.kind = PartEvent::Kind::cut_detected;
  apply_part_actions(t, li, participant_step(t.parts[li], ev, flags_));
}

void World::apply_part_actions(TxnLive& t, int li, const PartActions& act) {
  const Leg& leg = t.req.legs[li];
  ChainState& c = chain_at(leg.chain);
  PartState& p = t.parts[li];
  Uuid u = t.req.uuid;
  ChainId home = coord_home(t);
  bool local = (leg.chain == home);

  if (act.do_apply) {
    LedgerError le = c.ledger().apply_leg(leg.entity, leg.delta, u);
    if (le == LedgerError::ok) {
      p.leg_applied = true;
      c.note_applied(u, leg.entity, leg.delta, now_);
      if (flags_.wait_finalize && cfg_.literal_delta_wait) {
        SimEvent e;
        e.kind = EvKind::timer_fire;
        e.timer = TimerKind::leg_final;
        e.txn = u;
        e.chain = leg.chain;
        e.fire_at = now_ + c.params().delta;
        queue_.push(e);
      }
    } else if (le != LedgerError::lock_held_by_other &&
               le != LedgerError::insufficient_funds) {
      lock_violations_.push_back("apply " + std::to_string(u) + " chain " +
                                 std::to_string(leg.chain.index) + ": " +
                                 to_string(le));
    }
    // lock_held_by_other / insufficient_funds here mean a recycled attempt
    // raced its own cut: skip the apply, the pending recycle restarts it.
  }
  if (act.do_revert) c.revert_leg(u);
  if (act.do_unlock) {
    LedgerError le = c.ledger().unlock(leg.entity, u);
    if (le == LedgerError::not_lock_holder)
      lock_violations_.push_back("unlock " + std::to_string(u) + " chain " +
                                 std::to_string(leg.chain.index) + ": " +
                                 to_string(le));
  }
  if (act.replicate)
    replicate_intra(t, leg.chain,
                    act.send_ready || act.send_abort_vote ? 1 : 2);
  if (act.send_ready) {
    if (local) {
      CoordEvent ce;
      ce.kind = CoordEvent::Kind::ready;
      ce.from = leg.chain;
      coord_event(t, ce);
    } else {
      count_txn_msg(t, MsgKind::ready, 1, true);
      send_to_chain(leg.chain, home, MsgKind::ready, u, t.coord.attempt);
    }
  }
  if (act.send_abort_vote) {
    if (local) {
      CoordEvent ce;
      ce.kind = CoordEvent::Kind::abort_vote;
      ce.from = leg.chain;
      coord_event(t, ce);
    } else {
      count_txn_msg(t, MsgKind::abort_vote, 1, true);
      send_to_chain(leg.chain, home, MsgKind::abort_vote, u, t.coord.attempt);
    }
  }
  if (act.send_done) {
    if (local) {
      CoordEvent ce;
      ce.kind = CoordEvent::Kind::done;
      ce.from = leg.chain;
      coord_event(t, ce);
    } else {
      count_txn_msg(t, MsgKind::done, 2, true);
      send_to_chain(leg.chain, home, MsgKind::done, u, t.coord.attempt);
    }
  }
  if (act.send_recycle) {
    if (local) {
      CoordEvent ce;
      ce.kind = CoordEvent::Kind::recycle_notice;
      ce.from = leg.chain;
      coord_event(t, ce);
    } else {
      // restart traffic, not part of any attempt's two-phase exchange
      count_txn_msg(t, MsgKind::recycle, 0, false);
      send_to_chain(leg.chain, home, MsgKind::recycle, u, t.coord.attempt);
    }
  }
}

void World::replicate_intra(TxnLive& t, ChainId chain, int phase) {
  ChainState& c = chain_at(chain);
  std::uint32_t n = c.params().n_nodes;
  if (n <= 1) return;
  std::uint32_t from =
      c.proxy().current == ProxyState::kNoProxy ? 0 : c.proxy().current;
  for (std::uint32_t o = 0; o < n; ++o) {
    if (o == from) continue;
    count_txn_msg(t, MsgKind::replicate, phase, true);
    send_to_node({chain, from}, {chain, o}, MsgKind::replicate, t.req.uuid,
                 c.proxy().epoch);
  }
}

// -------------------------------------------------------------------- hub

void World::hub_admit(Uuid txn) {
  TxnLive& t = live(txn);
  if (hub_slots_used_ < cfg_.hub_capacity) {
    hub_slots_used_++;
    t.hub_running = true;
    CoordEvent ce;
    ce.kind = CoordEvent::Kind::start;
    coord_event(t, ce);
  } else {
    hub_queue_.push_back(txn);
  }
}

void World::hub_finish(TxnLive& t, bool committed) {
  t.hub_running = false;
  hub_slots_used_--;
  if (t.req.coordinator == hub_chain_) {
    if (committed)
      mark_committed(t);
    else
      mark_aborted(t);
  } else {
    count_txn_msg(t, MsgKind::hub_ack, 2, true);
    send_to_chain(hub_chain_, t.req.coordinator, MsgKind::hub_ack, t.req.uuid,
                  t.coord.attempt, committed ? 1 : 0);
  }
  while (hub_slots_used_ < cfg_.hub_capacity &&
         hub_queue_head_ < hub_queue_.size()) {
    Uuid next = hub_queue_[hub_queue_head_++];
    hub_slots_used_++;
    TxnLive& n = live(next);
    n.hub_running = true;
    CoordEvent ce;
    ce.kind = CoordEvent::Kind::start;
    coord_event(n, ce);
  }
}

// ----------------------------------------------------------- failures

InjectResult World::try_crash(NodeId node) {
  if (!node.chain.valid() || node.chain.index > cfg_.n_chains) {
    summary_.crash_refused++;
    return InjectResult::no_target;
  }
  ChainState& ch = chain_at(node.chain);
  if (node.ordinal >= ch.params().n_nodes) {
    summary_.crash_refused++;
    return InjectResult::no_target;
  }
  if (!ch.node_up(node.ordinal, now_) || now_ < global_down_until_) {
    // one down window at a time keeps per-crash damage attributable
    summary_.crash_refused++;
    return InjectResult::node_down;
  }
  if (sim_.lambda_budget == 0) {
    summary_.crash_refused++;
    return InjectResult::budget_exhausted;
  }
  const auto& affected = open_by_chain_[node.chain.idx()];
  for (Uuid u : affected) {
    const TxnLive& t = live(u);
    if (t.rec.lambda1 + t.rec.lambda2 + 1 > sim_.lambda_budget) {
      summary_.crash_refused++;
      return InjectResult::budget_exhausted;
    }
  }
  for (Uuid u : affected) {
    TxnLive& t = live(u);
    if (t.coord.phase == CoordPhase::commit_sent)
      t.rec.lambda2++;
    else
      t.rec.lambda1++;
  }
  ch.set_down(node.ordinal, now_ + sim_.f);
  global_down_until_ = now_ + sim_.f;
  summary_.crash_injections++;

  SimEvent e;
  e.kind = EvKind::node_recover;
  e.node = node;
  e.fire_at = now_ + sim_.f;
  queue_.push(e);
  return InjectResult::ok;
}

void World::on_recover(NodeId node) {
  ChainState& ch = chain_at(node.chain);
  if (node.ordinal >= ch.params().n_nodes) return;
  ch.last_ack()[node.ordinal] = now_;  // stale gap must not read as a crash
  std::vector<Envelope> parked = std::exchange(ch.node_parked(node.ordinal), {});
  for (const auto& env : parked) deliver(env);
  if (ch.proxy().current == node.ordinal) {
    drain_inbox(ch);
  } else if (ch.proxy().current == ProxyState::kNoProxy) {
    std::uint32_t s = ch.smallest_live(now_);
    if (s != ProxyState::kNoProxy) elect(ch, s);
  }
}

void World::on_crash_probe() {
  if (cfg_.crash_rate > 0) {
    SimEvent p;
    p.kind = EvKind::crash_probe;
    p.fire_at = now_ + rng_.exp_time(static_cast<Time>(1e6 / cfg_.crash_rate));
    queue_.push(p);
  }
  ChainId chain{1 + static_cast<std::uint32_t>(rng_.below(cfg_.n_chains))};
  std::uint32_t victim = chain_at(chain).proxy().current;
  if (victim == ProxyState::kNoProxy) {
    summary_.crash_refused++;
    return;
  }
  try_crash({chain, victim});
}

// -------------------------------------------------------- recurring events

void World::on_block(ChainId c) {
  ChainState& ch = chain_at(c);
  std::uint32_t producer =
      ch.proxy_live(now_) ? ch.proxy().current : ch.smallest_live(now_);
  if (producer != ProxyState::kNoProxy) {
    ProduceResult res = ch.produce_block(rng_, now_, producer);
    for (Uuid u : res.cut) {
      TxnLive& t = live(u);
      host_cut(t, leg_index(t, c));
    }
    for (Uuid u : ch.newly_final(now_)) {
      TxnLive& t = live(u);
      host_finalized(t, leg_index(t, c));
      ch.retire_leg(u, now_);
      finalized_legs_[c.idx()].push_back({u, now_});
    }
    window_samples_[c.idx()].push_back(
        {now_, static_cast<std::uint32_t>(ch.window().size())});
  }
  SimEvent e;
  e.kind = EvKind::block_produce;
  e.chain = c;
  e.fire_at = now_ + ch.params().block_interval;
  queue_.push(e);
}

void World::on_heartbeat(ChainId c) {
  ChainState& ch = chain_at(c);
  ProxyState& px = ch.proxy();
  Time sigma = ch.params().sigma;

  if (px.current == ProxyState::kNoProxy) {
    std::uint32_t s = ch.smallest_live(now_);
    if (s != ProxyState::kNoProxy) elect(ch, s);
  } else {
    std::uint32_t p = px.current;
    bool responsive = ch.node_up(p, now_);
    bool detected = false;
    for (std::uint32_t o = 0; o < ch.params().n_nodes; ++o) {
      if (o == p || !ch.node_up(o, now_)) continue;
      count_heartbeat(ch, !responsive);
      send_to_node({c, o}, {c, p}, MsgKind::hb_probe, 0, px.epoch);
      if (now_ - ch.last_ack()[o] > sigma + two_tau_) detected = true;
    }
    if (detected) {
      std::uint32_t s = ch.smallest_live(now_);
      if (s == ProxyState::kNoProxy)
        px.current = ProxyState::kNoProxy;
      else
        elect(ch, s);
    }
  }

  SimEvent e;
  e.kind = EvKind::heartbeat_tick;
  e.chain = c;
  e.fire_at = now_ + sigma;
  queue_.push(e);
}

// ------------------------------------------------------------------ trace

RunTrace World::assemble_trace() {
  RunTrace tr;
  tr.config_digest = config_digest(cfg_);
  tr.protocol = cfg_.protocol;
  tr.seed = cfg_.seed;
  tr.initial_total = static_cast<Amount>(cfg_.n_chains) *
                     cfg_.entities_per_chain * cfg_.initial_balance;
  tr.lambda_budget = sim_.lambda_budget;
  tr.tau = sim_.tau;
  tr.f = sim_.f;
  tr.block_interval_max = bi_max_;

  summary_.trace_hash = trace_hash_;
  summary_.events = events_processed_;
  summary_.makespan = now_;
  summary_.tau_max_sampled = tau_max_sampled_;
  tr.summary = summary_;

  tr.txns.reserve(txns_.size());
  for (auto& t : txns_) {
    fold_attempt(t);
    tr.txns.push_back(t.rec);
  }

  tr.chains.reserve(chains_.size());
  for (std::size_t i = 0; i < chains_.size(); ++i) {
    ChainState& ch = chains_[i];
    ChainRecord rec;
    rec.chain = ch.id().index;
    rec.n_nodes = ch.params().n_nodes;
    rec.delta = ch.params().delta;
    rec.balances.reserve(cfg_.entities_per_chain);
    for (std::uint32_t a = 0; a < cfg_.entities_per_chain; ++a)
      rec.balances.push_back(ch.ledger().balance({ch.id(), a}));
    for (BlockId id : ch.tree().longest_branch()) {
      const Block& b = ch.tree().at(id);
      BlockRecord br;
      br.index = b.index;
      br.block_id = b.block_id;
      br.created_at = b.created_at;
      br.txns = b.txns;
      rec.main_branch.push_back(std::move(br));
    }
    rec.finalized_prefix = ch.finalized_prefix(now_);
    rec.blocks_total = ch.blocks_total();
    rec.reorgs = ch.reorgs();
    rec.finalized_legs = std::move(finalized_legs_[i]);
    rec.window_samples = std::move(window_samples_[i]);
    rec.idle_heartbeats = idle_heartbeats_[i];
    rec.blocked_heartbeats = blocked_heartbeats_[i];
    tr.chains.push_back(std::move(rec));
  }
  tr.lock_violations = lock_violations_;
  return tr;
}

}  // namespace cbtsim
