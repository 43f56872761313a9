#include "cbtsim/protocols.hpp"

#include <algorithm>

namespace cbtsim {

const char* to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::sbp: return "sbp";
    case ProtocolKind::rbp: return "rbp";
    case ProtocolKind::tpc: return "tpc";
    case ProtocolKind::hub: return "hub";
  }
  return "?";
}

bool protocol_from_string(std::string_view s, ProtocolKind& out) {
  if (s == "sbp") out = ProtocolKind::sbp;
  else if (s == "rbp") out = ProtocolKind::rbp;
  else if (s == "tpc" || s == "2pc") out = ProtocolKind::tpc;
  else if (s == "hub") out = ProtocolKind::hub;
  else return false;
  return true;
}

const char* to_string(MsgKind k) {
  switch (k) {
    case MsgKind::precommit: return "precommit";
    case MsgKind::ready: return "ready";
    case MsgKind::abort_vote: return "abort_vote";
    case MsgKind::commit: return "commit";
    case MsgKind::done: return "done";
    case MsgKind::abort_txn: return "abort";
    case MsgKind::replicate: return "replicate";
    case MsgKind::hb_probe: return "hb_probe";
    case MsgKind::hb_ack: return "hb_ack";
    case MsgKind::hub_forward: return "hub_forward";
    case MsgKind::hub_ack: return "hub_ack";
    case MsgKind::recycle: return "recycle";
    case MsgKind::resume: return "resume";
  }
  return "?";
}

ProtoFlags flags_for(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::sbp: return {true, true, false};
    case ProtocolKind::rbp: return {false, true, true};
    case ProtocolKind::tpc: return {false, false, false};
    case ProtocolKind::hub: return {false, true, false};
  }
  return {};
}

const char* to_string(CoordPhase p) {
  switch (p) {
    case CoordPhase::init: return "init";
    case CoordPhase::precommit_sent: return "precommit_sent";
    case CoordPhase::commit_sent: return "commit_sent";
    case CoordPhase::committed: return "committed";
    case CoordPhase::aborted: return "aborted";
  }
  return "?";
}

const char* to_string(PartPhase p) {
  switch (p) {
    case PartPhase::idle: return "idle";
    case PartPhase::ready: return "ready";
    case PartPhase::applied: return "applied";
    case PartPhase::done_sent: return "done_sent";
    case PartPhase::finished: return "finished";
    case PartPhase::aborted: return "aborted";
  }
  return "?";
}

namespace {

// Shared by abort-vote and exhausted phase-I retries. A transaction with a
// durable leg can only be requeued, never globally aborted.
void abort_or_requeue(CoordState& s, CoordActions& out, std::uint64_t except) {
  out.send_abort = s.participant_mask & ~except;
  s.timer_gen++;
  if (s.never_abort || s.restart_pending) {
    s.phase = CoordPhase::init;
    s.ready_mask = 0;
    s.done_mask = 0;
    s.restart_pending = false;
    out.requeue = true;
  } else {
    s.phase = CoordPhase::aborted;
    out.aborted = true;
  }
}

}  // namespace

CoordActions coordinator_step(CoordState& s, const CoordEvent& ev,
                              std::uint32_t max_attempts) {
  CoordActions out;
  using K = CoordEvent::Kind;
  switch (ev.kind) {
    case K::start:
      if (s.phase != CoordPhase::init) break;
      s.phase = CoordPhase::precommit_sent;
      s.timer_gen++;
      out.send_precommit = s.participant_mask;
      out.schedule_p1_deadline = true;
      break;

    case K::ready:
      if (s.phase == CoordPhase::aborted) {
        // A stale precommit made the participant re-acquire after the
        // global abort; answer with the decision so it releases the lock.
        out.send_abort = chain_bit(ev.from);
        break;
      }
      if (s.phase != CoordPhase::precommit_sent) break;
      s.ready_mask |= chain_bit(ev.from);
      if (s.ready_mask == s.participant_mask) {
        s.phase = CoordPhase::commit_sent;
        s.timer_gen++;
        out.send_commit = s.participant_mask;
        out.schedule_p2_deadline = true;
      }
      break;

    case K::abort_vote:
      if (s.phase != CoordPhase::precommit_sent) break;
      abort_or_requeue(s, out, chain_bit(ev.from));
      break;

    case K::done:
      if (s.phase != CoordPhase::commit_sent) break;
      s.done_mask |= chain_bit(ev.from);
      if (s.done_mask == s.participant_mask) {
        s.timer_gen++;
        if (s.restart_pending) {
          s.phase = CoordPhase::init;
          s.ready_mask = 0;
          s.done_mask = 0;
          s.restart_pending = false;
          out.requeue = true;
        } else {
          s.phase = CoordPhase::committed;
          out.committed = true;
        }
      }
      break;

    case K::deadline:
      if (ev.timer_gen != s.timer_gen) break;  // canceled
      if (s.phase == CoordPhase::precommit_sent) {
        if (s.attempt < max_attempts) {
          s.attempt++;
          out.send_precommit = s.participant_mask & ~s.ready_mask;
          out.schedule_p1_deadline = true;
        } else {
          abort_or_requeue(s, out, 0);
        }
      } else if (s.phase == CoordPhase::commit_sent) {
        s.attempt++;
        out.send_commit = s.participant_mask & ~s.done_mask;
        out.schedule_p2_deadline = true;
      }
      break;

    case K::resume_query: {
      std::uint64_t bit = chain_bit(ev.from);
      if (s.phase == CoordPhase::precommit_sent && !(s.ready_mask & bit))
        out.send_precommit = bit;
      else if (s.phase == CoordPhase::commit_sent && !(s.done_mask & bit))
        out.send_commit = bit;
      else if (s.phase == CoordPhase::aborted)
        out.send_abort = bit;
      break;
    }

    case K::recycle_notice:
      if (s.phase == CoordPhase::precommit_sent ||
          s.phase == CoordPhase::commit_sent) {
        s.restart_pending = true;
        s.never_abort = true;
      } else if (s.phase == CoordPhase::committed) {
        // Reopen: the host clears its committed mark and requeues.
        s.phase = CoordPhase::init;
        s.ready_mask = 0;
        s.done_mask = 0;
        s.never_abort = true;
        out.requeue = true;
      }
      break;
  }
  return out;
}

PartActions participant_step(PartState& s, const PartEvent& ev, ProtoFlags flags) {
  PartActions out;
  using K = PartEvent::Kind;
  switch (ev.kind) {
    case K::precommit:
      if (s.leg_applied || s.leg_final) {
        // Recycled restart of a transaction whose leg is already in. No
        // lock: the update is on-branch and idempotently acknowledged.
        out.send_ready = true;
        if (s.phase == PartPhase::idle) s.phase = PartPhase::ready;
        break;
      }
      switch (s.phase) {
        case PartPhase::idle:
        case PartPhase::aborted:
        // done_sent without an applied leg: the previous attempt's leg was
        // cut after the done went out. Re-acquire from scratch.
        case PartPhase::done_sent:
          if (ev.lock_ok) {
            s.phase = PartPhase::ready;
            s.lock_held = true;
            out.send_ready = true;
            out.replicate = true;
          } else {
            s.phase = PartPhase::idle;
            out.send_abort_vote = true;
          }
          break;
        case PartPhase::ready:
          out.send_ready = true;  // coordinator retry; reply is idempotent
          break;
        default:
          break;
      }
      break;

    case K::commit:
      if (s.leg_final || s.phase == PartPhase::done_sent ||
          s.phase == PartPhase::finished) {
        out.send_done = true;  // duplicate or already durable
        break;
      }
      if (s.phase == PartPhase::applied) break;  // still waiting on finality
      // Normal path (lock held) or the raced recycle path (leg reverted
      // after a no-lock ready; the pending recycle notice restarts it).
      out.do_apply = !s.leg_applied;
      out.replicate = true;
      if (flags.wait_finalize) {
        s.phase = PartPhase::applied;  // done + unlock at finalization
      } else {
        s.phase = PartPhase::done_sent;
        out.send_done = true;
        if (s.lock_held) {
          out.do_unlock = true;
          s.lock_held = false;
        }
      }
      break;

    case K::abort_txn:
      if (s.lock_held) {
        out.do_unlock = true;
        s.lock_held = false;
      }
      // Nothing applied before commit, so nothing to revert.
      if (s.phase == PartPhase::ready || s.phase == PartPhase::idle)
        s.phase = PartPhase::aborted;
      break;

    case K::finalized_local:
      s.leg_final = true;
      if (flags.wait_finalize && s.phase == PartPhase::applied) {
        s.phase = PartPhase::done_sent;
        out.send_done = true;
        if (s.lock_held) {
          out.do_unlock = true;
          s.lock_held = false;
        }
      } else if (s.phase == PartPhase::done_sent) {
        s.phase = PartPhase::finished;
      }
      break;

    case K::cut_detected:
      if (flags.recycle_on_cut && s.leg_applied && !s.leg_final) {
        out.do_revert = true;
        out.send_recycle = true;
        s.leg_applied = false;
        s.phase = PartPhase::idle;
      }
      break;
  }
  return out;
}

bool SlidingWindow::erase(Uuid txn) {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const WindowEntry& e) { return e.txn == txn; });
  if (it == entries_.end()) return false;
  entries_.erase(it);
  return true;
}

WindowEntry* SlidingWindow::find(Uuid txn) {
  for (auto& e : entries_)
    if (e.txn == txn) return &e;
  return nullptr;
}

PoolItem RequestPool::pop_front() {
  PoolItem item = items_.front();
  items_.pop_front();
  return item;
}

bool RequestPool::contains(Uuid txn) const {
  for (const auto& it : items_)
    if (it.txn == txn) return true;
  return false;
}

bool RequestPool::remove(Uuid txn) {
  for (auto it = items_.begin(); it != items_.end(); ++it)
    if (it->txn == txn) {
      items_.erase(it);
      return true;
    }
  return false;
}

}  // namespace cbtsim
