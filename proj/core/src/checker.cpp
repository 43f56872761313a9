#include "cbtsim/checker.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

namespace cbtsim {

namespace {

// Leg 0 lives on chain 1, the coordinator's chain; leg 1 on chain 2. The
// local leg is driven by direct calls, the remote one by messages, exactly
// as the simulator routes them.
constexpr ChainId kHome{1};
constexpr ChainId kRemote{2};

// At most one copy of each message kind is ever useful: replies are
// idempotent, so a duplicate delivery is equivalent to a later re-send.
enum MsgBit : std::uint8_t {
  m_precommit = 1 << 0,  // home -> remote
  m_commit = 1 << 1,
  m_abort = 1 << 2,
  m_ready = 1 << 3,  // remote -> home
  m_abort_vote = 1 << 4,
  m_done = 1 << 5,
  m_resume = 1 << 6,
};

constexpr std::uint8_t kToRemote = m_precommit | m_commit | m_abort;

struct MState {
  CoordState coord;
  PartState part[2];
  std::uint8_t armed = 0;  // 0 none, 1 phase-I deadline, 2 phase-II
  std::uint32_t armed_gen = 0;
  std::uint8_t msgs = 0;
  std::uint8_t proxy[2] = {0, 0};
  std::int8_t down[2] = {-1, -1};
  std::uint8_t crashes = 0;
  std::uint8_t fires = 0;
  bool committed = false;
  bool aborted = false;
  bool requeued = false;
};

// A stale armed deadline can never act again, so it is canonicalized away.
std::uint8_t armed_effective(const MState& s) {
  return s.armed_gen == s.coord.timer_gen ? s.armed : 0;
}

std::uint64_t pack_part(const PartState& p) {
  return std::uint64_t(p.phase) | std::uint64_t(p.lock_held) << 3 |
         std::uint64_t(p.leg_applied) << 4 | std::uint64_t(p.leg_final) << 5;
}

std::uint64_t key_of(const MState& s) {
  std::uint64_t k = std::uint64_t(s.coord.phase);
  k |= (s.coord.ready_mask & 3) << 3;
  k |= (s.coord.done_mask & 3) << 5;
  k |= std::uint64_t(std::min<std::uint32_t>(s.coord.attempt, 7)) << 7;
  k |= std::uint64_t(s.coord.restart_pending) << 10;
  k |= std::uint64_t(s.coord.never_abort) << 11;
  k |= std::uint64_t(armed_effective(s)) << 12;
  k |= pack_part(s.part[0]) << 14;
  k |= pack_part(s.part[1]) << 20;
  k |= std::uint64_t(s.msgs) << 26;
  k |= std::uint64_t(s.proxy[0]) << 33;
  k |= std::uint64_t(s.proxy[1]) << 34;
  k |= std::uint64_t(s.down[0] + 1) << 35;
  k |= std::uint64_t(s.down[1] + 1) << 37;
  k |= std::uint64_t(s.crashes) << 39;
  k |= std::uint64_t(s.fires) << 40;
  k |= std::uint64_t(s.committed) << 42;
  k |= std::uint64_t(s.aborted) << 43;
  k |= std::uint64_t(s.requeued) << 44;
  return k;
}

bool proxy_dead(const MState& s, int c) { return s.down[c] == std::int8_t(s.proxy[c]); }

struct Host {
  ProtoFlags flags;
  std::uint32_t max_attempts = 2;
  std::uint8_t fire_cap = 3;

  // Mirrors World::coord_event + apply_coord_actions, with the message
  // queue replaced by bits and the local leg run in-process last.
  void coord_event(MState& s, CoordEvent::Kind kind, ChainId from,
                   std::uint32_t timer_gen = 0) const {
    CoordEvent ev;
    ev.kind = kind;
    ev.from = from;
    ev.timer_gen = timer_gen;
    CoordActions act = coordinator_step(s.coord, ev, max_attempts);
    apply_coord(s, act);
  }

  void apply_coord(MState& s, const CoordActions& act) const {
    std::uint32_t gen = s.coord.timer_gen;
    auto fan = [&](std::uint64_t mask, MsgBit remote_bit,
                   PartEvent::Kind local_kind) {
      if (mask & chain_bit(kRemote)) s.msgs |= remote_bit;
      if (mask & chain_bit(kHome)) part_event(s, 0, local_kind);
    };
    if (act.send_abort) fan(act.send_abort, m_abort, PartEvent::Kind::abort_txn);
    if (act.send_precommit)
      fan(act.send_precommit, m_precommit, PartEvent::Kind::precommit);
    if (act.send_commit) fan(act.send_commit, m_commit, PartEvent::Kind::commit);
    if (act.schedule_p1_deadline) {
      s.armed = 1;
      s.armed_gen = gen;
    }
    if (act.schedule_p2_deadline) {
      s.armed = 2;
      s.armed_gen = gen;
    }
    if (act.committed) s.committed = true;
    if (act.aborted) s.aborted = true;
    if (act.requeue) s.requeued = true;
  }

  // Mirrors the World's host_* entry points: lock acquisition always
  // succeeds (single transaction, no contention) and replication is the
  // assumption that lets per-txn state survive a proxy crash.
  void part_event(MState& s, int leg, PartEvent::Kind kind) const {
    PartEvent ev;
    ev.kind = kind;
    if (kind == PartEvent::Kind::precommit) {
      PartState& p = s.part[leg];
      ev.lock_ok = !p.leg_applied && !p.leg_final &&
                   (p.phase == PartPhase::idle ||
                    p.phase == PartPhase::aborted ||
                    p.phase == PartPhase::done_sent);
    }
    PartActions act = participant_step(s.part[leg], ev, flags);
    apply_part(s, leg, act);
  }

  void apply_part(MState& s, int leg, const PartActions& act) const {
    bool local = (leg == 0);
    if (act.do_apply) s.part[leg].leg_applied = true;
    if (act.do_revert) s.requeued = true;  // unreachable in a fork-free scope
    auto reply = [&](CoordEvent::Kind kind, MsgBit bit) {
      if (local)
        coord_event(s, kind, kHome);
      else
        s.msgs |= bit;
    };
    if (act.send_ready) reply(CoordEvent::Kind::ready, m_ready);
    if (act.send_abort_vote) reply(CoordEvent::Kind::abort_vote, m_abort_vote);
    if (act.send_done) reply(CoordEvent::Kind::done, m_done);
    if (act.send_recycle) s.requeued = true;
  }

  void deliver(MState& s, MsgBit bit) const {
    s.msgs &= ~bit;
    switch (bit) {
      case m_precommit: part_event(s, 1, PartEvent::Kind::precommit); break;
      case m_commit: part_event(s, 1, PartEvent::Kind::commit); break;
      case m_abort: part_event(s, 1, PartEvent::Kind::abort_txn); break;
      case m_ready: coord_event(s, CoordEvent::Kind::ready, kRemote); break;
      case m_abort_vote:
        coord_event(s, CoordEvent::Kind::abort_vote, kRemote);
        break;
      case m_done: coord_event(s, CoordEvent::Kind::done, kRemote); break;
      case m_resume:
        coord_event(s, CoordEvent::Kind::resume_query, kRemote);
        break;
    }
  }
};

bool resolved(const MState& s) { return s.committed || s.aborted; }

struct Labeled {
  MState state;
  const char* action;
};

// Every enabled action from s, in a fixed order. Delivery requires the
// target chain's proxy to be alive; a parked message simply stays pending
// until an election or recovery makes the chain reachable again, which is
// how the simulator's inbox behaves.
std::vector<Labeled> successors(const Host& host, const MState& s,
                                bool allow_crash) {
  std::vector<Labeled> out;
  auto push = [&](MState next, const char* action) {
    out.push_back({next, action});
  };

  static const std::pair<MsgBit, const char*> kMsgs[] = {
      {m_precommit, "deliver precommit"}, {m_commit, "deliver commit"},
      {m_abort, "deliver abort"},         {m_ready, "deliver ready"},
      {m_abort_vote, "deliver abort_vote"}, {m_done, "deliver done"},
      {m_resume, "deliver resume"},
  };
  for (auto [bit, name] : kMsgs) {
    if (!(s.msgs & bit)) continue;
    int target = (bit & kToRemote) ? 1 : 0;
    if (proxy_dead(s, target)) continue;
    MState n = s;
    host.deliver(n, bit);
    push(n, name);
  }

  for (int leg = 0; leg < 2; ++leg) {
    if (!s.part[leg].leg_applied || s.part[leg].leg_final) continue;
    MState n = s;
    host.part_event(n, leg, PartEvent::Kind::finalized_local);
    push(n, leg == 0 ? "finalize local leg" : "finalize remote leg");
  }

  if (armed_effective(s) != 0 && s.fires < host.fire_cap) {
    MState n = s;
    n.fires++;
    std::uint8_t which = n.armed;
    std::uint32_t gen = n.armed_gen;
    n.armed = 0;
    host.coord_event(n, CoordEvent::Kind::deadline, kHome, gen);
    push(n, which == 1 ? "phase-I deadline" : "phase-II deadline");
  }

  for (int c = 0; c < 2; ++c) {
    if (allow_crash && s.crashes == 0) {
      MState n = s;
      n.down[c] = std::int8_t(n.proxy[c]);
      n.crashes = 1;
      push(n, c == 0 ? "crash proxy chain 1" : "crash proxy chain 2");
    }
    if (proxy_dead(s, c)) {
      MState n = s;
      n.proxy[c] = 1 - n.proxy[c];
      // The re-elected proxy re-syncs any transaction still open here, as
      // World::elect does for chains hosting a remote leg.
      if (c == 1 && !resolved(n)) n.msgs |= m_resume;
      push(n, c == 0 ? "elect chain 1" : "elect chain 2");
    }
    if (s.down[c] != -1) {
      MState n = s;
      n.down[c] = -1;
      push(n, c == 0 ? "recover chain 1" : "recover chain 2");
    }
  }
  return out;
}

std::string describe(const MState& s) {
  std::string d = "coord=";
  d += to_string(s.coord.phase);
  d += " ready=" + std::to_string(s.coord.ready_mask);
  d += " done=" + std::to_string(s.coord.done_mask);
  for (int i = 0; i < 2; ++i) {
    d += std::string(" leg") + char('0' + i) + "=";
    d += to_string(s.part[i].phase);
    if (s.part[i].lock_held) d += "+lock";
    if (s.part[i].leg_applied) d += "+applied";
    if (s.part[i].leg_final) d += "+final";
  }
  d += " msgs=" + std::to_string(int(s.msgs));
  d += " down=" + std::to_string(int(s.down[0])) + "," +
       std::to_string(int(s.down[1]));
  if (s.committed) d += " COMMITTED";
  if (s.aborted) d += " ABORTED";
  return d;
}

}  // namespace

CheckStats check_small_scope(ProtocolKind protocol, bool allow_crash) {
  CheckStats st;
  st.crash_explored = allow_crash;
  Host host;
  host.flags = flags_for(protocol);

  MState init;
  init.coord.txn = 1;
  init.coord.participant_mask = chain_bit(kHome) | chain_bit(kRemote);
  for (int i = 0; i < 2; ++i) init.part[i].txn = 1;
  host.coord_event(init, CoordEvent::Kind::start, kHome);

  std::vector<MState> states;
  std::vector<std::uint32_t> parent;
  std::vector<const char*> via;
  std::vector<std::vector<std::uint32_t>> radj;
  std::unordered_map<std::uint64_t, std::uint32_t> index;

  auto intern = [&](const MState& s, std::uint32_t from, const char* action,
                    bool& fresh) {
    auto [it, inserted] = index.try_emplace(key_of(s),
                                            std::uint32_t(states.size()));
    fresh = inserted;
    if (inserted) {
      states.push_back(s);
      parent.push_back(from);
      via.push_back(action);
      radj.emplace_back();
    }
    return it->second;
  };

  auto path_to = [&](std::uint32_t idx) {
    std::vector<const char*> actions;
    for (std::uint32_t i = idx; via[i] != nullptr; i = parent[i])
      actions.push_back(via[i]);
    std::string p = "start";
    for (auto it = actions.rbegin(); it != actions.rend(); ++it) {
      p += " -> ";
      p += *it;
    }
    return p;
  };

  auto fail = [&](std::uint32_t idx, const std::string& what) {
    st.ok = false;
    if (st.failures.size() < 8)
      st.failures.push_back(what + " [" + describe(states[idx]) + "] via " +
                            path_to(idx));
  };

  bool fresh = false;
  intern(init, 0, nullptr, fresh);
  std::deque<std::uint32_t> work{0};
  std::vector<bool> is_dead_end;

  while (!work.empty()) {
    std::uint32_t cur = work.front();
    work.pop_front();
    MState s = states[cur];

    if (s.committed && s.aborted) fail(cur, "committed and aborted at once");
    if (s.requeued) fail(cur, "requeue in a fork-free scope");

    auto next = successors(host, s, allow_crash);
    if (is_dead_end.size() <= cur) is_dead_end.resize(cur + 1, false);
    if (next.empty()) {
      is_dead_end[cur] = true;
      if (!resolved(s)) {
        fail(cur, "dead end without resolution");
      } else {
        st.terminals++;
        if (s.committed) {
          st.committed_terminals++;
          for (int i = 0; i < 2; ++i) {
            if (!s.part[i].leg_applied || !s.part[i].leg_final)
              fail(cur, "committed with an unapplied or unfinalized leg");
          }
        }
        if (s.aborted) {
          st.aborted_terminals++;
          for (int i = 0; i < 2; ++i)
            if (s.part[i].leg_applied)
              fail(cur, "aborted with an applied leg");
        }
        for (int i = 0; i < 2; ++i)
          if (s.part[i].lock_held) fail(cur, "terminal with a held lock");
        if (s.msgs != 0) fail(cur, "terminal with pending messages");
      }
      continue;
    }

    for (auto& [n, action] : next) {
      st.transitions++;
      bool added = false;
      std::uint32_t ni = intern(n, cur, action, added);
      radj[ni].push_back(cur);
      if (added) work.push_back(ni);
    }
  }
  st.states = states.size();

  // Liveness: every state must still be able to reach a resolved state.
  std::vector<bool> reaches(states.size(), false);
  std::deque<std::uint32_t> bfs;
  for (std::uint32_t i = 0; i < states.size(); ++i) {
    if (resolved(states[i])) {
      reaches[i] = true;
      bfs.push_back(i);
    }
  }
  while (!bfs.empty()) {
    std::uint32_t cur = bfs.front();
    bfs.pop_front();
    for (std::uint32_t p : radj[cur]) {
      if (!reaches[p]) {
        reaches[p] = true;
        bfs.push_back(p);
      }
    }
  }
  for (std::uint32_t i = 0; i < states.size(); ++i)
    if (!reaches[i]) fail(i, "no path to a resolved state");

  return st;
}

}  // namespace cbtsim
