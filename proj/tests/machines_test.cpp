#include "doctest.h"

#include "cbtsim/protocols.hpp"

using namespace cbtsim;

namespace {

constexpr ChainId kA{1};
constexpr ChainId kB{2};

CoordState coord_two() {
  CoordState s;
  s.txn = 1;
  s.participant_mask = chain_bit(kA) | chain_bit(kB);
  return s;
}

CoordEvent cev(CoordEvent::Kind k, ChainId from = {}, std::uint32_t gen = 0) {
  CoordEvent e;
  e.kind = k;
  e.from = from;
  e.timer_gen = gen;
  return e;
}

PartEvent pev(PartEvent::Kind k, bool lock_ok = false) {
  PartEvent e;
  e.kind = k;
  e.lock_ok = lock_ok;
  return e;
}

}  // namespace

TEST_CASE("coordinator drives the two-phase happy path") {
  CoordState s = coord_two();

  CoordActions a = coordinator_step(s, cev(CoordEvent::Kind::start), 1);
  CHECK(a.send_precommit == s.participant_mask);
  CHECK(a.schedule_p1_deadline);
  CHECK(s.phase == CoordPhase::precommit_sent);

  a = coordinator_step(s, cev(CoordEvent::Kind::ready, kA), 1);
  CHECK(a.send_commit == 0);
  a = coordinator_step(s, cev(CoordEvent::Kind::ready, kB), 1);
  CHECK(a.send_commit == s.participant_mask);
  CHECK(a.schedule_p2_deadline);
  CHECK(s.phase == CoordPhase::commit_sent);

  a = coordinator_step(s, cev(CoordEvent::Kind::done, kB), 1);
  CHECK(!a.committed);
  a = coordinator_step(s, cev(CoordEvent::Kind::done, kA), 1);
  CHECK(a.committed);
  CHECK(s.phase == CoordPhase::committed);

  // Duplicate start after leaving init is ignored.
  a = coordinator_step(s, cev(CoordEvent::Kind::start), 1);
  CHECK(a.send_precommit == 0);
}

TEST_CASE("duplicate ready votes are idempotent") {
  CoordState s = coord_two();
  coordinator_step(s, cev(CoordEvent::Kind::start), 1);
  coordinator_step(s, cev(CoordEvent::Kind::ready, kA), 1);
  CoordActions a = coordinator_step(s, cev(CoordEvent::Kind::ready, kA), 1);
  CHECK(a.send_commit == 0);
  CHECK(s.phase == CoordPhase::precommit_sent);
}

TEST_CASE("one abort vote aborts everyone else") {
  CoordState s = coord_two();
  coordinator_step(s, cev(CoordEvent::Kind::start), 1);
  coordinator_step(s, cev(CoordEvent::Kind::ready, kA), 1);
  CoordActions a = coordinator_step(s, cev(CoordEvent::Kind::abort_vote, kB), 1);
  CHECK(a.aborted);
  CHECK(a.send_abort == chain_bit(kA));  // the voter already knows
  CHECK(s.phase == CoordPhase::aborted);

  // Votes arriving after the decision change nothing.
  a = coordinator_step(s, cev(CoordEvent::Kind::abort_vote, kA), 1);
  CHECK(!a.aborted);
  CHECK(a.send_abort == 0);
}

TEST_CASE("a ready reaching an aborted coordinator gets the decision back") {
  CoordState s = coord_two();
  coordinator_step(s, cev(CoordEvent::Kind::start), 1);
  coordinator_step(s, cev(CoordEvent::Kind::abort_vote, kB), 1);
  REQUIRE(s.phase == CoordPhase::aborted);

  // A stale precommit retry can re-acquire the lock on the participant; the
  // answering abort is what releases it.
  CoordActions a = coordinator_step(s, cev(CoordEvent::Kind::ready, kA), 1);
  CHECK(a.send_abort == chain_bit(kA));
  CHECK(s.phase == CoordPhase::aborted);
}

TEST_CASE("phase-one deadline retries then gives up at the attempt budget") {
  CoordState s = coord_two();
  coordinator_step(s, cev(CoordEvent::Kind::start), 2);
  coordinator_step(s, cev(CoordEvent::Kind::ready, kA), 2);
  std::uint32_t gen = s.timer_gen;

  CoordActions a = coordinator_step(s, cev(CoordEvent::Kind::deadline, {}, gen), 2);
  CHECK(a.send_precommit == chain_bit(kB));  // only the silent chain
  CHECK(a.schedule_p1_deadline);
  CHECK(s.attempt == 2);

  a = coordinator_step(s, cev(CoordEvent::Kind::deadline, {}, gen), 2);
  CHECK(a.aborted);
  CHECK(a.send_abort == s.participant_mask);
  CHECK(s.phase == CoordPhase::aborted);
}

TEST_CASE("stale deadlines are ignored after a phase change") {
  CoordState s = coord_two();
  coordinator_step(s, cev(CoordEvent::Kind::start), 1);
  std::uint32_t p1_gen = s.timer_gen;
  coordinator_step(s, cev(CoordEvent::Kind::ready, kA), 1);
  coordinator_step(s, cev(CoordEvent::Kind::ready, kB), 1);
  REQUIRE(s.phase == CoordPhase::commit_sent);

  CoordActions a = coordinator_step(s, cev(CoordEvent::Kind::deadline, {}, p1_gen), 1);
  CHECK(a.send_precommit == 0);
  CHECK(a.send_commit == 0);
  CHECK(!a.aborted);
}

TEST_CASE("phase-two deadlines repush the commit without an attempt cap") {
  CoordState s = coord_two();
  coordinator_step(s, cev(CoordEvent::Kind::start), 1);
  coordinator_step(s, cev(CoordEvent::Kind::ready, kA), 1);
  coordinator_step(s, cev(CoordEvent::Kind::ready, kB), 1);
  coordinator_step(s, cev(CoordEvent::Kind::done, kA), 1);

  for (int i = 0; i < 5; ++i) {
    CoordActions a =
        coordinator_step(s, cev(CoordEvent::Kind::deadline, {}, s.timer_gen), 1);
    CHECK(a.send_commit == chain_bit(kB));
    CHECK(a.schedule_p2_deadline);
  }
  CHECK(s.phase == CoordPhase::commit_sent);
}

TEST_CASE("resume queries restate the current phase to one chain") {
  CoordState s = coord_two();
  coordinator_step(s, cev(CoordEvent::Kind::start), 1);

  CoordActions a = coordinator_step(s, cev(CoordEvent::Kind::resume_query, kB), 1);
  CHECK(a.send_precommit == chain_bit(kB));

  coordinator_step(s, cev(CoordEvent::Kind::ready, kA), 1);
  coordinator_step(s, cev(CoordEvent::Kind::ready, kB), 1);
  a = coordinator_step(s, cev(CoordEvent::Kind::resume_query, kB), 1);
  CHECK(a.send_commit == chain_bit(kB));

  // A chain that already answered is not re-prodded.
  coordinator_step(s, cev(CoordEvent::Kind::done, kB), 1);
  a = coordinator_step(s, cev(CoordEvent::Kind::resume_query, kB), 1);
  CHECK(a.send_commit == 0);
}

TEST_CASE("a recycle notice forces a restart instead of an abort") {
  SUBCASE("mid phase one: restart happens at the abort point") {
    CoordState s = coord_two();
    coordinator_step(s, cev(CoordEvent::Kind::start), 1);
    coordinator_step(s, cev(CoordEvent::Kind::recycle_notice, kB), 1);
    CHECK(s.restart_pending);
    CHECK(s.never_abort);

    CoordActions a = coordinator_step(s, cev(CoordEvent::Kind::abort_vote, kA), 1);
    CHECK(a.requeue);
    CHECK(!a.aborted);
    CHECK(s.phase == CoordPhase::init);
  }
  SUBCASE("mid phase two: restart happens once all dones are in") {
    CoordState s = coord_two();
    coordinator_step(s, cev(CoordEvent::Kind::start), 1);
    coordinator_step(s, cev(CoordEvent::Kind::ready, kA), 1);
    coordinator_step(s, cev(CoordEvent::Kind::ready, kB), 1);
    coordinator_step(s, cev(CoordEvent::Kind::recycle_notice, kB), 1);
    coordinator_step(s, cev(CoordEvent::Kind::done, kA), 1);
    CoordActions a = coordinator_step(s, cev(CoordEvent::Kind::done, kB), 1);
    CHECK(a.requeue);
    CHECK(!a.committed);
    CHECK(s.phase == CoordPhase::init);
  }
  SUBCASE("after commit: the transaction reopens") {
    CoordState s = coord_two();
    coordinator_step(s, cev(CoordEvent::Kind::start), 1);
    coordinator_step(s, cev(CoordEvent::Kind::ready, kA), 1);
    coordinator_step(s, cev(CoordEvent::Kind::ready, kB), 1);
    coordinator_step(s, cev(CoordEvent::Kind::done, kA), 1);
    coordinator_step(s, cev(CoordEvent::Kind::done, kB), 1);
    REQUIRE(s.phase == CoordPhase::committed);

    CoordActions a = coordinator_step(s, cev(CoordEvent::Kind::recycle_notice, kB), 1);
    CHECK(a.requeue);
    CHECK(s.phase == CoordPhase::init);
    CHECK(s.never_abort);

    // With a durable leg out there, exhausted retries requeue forever
    // rather than abort.
    coordinator_step(s, cev(CoordEvent::Kind::start), 1);
    a = coordinator_step(s, cev(CoordEvent::Kind::deadline, {}, s.timer_gen), 1);
    CHECK(a.requeue);
    CHECK(!a.aborted);
  }
}

TEST_CASE("participant votes ready only when the lock is granted") {
  ProtoFlags rbp = flags_for(ProtocolKind::rbp);

  PartState s;
  s.txn = 1;
  PartActions a = participant_step(s, pev(PartEvent::Kind::precommit, true), rbp);
  CHECK(a.send_ready);
  CHECK(a.replicate);
  CHECK(s.lock_held);
  CHECK(s.phase == PartPhase::ready);

  // Coordinator retry: answer again, no second replication.
  a = participant_step(s, pev(PartEvent::Kind::precommit, true), rbp);
  CHECK(a.send_ready);
  CHECK(!a.replicate);

  PartState denied;
  denied.txn = 2;
  a = participant_step(denied, pev(PartEvent::Kind::precommit, false), rbp);
  CHECK(a.send_abort_vote);
  CHECK(!denied.lock_held);
  CHECK(denied.phase == PartPhase::idle);
}

TEST_CASE("participant commit path differs by finality handling") {
  SUBCASE("immediate done when finality is not awaited") {
    ProtoFlags rbp = flags_for(ProtocolKind::rbp);
    PartState s;
    s.txn = 1;
    participant_step(s, pev(PartEvent::Kind::precommit, true), rbp);
    PartActions a = participant_step(s, pev(PartEvent::Kind::commit), rbp);
    CHECK(a.do_apply);
    CHECK(a.send_done);
    CHECK(a.do_unlock);
    CHECK(a.replicate);
    CHECK(s.phase == PartPhase::done_sent);
    CHECK(!s.lock_held);

    s.leg_final = true;
    a = participant_step(s, pev(PartEvent::Kind::finalized_local), rbp);
    CHECK(s.phase == PartPhase::finished);
  }
  SUBCASE("done waits for local finality when it is awaited") {
    ProtoFlags sbp = flags_for(ProtocolKind::sbp);
    PartState s;
    s.txn = 1;
    participant_step(s, pev(PartEvent::Kind::precommit, true), sbp);
    PartActions a = participant_step(s, pev(PartEvent::Kind::commit), sbp);
    CHECK(a.do_apply);
    CHECK(!a.send_done);
    CHECK(!a.do_unlock);
    CHECK(s.phase == PartPhase::applied);
    CHECK(s.lock_held);

    // Commit retries while waiting stay silent; the lock outlives them.
    s.leg_applied = true;
    a = participant_step(s, pev(PartEvent::Kind::commit), sbp);
    CHECK(!a.send_done);
    CHECK(!a.do_apply);

    a = participant_step(s, pev(PartEvent::Kind::finalized_local), sbp);
    CHECK(a.send_done);
    CHECK(a.do_unlock);
    CHECK(s.phase == PartPhase::done_sent);
    CHECK(!s.lock_held);
    CHECK(s.leg_final);
  }
}

TEST_CASE("abort releases the lock and nothing else") {
  ProtoFlags rbp = flags_for(ProtocolKind::rbp);
  PartState s;
  s.txn = 1;
  participant_step(s, pev(PartEvent::Kind::precommit, true), rbp);
  PartActions a = participant_step(s, pev(PartEvent::Kind::abort_txn), rbp);
  CHECK(a.do_unlock);
  CHECK(!a.do_revert);
  CHECK(s.phase == PartPhase::aborted);
  CHECK(!s.lock_held);

  // A later precommit (recycled restart) can re-acquire from aborted.
  a = participant_step(s, pev(PartEvent::Kind::precommit, true), rbp);
  CHECK(a.send_ready);
  CHECK(s.phase == PartPhase::ready);
}

TEST_CASE("cut legs revert and recycle only under the recycling protocol") {
  PartEvent cut = pev(PartEvent::Kind::cut_detected);

  PartState r;
  r.txn = 1;
  r.phase = PartPhase::done_sent;
  r.leg_applied = true;
  PartActions a = participant_step(r, cut, flags_for(ProtocolKind::rbp));
  CHECK(a.do_revert);
  CHECK(a.send_recycle);
  CHECK(!r.leg_applied);
  CHECK(r.phase == PartPhase::idle);

  PartState s;
  s.txn = 2;
  s.phase = PartPhase::applied;
  s.leg_applied = true;
  a = participant_step(s, cut, flags_for(ProtocolKind::sbp));
  CHECK(!a.do_revert);
  CHECK(!a.send_recycle);
  CHECK(s.leg_applied);  // re-inclusion is the block producer's job

  // A finalized leg can no longer be cut.
  PartState f;
  f.txn = 3;
  f.phase = PartPhase::done_sent;
  f.leg_applied = true;
  f.leg_final = true;
  a = participant_step(f, cut, flags_for(ProtocolKind::rbp));
  CHECK(!a.do_revert);
}

TEST_CASE("an applied or final leg answers a restarted precommit without locking") {
  ProtoFlags rbp = flags_for(ProtocolKind::rbp);
  PartState s;
  s.txn = 1;
  s.phase = PartPhase::done_sent;
  s.leg_applied = true;
  PartActions a = participant_step(s, pev(PartEvent::Kind::precommit, false), rbp);
  CHECK(a.send_ready);
  CHECK(!a.replicate);
  CHECK(!s.lock_held);

  // And a duplicate commit just re-acknowledges.
  a = participant_step(s, pev(PartEvent::Kind::commit), rbp);
  CHECK(a.send_done);
  CHECK(!a.do_apply);
}

TEST_CASE("protocol flag table matches the protocol contracts") {
  CHECK(flags_for(ProtocolKind::sbp).wait_finalize);
  CHECK(flags_for(ProtocolKind::sbp).failover);
  CHECK(!flags_for(ProtocolKind::sbp).recycle_on_cut);

  CHECK(!flags_for(ProtocolKind::rbp).wait_finalize);
  CHECK(flags_for(ProtocolKind::rbp).failover);
  CHECK(flags_for(ProtocolKind::rbp).recycle_on_cut);

  CHECK(!flags_for(ProtocolKind::tpc).wait_finalize);
  CHECK(!flags_for(ProtocolKind::tpc).failover);
  CHECK(!flags_for(ProtocolKind::tpc).recycle_on_cut);

  CHECK(!flags_for(ProtocolKind::hub).wait_finalize);
  CHECK(flags_for(ProtocolKind::hub).failover);
  CHECK(!flags_for(ProtocolKind::hub).recycle_on_cut);

  ProtocolKind k;
  CHECK(protocol_from_string("2pc", k));
  CHECK(k == ProtocolKind::tpc);
  CHECK(!protocol_from_string("nope", k));
}
