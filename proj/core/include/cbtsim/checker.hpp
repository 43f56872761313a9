#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbtsim/protocols.hpp"

namespace cbtsim {

// Exhaustive small-scope exploration: two chains of two nodes, one
// two-leg transaction, every message-delivery interleaving, and (when
// allow_crash) one proxy crash injected at every reachable position,
// with re-election and recovery interleaved freely. Drives the same
// coordinator_step / participant_step the simulator uses, through a host
// that mirrors the simulator's dispatch.
//
// Checked over the full reachable graph:
//  - safety: never committed and aborted at once, never a requeue in this
//    fork-free scope
//  - every dead-end state is a clean terminal: resolved, both legs applied
//    and finalized (committed) or untouched (aborted), no lock held, no
//    message pending
//  - liveness: every reachable state can still reach a resolved state; a
//    blocked proxy always has an election or recovery action enabled, so
//    the blocking window stays bounded by the detection timeout
struct CheckStats {
  std::uint64_t states = 0;
  std::uint64_t transitions = 0;
  std::uint64_t terminals = 0;  // distinct clean dead-end states
  std::uint64_t committed_terminals = 0;
  std::uint64_t aborted_terminals = 0;
  bool ok = true;
  std::vector<std::string> failures;  // counterexample traces, first few

  bool crash_explored = false;
};

CheckStats check_small_scope(ProtocolKind protocol, bool allow_crash);

}  // namespace cbtsim
