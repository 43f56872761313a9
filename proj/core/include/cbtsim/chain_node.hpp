#pragma once

#include <cstdint>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cbtsim/chain_core.hpp"
#include "cbtsim/protocols.hpp"
#include "cbtsim/rng.hpp"
#include "cbtsim/sim_kernel.hpp"
#include "cbtsim/types.hpp"

namespace cbtsim {

struct ChainParams {
  ChainId chain;
  std::uint32_t n_nodes = 1;
  Time delta = seconds(2);       // age after which main-branch blocks are final
  Time sigma = ms(150);          // heartbeat probe interval
  Time block_interval = ms(100);
  double fork_prob = 0.0;
  std::uint32_t max_fork_depth = 4;
};

struct ProxyState {
  static constexpr std::uint32_t kNoProxy = 0xffffffffu;
  std::uint32_t current = 0;  // ordinal; kNoProxy while none is qualified
  std::uint32_t epoch = 0;    // bumped at each re-election
};

struct ProduceResult {
  BlockId block = 0;      // 0 when production was skipped (no live node)
  bool forked = false;    // extended a non-main parent
  bool reorged = false;   // the main branch switched lineage
  std::vector<Uuid> cut;  // legs that lost their only main-branch inclusion
};

// One blockchain of the consortium: block tree, working ledger, the window
// of applied-but-unfinalized legs, proxy role, and parked deliveries.
// Protocol decisions live elsewhere; this layer only reports what happened.
class ChainState {
 public:
  ChainState() = default;
  ChainState(const ChainParams& p, std::uint32_t entities, Amount initial_balance);

  const ChainParams& params() const { return params_; }
  ChainId id() const { return params_.chain; }
  ForkTree& tree() { return tree_; }
  const ForkTree& tree() const { return tree_; }
  Ledger& ledger() { return ledger_; }
  const Ledger& ledger() const { return ledger_; }
  SlidingWindow& window() { return window_; }
  const SlidingWindow& window() const { return window_; }
  ProxyState& proxy() { return proxy_; }
  const ProxyState& proxy() const { return proxy_; }

  bool node_up(std::uint32_t ordinal, Time now) const {
    return down_until_[ordinal] <= now;
  }
  void set_down(std::uint32_t ordinal, Time until) { down_until_[ordinal] = until; }
  bool proxy_live(Time now) const {
    return proxy_.current != ProxyState::kNoProxy && node_up(proxy_.current, now);
  }
  // Smallest live ordinal, or kNoProxy when the whole chain is down.
  std::uint32_t smallest_live(Time now) const;

  std::vector<Envelope>& inbox() { return inbox_; }
  std::vector<Envelope>& node_parked(std::uint32_t ordinal) {
    return node_parked_[ordinal];
  }
  std::vector<Time>& last_ack() { return last_ack_; }

  // Funds that exist in the working balance but came from legs whose blocks
  // are not yet final; they cannot be spent until then, so reverting a cut
  // credit can never drive a balance negative.
  Amount available(std::uint32_t account) const {
    return ledger_.balance({params_.chain, account}) - pending_credit_[account];
  }

  // Called by the host right after a successful apply_leg.
  void note_applied(Uuid txn, EntityId e, Amount delta, Time now);
  // Reorg rollback of an applied, unfinalized leg. Bypasses entity locks.
  void revert_leg(Uuid txn);
  // Finalization retirement: the leg's block is inside the finalized prefix.
  void retire_leg(Uuid txn, Time now);

  ProduceResult produce_block(Rng& rng, Time now, std::uint32_t producer);

  // Window entries whose main-branch block just entered the finalized
  // prefix. The host steps the protocol machines, then calls retire_leg.
  std::vector<Uuid> newly_final(Time now) const;

  std::int64_t finalized_prefix(Time now) const {
    return tree_.finalized_prefix(now, params_.delta);
  }

  std::uint64_t reorgs() const { return reorgs_; }
  std::uint64_t blocks_total() const { return tree_.size(); }
  const std::vector<BlockId>& inclusions_of(Uuid txn) const;

 private:
  std::int64_t divergence_index(BlockId tip) const;
  void rebuild_main_set();
  void remap_window_to_main();

  ChainParams params_;
  ForkTree tree_;
  Ledger ledger_;
  SlidingWindow window_;
  ProxyState proxy_;
  std::vector<Amount> pending_credit_;  // by account
  std::unordered_map<Uuid, std::vector<BlockId>> inclusions_;
  std::unordered_set<BlockId> on_main_;
  std::vector<Time> down_until_;
  std::vector<Time> last_ack_;  // per prober ordinal
  std::vector<Envelope> inbox_;  // chain-addressed, parked while proxyless
  std::vector<std::vector<Envelope>> node_parked_;
  std::uint64_t reorgs_ = 0;
};

}  // namespace cbtsim
