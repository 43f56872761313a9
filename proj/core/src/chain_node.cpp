#include "cbtsim/chain_node.hpp"

#include <algorithm>
#include <cassert>

namespace cbtsim {

ChainState::ChainState(const ChainParams& p, std::uint32_t entities,
                       Amount initial_balance)
    : params_(p),
      tree_(p.chain),
      ledger_(p.chain, entities, initial_balance),
      pending_credit_(entities, 0),
      down_until_(p.n_nodes, 0),
      last_ack_(p.n_nodes, 0),
      node_parked_(p.n_nodes) {
  Block genesis;
  genesis.chain = p.chain;
  genesis.index = 0;
  genesis.parent = 0;
  genesis.producer = {p.chain, 0};
  genesis.created_at = 0;
  genesis.block_id = compute_block_id(p.chain, 0, 0, {}, genesis.producer, 0);
  tree_.add_block(genesis);
  on_main_.insert(genesis.block_id);
}

std::uint32_t ChainState::smallest_live(Time now) const {
  for (std::uint32_t o = 0; o < params_.n_nodes; ++o)
    if (node_up(o, now)) return o;
  return ProxyState::kNoProxy;
}

void ChainState::note_applied(Uuid txn, EntityId e, Amount delta, Time now) {
  WindowEntry entry;
  entry.txn = txn;
  entry.entity = e;
  entry.delta = delta;
  entry.applied_at = now;
  window_.add(entry);
  if (delta > 0) pending_credit_[e.account] += delta;
}

void ChainState::revert_leg(Uuid txn) {
  WindowEntry* e = window_.find(txn);
  if (!e) return;
  ledger_.force_adjust(e->entity, -e->delta);
  if (e->delta > 0) pending_credit_[e->entity.account] -= e->delta;
  inclusions_.erase(txn);
  window_.erase(txn);
}

void ChainState::retire_leg(Uuid txn, Time) {
  WindowEntry* e = window_.find(txn);
  if (!e) return;
  if (e->delta > 0) pending_credit_[e->entity.account] -= e->delta;
  inclusions_.erase(txn);
  window_.erase(txn);
}

std::int64_t ChainState::divergence_index(BlockId tip) const {
  BlockId cur = tip;
  while (!on_main_.count(cur)) {
    const Block& b = tree_.at(cur);
    if (b.parent == 0) return 0;
    cur = b.parent;
  }
  return tree_.at(cur).index;
}

void ChainState::rebuild_main_set() {
  on_main_.clear();
  for (BlockId id : tree_.longest_branch()) on_main_.insert(id);
}

void ChainState::remap_window_to_main() {
  for (auto& e : window_.entries()) {
    e.block = 0;
    e.block_index = -1;
    auto it = inclusions_.find(e.txn);
    if (it == inclusions_.end()) continue;
    for (BlockId id : it->second) {
      if (on_main_.count(id)) {
        e.block = id;
        e.block_index = tree_.at(id).index;
        break;
      }
    }
  }
}

ProduceResult ChainState::produce_block(Rng& rng, Time now,
                                        std::uint32_t producer) {
  ProduceResult res;
  BlockId main = tree_.best_tip();
  const Block& mb = tree_.at(main);
  std::int64_t prefix = tree_.finalized_prefix(now, params_.delta);

  BlockId parent = main;
  bool fork = false;
  if (params_.fork_prob > 0.0 && rng.chance(params_.fork_prob)) {
    // Prefer extending the tallest competing branch; otherwise start a
    // sibling of the main tip. Never below the finalized prefix, never
    // deeper behind the main tip than max_fork_depth.
    BlockId cand = 0;
    std::int64_t cand_h = -1;
    for (BlockId t : tree_.tips()) {
      if (t == main) continue;
      const Block& tb = tree_.at(t);
      if (mb.index - tb.index > static_cast<std::int64_t>(params_.max_fork_depth))
        continue;
      if (divergence_index(t) < prefix) continue;
      if (tb.index > cand_h) {
        cand_h = tb.index;
        cand = t;
      }
    }
    if (cand != 0) {
      parent = cand;
      fork = true;
    } else if (mb.parent != 0 && mb.index - 1 >= prefix) {
      parent = mb.parent;
      fork = true;
    }
  }

  const Block& pb = tree_.at(parent);
  std::vector<Uuid> txns;
  if (!fork) {
    for (const auto& e : window_.entries())
      if (e.block == 0) txns.push_back(e.txn);
  } else {
    // A fork producer works from the stale view it had at the fork base:
    // legs applied after the parent block was created are absent, which is
    // what strands them on the losing branch.
    for (const auto& e : window_.entries()) {
      if (e.applied_at > pb.created_at) continue;
      auto it = inclusions_.find(e.txn);
      bool on_parent_branch = false;
      if (it != inclusions_.end())
        for (BlockId id : it->second)
          if (tree_.on_branch(parent, id)) {
            on_parent_branch = true;
            break;
          }
      if (!on_parent_branch) txns.push_back(e.txn);
    }
  }

  Block b;
  b.chain = params_.chain;
  b.index = pb.index + 1;
  b.parent = parent;
  b.txns = txns;
  b.producer = {params_.chain, producer};
  b.created_at = now;
  b.block_id =
      compute_block_id(params_.chain, b.index, parent, txns, b.producer, now);
  tree_.add_block(b);
  res.block = b.block_id;
  res.forked = fork;
  for (Uuid t : txns) inclusions_[t].push_back(b.block_id);

  BlockId new_main = tree_.best_tip();
  if (!fork && new_main == b.block_id) {
    on_main_.insert(b.block_id);
    for (auto& e : window_.entries())
      if (e.block == 0) {
        // every pending entry was placed in this block
        e.block = b.block_id;
        e.block_index = b.index;
      }
  } else if (new_main != main) {
    // A competing branch took over (or a tie broke its way).
    res.reorged = true;
    reorgs_++;
    std::vector<Uuid> had_main;
    for (const auto& e : window_.entries())
      if (e.block != 0) had_main.push_back(e.txn);
    rebuild_main_set();
    remap_window_to_main();
    for (Uuid t : had_main) {
      const WindowEntry* e = window_.find(t);
      if (e && e->block == 0) res.cut.push_back(t);
    }
  }
  return res;
}

std::vector<Uuid> ChainState::newly_final(Time now) const {
  std::int64_t prefix = tree_.finalized_prefix(now, params_.delta);
  std::vector<Uuid> out;
  for (const auto& e : window_.entries())
    if (e.block != 0 && e.block_index <= prefix) out.push_back(e.txn);
  return out;
}

const std::vector<BlockId>& ChainState::inclusions_of(Uuid txn) const {
  static const std::vector<BlockId> kEmpty;
  auto it = inclusions_.find(txn);
  return it == inclusions_.end() ? kEmpty : it->second;
}

}  // namespace cbtsim
