#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "cbtsim/types.hpp"

namespace cbtsim {

// One per-chain slice of a cross-chain transfer.
struct Leg {
  ChainId chain;
  EntityId entity;
  Amount delta = 0;
};

// A multi-chain transfer. Legs reference at least two distinct chains, at
// most one leg per chain, and deltas sum to zero.
struct TransactionRequest {
  Uuid uuid = 0;
  ChainId coordinator;
  std::vector<Leg> legs;
  Time submit_time = 0;

  const Leg* leg_on(ChainId c) const {
    for (const auto& l : legs)
      if (l.chain == c) return &l;
    return nullptr;
  }
};

struct Block {
  ChainId chain;
  std::int64_t index = 0;  // genesis is 0
  BlockId parent = 0;      // 0 marks genesis
  std::vector<Uuid> txns;
  NodeId producer;
  Time created_at = 0;
  BlockId block_id = 0;
};

BlockId compute_block_id(ChainId chain, std::int64_t index, BlockId parent,
                         const std::vector<Uuid>& txns, NodeId producer,
                         Time created_at);

// Sentinel for "no block finalized yet".
constexpr std::int64_t kNoneFinalized = -1;

// Per-chain block DAG. All blocks reach genesis; the main chain is the
// longest root-to-tip path, ties broken by smaller tip block id.
class ForkTree {
 public:
  ForkTree() = default;
  explicit ForkTree(ChainId chain) : chain_(chain) {}

  ChainId chain() const { return chain_; }
  bool empty() const { return blocks_.empty(); }
  std::size_t size() const { return blocks_.size(); }

  // Genesis must be added first; every other block's parent must exist and
  // the index must be parent.index + 1.
  void add_block(Block b);

  const Block* find(BlockId id) const;
  const Block& at(BlockId id) const;

  const std::vector<BlockId>& tips() const { return tips_; }

  // Tip of the main chain: maximal height, then smaller block id.
  BlockId best_tip() const;

  // Root-to-tip path of the main chain.
  std::vector<BlockId> longest_branch() const;

  // Root-to-tip path ending at `tip`.
  std::vector<BlockId> branch_of(BlockId tip) const;

  // Largest index h such that every main-branch block with index <= h has
  // created_at <= now - delta; kNoneFinalized if none qualifies.
  std::int64_t finalized_prefix(Time now, Time delta) const;

  // True if `id` lies on the lineage of `tip` (inclusive).
  bool on_branch(BlockId tip, BlockId id) const;

  // Txns present on `cut_branch` blocks but absent from the main branch.
  // Order follows first appearance on the cut branch.
  std::vector<Uuid> exclusive_txns(const std::vector<BlockId>& cut_branch) const;

 private:
  ChainId chain_;
  std::unordered_map<BlockId, Block> blocks_;
  std::vector<BlockId> tips_;  // kept sorted by id for determinism
  BlockId genesis_ = 0;
};

enum class LedgerError {
  ok,
  no_such_entity,
  insufficient_funds,
  lock_held_by_other,
  already_locked,
  not_lock_holder,
};

const char* to_string(LedgerError e);

// Balances and per-entity locks for one chain. Balances never go negative;
// a locked entity is only touched by the lock holder.
class Ledger {
 public:
  Ledger() = default;
  Ledger(ChainId chain, std::uint32_t n_entities, Amount initial_balance)
      : chain_(chain),
        balances_(n_entities, initial_balance),
        locks_(n_entities, kFree) {}

  ChainId chain() const { return chain_; }
  std::uint32_t entities() const { return static_cast<std::uint32_t>(balances_.size()); }

  Amount balance(EntityId e) const { return balances_[e.account]; }
  Amount total() const;
  bool is_locked(EntityId e) const { return locks_[e.account] != kFree; }
  Uuid lock_holder(EntityId e) const { return locks_[e.account]; }

  // Balance adjustment by the lock holder (or on a free entity).
  LedgerError apply_leg(EntityId entity, Amount delta, Uuid holder);

  // Fork-resolution rollback; ignores locks. Callers guarantee the result
  // stays non-negative (cut credits were never spendable).
  void force_adjust(EntityId entity, Amount delta) {
    balances_[entity.account] += delta;
  }

  LedgerError lock(EntityId entity, Uuid holder);
  // Unlock of an already-free entity by the same uuid is a no-op.
  LedgerError unlock(EntityId entity, Uuid holder);

  bool entity_ok(EntityId e) const {
    return e.chain == chain_ && e.account < balances_.size();
  }

 private:
  static constexpr Uuid kFree = 0;

  ChainId chain_;
  std::vector<Amount> balances_;
  std::vector<Uuid> locks_;
};

}  // namespace cbtsim
