#include "cbtsim/chain_core.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>
#include <unordered_set>

namespace cbtsim {

BlockId compute_block_id(ChainId chain, std::int64_t index, BlockId parent,
                         const std::vector<Uuid>& txns, NodeId producer,
                         Time created_at) {
  std::uint64_t h = kFnvOffset;
  h = fnv1a_u64(h, chain.index);
  h = fnv1a_u64(h, static_cast<std::uint64_t>(index));
  h = fnv1a_u64(h, parent);
  for (Uuid t : txns) h = fnv1a_u64(h, t);
  h = fnv1a_u64(h, producer.chain.index);
  h = fnv1a_u64(h, producer.ordinal);
  // Folding the timestamp in keeps an empty sibling block distinct from
  // the block it competes with.
  h = fnv1a_u64(h, static_cast<std::uint64_t>(created_at));
  // 0 is the genesis-parent marker, never a real id.
  return h ? h : 1;
}

void ForkTree::add_block(Block b) {
  if (blocks_.count(b.block_id))
    throw std::invalid_argument("duplicate block id");
  if (blocks_.empty()) {
    if (b.index != 0 || b.parent != 0)
      throw std::invalid_argument("first block must be genesis");
    genesis_ = b.block_id;
  } else {
    auto it = blocks_.find(b.parent);
    if (it == blocks_.end()) throw std::invalid_argument("unknown parent block");
    if (b.index != it->second.index + 1)
      throw std::invalid_argument("block index must be parent.index + 1");
    auto tip_it = std::find(tips_.begin(), tips_.end(), b.parent);
    if (tip_it != tips_.end()) tips_.erase(tip_it);
  }
  BlockId id = b.block_id;
  blocks_.emplace(id, std::move(b));
  tips_.insert(std::upper_bound(tips_.begin(), tips_.end(), id), id);
}

const Block* ForkTree::find(BlockId id) const {
  auto it = blocks_.find(id);
  return it == blocks_.end() ? nullptr : &it->second;
}

const Block& ForkTree::at(BlockId id) const {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw std::out_of_range("no such block");
  return it->second;
}

BlockId ForkTree::best_tip() const {
  if (blocks_.empty()) throw std::logic_error("empty fork tree");
  BlockId best = 0;
  std::int64_t best_h = -1;
  for (BlockId id : tips_) {  // sorted ascending, so first max wins the tie
    std::int64_t h = at(id).index;
    if (h > best_h) {
      best_h = h;
      best = id;
    }
  }
  return best;
}

std::vector<BlockId> ForkTree::branch_of(BlockId tip) const {
  std::vector<BlockId> path;
  BlockId cur = tip;
  while (true) {
    const Block& b = at(cur);
    path.push_back(cur);
    if (b.parent == 0) break;
    cur = b.parent;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<BlockId> ForkTree::longest_branch() const {
  return branch_of(best_tip());
}

std::int64_t ForkTree::finalized_prefix(Time now, Time delta) const {
  std::int64_t h = kNoneFinalized;
  for (BlockId id : longest_branch()) {
    const Block& b = at(id);
    if (b.created_at <= now - delta)
      h = b.index;
    else
      break;
  }
  return h;
}

bool ForkTree::on_branch(BlockId tip, BlockId id) const {
  const Block* target = find(id);
  if (!target) return false;
  BlockId cur = tip;
  while (true) {
    if (cur == id) return true;
    const Block& b = at(cur);
    if (b.index <= target->index || b.parent == 0) return false;
    cur = b.parent;
  }
}

std::vector<Uuid> ForkTree::exclusive_txns(
    const std::vector<BlockId>& cut_branch) const {
  std::unordered_set<Uuid> on_main;
  for (BlockId id : longest_branch())
    for (Uuid t : at(id).txns) on_main.insert(t);

  std::vector<Uuid> cut;
  std::unordered_set<Uuid> seen;
  for (BlockId id : cut_branch)
    for (Uuid t : at(id).txns)
      if (!on_main.count(t) && seen.insert(t).second) cut.push_back(t);
  return cut;
}

const char* to_string(LedgerError e) {
  switch (e) {
    case LedgerError::ok: return "ok";
    case LedgerError::no_such_entity: return "no_such_entity";
    case LedgerError::insufficient_funds: return "insufficient_funds";
    case LedgerError::lock_held_by_other: return "lock_held_by_other";
    case LedgerError::already_locked: return "already_locked";
    case LedgerError::not_lock_holder: return "not_lock_holder";
  }
  return "?";
}

Amount Ledger::total() const {
  Amount s = 0;
  for (Amount b : balances_) s += b;
  return s;
}

LedgerError Ledger::apply_leg(EntityId entity, Amount delta, Uuid holder) {
  if (!entity_ok(entity)) return LedgerError::no_such_entity;
  Uuid held = locks_[entity.account];
  if (held != kFree && held != holder) return LedgerError::lock_held_by_other;
  if (balances_[entity.account] + delta < 0) return LedgerError::insufficient_funds;
  balances_[entity.account] += delta;
  return LedgerError::ok;
}

LedgerError Ledger::lock(EntityId entity, Uuid holder) {
  if (!entity_ok(entity)) return LedgerError::no_such_entity;
  Uuid& held = locks_[entity.account];
  if (held != kFree && held != holder) return LedgerError::already_locked;
  held = holder;
  return LedgerError::ok;
}

LedgerError Ledger::unlock(EntityId entity, Uuid holder) {
  if (!entity_ok(entity)) return LedgerError::no_such_entity;
  Uuid& held = locks_[entity.account];
  if (held == kFree) return LedgerError::ok;  // idempotent release
  if (held != holder) return LedgerError::not_lock_holder;
  held = kFree;
  return LedgerError::ok;
}

}  // namespace cbtsim
