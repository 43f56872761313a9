#include "doctest.h"

#include "cbtsim/chain_core.hpp"
#include "cbtsim/chain_node.hpp"
#include "cbtsim/rng.hpp"

using namespace cbtsim;

namespace {

constexpr ChainId kChain{1};

Block make_block(const ForkTree& t, std::int64_t index, BlockId parent,
                 std::vector<Uuid> txns, Time at, std::uint32_t producer = 0) {
  Block b;
  b.chain = t.chain();
  b.index = index;
  b.parent = parent;
  b.txns = std::move(txns);
  b.producer = {t.chain(), producer};
  b.created_at = at;
  b.block_id = compute_block_id(b.chain, b.index, b.parent, b.txns, b.producer,
                                b.created_at);
  return b;
}

ForkTree with_genesis(Time at = 0) {
  ForkTree t(kChain);
  t.add_block(make_block(t, 0, 0, {}, at));
  return t;
}

}  // namespace

TEST_CASE("block ids are deterministic and content-sensitive") {
  ForkTree t = with_genesis();
  BlockId g = t.best_tip();
  CHECK(g == compute_block_id(kChain, 0, 0, {}, {kChain, 0}, 0));
  CHECK(g != compute_block_id(kChain, 0, 0, {}, {kChain, 1}, 0));
  CHECK(g != compute_block_id(kChain, 0, 0, {7}, {kChain, 0}, 0));
  CHECK(g != compute_block_id(ChainId{2}, 0, 0, {}, {ChainId{2}, 0}, 0));
  CHECK(g != compute_block_id(kChain, 0, 0, {}, {kChain, 0}, 1));
}

TEST_CASE("fork tree tracks the longest branch") {
  ForkTree t = with_genesis();
  BlockId g = t.best_tip();

  Block b1 = make_block(t, 1, g, {1}, 100);
  Block b2 = make_block(t, 2, b1.block_id, {2}, 200);
  t.add_block(b1);
  t.add_block(b2);
  CHECK(t.best_tip() == b2.block_id);
  CHECK(t.longest_branch() ==
        std::vector<BlockId>{g, b1.block_id, b2.block_id});

  // A shorter fork from genesis does not displace the taller branch.
  Block f1 = make_block(t, 1, g, {3}, 150, 1);
  t.add_block(f1);
  CHECK(t.best_tip() == b2.block_id);
  CHECK(t.tips().size() == 2);

  // Growing the fork strictly past the main tip reorgs to it.
  Block f2 = make_block(t, 2, f1.block_id, {4}, 250, 1);
  Block f3 = make_block(t, 3, f2.block_id, {5}, 350, 1);
  t.add_block(f2);
  t.add_block(f3);
  CHECK(t.best_tip() == f3.block_id);
  CHECK(t.longest_branch() ==
        std::vector<BlockId>{g, f1.block_id, f2.block_id, f3.block_id});

  CHECK(t.on_branch(f3.block_id, f1.block_id));
  CHECK(t.on_branch(f3.block_id, g));
  CHECK(!t.on_branch(f3.block_id, b1.block_id));
  CHECK(t.branch_of(b2.block_id) ==
        std::vector<BlockId>{g, b1.block_id, b2.block_id});
}

TEST_CASE("equal-height tip ties break toward the smaller block id") {
  ForkTree t = with_genesis();
  BlockId g = t.best_tip();
  Block a = make_block(t, 1, g, {1}, 100, 0);
  Block b = make_block(t, 1, g, {2}, 100, 1);
  t.add_block(a);
  t.add_block(b);
  CHECK(t.best_tip() == std::min(a.block_id, b.block_id));
}

TEST_CASE("finalized prefix is the oldest fully aged main-branch segment") {
  ForkTree t = with_genesis(0);
  BlockId g = t.best_tip();
  Block b1 = make_block(t, 1, g, {}, 100'000);
  Block b2 = make_block(t, 2, b1.block_id, {}, 200'000);
  t.add_block(b1);
  t.add_block(b2);

  const Time delta = 250'000;
  CHECK(t.finalized_prefix(0, delta) == kNoneFinalized);
  CHECK(t.finalized_prefix(249'999, delta) == kNoneFinalized);
  CHECK(t.finalized_prefix(250'000, delta) == 0);
  CHECK(t.finalized_prefix(349'999, delta) == 0);
  CHECK(t.finalized_prefix(350'000, delta) == 1);
  CHECK(t.finalized_prefix(450'000, delta) == 2);
}

TEST_CASE("exclusive txns are those only the cut branch carried") {
  // The cut branch leads until the sibling overtakes it; txns it shares
  // with the survivor are safe, the rest are exclusive to the cut.
  ForkTree t = with_genesis();
  BlockId g = t.best_tip();
  Block cut1 = make_block(t, 1, g, {1, 2}, 100, 1);
  Block cut2 = make_block(t, 2, cut1.block_id, {3}, 200, 1);
  Block main1 = make_block(t, 1, g, {1}, 100, 0);
  Block main2 = make_block(t, 2, main1.block_id, {}, 200, 0);
  Block main3 = make_block(t, 3, main2.block_id, {}, 300, 0);
  for (const Block& b : {cut1, cut2, main1, main2, main3}) t.add_block(b);
  REQUIRE(t.best_tip() == main3.block_id);

  auto ex = t.exclusive_txns({g, cut1.block_id, cut2.block_id});
  CHECK(ex == std::vector<Uuid>{2, 3});
}

TEST_CASE("ledger applies deltas under lock discipline") {
  Ledger l(kChain, 4, 1000);
  EntityId e0{kChain, 0};
  EntityId e1{kChain, 1};

  CHECK(l.total() == 4000);
  CHECK(l.apply_leg(e0, -400, 7) == LedgerError::ok);
  CHECK(l.balance(e0) == 600);
  CHECK(l.apply_leg(e0, -601, 7) == LedgerError::insufficient_funds);
  CHECK(l.balance(e0) == 600);

  CHECK(l.lock(e1, 7) == LedgerError::ok);
  CHECK(l.is_locked(e1));
  CHECK(l.lock_holder(e1) == 7);
  CHECK(l.lock(e1, 7) == LedgerError::ok);  // reentrant for the holder
  CHECK(l.lock(e1, 9) == LedgerError::already_locked);
  CHECK(l.apply_leg(e1, 50, 9) == LedgerError::lock_held_by_other);
  CHECK(l.apply_leg(e1, 50, 7) == LedgerError::ok);

  CHECK(l.unlock(e1, 9) == LedgerError::not_lock_holder);
  CHECK(l.unlock(e1, 7) == LedgerError::ok);
  CHECK(l.unlock(e1, 7) == LedgerError::ok);  // idempotent release
  CHECK(!l.is_locked(e1));

  CHECK(l.apply_leg({kChain, 99}, 1, 7) == LedgerError::no_such_entity);
  CHECK(l.lock({ChainId{2}, 0}, 7) == LedgerError::no_such_entity);

  CHECK(l.total() == 4000 - 400 + 50);  // conservation is the caller's job
}

TEST_CASE("pending credits stay unspendable until the leg retires") {
  ChainParams p;
  p.chain = kChain;
  p.n_nodes = 1;
  ChainState c(p, 2, 1000);
  EntityId e0{kChain, 0};

  REQUIRE(c.ledger().apply_leg(e0, 300, 5) == LedgerError::ok);
  c.note_applied(5, e0, 300, 10);
  CHECK(c.ledger().balance(e0) == 1300);
  CHECK(c.available(0) == 1000);
  CHECK(c.window().size() == 1);

  SUBCASE("retire releases the credit") {
    c.retire_leg(5, 20);
    CHECK(c.available(0) == 1300);
    CHECK(c.window().empty());
  }
  SUBCASE("revert rolls the balance back") {
    c.revert_leg(5);
    CHECK(c.ledger().balance(e0) == 1000);
    CHECK(c.available(0) == 1000);
    CHECK(c.window().empty());
  }
  SUBCASE("debits never create pending credit") {
    REQUIRE(c.ledger().apply_leg(e0, -200, 6) == LedgerError::ok);
    c.note_applied(6, e0, -200, 12);
    CHECK(c.available(0) == 800);
    c.revert_leg(6);
    CHECK(c.available(0) == 1000);
  }
}

TEST_CASE("produced blocks drain the mempool and can fork") {
  ChainParams p;
  p.chain = kChain;
  p.n_nodes = 2;
  p.block_interval = 100'000;
  p.fork_prob = 0.0;
  ChainState c(p, 2, 1000);
  Rng rng(42);

  // Genesis comes with the chain; the first produced block is index 1.
  ProduceResult g = c.produce_block(rng, 0, 0);
  CHECK(g.block != 0);
  CHECK(!g.forked);
  CHECK(c.blocks_total() == 2);

  c.note_applied(1, {kChain, 0}, 10, 50'000);
  ProduceResult r1 = c.produce_block(rng, 100'000, 0);
  CHECK(c.tree().at(r1.block).txns == std::vector<Uuid>{1});
  CHECK(c.inclusions_of(1) == std::vector<BlockId>{r1.block});
  CHECK(c.window().find(1)->block == r1.block);

  // Fully forced forking reorgs once a side branch overtakes the main one.
  ChainParams fp = p;
  fp.fork_prob = 1.0;
  ChainState f(fp, 2, 1000);
  f.produce_block(rng, 0, 0);
  f.produce_block(rng, 100'000, 0);
  bool saw_fork = false, saw_reorg = false;
  for (int i = 2; i < 10; ++i) {
    ProduceResult r = f.produce_block(rng, i * 100'000, 0);
    saw_fork |= r.forked;
    saw_reorg |= r.reorged;
  }
  CHECK(saw_fork);
  CHECK(saw_reorg);
  CHECK(f.reorgs() > 0);
}
