#pragma once

#include <cstdint>
#include <queue>
#include <vector>

#include "cbtsim/protocols.hpp"
#include "cbtsim/rng.hpp"
#include "cbtsim/types.hpp"

namespace cbtsim {

struct SimParams {
  Time tau = ms(50);        // one-way network latency
  Time f = ms(1000);        // crash recovery duration
  std::uint32_t lambda_budget = 0;  // max crashes charged to one transaction
  double latency_jitter = 0.0;      // sampled in [tau(1-j), tau(1+j)]
  std::uint64_t seed = 1;
  std::uint64_t livelock_cap_per_1k = 10'000'000;  // events per 1000 txns
};

// Protocol traffic is addressed to a chain and lands at its current proxy;
// node-addressed traffic (replication, heartbeats) waits out a crash at the
// node itself.
struct Envelope {
  std::uint64_t msg_id = 0;
  NodeId from;
  ChainId to_chain;
  std::uint32_t to_node = kToProxy;  // ordinal, or kToProxy
  MsgKind kind = MsgKind::precommit;
  Uuid txn = 0;
  std::uint32_t attempt = 0;
  std::uint32_t epoch = 0;    // heartbeat staleness check
  std::int32_t arg = 0;       // message-specific payload (e.g. commit verdict)

  static constexpr std::uint32_t kToProxy = 0xffffffffu;
};

enum class EvKind : std::uint8_t {
  message_delivery = 1,
  timer_fire = 2,
  node_crash = 3,
  node_recover = 4,
  block_produce = 5,
  workload_arrival = 6,
  heartbeat_tick = 7,
  crash_probe = 8,  // failure-injection opportunity
  pool_retry = 9,   // recycled transaction leaves backoff
};

enum class TimerKind : std::uint8_t {
  coord_deadline = 1,
  leg_final = 2,  // literal fixed-duration wait instead of prefix tracking
};

struct SimEvent {
  Time fire_at = 0;
  std::uint64_t sequence = 0;
  EvKind kind = EvKind::message_delivery;
  Envelope env;             // message_delivery
  ChainId chain;            // timer/block/heartbeat scope
  NodeId node;              // crash/recover target
  Uuid txn = 0;             // timer/arrival/pool subject
  TimerKind timer = TimerKind::coord_deadline;
  std::uint32_t timer_gen = 0;
};

// Min-heap on (fire_at, sequence); sequence is assigned at push so that
// same-instant events run in schedule order.
class EventQueue {
 public:
  void push(SimEvent e) {
    e.sequence = next_seq_++;
    heap_.push_back(e);
    std::push_heap(heap_.begin(), heap_.end(), After{});
  }

  SimEvent pop() {
    std::pop_heap(heap_.begin(), heap_.end(), After{});
    SimEvent e = heap_.back();
    heap_.pop_back();
    return e;
  }

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  std::uint64_t pushed() const { return next_seq_; }

 private:
  struct After {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
      return a.sequence > b.sequence;
    }
  };

  std::vector<SimEvent> heap_;
  std::uint64_t next_seq_ = 0;
};

// Uniform in [tau(1-j), tau(1+j)], integral microseconds, never below 1.
Time sample_latency(Rng& rng, Time tau, double jitter);

}  // namespace cbtsim
