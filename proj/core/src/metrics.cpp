#include "cbtsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace cbtsim {

DerivedBounds derived_bounds(const RunConfig& cfg) {
  DerivedBounds b;
  b.n_chains = cfg.n_chains;
  b.total_nodes = std::uint64_t(cfg.n_chains) * cfg.nodes_per_chain;
  for (std::uint32_t c = 1; c <= cfg.n_chains; ++c) {
    Time d = cfg.delta_of(c);
    Time s = cfg.sigma_of(c);
    b.delta_sup = std::max(b.delta_sup, d);
    b.delta_inf = (c == 1) ? d : std::min(b.delta_inf, d);
    b.sigma_sup = std::max(b.sigma_sup, s);
  }
  return b;
}

static std::uint64_t lambda_factor(const TxnRecord& t) {
  return std::max<std::uint64_t>(1, std::uint64_t(t.lambda1) + t.lambda2);
}

std::uint64_t message_bound(const TxnRecord& t, const DerivedBounds& b) {
  return 4 * lambda_factor(t) * b.total_nodes;
}

bool check_message_bound(const TxnRecord& t, const DerivedBounds& b) {
  return t.messages_total <= message_bound(t, b);
}

Time latency_bound(const TxnRecord& t, const DerivedBounds& b, Time tau_max,
                   Time f, Time block_interval_max) {
  return 4 * tau_max + Time(lambda_factor(t)) * (f + b.delta_sup) +
         2 * block_interval_max;
}

bool check_latency_bound(const TxnRecord& t, const DerivedBounds& b,
                         Time tau_max, Time f, Time block_interval_max) {
  if (!t.committed) return true;
  return t.latency() <= latency_bound(t, b, tau_max, f, block_interval_max);
}

static void note_violation(BoundCheckSummary& s, std::string line) {
  s.violations++;
  if (s.details.size() < 16) s.details.push_back(std::move(line));
}

BoundCheckSummary check_all_message_bounds(const RunTrace& trace,
                                           const DerivedBounds& b) {
  BoundCheckSummary s;
  for (const TxnRecord& t : trace.txns) {
    s.checked++;
    if (!check_message_bound(t, b))
      note_violation(s, "txn " + std::to_string(t.uuid) + ": messages " +
                            std::to_string(t.messages_total) + " > bound " +
                            std::to_string(message_bound(t, b)));
  }
  return s;
}

BoundCheckSummary check_all_latency_bounds(const RunTrace& trace,
                                           const DerivedBounds& b) {
  BoundCheckSummary s;
  Time tau_max = trace.summary.tau_max_sampled;
  for (const TxnRecord& t : trace.txns) {
    if (!t.committed) continue;
    s.checked++;
    if (!check_latency_bound(t, b, tau_max, trace.f, trace.block_interval_max))
      note_violation(
          s, "txn " + std::to_string(t.uuid) + ": latency " +
                 std::to_string(t.latency()) + "us > bound " +
                 std::to_string(latency_bound(t, b, tau_max, trace.f,
                                              trace.block_interval_max)) +
                 "us");
  }
  return s;
}

double poisson_failure_prob(double lambda, std::uint32_t k) {
  if (lambda <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (k <= 20) {
    double p = std::exp(-lambda);
    for (std::uint32_t i = 1; i <= k; ++i) p *= lambda / double(i);
    return p;
  }
  double logp =
      double(k) * std::log(lambda) - lambda - std::lgamma(double(k) + 1.0);
  return std::exp(logp);
}

double window_throughput(std::size_t entries, Time delta) {
  if (delta <= 0) return 0.0;
  return double(entries) * double(kMicrosPerSecond) / double(delta);
}

namespace {

struct ChainView {
  std::unordered_set<Uuid> on_main;
  std::unordered_set<Uuid> finalized;
};

void add_violation(AuditReport& rep, bool AuditReport::*flag,
                   std::string line) {
  rep.*flag = false;
  if (rep.violations.size() < 64) rep.violations.push_back(std::move(line));
}

}  // namespace

AuditReport audit_acid(const RunTrace& trace) {
  AuditReport rep;

  std::vector<ChainView> views(trace.chains.size());
  Amount total = 0;
  for (std::size_t i = 0; i < trace.chains.size(); ++i) {
    const ChainRecord& c = trace.chains[i];
    for (const BlockRecord& blk : c.main_branch) {
      for (Uuid u : blk.txns) {
        views[i].on_main.insert(u);
        if (blk.index <= c.finalized_prefix) views[i].finalized.insert(u);
      }
    }
    for (std::size_t a = 0; a < c.balances.size(); ++a) {
      total += c.balances[a];
      if (c.balances[a] < 0)
        add_violation(rep, &AuditReport::consistency,
                      "chain " + std::to_string(c.chain) + " account " +
                          std::to_string(a) + " negative balance " +
                          std::to_string(c.balances[a]));
    }
  }
  if (total != trace.initial_total)
    add_violation(rep, &AuditReport::consistency,
                  "balance total " + std::to_string(total) +
                      " != initial total " +
                      std::to_string(trace.initial_total));

  for (const TxnRecord& t : trace.txns) {
    std::string tag = "txn " + std::to_string(t.uuid);

    if (t.committed && t.aborted)
      add_violation(rep, &AuditReport::atomicity,
                    tag + ": marked both committed and aborted");
    if (!t.committed && !t.aborted)
      add_violation(rep, &AuditReport::atomicity,
                    tag + ": not terminal at end of run");

    std::size_t present = 0;
    for (const Leg& leg : t.legs) {
      std::size_t ci = leg.chain.idx();
      if (ci < views.size() && views[ci].on_main.count(t.uuid)) present++;
    }
    if (t.committed) {
      if (present != t.legs.size())
        add_violation(rep, &AuditReport::atomicity,
                      tag + ": committed but only " + std::to_string(present) +
                          "/" + std::to_string(t.legs.size()) +
                          " legs on final main branches");
      for (const Leg& leg : t.legs) {
        std::size_t ci = leg.chain.idx();
        if (ci >= views.size() || !views[ci].finalized.count(t.uuid))
          add_violation(rep, &AuditReport::durability,
                        tag + ": committed leg on chain " +
                            std::to_string(leg.chain.index) +
                            " outside finalized prefix");
      }
    } else if (present != 0) {
      add_violation(rep, &AuditReport::atomicity,
                    tag + ": not committed but " + std::to_string(present) +
                        " legs on final main branches");
    }

    if (trace.protocol == ProtocolKind::sbp && t.committed && t.recycles != 0)
      add_violation(rep, &AuditReport::consistency,
                    tag + ": committed after " + std::to_string(t.recycles) +
                        " recycles under wait-for-finality");

    if (std::uint64_t(t.lambda1) + t.lambda2 > trace.lambda_budget)
      add_violation(rep, &AuditReport::consistency,
                    tag + ": charged failures exceed budget " +
                        std::to_string(trace.lambda_budget));
  }

  for (const std::string& v : trace.lock_violations)
    add_violation(rep, &AuditReport::isolation, "lock: " + v);

  return rep;
}

LatencyStats latency_stats(const RunTrace& trace) {
  LatencyStats st;
  std::vector<Time> lat;
  lat.reserve(trace.txns.size());
  double sum = 0.0;
  for (const TxnRecord& t : trace.txns) {
    if (!t.committed) continue;
    lat.push_back(t.latency());
    sum += double(t.latency());
  }
  if (lat.empty()) return st;
  std::sort(lat.begin(), lat.end());
  auto rank = [&](double p) {
    std::size_t r = std::size_t(std::ceil(p * double(lat.size())));
    return lat[r == 0 ? 0 : r - 1];
  };
  st.count = lat.size();
  st.min = lat.front();
  st.max = lat.back();
  st.median = rank(0.50);
  st.p99 = rank(0.99);
  st.mean = sum / double(lat.size());
  return st;
}

double committed_throughput(const RunTrace& trace) {
  if (trace.summary.makespan <= 0) return 0.0;
  return double(trace.summary.committed) * double(kMicrosPerSecond) /
         double(trace.summary.makespan);
}

double idle_heartbeat_fraction(const RunTrace& trace) {
  std::uint64_t idle = 0;
  for (const ChainRecord& c : trace.chains) idle += c.idle_heartbeats;
  std::uint64_t protocol = 0;
  for (int k = 0; k < 16; ++k) {
    if (k == int(MsgKind::hb_probe) || k == int(MsgKind::hb_ack)) continue;
    protocol += trace.summary.messages_by_kind[k];
  }
  if (protocol == 0) return 0.0;
  return double(idle) / double(protocol);
}

ChainRates chain_rates(const ChainRecord& chain, Time t_lo, Time t_hi) {
  ChainRates r;
  if (t_hi <= t_lo) return r;
  std::uint64_t legs = 0;
  for (const FinalizedLeg& fl : chain.finalized_legs)
    if (fl.at >= t_lo && fl.at < t_hi) legs++;
  r.measured =
      double(legs) * double(kMicrosPerSecond) / double(t_hi - t_lo);
  std::uint64_t n = 0;
  double occupancy = 0.0;
  for (const WindowSample& ws : chain.window_samples) {
    if (ws.at < t_lo || ws.at >= t_hi) continue;
    occupancy += double(ws.size);
    n++;
  }
  if (n > 0 && chain.delta > 0)
    r.estimated = (occupancy / double(n)) * double(kMicrosPerSecond) /
                  double(chain.delta);
  return r;
}

}  // namespace cbtsim
