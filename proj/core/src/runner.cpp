#include "cbtsim/runner.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "cbtsim/world.hpp"

namespace cbtsim {

using json = nlohmann::ordered_json;

DerivedBounds derived_bounds_from_trace(const RunTrace& trace) {
  DerivedBounds b;
  b.n_chains = std::uint32_t(trace.chains.size());
  for (std::size_t i = 0; i < trace.chains.size(); ++i) {
    const ChainRecord& c = trace.chains[i];
    b.total_nodes += c.n_nodes;
    b.delta_sup = std::max(b.delta_sup, c.delta);
    b.delta_inf = (i == 0) ? c.delta : std::min(b.delta_inf, c.delta);
  }
  return b;
}

static void evaluate_into(ResultRecord& rec) {
  const RunTrace& tr = rec.trace;
  rec.audit = audit_acid(tr);
  DerivedBounds b = derived_bounds_from_trace(tr);
  if (tr.protocol == ProtocolKind::sbp || tr.protocol == ProtocolKind::rbp)
    rec.message_bounds = check_all_message_bounds(tr, b);
  if (tr.protocol == ProtocolKind::sbp)
    rec.latency_bounds = check_all_latency_bounds(tr, b);
  rec.latency = latency_stats(tr);
  rec.throughput_tx_s = committed_throughput(tr);
  rec.idle_heartbeat_frac = idle_heartbeat_fraction(tr);
}

ResultRecord run_experiment(const RunConfig& cfg) {
  validate(cfg);
  ResultRecord rec;
  rec.config_text = config_to_text(cfg);
  rec.config_digest = config_digest(cfg);
  World w(cfg);
  w.submit(generate_workload(cfg));
  rec.trace = w.run();
  evaluate_into(rec);
  return rec;
}

std::vector<ResultRecord> run_scaling(
    const RunConfig& base, const std::vector<std::uint32_t>& counts,
    const std::vector<ProtocolKind>& protocols) {
  std::vector<ResultRecord> out;
  out.reserve(counts.size() * protocols.size());
  for (std::uint32_t n : counts) {
    for (ProtocolKind p : protocols) {
      RunConfig cfg = base;
      cfg.n_chains = n;
      cfg.protocol = p;
      cfg.arrival_rate = base.arrival_rate * double(n);
      out.push_back(run_experiment(cfg));
    }
  }
  return out;
}

ResultRecord evaluate_trace(const RunTrace& trace) {
  ResultRecord rec;
  rec.config_digest = trace.config_digest;
  rec.trace = trace;
  evaluate_into(rec);
  return rec;
}

// ------------------------------------------------------------- serialization

namespace {

json summary_json(const RunSummary& s) {
  json by_kind = json::array();
  for (int k = 0; k < 16; ++k) by_kind.push_back(s.messages_by_kind[k]);
  return json{{"trace_hash", s.trace_hash},
              {"events", s.events},
              {"makespan_us", s.makespan},
              {"tau_max_sampled_us", s.tau_max_sampled},
              {"messages_by_kind", std::move(by_kind)},
              {"crash_injections", s.crash_injections},
              {"crash_refused", s.crash_refused},
              {"livelock", s.livelock},
              {"committed", s.committed},
              {"aborted", s.aborted}};
}

json txn_json(const TxnRecord& t) {
  json legs = json::array();
  for (const Leg& l : t.legs)
    legs.push_back(json{{"chain", l.chain.index},
                        {"account", l.entity.account},
                        {"delta", l.delta}});
  return json{{"uuid", t.uuid},
              {"coordinator", t.coordinator},
              {"legs", std::move(legs)},
              {"submit_us", t.submit_time},
              {"committed", t.committed},
              {"aborted", t.aborted},
              {"commit_us", t.commit_time},
              {"abort_us", t.abort_time},
              {"lambda1", t.lambda1},
              {"lambda2", t.lambda2},
              {"recycles", t.recycles},
              {"attempts", t.attempts},
              {"messages_total", t.messages_total},
              {"messages_attempt_max", t.messages_attempt_max},
              {"messages_phase1", t.messages_phase1},
              {"messages_phase2", t.messages_phase2}};
}

json chain_json(const ChainRecord& c) {
  json blocks = json::array();
  for (const BlockRecord& b : c.main_branch)
    blocks.push_back(json{{"index", b.index},
                          {"block_id", b.block_id},
                          {"created_us", b.created_at},
                          {"txns", b.txns}});
  json legs = json::array();
  for (const FinalizedLeg& f : c.finalized_legs)
    legs.push_back(json{{"txn", f.txn}, {"at_us", f.at}});
  json samples = json::array();
  for (const WindowSample& w : c.window_samples)
    samples.push_back(json{{"at_us", w.at}, {"size", w.size}});
  return json{{"chain", c.chain},
              {"n_nodes", c.n_nodes},
              {"delta_us", c.delta},
              {"balances", c.balances},
              {"main_branch", std::move(blocks)},
              {"finalized_prefix", c.finalized_prefix},
              {"blocks_total", c.blocks_total},
              {"reorgs", c.reorgs},
              {"finalized_legs", std::move(legs)},
              {"window_samples", std::move(samples)},
              {"idle_heartbeats", c.idle_heartbeats},
              {"blocked_heartbeats", c.blocked_heartbeats}};
}

json trace_json(const RunTrace& tr) {
  json txns = json::array();
  for (const TxnRecord& t : tr.txns) txns.push_back(txn_json(t));
  json chains = json::array();
  for (const ChainRecord& c : tr.chains) chains.push_back(chain_json(c));
  return json{{"config_digest", tr.config_digest},
              {"protocol", to_string(tr.protocol)},
              {"seed", tr.seed},
              {"initial_total", tr.initial_total},
              {"lambda_budget", tr.lambda_budget},
              {"tau_us", tr.tau},
              {"f_us", tr.f},
              {"block_interval_max_us", tr.block_interval_max},
              {"summary", summary_json(tr.summary)},
              {"txns", std::move(txns)},
              {"chains", std::move(chains)},
              {"lock_violations", tr.lock_violations}};
}

json audit_json(const AuditReport& a) {
  return json{{"atomicity", a.atomicity},
              {"consistency", a.consistency},
              {"isolation", a.isolation},
              {"durability", a.durability},
              {"violations", a.violations}};
}

json bounds_json(const BoundCheckSummary& b) {
  return json{{"checked", b.checked},
              {"violations", b.violations},
              {"details", b.details}};
}

json stats_json(const ResultRecord& r) {
  return json{{"throughput_tx_s", r.throughput_tx_s},
              {"idle_heartbeat_fraction", r.idle_heartbeat_frac},
              {"latency_us", json{{"count", r.latency.count},
                                  {"min", r.latency.min},
                                  {"median", r.latency.median},
                                  {"p99", r.latency.p99},
                                  {"max", r.latency.max},
                                  {"mean", r.latency.mean}}}};
}

ConfigError malformed(const std::string& what) {
  return ConfigError("malformed result document: " + what);
}

template <typename T>
T field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw malformed(std::string("missing key ") + key);
  return it->template get<T>();
}

RunSummary parse_summary(const json& j) {
  RunSummary s;
  s.trace_hash = field<std::uint64_t>(j, "trace_hash");
  s.events = field<std::uint64_t>(j, "events");
  s.makespan = field<Time>(j, "makespan_us");
  s.tau_max_sampled = field<Time>(j, "tau_max_sampled_us");
  auto kinds = field<std::vector<std::uint64_t>>(j, "messages_by_kind");
  if (kinds.size() != 16) throw malformed("messages_by_kind size");
  for (int k = 0; k < 16; ++k) s.messages_by_kind[k] = kinds[k];
  s.crash_injections = field<std::uint64_t>(j, "crash_injections");
  s.crash_refused = field<std::uint64_t>(j, "crash_refused");
  s.livelock = field<bool>(j, "livelock");
  s.committed = field<std::uint64_t>(j, "committed");
  s.aborted = field<std::uint64_t>(j, "aborted");
  return s;
}

TxnRecord parse_txn(const json& j) {
  TxnRecord t;
  t.uuid = field<Uuid>(j, "uuid");
  t.coordinator = field<std::uint32_t>(j, "coordinator");
  for (const json& lj : j.at("legs")) {
    Leg l;
    l.chain.index = field<std::uint32_t>(lj, "chain");
    l.entity.chain = l.chain;
    l.entity.account = field<std::uint32_t>(lj, "account");
    l.delta = field<Amount>(lj, "delta");
    t.legs.push_back(l);
  }
  t.submit_time = field<Time>(j, "submit_us");
  t.committed = field<bool>(j, "committed");
  t.aborted = field<bool>(j, "aborted");
  t.commit_time = field<Time>(j, "commit_us");
  t.abort_time = field<Time>(j, "abort_us");
  t.lambda1 = field<std::uint32_t>(j, "lambda1");
  t.lambda2 = field<std::uint32_t>(j, "lambda2");
  t.recycles = field<std::uint32_t>(j, "recycles");
  t.attempts = field<std::uint32_t>(j, "attempts");
  t.messages_total = field<std::uint64_t>(j, "messages_total");
  t.messages_attempt_max = field<std::uint64_t>(j, "messages_attempt_max");
  t.messages_phase1 = field<std::uint64_t>(j, "messages_phase1");
  t.messages_phase2 = field<std::uint64_t>(j, "messages_phase2");
  return t;
}

ChainRecord parse_chain(const json& j) {
  ChainRecord c;
  c.chain = field<std::uint32_t>(j, "chain");
  c.n_nodes = field<std::uint32_t>(j, "n_nodes");
  c.delta = field<Time>(j, "delta_us");
  c.balances = field<std::vector<Amount>>(j, "balances");
  for (const json& bj : j.at("main_branch")) {
    BlockRecord b;
    b.index = field<std::int64_t>(bj, "index");
    b.block_id = field<BlockId>(bj, "block_id");
    b.created_at = field<Time>(bj, "created_us");
    b.txns = field<std::vector<Uuid>>(bj, "txns");
    c.main_branch.push_back(std::move(b));
  }
  c.finalized_prefix = field<std::int64_t>(j, "finalized_prefix");
  c.blocks_total = field<std::uint64_t>(j, "blocks_total");
  c.reorgs = field<std::uint64_t>(j, "reorgs");
  for (const json& fj : j.at("finalized_legs"))
    c.finalized_legs.push_back(
        {field<Uuid>(fj, "txn"), field<Time>(fj, "at_us")});
  for (const json& wj : j.at("window_samples"))
    c.window_samples.push_back(
        {field<Time>(wj, "at_us"), field<std::uint32_t>(wj, "size")});
  c.idle_heartbeats = field<std::uint64_t>(j, "idle_heartbeats");
  c.blocked_heartbeats = field<std::uint64_t>(j, "blocked_heartbeats");
  return c;
}

RunTrace parse_trace(const json& j) {
  RunTrace tr;
  tr.config_digest = field<std::uint64_t>(j, "config_digest");
  if (!protocol_from_string(field<std::string>(j, "protocol"), tr.protocol))
    throw malformed("unknown protocol");
  tr.seed = field<std::uint64_t>(j, "seed");
  tr.initial_total = field<Amount>(j, "initial_total");
  tr.lambda_budget = field<std::uint32_t>(j, "lambda_budget");
  tr.tau = field<Time>(j, "tau_us");
  tr.f = field<Time>(j, "f_us");
  tr.block_interval_max = field<Time>(j, "block_interval_max_us");
  tr.summary = parse_summary(j.at("summary"));
  for (const json& tj : j.at("txns")) tr.txns.push_back(parse_txn(tj));
  for (const json& cj : j.at("chains")) tr.chains.push_back(parse_chain(cj));
  tr.lock_violations = field<std::vector<std::string>>(j, "lock_violations");
  return tr;
}

AuditReport parse_audit(const json& j) {
  AuditReport a;
  a.atomicity = field<bool>(j, "atomicity");
  a.consistency = field<bool>(j, "consistency");
  a.isolation = field<bool>(j, "isolation");
  a.durability = field<bool>(j, "durability");
  a.violations = field<std::vector<std::string>>(j, "violations");
  return a;
}

BoundCheckSummary parse_bounds(const json& j) {
  BoundCheckSummary b;
  b.checked = field<std::uint64_t>(j, "checked");
  b.violations = field<std::uint64_t>(j, "violations");
  b.details = field<std::vector<std::string>>(j, "details");
  return b;
}

}  // namespace

std::string serialize_result(const ResultRecord& rec) {
  json doc{{"schema", "cbtsim-result-v1"},
           {"config_digest", rec.config_digest},
           {"config", rec.config_text},
           {"audit", audit_json(rec.audit)},
           {"bounds", json{{"message", bounds_json(rec.message_bounds)},
                           {"latency", bounds_json(rec.latency_bounds)}}},
           {"stats", stats_json(rec)},
           {"trace", trace_json(rec.trace)}};
  return doc.dump(1) + "\n";
}

ResultRecord parse_result(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw malformed(e.what());
  }
  try {
    ResultRecord rec;
    if (doc.contains("trace")) {
      rec.config_digest = field<std::uint64_t>(doc, "config_digest");
      rec.config_text = field<std::string>(doc, "config");
      rec.trace = parse_trace(doc.at("trace"));
      rec.audit = parse_audit(doc.at("audit"));
      rec.message_bounds = parse_bounds(doc.at("bounds").at("message"));
      rec.latency_bounds = parse_bounds(doc.at("bounds").at("latency"));
      const json& st = doc.at("stats");
      rec.throughput_tx_s = field<double>(st, "throughput_tx_s");
      rec.idle_heartbeat_frac = field<double>(st, "idle_heartbeat_fraction");
      const json& lj = st.at("latency_us");
      rec.latency.count = field<std::uint64_t>(lj, "count");
      rec.latency.min = field<Time>(lj, "min");
      rec.latency.median = field<Time>(lj, "median");
      rec.latency.p99 = field<Time>(lj, "p99");
      rec.latency.max = field<Time>(lj, "max");
      rec.latency.mean = field<double>(lj, "mean");
      return rec;
    }
    // Bare trace document: rebuild the verdicts from scratch.
    return evaluate_trace(parse_trace(doc));
  } catch (const json::exception& e) {
    throw malformed(e.what());
  }
}

std::string txn_csv(const RunTrace& trace) {
  std::string out =
      "uuid,protocol,latency_ms,messages,lambda1,lambda2,recycles,committed\n";
  const char* proto = to_string(trace.protocol);
  char buf[64];
  for (const TxnRecord& t : trace.txns) {
    out += std::to_string(t.uuid);
    out += ',';
    out += proto;
    out += ',';
    if (t.committed) {
      std::snprintf(buf, sizeof buf, "%.3f",
                    double(t.latency()) / double(kMicrosPerMilli));
      out += buf;
    }
    out += ',';
    out += std::to_string(t.messages_total);
    out += ',';
    out += std::to_string(t.lambda1);
    out += ',';
    out += std::to_string(t.lambda2);
    out += ',';
    out += std::to_string(t.recycles);
    out += ',';
    out += t.committed ? '1' : '0';
    out += '\n';
  }
  return out;
}

double loglog_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [x, y] : points) {
    double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double n = double(points.size());
  double denom = n * sxx - sx * sx;
  if (denom == 0.0) return 0.0;
  return (n * sxy - sx * sy) / denom;
}

}  // namespace cbtsim
