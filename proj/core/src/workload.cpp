#include "cbtsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cbtsim/rng.hpp"

namespace cbtsim {

ChainParams RunConfig::chain_params(std::uint32_t chain) const {
  ChainParams p;
  p.chain = ChainId{chain};
  p.n_nodes = nodes_per_chain;
  p.delta = delta_of(chain);
  p.sigma = sigma_of(chain);
  p.block_interval = block_interval_of(chain);
  p.fork_prob = fork_prob_of(chain);
  p.max_fork_depth = max_fork_depth;
  return p;
}

SimParams RunConfig::sim_params() const {
  SimParams s;
  s.tau = tau;
  s.f = f;
  s.lambda_budget = lambda_budget;
  s.latency_jitter = latency_jitter;
  s.seed = seed;
  s.livelock_cap_per_1k = livelock_cap_per_1k;
  return s;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

Time parse_ms(const std::string& key, const std::string& v) {
  try {
    double d = std::stod(v);
    if (d < 0) throw ConfigError(key + " must be non-negative");
    return static_cast<Time>(d * 1000.0 + 0.5);
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    throw ConfigError("bad duration for " + key + ": " + v);
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    return std::stod(v);
  } catch (...) {
    throw ConfigError("bad number for " + key + ": " + v);
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    if (!v.empty() && v[0] == '-') throw ConfigError(key + " must be non-negative");
    return std::stoull(v);
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    throw ConfigError("bad integer for " + key + ": " + v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean for " + key + ": " + v);
}

// "delta_ms.3" -> ("delta_ms", 3); plain keys get chain 0.
std::pair<std::string, std::uint32_t> split_override(const std::string& key) {
  std::size_t dot = key.rfind('.');
  if (dot == std::string::npos) return {key, 0};
  const std::string suffix = key.substr(dot + 1);
  if (suffix.empty() ||
      suffix.find_first_not_of("0123456789") != std::string::npos)
    return {key, 0};
  return {key.substr(0, dot), static_cast<std::uint32_t>(std::stoul(suffix))};
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");

    auto [base, chain] = split_override(key);
    if (chain > 0) {
      if (base == "delta_ms") cfg.delta_override[chain] = parse_ms(key, val);
      else if (base == "sigma_ms") cfg.sigma_override[chain] = parse_ms(key, val);
      else if (base == "block_interval_ms")
        cfg.block_interval_override[chain] = parse_ms(key, val);
      else if (base == "fork_prob")
        cfg.fork_prob_override[chain] = parse_double(key, val);
      else throw ConfigError("unknown per-chain key: " + key);
      continue;
    }

    if (key == "protocol") {
      if (!protocol_from_string(val, cfg.protocol))
        throw ConfigError("unknown protocol: " + val);
    } else if (key == "n_chains") cfg.n_chains = static_cast<std::uint32_t>(parse_u64(key, val));
    else if (key == "nodes_per_chain") cfg.nodes_per_chain = static_cast<std::uint32_t>(parse_u64(key, val));
    else if (key == "entities_per_chain") cfg.entities_per_chain = static_cast<std::uint32_t>(parse_u64(key, val));
    else if (key == "n_transactions") cfg.n_transactions = parse_u64(key, val);
    else if (key == "legs_per_txn") cfg.legs_per_txn = static_cast<std::uint32_t>(parse_u64(key, val));
    else if (key == "arrival_rate") cfg.arrival_rate = parse_double(key, val);
    else if (key == "seed") cfg.seed = parse_u64(key, val);
    else if (key == "tau_ms") cfg.tau = parse_ms(key, val);
    else if (key == "latency_jitter") cfg.latency_jitter = parse_double(key, val);
    else if (key == "f_ms") cfg.f = parse_ms(key, val);
    else if (key == "lambda_budget") cfg.lambda_budget = static_cast<std::uint32_t>(parse_u64(key, val));
    else if (key == "crash_rate") cfg.crash_rate = parse_double(key, val);
    else if (key == "delta_ms") cfg.delta = parse_ms(key, val);
    else if (key == "sigma_ms") cfg.sigma = parse_ms(key, val);
    else if (key == "block_interval_ms") cfg.block_interval = parse_ms(key, val);
    else if (key == "fork_prob") cfg.fork_prob = parse_double(key, val);
    else if (key == "max_fork_depth") cfg.max_fork_depth = static_cast<std::uint32_t>(parse_u64(key, val));
    else if (key == "hub_capacity") cfg.hub_capacity = static_cast<std::uint32_t>(parse_u64(key, val));
    else if (key == "hub_chain") cfg.hub_chain = static_cast<std::uint32_t>(parse_u64(key, val));
    else if (key == "initial_balance") cfg.initial_balance = static_cast<Amount>(parse_u64(key, val));
    else if (key == "zipf_exponent") cfg.zipf_exponent = parse_double(key, val);
    else if (key == "livelock_cap_per_1k") cfg.livelock_cap_per_1k = parse_u64(key, val);
    else if (key == "literal_delta_wait") cfg.literal_delta_wait = parse_bool(key, val);
    else throw ConfigError("unknown key: " + key);
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void validate(const RunConfig& cfg) {
  if (cfg.n_chains < 2 || cfg.n_chains > kMaxChains)
    throw ConfigError("n_chains must be in [2, 64]");
  if (cfg.nodes_per_chain < 1) throw ConfigError("nodes_per_chain must be >= 1");
  if (cfg.entities_per_chain < 1) throw ConfigError("entities_per_chain must be >= 1");
  if (cfg.legs_per_txn < 2 || cfg.legs_per_txn > cfg.n_chains)
    throw ConfigError("legs_per_txn must be in [2, n_chains]");
  if (cfg.arrival_rate <= 0) throw ConfigError("arrival_rate must be positive");
  if (cfg.tau <= 0) throw ConfigError("tau_ms must be positive");
  if (cfg.f < 0) throw ConfigError("f_ms must be non-negative");
  if (cfg.latency_jitter < 0 || cfg.latency_jitter >= 1)
    throw ConfigError("latency_jitter must be in [0, 1)");
  if (cfg.crash_rate < 0) throw ConfigError("crash_rate must be non-negative");
  if (cfg.hub_chain < 1 || cfg.hub_chain > cfg.n_chains)
    throw ConfigError("hub_chain must name a chain");
  if (cfg.hub_capacity < 1) throw ConfigError("hub_capacity must be >= 1");
  if (cfg.initial_balance < 0) throw ConfigError("initial_balance must be non-negative");
  if (cfg.max_fork_depth < 1) throw ConfigError("max_fork_depth must be >= 1");
  if (cfg.zipf_exponent < 0) throw ConfigError("zipf_exponent must be non-negative");

  for (auto& [k, m] : {std::pair<const char*, const std::map<std::uint32_t, Time>&>{
                           "delta_ms", cfg.delta_override},
                       {"sigma_ms", cfg.sigma_override},
                       {"block_interval_ms", cfg.block_interval_override}}) {
    for (auto& [chain, v] : m) {
      if (chain < 1 || chain > cfg.n_chains)
        throw ConfigError(std::string(k) + " override names chain " +
                          std::to_string(chain) + " outside 1..n_chains");
      (void)v;
    }
  }
  for (auto& [chain, v] : cfg.fork_prob_override) {
    if (chain < 1 || chain > cfg.n_chains)
      throw ConfigError("fork_prob override names chain outside 1..n_chains");
    (void)v;
  }

  Time two_tau = static_cast<Time>(2.0 * static_cast<double>(cfg.tau) *
                                   (1.0 + cfg.latency_jitter));
  for (std::uint32_t c = 1; c <= cfg.n_chains; ++c) {
    Time d = cfg.delta_of(c);
    Time s = cfg.sigma_of(c);
    Time bi = cfg.block_interval_of(c);
    double fp = cfg.fork_prob_of(c);
    if (d <= 0) throw ConfigError("delta_ms must be positive (chain " + std::to_string(c) + ")");
    if (bi <= 0) throw ConfigError("block_interval_ms must be positive (chain " + std::to_string(c) + ")");
    if (fp < 0 || fp >= 1) throw ConfigError("fork_prob must be in [0, 1) (chain " + std::to_string(c) + ")");
    if (s <= 0) throw ConfigError("sigma_ms must be positive (chain " + std::to_string(c) + ")");
    if (s * 10 > d)
      throw ConfigError("sigma_ms must be <= delta_ms / 10 (chain " + std::to_string(c) + ")");
    if (s <= two_tau)
      throw ConfigError("sigma_ms must exceed one round trip, 2*tau*(1+jitter) (chain " +
                        std::to_string(c) + ")");
  }

  if (cfg.protocol == ProtocolKind::tpc) {
    if (cfg.lambda_budget != 0)
      throw ConfigError("tpc baseline requires lambda_budget = 0");
    for (std::uint32_t c = 1; c <= cfg.n_chains; ++c)
      if (cfg.fork_prob_of(c) != 0)
        throw ConfigError("tpc baseline requires fork_prob = 0");
  }
  if (cfg.protocol == ProtocolKind::hub) {
    for (std::uint32_t c = 1; c <= cfg.n_chains; ++c)
      if (cfg.fork_prob_of(c) != 0)
        throw ConfigError("hub baseline requires fork_prob = 0");
  }
}

std::string config_to_text(const RunConfig& cfg) {
  std::ostringstream out;
  auto num = [](double d) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", d);
    return std::string(buf);
  };
  auto dur = [&](Time t) { return num(static_cast<double>(t) / 1000.0); };
  out << "protocol = " << to_string(cfg.protocol) << "\n";
  out << "n_chains = " << cfg.n_chains << "\n";
  out << "nodes_per_chain = " << cfg.nodes_per_chain << "\n";
  out << "entities_per_chain = " << cfg.entities_per_chain << "\n";
  out << "n_transactions = " << cfg.n_transactions << "\n";
  out << "legs_per_txn = " << cfg.legs_per_txn << "\n";
  out << "arrival_rate = " << num(cfg.arrival_rate) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "tau_ms = " << dur(cfg.tau) << "\n";
  out << "latency_jitter = " << num(cfg.latency_jitter) << "\n";
  out << "f_ms = " << dur(cfg.f) << "\n";
  out << "lambda_budget = " << cfg.lambda_budget << "\n";
  out << "crash_rate = " << num(cfg.crash_rate) << "\n";
  out << "delta_ms = " << dur(cfg.delta) << "\n";
  out << "sigma_ms = " << dur(cfg.sigma) << "\n";
  out << "block_interval_ms = " << dur(cfg.block_interval) << "\n";
  out << "fork_prob = " << num(cfg.fork_prob) << "\n";
  out << "max_fork_depth = " << cfg.max_fork_depth << "\n";
  out << "hub_capacity = " << cfg.hub_capacity << "\n";
  out << "hub_chain = " << cfg.hub_chain << "\n";
  out << "initial_balance = " << cfg.initial_balance << "\n";
  out << "zipf_exponent = " << num(cfg.zipf_exponent) << "\n";
  out << "livelock_cap_per_1k = " << cfg.livelock_cap_per_1k << "\n";
  out << "literal_delta_wait = " << (cfg.literal_delta_wait ? "true" : "false") << "\n";
  for (auto& [c, v] : cfg.delta_override) out << "delta_ms." << c << " = " << dur(v) << "\n";
  for (auto& [c, v] : cfg.sigma_override) out << "sigma_ms." << c << " = " << dur(v) << "\n";
  for (auto& [c, v] : cfg.block_interval_override)
    out << "block_interval_ms." << c << " = " << dur(v) << "\n";
  for (auto& [c, v] : cfg.fork_prob_override) out << "fork_prob." << c << " = " << num(v) << "\n";
  return out.str();
}

std::uint64_t config_digest(const RunConfig& cfg) {
  return fnv1a_str(kFnvOffset, config_to_text(cfg));
}

namespace {

// Zipf (or uniform) entity pick via an inverse-CDF table.
class EntityPicker {
 public:
  EntityPicker(std::uint32_t n, double s) : n_(n) {
    if (s <= 0) return;
    cdf_.resize(n);
    double acc = 0;
    for (std::uint32_t r = 0; r < n; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), s);
      cdf_[r] = acc;
    }
    for (auto& v : cdf_) v /= acc;
  }

  std::uint32_t pick(Rng& rng) const {
    if (cdf_.empty()) return static_cast<std::uint32_t>(rng.below(n_));
    double u = rng.unit();
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<std::uint32_t>(it - cdf_.begin());
  }

 private:
  std::uint32_t n_;
  std::vector<double> cdf_;
};

}  // namespace

std::vector<TransactionRequest> generate_workload(const RunConfig& cfg) {
  validate(cfg);
  // Distinct stream from the simulation's RNG so workload shape does not
  // depend on execution order.
  std::uint64_t s = cfg.seed ^ 0xa0761d6478bd642full;
  Rng rng(Rng::splitmix64(s));
  EntityPicker entities(cfg.entities_per_chain, cfg.zipf_exponent);

  std::vector<TransactionRequest> out;
  out.reserve(cfg.n_transactions);
  Time t = 0;
  Time mean_gap = static_cast<Time>(1e6 / cfg.arrival_rate);
  std::vector<std::uint32_t> others;
  for (Uuid k = 1; k <= cfg.n_transactions; ++k) {
    t += rng.exp_time(mean_gap);
    TransactionRequest req;
    req.uuid = k;
    req.submit_time = t;
    std::uint32_t coord = 1 + static_cast<std::uint32_t>(rng.below(cfg.n_chains));
    req.coordinator = ChainId{coord};

    others.clear();
    for (std::uint32_t c = 1; c <= cfg.n_chains; ++c)
      if (c != coord) others.push_back(c);
    // partial Fisher-Yates: first legs-1 entries
    for (std::uint32_t i = 0; i + 1 < cfg.legs_per_txn; ++i) {
      std::uint64_t j = i + rng.below(others.size() - i);
      std::swap(others[i], others[j]);
    }

    Amount total = 0;
    for (std::uint32_t i = 0; i + 1 < cfg.legs_per_txn; ++i) {
      Leg leg;
      leg.chain = ChainId{others[i]};
      leg.entity = EntityId{leg.chain, entities.pick(rng)};
      leg.delta = 1 + static_cast<Amount>(rng.below(100));
      total += leg.delta;
      req.legs.push_back(leg);
    }
    Leg pay;
    pay.chain = req.coordinator;
    pay.entity = EntityId{req.coordinator, entities.pick(rng)};
    pay.delta = -total;
    req.legs.insert(req.legs.begin(), pay);
    out.push_back(std::move(req));
  }
  return out;
}

}  // namespace cbtsim
