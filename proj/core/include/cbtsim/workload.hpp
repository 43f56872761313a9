#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbtsim/chain_core.hpp"
#include "cbtsim/chain_node.hpp"
#include "cbtsim/protocols.hpp"
#include "cbtsim/sim_kernel.hpp"
#include "cbtsim/types.hpp"

namespace cbtsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key = value config. Durations are *_ms keys (fractions allowed) and
// stored as integral microseconds. Per-chain overrides use a .N suffix,
// e.g. "delta_ms.2 = 5000". Unknown keys are errors.
struct RunConfig {
  ProtocolKind protocol = ProtocolKind::sbp;
  std::uint32_t n_chains = 3;
  std::uint32_t nodes_per_chain = 3;
  std::uint32_t entities_per_chain = 200;
  std::uint64_t n_transactions = 1000;
  std::uint32_t legs_per_txn = 2;
  double arrival_rate = 200.0;  // transactions per second
  std::uint64_t seed = 1;

  Time tau = ms(50);
  double latency_jitter = 0.0;
  Time f = seconds(1);
  std::uint32_t lambda_budget = 0;
  double crash_rate = 0.0;  // injection opportunities per second

  Time delta = seconds(2);
  Time sigma = ms(150);
  Time block_interval = ms(100);
  double fork_prob = 0.0;
  std::uint32_t max_fork_depth = 4;
  std::map<std::uint32_t, Time> delta_override;
  std::map<std::uint32_t, Time> sigma_override;
  std::map<std::uint32_t, Time> block_interval_override;
  std::map<std::uint32_t, double> fork_prob_override;

  std::uint32_t hub_capacity = 16;
  std::uint32_t hub_chain = 1;
  Amount initial_balance = 1'000'000;
  double zipf_exponent = 0.0;
  std::uint64_t livelock_cap_per_1k = 10'000'000;
  bool literal_delta_wait = false;

  Time delta_of(std::uint32_t chain) const {
    auto it = delta_override.find(chain);
    return it == delta_override.end() ? delta : it->second;
  }
  Time sigma_of(std::uint32_t chain) const {
    auto it = sigma_override.find(chain);
    return it == sigma_override.end() ? sigma : it->second;
  }
  Time block_interval_of(std::uint32_t chain) const {
    auto it = block_interval_override.find(chain);
    return it == block_interval_override.end() ? block_interval : it->second;
  }
  double fork_prob_of(std::uint32_t chain) const {
    auto it = fork_prob_override.find(chain);
    return it == fork_prob_override.end() ? fork_prob : it->second;
  }

  ChainParams chain_params(std::uint32_t chain) const;
  SimParams sim_params() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Throws ConfigError on any violated constraint.
void validate(const RunConfig& cfg);

// Canonical text form; identical configs serialize identically.
std::string config_to_text(const RunConfig& cfg);

// FNV-1a over the canonical text plus the seed; stable across runs.
std::uint64_t config_digest(const RunConfig& cfg);

// Seeded synthetic transfer workload: uniform coordinator, participant
// chains sampled without replacement, zero-sum integer legs with receive
// amounts in [1,100], exponential inter-arrival times.
std::vector<TransactionRequest> generate_workload(const RunConfig& cfg);

}  // namespace cbtsim
