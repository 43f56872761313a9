#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cbtsim/checker.hpp"
#include "cbtsim/runner.hpp"

namespace fs = std::filesystem;
using namespace cbtsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 2;
constexpr int kExitConfig = 3;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void print_bounds(const char* name, const BoundCheckSummary& b) {
  if (b.checked == 0) return;
  std::printf("  %s bound: %llu checked, %llu violations\n", name,
              (unsigned long long)b.checked, (unsigned long long)b.violations);
  for (const auto& d : b.details) std::printf("    %s\n", d.c_str());
}

void print_record(const ResultRecord& rec) {
  const RunTrace& tr = rec.trace;
  std::printf("protocol %s  seed %llu  digest %016llx\n", to_string(tr.protocol),
              (unsigned long long)tr.seed,
              (unsigned long long)rec.config_digest);
  std::printf("  %zu txns: %llu committed, %llu aborted%s\n", tr.txns.size(),
              (unsigned long long)tr.summary.committed,
              (unsigned long long)tr.summary.aborted,
              tr.summary.livelock ? "  [LIVELOCK CAP HIT]" : "");
  std::printf("  events %llu  makespan %.3fs  trace_hash %016llx\n",
              (unsigned long long)tr.summary.events,
              double(tr.summary.makespan) / 1e6,
              (unsigned long long)tr.summary.trace_hash);
  std::printf("  throughput %.2f tx/s", rec.throughput_tx_s);
  if (rec.latency.count > 0)
    std::printf("  latency ms min/median/p99/max %.2f/%.2f/%.2f/%.2f",
                double(rec.latency.min) / 1e3, double(rec.latency.median) / 1e3,
                double(rec.latency.p99) / 1e3, double(rec.latency.max) / 1e3);
  std::printf("\n");
  std::printf("  audit: atomicity %s, consistency %s, isolation %s, durability %s\n",
              rec.audit.atomicity ? "ok" : "VIOLATED",
              rec.audit.consistency ? "ok" : "VIOLATED",
              rec.audit.isolation ? "ok" : "VIOLATED",
              rec.audit.durability ? "ok" : "VIOLATED");
  for (const auto& v : rec.audit.violations)
    std::printf("    %s\n", v.c_str());
  print_bounds("message", rec.message_bounds);
  print_bounds("latency", rec.latency_bounds);
}

RunConfig load_config(const std::string& path, const std::string& protocol,
                      std::int64_t seed) {
  RunConfig cfg = parse_config_file(path);
  if (!protocol.empty()) {
    ProtocolKind p;
    if (!protocol_from_string(protocol, p))
      throw ConfigError("unknown protocol: " + protocol);
    cfg.protocol = p;
  }
  if (seed >= 0) cfg.seed = std::uint64_t(seed);
  validate(cfg);
  return cfg;
}

int cmd_run(const std::string& config_path, const std::string& protocol,
            std::int64_t seed, const std::string& out,
            const std::string& csv) {
  ResultRecord rec =
      run_experiment(load_config(config_path, protocol, seed));
  print_record(rec);
  if (!out.empty()) write_file(out, serialize_result(rec));
  if (!csv.empty()) write_file(csv, txn_csv(rec.trace));
  return rec.clean() ? kExitOk : kExitViolation;
}

int cmd_scale(const std::string& config_path,
              std::vector<std::uint32_t> chains, const std::string& out_dir) {
  RunConfig base = parse_config_file(config_path);
  const std::vector<ProtocolKind> protos{ProtocolKind::rbp, ProtocolKind::tpc,
                                         ProtocolKind::hub};
  // Reject the base config up front if any swept protocol cannot run it,
  // rather than failing mid-sweep with partial output on disk.
  for (std::uint32_t n : chains) {
    for (ProtocolKind p : protos) {
      RunConfig cfg = base;
      cfg.n_chains = n;
      cfg.protocol = p;
      cfg.arrival_rate = base.arrival_rate * double(n);
      validate(cfg);
    }
  }
  fs::create_directories(out_dir);
  bool clean = true;
  nlohmann::ordered_json points = nlohmann::ordered_json::array();
  std::vector<std::pair<double, double>> rbp_curve, tpc_curve, hub_tail;
  std::vector<double> rbp_at, tpc_at;

  for (std::uint32_t n : chains) {
    for (ProtocolKind p : protos) {
      RunConfig cfg = base;
      cfg.n_chains = n;
      cfg.protocol = p;
      cfg.arrival_rate = base.arrival_rate * double(n);
      ResultRecord rec = run_experiment(cfg);
      clean = clean && rec.clean();

      std::string stem =
          std::string("scale_") + to_string(p) + "_" + std::to_string(n);
      write_file(fs::path(out_dir) / (stem + ".json"), serialize_result(rec));
      write_file(fs::path(out_dir) / (stem + ".csv"), txn_csv(rec.trace));
      std::printf("%-4s chains=%-3u throughput %.2f tx/s  committed %llu%s\n",
                  to_string(p), n, rec.throughput_tx_s,
                  (unsigned long long)rec.trace.summary.committed,
                  rec.clean() ? "" : "  [VIOLATIONS]");

      points.push_back(nlohmann::ordered_json{
          {"protocol", to_string(p)},
          {"chains", n},
          {"throughput_tx_s", rec.throughput_tx_s},
          {"committed", rec.trace.summary.committed},
          {"makespan_us", rec.trace.summary.makespan},
          {"clean", rec.clean()}});
      if (p == ProtocolKind::rbp) {
        rbp_curve.emplace_back(double(n), rec.throughput_tx_s);
        rbp_at.push_back(rec.throughput_tx_s);
      } else if (p == ProtocolKind::tpc) {
        tpc_curve.emplace_back(double(n), rec.throughput_tx_s);
        tpc_at.push_back(rec.throughput_tx_s);
      } else if (n >= 8) {
        hub_tail.emplace_back(double(n), rec.throughput_tx_s);
      }
    }
  }

  nlohmann::ordered_json overhead = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < rbp_at.size() && i < tpc_at.size(); ++i) {
    double pct = tpc_at[i] > 0
                     ? (tpc_at[i] - rbp_at[i]) / tpc_at[i] * 100.0
                     : 0.0;
    overhead.push_back(nlohmann::ordered_json{{"chains", chains[i]},
                                              {"overhead_pct", pct}});
  }
  nlohmann::ordered_json summary{
      {"schema", "cbtsim-scale-v1"},
      {"points", points},
      {"slope_rbp", loglog_slope(rbp_curve)},
      {"slope_tpc", loglog_slope(tpc_curve)},
      {"slope_hub_8_up", loglog_slope(hub_tail)},
      {"rbp_vs_tpc_overhead", overhead}};
  write_file(fs::path(out_dir) / "scale_summary.json", summary.dump(1) + "\n");
  std::printf("slopes: rbp %.3f  tpc %.3f  hub(8+) %.3f\n",
              loglog_slope(rbp_curve), loglog_slope(tpc_curve),
              loglog_slope(hub_tail));
  return clean ? kExitOk : kExitViolation;
}

int cmd_audit(const std::string& trace_path) {
  ResultRecord stored = parse_result(read_file(trace_path));
  ResultRecord derived = evaluate_trace(stored.trace);
  derived.config_text = stored.config_text;
  print_record(derived);
  if (stored.audit.all_ok() != derived.audit.all_ok())
    std::printf("  note: stored audit verdicts disagree with this re-audit\n");
  return derived.clean() ? kExitOk : kExitViolation;
}

int cmd_selftest() {
  struct Case {
    ProtocolKind p;
    bool crash;
  };
  const Case cases[] = {{ProtocolKind::sbp, true},
                        {ProtocolKind::rbp, true},
                        {ProtocolKind::tpc, false}};
  bool ok = true;
  for (const Case& c : cases) {
    CheckStats st = check_small_scope(c.p, c.crash);
    std::printf(
        "%s %s: %llu states, %llu transitions, %llu terminals "
        "(%llu committed, %llu aborted): %s\n",
        to_string(c.p), c.crash ? "with one proxy crash" : "crash-free",
        (unsigned long long)st.states, (unsigned long long)st.transitions,
        (unsigned long long)st.terminals,
        (unsigned long long)st.committed_terminals,
        (unsigned long long)st.aborted_terminals, st.ok ? "ok" : "FAILED");
    for (const auto& f : st.failures) std::printf("  %s\n", f.c_str());
    ok = ok && st.ok;
  }
  return ok ? kExitOk : kExitViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-blockchain commit protocol simulator"};
  app.require_subcommand(1);

  std::string config_path, protocol, out, csv, trace_path, out_dir;
  std::int64_t seed = -1;
  std::vector<std::uint32_t> chains{2, 4, 8, 16, 32, 64};

  auto* run = app.add_subcommand("run", "run one experiment and audit it");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--protocol", protocol, "override protocol (sbp|rbp|tpc|hub)");
  run->add_option("--seed", seed, "override seed");
  run->add_option("--out", out, "write the full result record as JSON");
  run->add_option("--csv", csv, "write per-transaction rows as CSV");

  auto* scale = app.add_subcommand("scale", "scaling study across chain counts");
  scale->add_option("--config", config_path, "base config; arrival_rate is per chain")
      ->required();
  scale->add_option("--chains", chains, "chain counts")->delimiter(',');
  scale->add_option("--out", out_dir, "output directory")->required();

  auto* audit = app.add_subcommand("audit", "re-audit a saved result or trace");
  audit->add_option("--trace", trace_path, "result record or bare trace JSON")
      ->required();

  app.add_subcommand("selftest",
                     "exhaustive small-scope interleaving check "
                     "(2 chains, one transaction, <=1 proxy crash)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, protocol, seed, out, csv);
    if (scale->parsed()) return cmd_scale(config_path, chains, out_dir);
    if (audit->parsed()) return cmd_audit(trace_path);
    return cmd_selftest();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
