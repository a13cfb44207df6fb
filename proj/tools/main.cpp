#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cachesub/coalition.hpp"
#include "cachesub/csvio.hpp"
#include "cachesub/lagrangian.hpp"
#include "cachesub/protocol.hpp"
#include "cachesub/scenario.hpp"
#include "cachesub/tradeoff.hpp"

namespace {

using namespace cachesub;
using nlohmann::ordered_json;

struct CommonArgs {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--scenario", a.scenario, "scenario file (JSON, schema version 1)")->required();
  cmd->add_option("--out", a.out, "output directory (created if missing)")->required();
  cmd->add_option("--seed", a.seed, "override the scenario seed");
  cmd->add_option("--format", a.format, "table file format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

int worker_count() {
  if (const char* env = std::getenv("CACHESUB_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Work-stealing loop over [0, n); results must go into preallocated slots so
// the emission order stays canonical no matter how the jobs interleave.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr err;
  auto drain = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(drain);
  drain();
  for (std::thread& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

void stamp(OutputTable& t, const Scenario& sc) {
  t.metadata.emplace_back("tool_version", kToolVersion);
  t.metadata.emplace_back("scenario_hash", hash_hex(sc.content_hash));
  t.metadata.emplace_back("seed", std::to_string(sc.seed));
}

void write_table(const CommonArgs& a, const std::string& name, const OutputTable& t) {
  const std::string ext = a.format == "csv" ? ".csv" : ".json";
  write_text_file((std::filesystem::path(a.out) / (name + ext)).string(), t.render(a.format));
}

void write_doc(const CommonArgs& a, const std::string& name, const ordered_json& doc) {
  write_text_file((std::filesystem::path(a.out) / name).string(), doc.dump(2) + "\n");
}

Scenario load(const CommonArgs& a) {
  std::filesystem::create_directories(a.out);
  return load_scenario(a.scenario, a.seed);
}

int report_failure(const std::string& what) {
  std::cerr << nlohmann::json{{"error", what}}.dump() << "\n";
  return 1;
}

std::string tiers_label(const std::array<bool, 3>& subset) {
  static const char* const names[3] = {"leaf", "mid", "co"};
  std::string out;
  for (int i = 0; i < 3; ++i) {
    if (!subset[static_cast<std::size_t>(i)]) continue;
    if (!out.empty()) out += '+';
    out += names[i];
  }
  return out.empty() ? "none" : out;
}

int run_tradeoff(const CommonArgs& a) {
  const Scenario sc = load(a);
  if (!sc.tradeoff) throw std::runtime_error("scenario has no tradeoff section");
  const TradeoffConfig& cfg = *sc.tradeoff;

  struct Job {
    double gamma;
    std::array<bool, 3> subset;
  };
  std::vector<Job> jobs;
  for (double g : cfg.gammas) {
    for (const auto& s : cfg.subsets) jobs.push_back({g, s});
  }
  std::vector<SavingsPoint> points(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    points[i] = savings_curve(cfg.base, {jobs[i].gamma}, {jobs[i].subset}).at(0);
  });

  OutputTable t;
  t.columns = {"gamma",      "tiers",         "size_leaf_gb",    "size_mid_gb", "size_co_gb",
               "total_cost", "baseline_cost", "saving_fraction", "closed_form"};
  for (const SavingsPoint& p : points) {
    t.add_row({p.gamma, tiers_label(p.subset), p.solution.size_gb[0], p.solution.size_gb[1],
               p.solution.size_gb[2], p.solution.total_cost, p.solution.baseline_cost,
               p.solution.saving_fraction, p.solution.closed_form});
  }
  stamp(t, sc);
  write_table(a, "tradeoff", t);
  return 0;
}

int run_coalition_verify(const CommonArgs& a) {
  const Scenario sc = load(a);
  if (!sc.coalition) throw std::runtime_error("scenario has no coalition section");
  const std::vector<VerificationRow> rows = verification_error_experiment(*sc.coalition);

  OutputTable t;
  t.columns = {"r1", "err1", "err2", "err_tot", "cached_fraction"};
  for (const VerificationRow& r : rows) {
    t.add_row({r.r1, r.err1, r.err2, r.err_tot, r.cached_fraction});
  }
  stamp(t, sc);
  write_table(a, "coalition_verify", t);
  return 0;
}

OutputTable trace_table(const Scenario& sc, const OptimizationResult& res) {
  OutputTable t;
  t.columns = {"tau", "utility", "lagrangian", "lb", "ub", "step", "gamma", "feasible",
               "projected"};
  for (const IterationRecord& r : res.trace) {
    t.add_row({r.tau, r.utility, r.lagrangian, r.lb, r.ub, r.step, r.gamma, r.feasible,
               r.projected});
  }
  stamp(t, sc);
  return t;
}

ordered_json result_doc(const Scenario& sc, const OptimizationResult& res) {
  ordered_json doc;
  doc["tool_version"] = kToolVersion;
  doc["scenario_hash"] = hash_hex(sc.content_hash);
  doc["seed"] = sc.seed;
  doc["reason"] = to_string(res.reason);
  doc["best_tau"] = res.best_tau;
  doc["rounds"] = res.trace.size();
  doc["lower_bound"] = res.lower_bound;
  doc["upper_bound"] = res.upper_bound;
  doc["final_duals"]["sigma"] = res.final_duals.sigma;
  doc["final_duals"]["beta"] = res.final_duals.beta;
  doc["summaries"] = ordered_json::array();
  for (const CpSummary& s : res.best_summaries) {
    ordered_json j;
    j["cp"] = s.cp;
    j["utility"] = s.utility;
    j["utility_by_ano"] = s.utility_by_ano;
    j["cached_files"] = s.cached_files;
    j["cached_gb"] = s.cached_gb;
    j["residual_mbps"] = s.residual_mbps;
    j["transit_by_ano"] = s.transit_by_ano;
    j["zeta"] = s.zeta;
    doc["summaries"].push_back(std::move(j));
  }
  // Copies as [content, [nodes...]] pairs; contents served purely from the
  // origin are omitted.
  doc["placement"] = ordered_json::array();
  for (const CatalogPlacement& p : res.best_placement) {
    ordered_json j;
    j["cp"] = p.cp;
    j["solved_upto"] = p.solved_upto;
    j["copies"] = ordered_json::array();
    for (std::size_t f = 0; f < p.open.size(); ++f) {
      if (p.open[f].empty()) continue;
      ordered_json entry = ordered_json::array();
      entry.push_back(f);
      entry.push_back(p.open[f]);
      j["copies"].push_back(std::move(entry));
    }
    doc["placement"].push_back(std::move(j));
  }
  return doc;
}

int run_optimize(const CommonArgs& a) {
  const Scenario sc = load(a);
  if (!sc.has_network) throw std::runtime_error("scenario has no network/demand sections");
  const OptimizationResult res = orchestrate(sc.net, sc.demand, sc.algorithm);
  write_table(a, "trace", trace_table(sc, res));
  write_doc(a, "result.json", result_doc(sc, res));
  return 0;
}

int run_settle(const CommonArgs& a) {
  const Scenario sc = load(a);
  if (!sc.has_network) throw std::runtime_error("scenario has no network/demand sections");
  if (sc.shares.empty()) throw std::runtime_error("scenario has no shares matrix");
  const OptimizationResult res = orchestrate(sc.net, sc.demand, sc.algorithm);
  if (res.best_tau < 0) {
    return report_failure("optimization found no feasible placement; nothing to settle");
  }
  const std::vector<SettlementEntry> entries =
      settle(sc.net, sc.demand, res.best_summaries, res.final_duals, sc.shares);

  OutputTable t;
  t.columns = {"ano", "cp", "saving", "subsidy", "storage_payment", "transit_payment"};
  for (const SettlementEntry& e : entries) {
    t.add_row({e.ano, e.cp, e.saving, e.subsidy, e.storage_payment, e.transit_payment});
  }
  stamp(t, sc);
  write_table(a, "settlement", t);
  return 0;
}

int run_protocol_sim(const CommonArgs& a) {
  const Scenario sc = load(a);
  if (!sc.has_network) throw std::runtime_error("scenario has no network/demand sections");
  const ProtocolRun run = run_protocol(sc.net, sc.demand, sc.algorithm);
  write_text_file((std::filesystem::path(a.out) / "transcript.jsonl").string(),
                  transcript_to_jsonl(run.transcript));
  if (!run.completed) return report_failure("protocol aborted: " + run.fault);

  const std::vector<AuditFinding> findings = audit_privacy(run.transcript);
  write_table(a, "trace", trace_table(sc, run.result));
  ordered_json doc = result_doc(sc, run.result);
  doc["messages"] = run.transcript.size();
  doc["audit_clean"] = findings.empty();
  doc["audit_findings"] = ordered_json::array();
  for (const AuditFinding& f : findings) {
    doc["audit_findings"].push_back({{"message_index", f.message_index}, {"key", f.key}});
  }
  write_doc(a, "result.json", doc);
  if (!findings.empty()) {
    return report_failure("confidentiality audit flagged " + std::to_string(findings.size()) +
                          " message payload(s); see result.json");
  }
  return 0;
}

int run_ufl(const CommonArgs& a) {
  const Scenario sc = load(a);
  if (!sc.has_network) throw std::runtime_error("scenario has no network/demand sections");
  OptimizeParams params = sc.algorithm;
  params.early_stop = sc.ufl_early_stop;
  const LagrangianEngine eng(sc.net, sc.demand, params);

  std::vector<CpIterate> iterates(eng.num_cps());
  parallel_for(eng.num_cps(), [&](std::size_t k) {
    iterates[k] = eng.primal_update(static_cast<CpId>(k), eng.zero_duals());
  });

  OutputTable t;
  t.columns = {"cp", "file", "copies", "nodes"};
  for (const CpIterate& it : iterates) {
    const CatalogPlacement& p = it.placement;
    for (std::size_t f = 0; f < p.open.size(); ++f) {
      if (p.open[f].empty()) continue;
      std::string nodes;
      for (NodeId n : p.open[f]) {
        if (!nodes.empty()) nodes += ';';
        nodes += std::to_string(n);
      }
      t.add_row({p.cp, f, p.open[f].size(), nodes});
    }
  }
  stamp(t, sc);
  for (const CpIterate& it : iterates) {
    t.metadata.emplace_back("utility_cp" + std::to_string(it.summary.cp),
                            format_g9(it.summary.utility));
  }
  write_table(a, "placement", t);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cache subsidy experiment runner"};
  app.require_subcommand(1);

  CommonArgs args;  // exactly one subcommand runs, so shared storage is fine
  int rc = 0;

  auto* tradeoff = app.add_subcommand("tradeoff", "memory-for-bandwidth dimensioning sweep");
  add_common(tradeoff, args);
  tradeoff->callback([&] { rc = run_tradeoff(args); });

  auto* coalition = app.add_subcommand(
      "coalition-verify", "aggregate vs per-content subsidy estimator comparison");
  add_common(coalition, args);
  coalition->callback([&] { rc = run_coalition_verify(args); });

  auto* optimize = app.add_subcommand(
      "optimize", "capacity-constrained placement optimization (monolithic driver)");
  add_common(optimize, args);
  optimize->callback([&] { rc = run_optimize(args); });

  auto* settle_cmd =
      app.add_subcommand("settle", "optimize, then compute the ANO-to-CP settlement table");
  add_common(settle_cmd, args);
  settle_cmd->callback([&] { rc = run_settle(args); });

  auto* protocol = app.add_subcommand(
      "protocol-sim", "message-passing enactment with transcript and confidentiality audit");
  add_common(protocol, args);
  protocol->callback([&] { rc = run_protocol_sim(args); });

  auto* ufl = app.add_subcommand(
      "ufl", "per-CP placement at posted prices, capacity constraints ignored");
  add_common(ufl, args);
  ufl->callback([&] { rc = run_ufl(args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return 2;
  }
  return rc;
}
