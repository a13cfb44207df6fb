#include "cachesub/protocol.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cachesub {

using nlohmann::json;

std::string to_string(MsgKind k) {
  switch (k) {
    case MsgKind::prices_announce:
      return "prices_announce";
    case MsgKind::primal_report:
      return "primal_report";
    case MsgKind::project_directive:
      return "project_directive";
    case MsgKind::project_report:
      return "project_report";
    case MsgKind::step_announce:
      return "step_announce";
    case MsgKind::placement_commit:
      return "placement_commit";
    case MsgKind::stop:
      return "stop";
    case MsgKind::error:
      return "error";
  }
  return "unknown";
}

namespace {

json to_json(const std::vector<double>& v) { return json(v); }
json to_json(const std::vector<std::int64_t>& v) { return json(v); }

// Payloads hold binary doubles while in memory, so packing a summary into a
// message and unpacking it on the other side is lossless; only the JSONL
// export renders text.
json summary_payload(const CpSummary& s, int answers_round) {
  return json{{"cp", s.cp},
              {"answers_round", answers_round},
              {"cached_files", to_json(s.cached_files)},
              {"cached_gb", to_json(s.cached_gb)},
              {"residual_mbps", to_json(s.residual_mbps)},
              {"transit_by_ano", to_json(s.transit_by_ano)},
              {"zeta", to_json(s.zeta)},
              {"utility_by_ano", to_json(s.utility_by_ano)},
              {"utility", s.utility}};
}

CpSummary summary_from(const json& p) {
  CpSummary s;
  s.cp = p.at("cp").get<CpId>();
  s.cached_files = p.at("cached_files").get<std::vector<std::int64_t>>();
  s.cached_gb = p.at("cached_gb").get<std::vector<double>>();
  s.residual_mbps = p.at("residual_mbps").get<std::vector<double>>();
  s.transit_by_ano = p.at("transit_by_ano").get<std::vector<double>>();
  s.zeta = p.at("zeta").get<std::vector<double>>();
  s.utility_by_ano = p.at("utility_by_ano").get<std::vector<double>>();
  s.utility = p.at("utility").get<double>();
  return s;
}

json directive_payload(const CpProjectionDirective& d) {
  json sq = json::array();
  for (const auto& [nd, q] : d.storage_quota) sq.push_back(json::array({nd, q}));
  json bq = json::array();
  for (const auto& [nd, q] : d.bandwidth_quota) bq.push_back(json::array({nd, q}));
  return json{{"cp", d.cp}, {"storage_quota", std::move(sq)}, {"bandwidth_quota", std::move(bq)}};
}

CpProjectionDirective directive_from(const json& p) {
  CpProjectionDirective d;
  d.cp = p.at("cp").get<CpId>();
  for (const auto& e : p.at("storage_quota")) {
    d.storage_quota.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<std::int64_t>());
  }
  for (const auto& e : p.at("bandwidth_quota")) {
    d.bandwidth_quota.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<double>());
  }
  return d;
}

json placement_payload(const CatalogPlacement& p) {
  return json{{"cp", p.cp}, {"open", json(p.open)}, {"server", json(p.server)}};
}

CatalogPlacement placement_from(const json& p) {
  CatalogPlacement out;
  out.cp = p.at("cp").get<CpId>();
  out.open = p.at("open").get<std::vector<std::vector<NodeId>>>();
  out.server = p.at("server").get<std::vector<std::vector<NodeId>>>();
  out.solved_upto = static_cast<std::int64_t>(out.open.size());
  return out;
}

// Round barrier: accepts only messages tagged with the current round;
// anything else becomes an error entry and aborts the run.
struct Bus {
  std::vector<ProtocolMessage> log;
  int round = 0;
  bool ok = true;
  std::string fault;

  bool send(ProtocolMessage m) {
    if (m.round != round) {
      ProtocolMessage e;
      e.round = round;
      e.kind = MsgKind::error;
      e.sender = "bus";
      e.receiver = "*";
      e.payload = json{{"detail", "out-of-round message"},
                       {"sender", m.sender},
                       {"claimed_round", m.round}};
      log.push_back(std::move(e));
      ok = false;
      fault = "out-of-round message from " + m.sender;
      return false;
    }
    log.push_back(std::move(m));
    return true;
  }
};

struct AnoAgent {
  AnoId a = 0;
  const LagrangianEngine* eng = nullptr;
  DualState prices;  // authoritative only for this ANO's capped resources
  std::vector<NodeId> my_storage;
  std::vector<NodeId> my_bandwidth;

  json announce_payload() const {
    json sigma = json::object();
    for (NodeId nd : my_storage) {
      sigma[std::to_string(nd)] = prices.sigma[static_cast<std::size_t>(nd)];
    }
    json beta = json::object();
    for (NodeId nd : my_bandwidth) {
      beta[std::to_string(nd)] = prices.beta[static_cast<std::size_t>(nd)];
    }
    return json{{"ano", a}, {"sigma", std::move(sigma)}, {"beta", std::move(beta)}};
  }

  // Same arithmetic as the monolithic driver's global update, restricted to
  // this agent's resources; every input arrived through the bus.
  void apply_step(double step, const std::vector<CpSummary>& relaxed) {
    const Subgradients g = eng->subgradients(relaxed);
    eng->dual_update(prices, step, g, a);
  }
};

struct CpAgent {
  CpId k = 0;
  const LagrangianEngine* eng = nullptr;
  CpIterate current;
  CatalogPlacement retained;
  bool has_retained = false;
};

DualState assemble_duals(const LagrangianEngine& eng, const std::vector<json>& announces) {
  DualState d = eng.zero_duals();
  for (const json& p : announces) {
    for (const auto& [key, val] : p.at("sigma").items()) {
      d.sigma[std::stoul(key)] = val.get<double>();
    }
    for (const auto& [key, val] : p.at("beta").items()) {
      d.beta[std::stoul(key)] = val.get<double>();
    }
  }
  eng.check_duals(d);
  return d;
}

}  // namespace

ProtocolRun run_protocol(const TreeNetwork& net, const DemandModel& demand,
                         const OptimizeParams& params, const FaultPlan& fault) {
  LagrangianEngine eng(net, demand, params);
  const std::size_t cps = eng.num_cps();
  const int anos = eng.num_anos();

  std::vector<AnoAgent> ano_agents(static_cast<std::size_t>(anos));
  for (int a = 0; a < anos; ++a) {
    AnoAgent& ag = ano_agents[static_cast<std::size_t>(a)];
    ag.a = static_cast<AnoId>(a);
    ag.eng = &eng;
    ag.prices = eng.zero_duals();
    for (NodeId nd : eng.storage_capped()) {
      if (net.ano[static_cast<std::size_t>(nd)] == a) ag.my_storage.push_back(nd);
    }
    for (NodeId nd : eng.bandwidth_capped()) {
      if (net.ano[static_cast<std::size_t>(nd)] == a) ag.my_bandwidth.push_back(nd);
    }
  }
  std::vector<CpAgent> cp_agents(cps);
  for (std::size_t k = 0; k < cps; ++k) {
    cp_agents[k].k = static_cast<CpId>(k);
    cp_agents[k].eng = &eng;
  }

  ProtocolRun out;
  Bus bus;
  OptimizationResult& res = out.result;
  res.reason = StopReason::iteration_limit;

  double lb = 0.0;
  double ub = eng.initial_upper_bound();
  const double eps = params.epsilon_fraction * ub;
  double gamma = params.gamma;
  int stall = 0;
  std::vector<CpSummary> best_sums;

  const auto finish = [&](DualState duals) {
    res.final_duals = std::move(duals);
    res.lower_bound = lb;
    res.upper_bound = ub;
    out.transcript = std::move(bus.log);
  };

  if (params.tau_max < 1) {  // degenerate budget: nothing to exchange
    out.completed = true;
    finish(eng.zero_duals());
    return out;
  }

  for (int tau = 1; tau <= params.tau_max; ++tau) {
    bus.round = tau;

    // ANOs publish the shadow prices this round answers.
    std::vector<json> announces;
    announces.reserve(ano_agents.size());
    for (const AnoAgent& ag : ano_agents) {
      json p = ag.announce_payload();
      announces.push_back(p);
      bus.send({tau, MsgKind::prices_announce, "ano:" + std::to_string(ag.a), "*", std::move(p)});
    }
    DualState duals = assemble_duals(eng, announces);

    // CPs solve their placement subproblems and publish the aggregates.
    std::vector<std::optional<json>> reports(cps);
    for (std::size_t k = 0; k < cps; ++k) {
      CpAgent& ag = cp_agents[k];
      const bool faulty =
          fault.at_round == tau && fault.drop_cp == static_cast<CpId>(k);
      if (faulty && !fault.stale_round) continue;  // stays silent
      ag.current = eng.primal_update(ag.k, duals);
      json p = summary_payload(ag.current.summary, tau);
      const int claimed = faulty ? tau - 1 : tau;
      if (!bus.send({claimed, MsgKind::primal_report, "cp:" + std::to_string(ag.k), "*",
                     json(p)})) {
        out.fault = bus.fault;
        finish(std::move(duals));
        return out;
      }
      reports[k] = std::move(p);
    }
    for (std::size_t k = 0; k < cps; ++k) {
      if (reports[k]) continue;
      bus.send({tau, MsgKind::stop, "orchestrator", "*",
                json{{"reason", "missing-report"}, {"best_round", res.best_tau},
                     {"retain", false}, {"missing_cp", static_cast<CpId>(k)}}});
      out.fault = "missing primal report from cp:" + std::to_string(k) + " in round " +
                  std::to_string(tau);
      finish(std::move(duals));
      return out;
    }

    std::vector<CpSummary> relaxed;
    relaxed.reserve(cps);
    for (const auto& r : reports) relaxed.push_back(summary_from(*r));
    const double lagr = eng.lagrangian_value(relaxed, duals);
    const Subgradients grads = eng.subgradients(relaxed);

    bool have = eng.feasible(relaxed);
    bool projected = false;
    std::vector<CpSummary> cursums = relaxed;
    if (!have) {
      // Quota rounds: repairing one resource can push load onto another, so
      // re-plan a few times before writing the round off.
      for (int pass = 0; pass < 3 && !have; ++pass) {
        const auto plan = eng.plan_projection(cursums);
        std::vector<CpSummary> after;
        after.reserve(cps);
        bool all_ok = true;
        for (std::size_t k = 0; k < cps; ++k) {
          bus.send({tau, MsgKind::project_directive, "orchestrator",
                    "cp:" + std::to_string(k), directive_payload(plan[k])});
        }
        for (std::size_t k = 0; k < cps; ++k) {
          CpAgent& ag = cp_agents[k];
          const bool ok = eng.apply_projection(ag.current, directive_from(directive_payload(plan[k])), duals);
          json p = summary_payload(ag.current.summary, tau);
          p["ok"] = ok;
          bus.send({tau, MsgKind::project_report, "cp:" + std::to_string(k), "orchestrator",
                    json(p)});
          all_ok = all_ok && ok;
          after.push_back(summary_from(p));
        }
        if (!all_ok) break;
        cursums = std::move(after);
        if (eng.feasible(cursums)) {
          have = true;
          projected = true;
        }
      }
    }

    double ucand = 0.0;
    bool retain = false;
    if (have) {
      ucand = eng.utility_total(cursums);
      if (res.best_tau < 0 || ucand > lb) {
        retain = true;
        best_sums = cursums;
        res.best_tau = tau;
      }
      lb = std::max(lb, ucand);
    }
    if (lagr < ub) {
      ub = lagr;
      stall = 0;
    } else {
      ++stall;
      if (stall >= params.stall_limit) {
        gamma /= 2.0;
        stall = 0;
      }
    }

    IterationRecord rec;
    rec.tau = tau;
    rec.utility = ucand;
    rec.lagrangian = lagr;
    rec.lb = lb;
    rec.ub = ub;
    rec.gamma = gamma;
    rec.feasible = have;
    rec.projected = projected;

    std::optional<StopReason> stopping;
    std::optional<double> step;
    if (ub - lb <= eps) {
      stopping = StopReason::converged;
    } else if (tau == params.tau_max) {
      stopping = res.best_tau > 0 ? StopReason::iteration_limit : StopReason::no_feasible_found;
    } else {
      step = eng.polyak_step(gamma, lagr, lb, grads);
      if (!step) stopping = StopReason::zero_subgradient;
    }

    if (stopping) {
      res.trace.push_back(rec);
      res.reason = *stopping;
      bus.send({tau, MsgKind::stop, "orchestrator", "*",
                json{{"reason", to_string(*stopping)}, {"best_round", res.best_tau},
                     {"retain", retain}}});
      for (std::size_t k = 0; k < cps; ++k) {
        CpAgent& ag = cp_agents[k];
        if (retain) {
          ag.retained = ag.current.placement;
          ag.has_retained = true;
        }
        if (res.best_tau >= 1 && ag.has_retained) {
          json p = placement_payload(ag.retained);
          bus.send({tau, MsgKind::placement_commit, "cp:" + std::to_string(k), "*", json(p)});
          res.best_placement.push_back(placement_from(p));
        }
      }
      res.best_summaries = best_sums;
      out.completed = true;
      finish(std::move(duals));
      return out;
    }

    rec.step = *step;
    res.trace.push_back(rec);
    bus.send({tau, MsgKind::step_announce, "orchestrator", "*",
              json{{"step", *step}, {"lb", lb}, {"ub", ub}, {"gamma", gamma},
                   {"retain", retain}}});
    for (CpAgent& ag : cp_agents) {
      if (retain) {
        ag.retained = ag.current.placement;
        ag.has_retained = true;
      }
    }
    for (AnoAgent& ag : ano_agents) ag.apply_step(*step, relaxed);
  }

  // Unreachable: the tau_max round always stops above.
  throw std::logic_error("protocol loop exited without a stop message");
}

std::vector<AuditFinding> audit_privacy(const std::vector<ProtocolMessage>& transcript) {
  enum class Shape { num, boolean, str, num_array, pair_array, nested_array, num_object };
  using Schema = std::map<std::string, Shape>;
  static const Schema prices{{"ano", Shape::num}, {"sigma", Shape::num_object},
                             {"beta", Shape::num_object}};
  static const Schema report{{"cp", Shape::num},
                             {"answers_round", Shape::num},
                             {"cached_files", Shape::num_array},
                             {"cached_gb", Shape::num_array},
                             {"residual_mbps", Shape::num_array},
                             {"transit_by_ano", Shape::num_array},
                             {"zeta", Shape::num_array},
                             {"utility_by_ano", Shape::num_array},
                             {"utility", Shape::num}};
  static const Schema project_report = [] {
    Schema s = report;
    s["ok"] = Shape::boolean;
    return s;
  }();
  static const Schema directive{{"cp", Shape::num},
                                {"storage_quota", Shape::pair_array},
                                {"bandwidth_quota", Shape::pair_array}};
  static const Schema step{{"step", Shape::num},
                           {"lb", Shape::num},
                           {"ub", Shape::num},
                           {"gamma", Shape::num},
                           {"retain", Shape::boolean}};
  static const Schema commit{{"cp", Shape::num},
                             {"open", Shape::nested_array},
                             {"server", Shape::nested_array}};
  static const Schema stop{{"reason", Shape::str},
                           {"best_round", Shape::num},
                           {"retain", Shape::boolean},
                           {"missing_cp", Shape::num}};
  static const Schema error{{"detail", Shape::str},
                            {"sender", Shape::str},
                            {"claimed_round", Shape::num}};

  const auto schema_of = [&](MsgKind k) -> const Schema& {
    switch (k) {
      case MsgKind::prices_announce:
        return prices;
      case MsgKind::primal_report:
        return report;
      case MsgKind::project_directive:
        return directive;
      case MsgKind::project_report:
        return project_report;
      case MsgKind::step_announce:
        return step;
      case MsgKind::placement_commit:
        return commit;
      case MsgKind::stop:
        return stop;
      case MsgKind::error:
        return error;
    }
    return error;
  };

  const auto matches = [](const json& v, Shape s) {
    switch (s) {
      case Shape::num:
        return v.is_number();
      case Shape::boolean:
        return v.is_boolean();
      case Shape::str:
        return v.is_string();
      case Shape::num_array: {
        if (!v.is_array()) return false;
        for (const auto& e : v) {
          if (!e.is_number()) return false;
        }
        return true;
      }
      case Shape::pair_array: {
        if (!v.is_array()) return false;
        for (const auto& e : v) {
          if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
            return false;
          }
        }
        return true;
      }
      case Shape::nested_array: {
        if (!v.is_array()) return false;
        for (const auto& row : v) {
          if (!row.is_array()) return false;
          for (const auto& e : row) {
            if (!e.is_number()) return false;
          }
        }
        return true;
      }
      case Shape::num_object: {
        if (!v.is_object()) return false;
        for (const auto& [key, val] : v.items()) {
          (void)key;
          if (!val.is_number()) return false;
        }
        return true;
      }
    }
    return false;
  };

  std::vector<AuditFinding> findings;
  for (std::size_t i = 0; i < transcript.size(); ++i) {
    const ProtocolMessage& m = transcript[i];
    if (!m.payload.is_object()) {
      findings.push_back({i, "<payload is not an object>"});
      continue;
    }
    const Schema& schema = schema_of(m.kind);
    for (const auto& [key, value] : m.payload.items()) {
      const auto it = schema.find(key);
      if (it == schema.end()) {
        findings.push_back({i, key});
      } else if (!matches(value, it->second)) {
        findings.push_back({i, key + ": unexpected value shape"});
      }
    }
  }
  return findings;
}

std::string transcript_to_jsonl(const std::vector<ProtocolMessage>& transcript) {
  std::string out;
  for (const ProtocolMessage& m : transcript) {
    const json j{{"round", m.round},
                 {"kind", to_string(m.kind)},
                 {"from", m.sender},
                 {"to", m.receiver},
                 {"payload", m.payload}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace cachesub
