#include "cachesub/scenario.hpp"

#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <utility>

#include "json.hpp"

#include "cachesub/csvio.hpp"
#include "cachesub/numeric.hpp"

namespace cachesub {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw std::runtime_error("scenario: " + where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, std::set<std::string> allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) fail(where + "." + key, "unknown key");
  }
}

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& req(const json& obj, const std::string& where, const char* key) {
  const json* v = find(obj, key);
  if (!v) fail(where + "." + key, "required key missing");
  return *v;
}

double num(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(where, "must be finite");
  return d;
}

double nonneg(const json& v, const std::string& where) {
  const double d = num(v, where);
  if (d < 0.0) fail(where, "must be >= 0");
  return d;
}

double positive(const json& v, const std::string& where) {
  const double d = num(v, where);
  if (!(d > 0.0)) fail(where, "must be > 0");
  return d;
}

std::int64_t integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<std::int64_t>();
}

bool boolean(const json& v, const std::string& where) {
  if (!v.is_boolean()) fail(where, "expected a boolean");
  return v.get<bool>();
}

std::vector<double> num_array(const json& v, const std::string& where, bool allow_negative) {
  if (!v.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    out.push_back(allow_negative ? num(v[i], at) : nonneg(v[i], at));
  }
  return out;
}

std::vector<std::optional<double>> cap_array(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of numbers or nulls");
  std::vector<std::optional<double>> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    if (v[i].is_null()) {
      out.push_back(std::nullopt);
    } else {
      out.push_back(positive(v[i], at));
    }
  }
  return out;
}

TierConfig tier(const json& v, const std::string& where) {
  check_keys(v, where, {"storage_price", "uplink_price", "storage_cap_gb", "uplink_cap_mbps"});
  TierConfig t;
  t.storage_price = nonneg(req(v, where, "storage_price"), where + ".storage_price");
  t.uplink_price = nonneg(req(v, where, "uplink_price"), where + ".uplink_price");
  if (const json* c = find(v, "storage_cap_gb")) {
    t.storage_cap = positive(*c, where + ".storage_cap_gb");
  }
  if (const json* c = find(v, "uplink_cap_mbps")) {
    t.uplink_cap = positive(*c, where + ".uplink_cap_mbps");
  }
  return t;
}

TreeNetwork parse_network(const json& v) {
  const std::string where = "network";
  const json& kindv = req(v, where, "kind");
  if (!kindv.is_string()) fail(where + ".kind", "expected a string");
  const std::string kind = kindv.get<std::string>();
  if (kind == "symmetric3") {
    check_keys(v, where, {"kind", "file_size_gb", "e1", "e2", "anos", "leaf", "mid", "root"});
    SymmetricSpec spec;
    spec.file_size_gb = positive(req(v, where, "file_size_gb"), where + ".file_size_gb");
    spec.e1 = static_cast<int>(integer(req(v, where, "e1"), where + ".e1"));
    spec.e2 = static_cast<int>(integer(req(v, where, "e2"), where + ".e2"));
    spec.num_anos = static_cast<int>(integer(req(v, where, "anos"), where + ".anos"));
    if (spec.e1 < 1 || spec.e2 < 1 || spec.num_anos < 1) {
      fail(where, "e1, e2 and anos must be >= 1");
    }
    spec.leaf = tier(req(v, where, "leaf"), where + ".leaf");
    spec.mid = tier(req(v, where, "mid"), where + ".mid");
    spec.root = tier(req(v, where, "root"), where + ".root");
    return build_symmetric_3tier(spec);
  }
  if (kind == "explicit") {
    check_keys(v, where,
               {"kind", "file_size_gb", "parent", "ano", "storage_price", "uplink_price",
                "storage_cap_gb", "uplink_cap_mbps"});
    TreeNetwork net;
    net.file_size_gb = positive(req(v, where, "file_size_gb"), where + ".file_size_gb");
    const json& par = req(v, where, "parent");
    if (!par.is_array() || par.empty()) fail(where + ".parent", "expected a non-empty array");
    for (std::size_t i = 0; i < par.size(); ++i) {
      net.parent.push_back(static_cast<NodeId>(
          integer(par[i], where + ".parent[" + std::to_string(i) + "]")));
    }
    const json& ano = req(v, where, "ano");
    if (!ano.is_array()) fail(where + ".ano", "expected an array");
    for (std::size_t i = 0; i < ano.size(); ++i) {
      net.ano.push_back(
          static_cast<AnoId>(integer(ano[i], where + ".ano[" + std::to_string(i) + "]")));
    }
    net.storage_price = num_array(req(v, where, "storage_price"), where + ".storage_price", false);
    net.uplink_price = num_array(req(v, where, "uplink_price"), where + ".uplink_price", false);
    const std::size_t n = net.parent.size();
    net.storage_cap.assign(n, std::nullopt);
    net.uplink_cap.assign(n, std::nullopt);
    if (const json* c = find(v, "storage_cap_gb")) {
      net.storage_cap = cap_array(*c, where + ".storage_cap_gb");
    }
    if (const json* c = find(v, "uplink_cap_mbps")) {
      net.uplink_cap = cap_array(*c, where + ".uplink_cap_mbps");
    }
    if (net.ano.size() != n || net.storage_price.size() != n || net.uplink_price.size() != n ||
        net.storage_cap.size() != n || net.uplink_cap.size() != n) {
      fail(where, "per-node arrays must all have the same length");
    }
    net.finalize();
    return net;
  }
  fail(where + ".kind", "must be \"symmetric3\" or \"explicit\"");
}

void parse_demand(const json& v, const TreeNetwork& net, std::uint64_t seed, DemandModel* dm) {
  if (!v.is_array() || v.empty()) fail("demand", "expected a non-empty array (one entry per CP)");
  for (std::size_t k = 0; k < v.size(); ++k) {
    const std::string where = "demand[" + std::to_string(k) + "]";
    const json& e = v[k];
    const json& kindv = req(e, where, "kind");
    if (!kindv.is_string()) fail(where + ".kind", "expected a string");
    const std::string kind = kindv.get<std::string>();
    if (kind == "zipf") {
      check_keys(e, where, {"kind", "files", "alpha", "per_ano_total_mbps", "permute_per_ano"});
      const std::int64_t files = integer(req(e, where, "files"), where + ".files");
      if (files < 1) fail(where + ".files", "must be >= 1");
      const double alpha = num(req(e, where, "alpha"), where + ".alpha");
      if (alpha < 0.0 || alpha >= 1.0) fail(where + ".alpha", "must be in [0, 1)");
      const std::vector<double> totals =
          num_array(req(e, where, "per_ano_total_mbps"), where + ".per_ano_total_mbps", false);
      if (totals.size() != static_cast<std::size_t>(net.num_anos)) {
        fail(where + ".per_ano_total_mbps", "needs one entry per ANO");
      }
      bool permute = false;
      if (const json* p = find(e, "permute_per_ano")) {
        permute = boolean(*p, where + ".permute_per_ano");
      }
      const std::uint64_t cp_seed = splitmix64(seed ^ (static_cast<std::uint64_t>(k) + 1));
      dm->add_cp(synthesize_zipf_demand(net, Catalog{static_cast<CpId>(k), files,
                                                     net.file_size_gb},
                                        totals, alpha, permute, cp_seed));
    } else if (kind == "explicit") {
      check_keys(e, where, {"kind", "files", "rates"});
      const std::int64_t files = integer(req(e, where, "files"), where + ".files");
      if (files < 1) fail(where + ".files", "must be >= 1");
      const json& rates = req(e, where, "rates");
      if (!rates.is_object()) fail(where + ".rates", "expected an object keyed by leaf id");
      DemandModel::CpDemand d;
      d.catalog = Catalog{static_cast<CpId>(k), files, net.file_size_gb};
      d.leaf_total_mbps.assign(net.parent.size(), 0.0);
      for (const auto& [key, value] : rates.items()) {
        const std::string at = where + ".rates." + key;
        NodeId leaf = kOrigin;
        try {
          leaf = static_cast<NodeId>(std::stol(key));
        } catch (const std::exception&) {
          fail(at, "key must be a leaf node id");
        }
        bool is_leaf = false;
        for (NodeId l : net.leaves) is_leaf = is_leaf || l == leaf;
        if (!is_leaf) fail(at, "node is not a leaf of the network");
        const std::vector<double> r = num_array(value, at, false);
        if (r.size() != static_cast<std::size_t>(files)) {
          fail(at, "needs one rate per content");
        }
        double total = 0.0;
        for (double x : r) total += x;
        d.leaf_total_mbps[static_cast<std::size_t>(leaf)] = total;
        d.explicit_rates[leaf] = r;
      }
      dm->add_cp(std::move(d));
    } else {
      fail(where + ".kind", "must be \"zipf\" or \"explicit\"");
    }
  }
}

OptimizeParams parse_algorithm(const json* v) {
  OptimizeParams p;
  if (!v) return p;
  const std::string where = "algorithm";
  check_keys(*v, where, {"gamma", "epsilon_fraction", "tau_max", "stall_limit", "early_stop"});
  if (const json* x = find(*v, "gamma")) p.gamma = positive(*x, where + ".gamma");
  if (const json* x = find(*v, "epsilon_fraction")) {
    p.epsilon_fraction = positive(*x, where + ".epsilon_fraction");
  }
  if (const json* x = find(*v, "tau_max")) {
    p.tau_max = static_cast<int>(integer(*x, where + ".tau_max"));
    if (p.tau_max < 1) fail(where + ".tau_max", "must be >= 1");
  }
  if (const json* x = find(*v, "stall_limit")) {
    p.stall_limit = static_cast<int>(integer(*x, where + ".stall_limit"));
    if (p.stall_limit < 1) fail(where + ".stall_limit", "must be >= 1");
  }
  if (const json* x = find(*v, "early_stop")) p.early_stop = boolean(*x, where + ".early_stop");
  return p;
}

TradeoffConfig parse_tradeoff(const json& v) {
  const std::string where = "tradeoff";
  check_keys(v, where,
             {"catalog_gb", "alpha", "e1", "e2", "storage_price", "link_price", "gammas",
              "gamma_grid", "subsets"});
  TradeoffConfig c;
  c.base.catalog_gb = positive(req(v, where, "catalog_gb"), where + ".catalog_gb");
  c.base.alpha = num(req(v, where, "alpha"), where + ".alpha");
  if (c.base.alpha < 0.0 || c.base.alpha >= 1.0) fail(where + ".alpha", "must be in [0, 1)");
  c.base.e1 = static_cast<int>(integer(req(v, where, "e1"), where + ".e1"));
  c.base.e2 = static_cast<int>(integer(req(v, where, "e2"), where + ".e2"));
  if (c.base.e1 < 1 || c.base.e2 < 1) fail(where, "e1 and e2 must be >= 1");
  const auto sp = num_array(req(v, where, "storage_price"), where + ".storage_price", false);
  const auto lp = num_array(req(v, where, "link_price"), where + ".link_price", false);
  if (sp.size() != 3 || lp.size() != 3) {
    fail(where, "storage_price and link_price need exactly 3 tiers");
  }
  for (int i = 0; i < 3; ++i) {
    c.base.storage_price[static_cast<std::size_t>(i)] = sp[static_cast<std::size_t>(i)];
    c.base.link_price[static_cast<std::size_t>(i)] = lp[static_cast<std::size_t>(i)];
  }
  const json* gs = find(v, "gammas");
  const json* gg = find(v, "gamma_grid");
  if ((gs == nullptr) == (gg == nullptr)) {
    fail(where, "exactly one of gammas / gamma_grid is required");
  }
  if (gs) {
    c.gammas = num_array(*gs, where + ".gammas", false);
    for (double g : c.gammas) {
      if (!(g > 0.0)) fail(where + ".gammas", "entries must be > 0");
    }
    if (c.gammas.empty()) fail(where + ".gammas", "must not be empty");
  } else {
    check_keys(*gg, where + ".gamma_grid", {"min", "max", "points", "log"});
    const double lo = positive(req(*gg, where + ".gamma_grid", "min"), where + ".gamma_grid.min");
    const double hi = positive(req(*gg, where + ".gamma_grid", "max"), where + ".gamma_grid.max");
    const std::int64_t pts =
        integer(req(*gg, where + ".gamma_grid", "points"), where + ".gamma_grid.points");
    if (!(hi > lo)) fail(where + ".gamma_grid", "max must exceed min");
    if (pts < 2) fail(where + ".gamma_grid.points", "must be >= 2");
    bool log_spaced = true;
    if (const json* lg = find(*gg, "log")) log_spaced = boolean(*lg, where + ".gamma_grid.log");
    for (std::int64_t i = 0; i < pts; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(pts - 1);
      c.gammas.push_back(log_spaced ? lo * std::pow(hi / lo, t) : lo + t * (hi - lo));
    }
  }
  if (const json* subs = find(v, "subsets")) {
    if (!subs->is_array() || subs->empty()) fail(where + ".subsets", "expected a non-empty array");
    for (std::size_t i = 0; i < subs->size(); ++i) {
      const json& s = (*subs)[i];
      const std::string at = where + ".subsets[" + std::to_string(i) + "]";
      if (!s.is_array() || s.size() != 3) fail(at, "expected 3 booleans");
      std::array<bool, 3> row{};
      for (std::size_t t = 0; t < 3; ++t) row[t] = boolean(s[t], at);
      c.subsets.push_back(row);
    }
  } else {
    c.subsets.push_back({true, true, true});
  }
  return c;
}

VerificationParams parse_coalition(const json& v, std::uint64_t seed) {
  const std::string where = "coalition";
  check_keys(v, where,
             {"files", "alpha", "total1_mbps", "total2_mbps", "storage_price_per_content",
              "traffic_price", "r2", "r1_grid", "repetitions"});
  VerificationParams p;
  p.files = integer(req(v, where, "files"), where + ".files");
  if (p.files < 1) fail(where + ".files", "must be >= 1");
  p.alpha = num(req(v, where, "alpha"), where + ".alpha");
  if (p.alpha < 0.0 || p.alpha >= 1.0) fail(where + ".alpha", "must be in [0, 1)");
  p.total1_mbps = positive(req(v, where, "total1_mbps"), where + ".total1_mbps");
  p.total2_mbps = positive(req(v, where, "total2_mbps"), where + ".total2_mbps");
  p.storage_price_per_content = positive(req(v, where, "storage_price_per_content"),
                                         where + ".storage_price_per_content");
  p.traffic_price = positive(req(v, where, "traffic_price"), where + ".traffic_price");
  if (const json* x = find(v, "r2")) {
    p.r2 = num(*x, where + ".r2");
    if (p.r2 < 0.0 || p.r2 > 1.0) fail(where + ".r2", "must be in [0, 1]");
  }
  if (const json* x = find(v, "r1_grid")) {
    p.r1_grid = num_array(*x, where + ".r1_grid", false);
    if (p.r1_grid.empty()) fail(where + ".r1_grid", "must not be empty");
    for (double r : p.r1_grid) {
      if (r > 1.0) fail(where + ".r1_grid", "entries must be in [0, 1]");
    }
  }
  if (const json* x = find(v, "repetitions")) {
    p.repetitions = static_cast<int>(integer(*x, where + ".repetitions"));
    if (p.repetitions < 1) fail(where + ".repetitions", "must be >= 1");
  }
  p.seed = seed;
  return p;
}

}  // namespace

Scenario parse_scenario(const std::string& text, std::optional<std::uint64_t> seed_override) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("scenario: invalid JSON: ") + e.what());
  }
  check_keys(doc, "scenario",
             {"version", "seed", "network", "demand", "shares", "algorithm", "tradeoff",
              "coalition", "ufl"});

  Scenario sc;
  sc.content_hash = fnv1a64(text.data(), text.size());
  const json& ver = req(doc, "scenario", "version");
  if (!ver.is_number_integer() || ver.get<int>() != 1) {
    fail("scenario.version", "unsupported schema version (expected 1)");
  }
  if (const json* s = find(doc, "seed")) {
    if (!s->is_number_unsigned() && !s->is_number_integer()) {
      fail("scenario.seed", "expected an unsigned integer");
    }
    if (s->is_number_integer() && s->get<std::int64_t>() < 0) {
      fail("scenario.seed", "must be >= 0");
    }
    sc.seed = s->get<std::uint64_t>();
  }
  if (seed_override) sc.seed = *seed_override;

  const json* net = find(doc, "network");
  const json* dem = find(doc, "demand");
  if ((net == nullptr) != (dem == nullptr)) {
    fail("scenario", "network and demand must be given together");
  }
  if (net) {
    sc.net = parse_network(*net);
    const auto problems = validate(sc.net);
    if (!problems.empty()) fail("network", problems.front());
    parse_demand(*dem, sc.net, sc.seed, &sc.demand);
    sc.has_network = true;
  }

  if (const json* sh = find(doc, "shares")) {
    if (!sc.has_network) fail("scenario.shares", "requires a network section");
    if (!sh->is_array() || sh->size() != static_cast<std::size_t>(sc.net.num_anos)) {
      fail("scenario.shares", "needs one row per ANO");
    }
    for (std::size_t a = 0; a < sh->size(); ++a) {
      const std::string at = "scenario.shares[" + std::to_string(a) + "]";
      const auto row = num_array((*sh)[a], at, false);
      if (row.size() != sc.demand.num_cps()) fail(at, "needs one entry per CP");
      for (double r : row) {
        if (r > 1.0) fail(at, "entries must be in [0, 1]");
      }
      sc.shares.push_back(row);
    }
  }

  sc.algorithm = parse_algorithm(find(doc, "algorithm"));
  if (const json* t = find(doc, "tradeoff")) sc.tradeoff = parse_tradeoff(*t);
  if (const json* c = find(doc, "coalition")) sc.coalition = parse_coalition(*c, sc.seed);
  if (const json* u = find(doc, "ufl")) {
    check_keys(*u, "ufl", {"early_stop"});
    if (const json* x = find(*u, "early_stop")) {
      sc.ufl_early_stop = boolean(*x, "ufl.early_stop");
    }
  }
  return sc;
}

Scenario load_scenario(const std::string& path, std::optional<std::uint64_t> seed_override) {
  return parse_scenario(read_text_file(path), seed_override);
}

}  // namespace cachesub
