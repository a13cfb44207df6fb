#include "cachesub/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cachesub {

namespace {

std::size_t idx(NodeId n) { return static_cast<std::size_t>(n); }

}  // namespace

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::converged:
      return "converged";
    case StopReason::iteration_limit:
      return "iteration_limit";
    case StopReason::no_feasible_found:
      return "no_feasible_found";
    case StopReason::zero_subgradient:
      return "zero_subgradient";
  }
  return "unknown";
}

LagrangianEngine::LagrangianEngine(const TreeNetwork& net, const DemandModel& demand,
                                   OptimizeParams params)
    : net_(&net), demand_(&demand), params_(params) {
  if (net_->bfs_order.size() != net_->size()) {
    throw std::invalid_argument("network must be finalized before optimizing");
  }
  auto problems = validate(net);
  if (!problems.empty()) throw std::invalid_argument("unusable network: " + problems.front());
  check_pricing();

  const std::size_t n = net_->size();
  storage_eff_.resize(n);
  uplink_eff_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    storage_eff_[i] = net_->storage_cap[i] ? 0.0 : net_->storage_price[i];
    uplink_eff_[i] = net_->uplink_cap[i] ? 0.0 : net_->uplink_price[i];
    if (net_->storage_cap[i]) {
      storage_capped_.push_back(static_cast<NodeId>(i));
      cap_files_.push_back(static_cast<std::int64_t>(
          std::floor(*net_->storage_cap[i] / net_->file_size_gb + 1e-9)));
    }
    if (net_->uplink_cap[i]) bandwidth_capped_.push_back(static_cast<NodeId>(i));
  }

  under_.assign(n, {});
  for (std::size_t lp = 0; lp < net_->leaves.size(); ++lp) {
    for (NodeId x = net_->leaves[lp]; x != kOrigin; x = net_->parent[idx(x)]) {
      under_[idx(x)].push_back(lp);
    }
  }

  build_views();
}

void LagrangianEngine::check_pricing() const {
  // The accounting below assumes the CO and the transit link are elastic
  // (metered) resources, and that every inner resource is either capacity
  // limited (a sunk cost, effective price zero) or free. A metered inner
  // link would earn savings the per-ANO utility split cannot attribute.
  if (net_->storage_cap[0]) throw std::invalid_argument("the CO must keep elastic storage");
  if (net_->uplink_cap[0]) throw std::invalid_argument("the transit link must stay elastic");
  for (std::size_t i = 1; i < net_->size(); ++i) {
    if (!net_->uplink_cap[i] && net_->uplink_price[i] > 0.0) {
      std::ostringstream os;
      os << "uplink of node " << i << " is metered but not capacity-limited; "
         << "inner links must be sunk or free";
      throw std::invalid_argument(os.str());
    }
  }
}

void LagrangianEngine::check_duals(const DualState& duals) const {
  const std::size_t n = net_->size();
  if (duals.sigma.size() != n || duals.beta.size() != n) {
    throw std::invalid_argument("dual vectors must have one entry per node");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(duals.sigma[i] >= 0.0) || !(duals.beta[i] >= 0.0)) {
      throw std::invalid_argument("shadow prices must be >= 0");
    }
    if (!net_->storage_cap[i] && duals.sigma[i] != 0.0) {
      throw std::invalid_argument("shadow price on elastic storage");
    }
    if (!net_->uplink_cap[i] && duals.beta[i] != 0.0) {
      throw std::invalid_argument("shadow price on an elastic link");
    }
  }
}

void LagrangianEngine::build_views() {
  const auto& leaves = net_->leaves;
  views_.clear();
  views_.resize(demand_->num_cps());
  for (std::size_t k = 0; k < views_.size(); ++k) {
    const auto& d = demand_->of(static_cast<CpId>(k));
    CpView& v = views_[k];
    v.files = d.catalog.files;
    v.zipf = d.zipf.get();
    v.leaf_totals.resize(leaves.size());
    v.ano_totals.assign(static_cast<std::size_t>(net_->num_anos), 0.0);
    v.rank_by_leaf.assign(leaves.size(), nullptr);
    v.explicit_by_leaf.assign(leaves.size(), nullptr);
    for (std::size_t lp = 0; lp < leaves.size(); ++lp) {
      const NodeId l = leaves[lp];
      v.leaf_totals[lp] = demand_->leaf_total(static_cast<CpId>(k), l);
      v.ano_totals[static_cast<std::size_t>(net_->ano[idx(l)])] += v.leaf_totals[lp];
      const auto rit = d.rank_of.find(net_->ano[idx(l)]);
      if (rit != d.rank_of.end()) v.rank_by_leaf[lp] = rit->second.data();
      const auto eit = d.explicit_rates.find(l);
      if (eit != d.explicit_rates.end()) v.explicit_by_leaf[lp] = eit->second.data();
    }
  }
}

double LagrangianEngine::rate(CpId k, std::size_t leaf_pos, std::int64_t f) const {
  const CpView& v = views_[static_cast<std::size_t>(k)];
  if (const double* ex = v.explicit_by_leaf[leaf_pos]) return ex[f];
  if (v.zipf == nullptr) return 0.0;
  const std::uint32_t* rank = v.rank_by_leaf[leaf_pos];
  const std::size_t w = rank ? rank[f] : static_cast<std::size_t>(f);
  return v.leaf_totals[leaf_pos] * v.zipf->weight[w];
}

double LagrangianEngine::leaf_total(CpId k, std::size_t leaf_pos) const {
  return views_[static_cast<std::size_t>(k)].leaf_totals[leaf_pos];
}

double LagrangianEngine::aggregate_rate(CpId k, std::int64_t f) const {
  double total = 0.0;
  for (std::size_t lp = 0; lp < net_->leaves.size(); ++lp) total += rate(k, lp, f);
  return total;
}

std::int64_t LagrangianEngine::storage_cap_files(NodeId n) const {
  const auto it = std::lower_bound(storage_capped_.begin(), storage_capped_.end(), n);
  if (it == storage_capped_.end() || *it != n) {
    throw std::invalid_argument("node has no storage capacity");
  }
  return cap_files_[static_cast<std::size_t>(it - storage_capped_.begin())];
}

double LagrangianEngine::initial_upper_bound() const {
  // No placement can save more than routing every request over the transit
  // link would cost.
  double total = 0.0;
  for (std::size_t k = 0; k < num_cps(); ++k) total += demand_->total(static_cast<CpId>(k));
  return total * uplink_eff_[0];
}

DualState LagrangianEngine::zero_duals() const {
  return DualState{std::vector<double>(net_->size(), 0.0), std::vector<double>(net_->size(), 0.0)};
}

double LagrangianEngine::shadow_path_price(NodeId n, const DualState& duals) const {
  double acc = 0.0;
  for (NodeId x = n; x != kOrigin; x = net_->parent[idx(x)]) {
    acc += uplink_eff_[idx(x)] + duals.beta[idx(x)];
  }
  return acc;
}

CpIterate LagrangianEngine::primal_update(CpId k, const DualState& duals) const {
  check_duals(duals);
  const std::size_t n = net_->size();
  EffectivePrices prices;
  prices.open_cost.resize(n);
  prices.link_price.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    prices.open_cost[i] = (storage_eff_[i] + duals.sigma[i]) * net_->file_size_gb;
    prices.link_price[i] = uplink_eff_[i] + duals.beta[i];
  }
  CpIterate it;
  it.placement = place_catalog(*net_, *demand_, k, prices, params_.early_stop);
  refresh_summary(it);
  return it;
}

void LagrangianEngine::refresh_summary(CpIterate& it) const {
  const std::size_t n = net_->size();
  const auto& leaves = net_->leaves;
  const CpId k = it.placement.cp;
  const std::int64_t files = views_[static_cast<std::size_t>(k)].files;
  const std::size_t anos = static_cast<std::size_t>(net_->num_anos);

  CpSummary s;
  s.cp = k;
  s.cached_files.assign(n, 0);
  s.cached_gb.assign(n, 0.0);
  s.residual_mbps.assign(n, 0.0);
  s.transit_by_ano.assign(anos, 0.0);
  s.zeta.assign(anos, 0.0);
  s.utility_by_ano.assign(anos, 0.0);

  std::vector<double> zeta_acc(anos, 0.0);
  std::vector<double> co_num(anos, 0.0);
  std::int64_t co_cached = 0;

  for (std::int64_t f = 0; f < files; ++f) {
    const auto& open_f = it.placement.open[static_cast<std::size_t>(f)];
    for (NodeId o : open_f) s.cached_files[idx(o)] += 1;
    const auto& srv = it.placement.server[static_cast<std::size_t>(f)];
    const bool co_open = !open_f.empty() && open_f.front() == 0;
    double den = 0.0;
    if (co_open) std::fill(co_num.begin(), co_num.end(), 0.0);
    for (std::size_t lp = 0; lp < leaves.size(); ++lp) {
      const double lam = rate(k, lp, f);
      if (lam <= 0.0) continue;
      const NodeId sv = srv.empty() ? kOrigin : srv[lp];
      for (NodeId x = leaves[lp]; x != sv && x != kOrigin; x = net_->parent[idx(x)]) {
        s.residual_mbps[idx(x)] += lam;
      }
      const std::size_t a = static_cast<std::size_t>(net_->ano[idx(leaves[lp])]);
      if (sv == kOrigin) s.transit_by_ano[a] += lam;
      if (co_open && sv == 0) {
        den += lam;
        co_num[a] += lam;
      }
    }
    if (co_open) {
      ++co_cached;
      // A CO copy can momentarily serve nobody right after a projection
      // edit; it then contributes to no ANO's share.
      if (den > 0.0) {
        for (std::size_t a = 0; a < anos; ++a) zeta_acc[a] += co_num[a] / den;
      }
    }
  }
  if (co_cached > 0) {
    for (std::size_t a = 0; a < anos; ++a) {
      s.zeta[a] = zeta_acc[a] / static_cast<double>(co_cached);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    s.cached_gb[i] = static_cast<double>(s.cached_files[i]) * net_->file_size_gb;
  }

  // Savings attribution: transit avoided at the transit price, minus the
  // metered storage inside the ANO and the ANO's share of the CO cache.
  const double b0 = uplink_eff_[0];
  const double s0 = storage_eff_[0];
  std::vector<double> metered(anos, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    metered[static_cast<std::size_t>(net_->ano[i])] += s.cached_gb[i] * storage_eff_[i];
  }
  double total = 0.0;
  for (std::size_t a = 0; a < anos; ++a) {
    const double served = views_[static_cast<std::size_t>(k)].ano_totals[a] - s.transit_by_ano[a];
    s.utility_by_ano[a] = served * b0 - s.zeta[a] * s.cached_gb[0] * s0 - metered[a];
    total += s.utility_by_ano[a];
  }
  s.utility = total;
  it.summary = std::move(s);
}

bool LagrangianEngine::feasible(const std::vector<CpSummary>& sums) const {
  for (std::size_t i = 0; i < storage_capped_.size(); ++i) {
    const NodeId nd = storage_capped_[i];
    std::int64_t total = 0;
    for (const auto& s : sums) total += s.cached_files[idx(nd)];
    if (total > cap_files_[i]) return false;
  }
  for (NodeId nd : bandwidth_capped_) {
    double total = 0.0;
    for (const auto& s : sums) total += s.residual_mbps[idx(nd)];
    if (total > *net_->uplink_cap[idx(nd)]) return false;
  }
  return true;
}

std::vector<std::string> LagrangianEngine::violations(const std::vector<CpSummary>& sums) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < storage_capped_.size(); ++i) {
    const NodeId nd = storage_capped_[i];
    std::int64_t total = 0;
    for (const auto& s : sums) total += s.cached_files[idx(nd)];
    if (total > cap_files_[i]) {
      std::ostringstream os;
      os << "storage of node " << nd << " over capacity: " << total << " > " << cap_files_[i]
         << " contents";
      out.push_back(os.str());
    }
  }
  for (NodeId nd : bandwidth_capped_) {
    double total = 0.0;
    for (const auto& s : sums) total += s.residual_mbps[idx(nd)];
    if (total > *net_->uplink_cap[idx(nd)]) {
      std::ostringstream os;
      os << "uplink of node " << nd << " over capacity: " << total << " > "
         << *net_->uplink_cap[idx(nd)] << " Mb/s";
      out.push_back(os.str());
    }
  }
  return out;
}

std::vector<CpProjectionDirective> LagrangianEngine::plan_projection(
    const std::vector<CpSummary>& sums) const {
  const std::size_t cps = sums.size();
  std::vector<CpProjectionDirective> out(cps);
  for (std::size_t k = 0; k < cps; ++k) out[k].cp = static_cast<CpId>(k);

  std::vector<char> bw_violated(net_->size(), 0);
  for (NodeId nd : bandwidth_capped_) {
    double total = 0.0;
    for (const auto& s : sums) total += s.residual_mbps[idx(nd)];
    if (total > *net_->uplink_cap[idx(nd)]) bw_violated[idx(nd)] = 1;
  }

  for (std::size_t i = 0; i < storage_capped_.size(); ++i) {
    const NodeId nd = storage_capped_[i];
    const std::int64_t cap = cap_files_[i];
    std::int64_t total = 0;
    for (const auto& s : sums) total += s.cached_files[idx(nd)];
    // A capped store also gets quotas when its own uplink needs repair, so
    // the repairing CPs know how much headroom they may use.
    if (total <= cap && bw_violated[idx(nd)] == 0) continue;

    std::vector<std::int64_t> quota(cps, 0);
    if (total == 0) {
      const auto kn = static_cast<std::int64_t>(cps);
      for (std::size_t k = 0; k < cps; ++k) {
        quota[k] = cap / kn + (static_cast<std::int64_t>(k) < cap % kn ? 1 : 0);
      }
    } else {
      // Largest-remainder apportionment proportional to current use.
      std::int64_t assigned = 0;
      std::vector<std::pair<double, std::size_t>> frac;
      frac.reserve(cps);
      for (std::size_t k = 0; k < cps; ++k) {
        const double share = static_cast<double>(sums[k].cached_files[idx(nd)]) *
                             static_cast<double>(cap) / static_cast<double>(total);
        quota[k] = static_cast<std::int64_t>(std::floor(share + 1e-12));
        assigned += quota[k];
        frac.emplace_back(share - static_cast<double>(quota[k]), k);
      }
      std::stable_sort(frac.begin(), frac.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      std::int64_t left = cap - assigned;
      for (std::size_t j = 0; j < frac.size() && left > 0; ++j, --left) {
        quota[frac[j].second] += 1;
      }
    }
    for (std::size_t k = 0; k < cps; ++k) out[k].storage_quota.emplace_back(nd, quota[k]);
  }

  for (NodeId nd : bandwidth_capped_) {
    if (bw_violated[idx(nd)] == 0) continue;
    double total = 0.0;
    for (const auto& s : sums) total += s.residual_mbps[idx(nd)];
    // Slightly under-assign so the repaired per-CP flows sum back below the
    // capacity even after float rounding.
    const double ratio = *net_->uplink_cap[idx(nd)] * (1.0 - 1e-12) / total;
    for (std::size_t k = 0; k < cps; ++k) {
      out[k].bandwidth_quota.emplace_back(nd, sums[k].residual_mbps[idx(nd)] * ratio);
    }
  }
  return out;
}

bool LagrangianEngine::apply_projection(CpIterate& it, const CpProjectionDirective& d,
                                        const DualState& duals) const {
  check_duals(duals);
  const CpId k = it.placement.cp;
  auto& open = it.placement.open;
  auto& server = it.placement.server;
  const auto& leaves = net_->leaves;
  const std::int64_t files = views_[static_cast<std::size_t>(k)].files;
  const double fs = net_->file_size_gb;

  std::vector<double> spath(net_->size(), 0.0);
  for (NodeId v : net_->bfs_order) {
    spath[idx(v)] = uplink_eff_[idx(v)] + duals.beta[idx(v)] +
                    (v == 0 ? 0.0 : spath[idx(net_->parent[idx(v)])]);
  }

  bool touched = false;

  // Storage quotas: evict the copies that are cheapest to displace. Each
  // displaced copy moves its load to the best alternative up the path: an
  // existing copy, a fresh copy at an elastic node when that is worth its
  // price, or the origin.
  for (const auto& [nd, allowed] : d.storage_quota) {
    std::vector<std::int64_t> stored;
    for (std::int64_t f = 0; f < files; ++f) {
      const auto& of = open[static_cast<std::size_t>(f)];
      if (std::binary_search(of.begin(), of.end(), nd)) stored.push_back(f);
    }
    if (static_cast<std::int64_t>(stored.size()) <= allowed) continue;
    touched = true;

    struct Evict {
      double cost;      // of serving the displaced load the next-best way
      std::int64_t f;
      NodeId target;    // where the load lands; kOrigin or a path node
      bool add_copy;    // target is a fresh copy, not an existing one
    };
    std::vector<Evict> cands;
    cands.reserve(stored.size());
    for (std::int64_t f : stored) {
      const auto& of = open[static_cast<std::size_t>(f)];
      double displaced = 0.0;
      const auto& sv = server[static_cast<std::size_t>(f)];
      for (std::size_t lp : under_[idx(nd)]) {
        if (sv[lp] == nd) displaced += rate(k, lp, f);
      }
      Evict best{displaced * spath[idx(nd)], f, kOrigin, false};
      for (NodeId x = net_->parent[idx(nd)]; x != kOrigin; x = net_->parent[idx(x)]) {
        const double hop = spath[idx(nd)] - spath[idx(x)];
        if (std::binary_search(of.begin(), of.end(), x)) {
          // Nearest existing copy; nothing further up can beat free storage
          // plus a shorter hop than the origin's.
          if (displaced * hop < best.cost) best = {displaced * hop, f, x, false};
          break;
        }
        if (!net_->storage_cap[idx(x)]) {  // elastic stores never overflow
          const double cost = displaced * hop + (storage_eff_[idx(x)] + duals.sigma[idx(x)]) * fs;
          if (cost < best.cost) best = {cost, f, x, true};
        }
      }
      cands.push_back(best);
    }
    // Cheapest displacements go first; among ties the least popular file.
    std::sort(cands.begin(), cands.end(), [](const Evict& a, const Evict& b) {
      if (a.cost != b.cost) return a.cost < b.cost;
      return a.f > b.f;
    });
    const std::int64_t drop = static_cast<std::int64_t>(stored.size()) - allowed;
    for (std::int64_t j = 0; j < drop; ++j) {
      const Evict& e = cands[static_cast<std::size_t>(j)];
      auto& of = open[static_cast<std::size_t>(e.f)];
      of.erase(std::lower_bound(of.begin(), of.end(), nd));
      if (e.add_copy) of.insert(std::lower_bound(of.begin(), of.end(), e.target), e.target);
      auto& sv = server[static_cast<std::size_t>(e.f)];
      for (std::size_t lp : under_[idx(nd)]) {
        if (sv[lp] == nd) sv[lp] = e.target;
      }
    }
  }

  // Bandwidth quotas, deepest links first: pull crossing flows down by
  // holding the busiest crossing contents at the link's own node.
  auto bw = d.bandwidth_quota;
  std::stable_sort(bw.begin(), bw.end(), [this](const auto& a, const auto& b) {
    const int da = net_->depth[idx(a.first)];
    const int db = net_->depth[idx(b.first)];
    if (da != db) return da > db;
    return a.first < b.first;
  });
  for (const auto& [nd, allowed] : bw) {
    const auto& lps = under_[idx(nd)];
    const int dn = net_->depth[idx(nd)];
    std::vector<double> cross(static_cast<std::size_t>(files), 0.0);
    double current = 0.0;
    for (std::int64_t f = 0; f < files; ++f) {
      const auto& sv = server[static_cast<std::size_t>(f)];
      double c = 0.0;
      for (std::size_t lp : lps) {
        const NodeId at = sv[lp];
        if (at == kOrigin || net_->depth[idx(at)] < dn) c += rate(k, lp, f);
      }
      cross[static_cast<std::size_t>(f)] = c;
      current += c;
    }
    if (current <= allowed) continue;
    touched = true;

    // Flows that already have a copy at the node just need re-routing.
    for (std::int64_t f = 0; f < files && current > allowed; ++f) {
      if (cross[static_cast<std::size_t>(f)] <= 0.0) continue;
      const auto& of = open[static_cast<std::size_t>(f)];
      if (!std::binary_search(of.begin(), of.end(), nd)) continue;
      auto& sv = server[static_cast<std::size_t>(f)];
      for (std::size_t lp : lps) {
        const NodeId at = sv[lp];
        if (at == kOrigin || net_->depth[idx(at)] < dn) sv[lp] = nd;
      }
      current -= cross[static_cast<std::size_t>(f)];
      cross[static_cast<std::size_t>(f)] = 0.0;
    }

    std::int64_t head = std::numeric_limits<std::int64_t>::max();
    if (net_->storage_cap[idx(nd)]) {
      std::int64_t quota = -1;
      for (const auto& [qn, q] : d.storage_quota) {
        if (qn == nd) {
          quota = q;
          break;
        }
      }
      if (quota < 0) return false;  // directive was not built by plan_projection
      std::int64_t count = 0;
      for (std::int64_t f = 0; f < files; ++f) {
        const auto& of = open[static_cast<std::size_t>(f)];
        if (std::binary_search(of.begin(), of.end(), nd)) ++count;
      }
      head = quota - count;
    }

    if (current > allowed) {
      std::vector<std::int64_t> order;
      for (std::int64_t f = 0; f < files; ++f) {
        if (cross[static_cast<std::size_t>(f)] <= 0.0) continue;
        const auto& of = open[static_cast<std::size_t>(f)];
        if (!std::binary_search(of.begin(), of.end(), nd)) order.push_back(f);
      }
      std::sort(order.begin(), order.end(), [&cross](std::int64_t a, std::int64_t b) {
        const double ca = cross[static_cast<std::size_t>(a)];
        const double cb = cross[static_cast<std::size_t>(b)];
        if (ca != cb) return ca > cb;
        return a < b;
      });
      for (std::int64_t f : order) {
        if (current <= allowed || head == 0) break;
        auto& of = open[static_cast<std::size_t>(f)];
        of.insert(std::lower_bound(of.begin(), of.end(), nd), nd);
        auto& sv = server[static_cast<std::size_t>(f)];
        for (std::size_t lp : lps) {
          const NodeId at = sv[lp];
          if (at == kOrigin || net_->depth[idx(at)] < dn) sv[lp] = nd;
        }
        current -= cross[static_cast<std::size_t>(f)];
        --head;
      }
      if (current > allowed) return false;
    }
  }

  // Copies orphaned by the moves above only cost money; drop them.
  if (touched) {
    for (std::int64_t f = 0; f < files; ++f) {
      auto& of = open[static_cast<std::size_t>(f)];
      if (of.empty()) continue;
      auto& sv = server[static_cast<std::size_t>(f)];
      std::vector<NodeId> kept;
      kept.reserve(of.size());
      for (NodeId o : of) {
        double served = 0.0;
        for (std::size_t lp : under_[idx(o)]) {
          if (sv[lp] == o) served += rate(k, lp, f);
        }
        if (served > 0.0) kept.push_back(o);
      }
      if (kept.size() == of.size()) continue;
      for (std::size_t lp = 0; lp < leaves.size(); ++lp) {
        const NodeId at = sv[lp];
        if (at == kOrigin || std::binary_search(kept.begin(), kept.end(), at)) continue;
        NodeId repl = kOrigin;
        for (NodeId x = leaves[lp]; x != kOrigin; x = net_->parent[idx(x)]) {
          if (std::binary_search(kept.begin(), kept.end(), x)) {
            repl = x;
            break;
          }
        }
        sv[lp] = repl;
      }
      of = std::move(kept);
    }
  }

  refresh_summary(it);
  return true;
}

double LagrangianEngine::utility_total(const std::vector<CpSummary>& sums) const {
  double total = 0.0;
  for (const auto& s : sums) total += s.utility;
  return total;
}

double LagrangianEngine::lagrangian_value(const std::vector<CpSummary>& sums,
                                          const DualState& duals) const {
  check_duals(duals);
  double value = utility_total(sums);
  for (NodeId nd : storage_capped_) {
    double used = 0.0;
    for (const auto& s : sums) used += s.cached_gb[idx(nd)];
    value += duals.sigma[idx(nd)] * (*net_->storage_cap[idx(nd)] - used);
  }
  for (NodeId nd : bandwidth_capped_) {
    double used = 0.0;
    for (const auto& s : sums) used += s.residual_mbps[idx(nd)];
    value += duals.beta[idx(nd)] * (*net_->uplink_cap[idx(nd)] - used);
  }
  return value;
}

Subgradients LagrangianEngine::subgradients(const std::vector<CpSummary>& sums) const {
  Subgradients g;
  g.storage.reserve(storage_capped_.size());
  g.bandwidth.reserve(bandwidth_capped_.size());
  for (NodeId nd : storage_capped_) {
    double used = 0.0;
    for (const auto& s : sums) used += s.cached_gb[idx(nd)];
    const double v = used - *net_->storage_cap[idx(nd)];
    g.storage.push_back(v);
    g.norm2 += v * v;
  }
  for (NodeId nd : bandwidth_capped_) {
    double used = 0.0;
    for (const auto& s : sums) used += s.residual_mbps[idx(nd)];
    const double v = used - *net_->uplink_cap[idx(nd)];
    g.bandwidth.push_back(v);
    g.norm2 += v * v;
  }
  return g;
}

std::optional<double> LagrangianEngine::polyak_step(double gamma, double lagrangian, double lb,
                                                    const Subgradients& g) const {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (g.norm2 == 0.0) return std::nullopt;
  return gamma * std::abs(lagrangian - lb) / g.norm2;
}

void LagrangianEngine::dual_update(DualState& duals, double step, const Subgradients& g,
                                   AnoId only_ano) const {
  if (!(step >= 0.0)) throw std::invalid_argument("step must be >= 0");
  check_duals(duals);
  if (g.storage.size() != storage_capped_.size() || g.bandwidth.size() != bandwidth_capped_.size()) {
    throw std::invalid_argument("subgradient does not match the capacity layout");
  }
  for (std::size_t i = 0; i < storage_capped_.size(); ++i) {
    const NodeId nd = storage_capped_[i];
    if (only_ano != kNoAno && net_->ano[idx(nd)] != only_ano) continue;
    duals.sigma[idx(nd)] = std::max(0.0, duals.sigma[idx(nd)] + step * g.storage[i]);
  }
  for (std::size_t i = 0; i < bandwidth_capped_.size(); ++i) {
    const NodeId nd = bandwidth_capped_[i];
    if (only_ano != kNoAno && net_->ano[idx(nd)] != only_ano) continue;
    duals.beta[idx(nd)] = std::max(0.0, duals.beta[idx(nd)] + step * g.bandwidth[i]);
  }
}

OptimizationResult orchestrate(const TreeNetwork& net, const DemandModel& demand,
                               const OptimizeParams& params) {
  LagrangianEngine eng(net, demand, params);
  const std::size_t cps = eng.num_cps();
  DualState duals = eng.zero_duals();

  OptimizationResult res;
  double lb = 0.0;
  double ub = eng.initial_upper_bound();
  const double eps = params.epsilon_fraction * ub;
  double gamma = params.gamma;
  int stall = 0;
  res.reason = StopReason::iteration_limit;

  const auto summaries_of = [&](const std::vector<CpIterate>& its) {
    std::vector<CpSummary> out;
    out.reserve(its.size());
    for (const auto& itr : its) out.push_back(itr.summary);
    return out;
  };

  for (int tau = 1; tau <= params.tau_max; ++tau) {
    std::vector<CpIterate> iterates;
    iterates.reserve(cps);
    for (std::size_t k = 0; k < cps; ++k) {
      iterates.push_back(eng.primal_update(static_cast<CpId>(k), duals));
    }
    const std::vector<CpSummary> relaxed = summaries_of(iterates);
    const double lagr = eng.lagrangian_value(relaxed, duals);
    const Subgradients grads = eng.subgradients(relaxed);

    bool have = eng.feasible(relaxed);
    bool projected = false;
    if (!have) {
      // Repairing one resource can push load onto another (evictions move
      // flows upward), so re-plan a couple of times before giving up.
      for (int pass = 0; pass < 3; ++pass) {
        const auto plan = eng.plan_projection(summaries_of(iterates));
        bool ok = true;
        for (std::size_t k = 0; k < cps && ok; ++k) {
          ok = eng.apply_projection(iterates[k], plan[k], duals);
        }
        if (!ok) break;
        if (eng.feasible(summaries_of(iterates))) {
          have = true;
          projected = true;
          break;
        }
      }
    }

    double ucand = 0.0;
    if (have) {
      ucand = eng.utility_total(summaries_of(iterates));
      if (res.best_tau < 0 || ucand > lb) {
        res.best_placement.clear();
        res.best_summaries.clear();
        for (auto& itr : iterates) {
          res.best_placement.push_back(itr.placement);
          res.best_summaries.push_back(itr.summary);
        }
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

    if (ub - lb <= eps) {
      res.trace.push_back(rec);
      res.reason = StopReason::converged;
      break;
    }
    if (tau == params.tau_max) {
      res.trace.push_back(rec);
      res.reason = res.best_tau > 0 ? StopReason::iteration_limit : StopReason::no_feasible_found;
      break;
    }
    const auto step = eng.polyak_step(gamma, lagr, lb, grads);
    if (!step) {
      res.trace.push_back(rec);
      res.reason = StopReason::zero_subgradient;
      break;
    }
    rec.step = *step;
    res.trace.push_back(rec);
    eng.dual_update(duals, *step, grads);
  }

  res.final_duals = std::move(duals);
  res.lower_bound = lb;
  res.upper_bound = ub;
  return res;
}

namespace {

// Normalizes and checks externally supplied placements, then derives their
// summaries. Empty server arrays mean everything ships from the origin.
std::vector<CpIterate> iterates_from(const LagrangianEngine& eng,
                                     std::vector<CatalogPlacement> placements) {
  if (placements.size() != eng.num_cps()) {
    throw std::invalid_argument("one placement per CP expected");
  }
  const TreeNetwork& net = eng.net();
  const std::size_t leaves = net.leaves.size();
  const std::size_t n = net.size();
  std::vector<CpIterate> out;
  out.reserve(placements.size());
  for (std::size_t k = 0; k < placements.size(); ++k) {
    CatalogPlacement& p = placements[k];
    if (p.cp != static_cast<CpId>(k)) {
      throw std::invalid_argument("placements must be ordered by CP id");
    }
    const std::int64_t files = eng.demand().of(p.cp).catalog.files;
    if (static_cast<std::int64_t>(p.open.size()) != files ||
        static_cast<std::int64_t>(p.server.size()) != files) {
      throw std::invalid_argument("placement does not cover the whole catalog");
    }
    for (std::int64_t f = 0; f < files; ++f) {
      auto& of = p.open[static_cast<std::size_t>(f)];
      if (!std::is_sorted(of.begin(), of.end()) ||
          std::adjacent_find(of.begin(), of.end()) != of.end()) {
        throw std::invalid_argument("copy lists must be sorted sets of node ids");
      }
      if (!of.empty() && (of.front() < 0 || static_cast<std::size_t>(of.back()) >= n)) {
        throw std::invalid_argument("copy at an unknown node");
      }
      auto& sv = p.server[static_cast<std::size_t>(f)];
      if (sv.empty()) sv.assign(leaves, kOrigin);
      if (sv.size() != leaves) {
        throw std::invalid_argument("server arrays must cover every leaf");
      }
      for (std::size_t lp = 0; lp < leaves; ++lp) {
        const NodeId at = sv[lp];
        if (at == kOrigin) continue;
        if (!std::binary_search(of.begin(), of.end(), at)) {
          throw std::invalid_argument("a leaf is served by a node that does not hold the content");
        }
        bool on_path = false;
        for (NodeId x = net.leaves[lp]; x != kOrigin; x = net.parent[static_cast<std::size_t>(x)]) {
          if (x == at) {
            on_path = true;
            break;
          }
        }
        if (!on_path) throw std::invalid_argument("a leaf is served from outside its own path");
      }
    }
    CpIterate itr;
    itr.placement = std::move(p);
    eng.refresh_summary(itr);
    out.push_back(std::move(itr));
  }
  return out;
}

std::vector<CpSummary> summaries_of(const std::vector<CpIterate>& its) {
  std::vector<CpSummary> out;
  out.reserve(its.size());
  for (const auto& itr : its) out.push_back(itr.summary);
  return out;
}

}  // namespace

double utility(const TreeNetwork& net, const DemandModel& demand,
               const std::vector<CatalogPlacement>& placements) {
  LagrangianEngine eng(net, demand, OptimizeParams{});
  const auto its = iterates_from(eng, placements);
  return eng.utility_total(summaries_of(its));
}

double lagrangian(const TreeNetwork& net, const DemandModel& demand,
                  const std::vector<CatalogPlacement>& placements, const DualState& duals) {
  LagrangianEngine eng(net, demand, OptimizeParams{});
  const auto its = iterates_from(eng, placements);
  return eng.lagrangian_value(summaries_of(its), duals);
}

ProjectionOutcome project_to_feasible(const TreeNetwork& net, const DemandModel& demand,
                                      std::vector<CatalogPlacement> placements) {
  LagrangianEngine eng(net, demand, OptimizeParams{});
  auto its = iterates_from(eng, std::move(placements));
  const DualState duals = eng.zero_duals();
  for (int pass = 0; pass < 3 && !eng.feasible(summaries_of(its)); ++pass) {
    const auto plan = eng.plan_projection(summaries_of(its));
    bool ok = true;
    for (std::size_t k = 0; k < its.size() && ok; ++k) {
      ok = eng.apply_projection(its[k], plan[k], duals);
    }
    if (!ok) break;
  }
  ProjectionOutcome out;
  out.summaries = summaries_of(its);
  out.ok = eng.feasible(out.summaries);
  out.placements.reserve(its.size());
  for (auto& itr : its) out.placements.push_back(std::move(itr.placement));
  return out;
}

std::vector<SettlementEntry> settle(const TreeNetwork& net, const DemandModel& demand,
                                    const std::vector<CpSummary>& summaries,
                                    const DualState& duals,
                                    const std::vector<std::vector<double>>& share_ano_cp,
                                    const MeasuredTraffic* measured) {
  LagrangianEngine eng(net, demand, OptimizeParams{});
  eng.check_duals(duals);
  const std::size_t cps = eng.num_cps();
  const std::size_t anos = static_cast<std::size_t>(net.num_anos);
  const std::size_t n = net.size();

  if (summaries.size() != cps) throw std::invalid_argument("one summary per CP expected");
  for (std::size_t k = 0; k < cps; ++k) {
    if (summaries[k].cp != static_cast<CpId>(k) || summaries[k].cached_gb.size() != n ||
        summaries[k].residual_mbps.size() != n || summaries[k].transit_by_ano.size() != anos ||
        summaries[k].zeta.size() != anos) {
      throw std::invalid_argument("summary does not match the network layout");
    }
  }
  if (share_ano_cp.size() != anos) throw std::invalid_argument("one share row per ANO expected");
  for (const auto& row : share_ano_cp) {
    if (row.size() != cps) throw std::invalid_argument("one share per CP expected");
    for (double r : row) {
      if (!(r >= 0.0) || r > 1.0) throw std::invalid_argument("shares must be within [0, 1]");
    }
  }
  if (measured != nullptr) {
    if (measured->leaf_total_mbps.size() != cps || measured->residual_mbps.size() != cps ||
        measured->transit_by_ano.size() != cps) {
      throw std::invalid_argument("measured traffic must cover every CP");
    }
    for (std::size_t k = 0; k < cps; ++k) {
      if (measured->leaf_total_mbps[k].size() != n || measured->residual_mbps[k].size() != n ||
          measured->transit_by_ano[k].size() != anos) {
        throw std::invalid_argument("measured traffic does not match the network layout");
      }
      for (double v : measured->leaf_total_mbps[k]) {
        if (!(v >= 0.0)) throw std::invalid_argument("measured traffic must be >= 0");
      }
      for (double v : measured->residual_mbps[k]) {
        if (!(v >= 0.0)) throw std::invalid_argument("measured traffic must be >= 0");
      }
      for (double v : measured->transit_by_ano[k]) {
        if (!(v >= 0.0)) throw std::invalid_argument("measured traffic must be >= 0");
      }
    }
  }

  std::vector<SettlementEntry> out;
  out.reserve(anos * cps);
  const double b0 = eng.uplink_price_eff(0);
  const double s0 = eng.storage_price_eff(0);
  for (AnoId a = 0; a < static_cast<AnoId>(anos); ++a) {
    for (CpId k = 0; k < static_cast<CpId>(cps); ++k) {
      const CpSummary& s = summaries[static_cast<std::size_t>(k)];
      // Baseline: every measured request would have traveled the whole way
      // to the origin, paying shadow and transit prices on each hop.
      double baseline = 0.0;
      for (std::size_t lp = 0; lp < net.leaves.size(); ++lp) {
        const NodeId l = net.leaves[lp];
        if (net.ano[static_cast<std::size_t>(l)] != a) continue;
        const double t = measured != nullptr
                             ? measured->leaf_total_mbps[static_cast<std::size_t>(k)]
                                                        [static_cast<std::size_t>(l)]
                             : demand.leaf_total(k, l);
        baseline += t * eng.shadow_path_price(l, duals);
      }
      // What actually remains on the wires and in the racks.
      double link_fees = 0.0;
      double storage_fees = 0.0;
      double storage_paid = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        if (net.ano[i] != a) continue;
        const NodeId nd = static_cast<NodeId>(i);
        const double lam = measured != nullptr
                               ? measured->residual_mbps[static_cast<std::size_t>(k)][i]
                               : s.residual_mbps[i];
        link_fees += lam * (duals.beta[i] + eng.uplink_price_eff(nd));
        storage_fees += s.cached_gb[i] * (duals.sigma[i] + eng.storage_price_eff(nd));
        storage_paid += s.cached_gb[i] * eng.storage_price_eff(nd);
      }
      const double transit = measured != nullptr
                                 ? measured->transit_by_ano[static_cast<std::size_t>(k)]
                                                           [static_cast<std::size_t>(a)]
                                 : s.transit_by_ano[static_cast<std::size_t>(a)];
      const double zeta = s.zeta[static_cast<std::size_t>(a)];
      const double co_fee = zeta * s.cached_gb[0] * (s0 + duals.sigma[0]);
      const double saving = baseline - link_fees - transit * b0 - storage_fees - co_fee;

      SettlementEntry e;
      e.ano = a;
      e.cp = k;
      e.saving = saving;
      e.subsidy = share_ano_cp[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)] * saving;
      e.storage_payment = storage_paid + zeta * s.cached_gb[0] * s0;
      e.transit_payment = transit * b0;
      out.push_back(e);
    }
  }
  return out;
}

}  // namespace cachesub
