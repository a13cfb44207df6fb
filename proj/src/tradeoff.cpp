#include "cachesub/tradeoff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cachesub/demand.hpp"

namespace cachesub {

namespace {

void check_params(const TierParams& p) {
  if (!(p.catalog_gb > 0.0)) throw std::invalid_argument("catalog volume must be positive");
  if (!(p.demand_mbps >= 0.0)) throw std::invalid_argument("demand must be >= 0");
  if (!(p.alpha >= 0.0 && p.alpha < 1.0)) {
    throw std::invalid_argument("tier sizing requires 0 <= alpha < 1");
  }
  if (p.e1 < 1 || p.e2 < 1) throw std::invalid_argument("fanouts must be >= 1");
  for (int i = 0; i < 3; ++i) {
    if (!(p.storage_price[static_cast<std::size_t>(i)] >= 0.0) ||
        !(p.link_price[static_cast<std::size_t>(i)] >= 0.0)) {
      throw std::invalid_argument("prices must be >= 0");
    }
  }
}

std::array<double, 3> multiplicities(const TierParams& p) {
  return {static_cast<double>(p.e1) * p.e2, static_cast<double>(p.e2), 1.0};
}

TierSolution package(const TierParams& p, const std::array<double, 3>& cum, bool closed_form) {
  TierSolution s;
  s.size_gb = {cum[0], cum[1] - cum[0], cum[2] - cum[1]};
  for (double& v : s.size_gb) v = std::max(v, 0.0);
  s.total_cost = tier_cost(p, cum);
  s.baseline_cost = p.demand_mbps * (p.link_price[0] + p.link_price[1] + p.link_price[2]);
  s.saving_fraction = s.baseline_cost > 0.0 ? 1.0 - s.total_cost / s.baseline_cost : 0.0;
  s.closed_form = closed_form;
  return s;
}

}  // namespace

double tier_cost(const TierParams& p, const std::array<double, 3>& cum) {
  const auto m = multiplicities(p);
  double cost = 0.0;
  double below = 0.0;
  for (int i = 0; i < 3; ++i) {
    const auto t = static_cast<std::size_t>(i);
    cost += m[t] * (cum[t] - below) * p.storage_price[t];
    cost += p.demand_mbps * (1.0 - hit_prob_continuous(cum[t], p.catalog_gb, p.alpha)) *
            p.link_price[t];
    below = cum[t];
  }
  return cost;
}

TierSolution optimal_tier_sizes(const TierParams& p) {
  return optimal_subset_tiers(p, {true, true, true});
}

TierSolution optimal_subset_tiers(const TierParams& p, const std::array<bool, 3>& enabled) {
  check_params(p);
  const auto m = multiplicities(p);

  std::vector<int> tiers;
  for (int i = 0; i < 3; ++i) {
    if (enabled[static_cast<std::size_t>(i)]) tiers.push_back(i);
  }
  if (tiers.empty()) {
    TierSolution s = package(p, {0.0, 0.0, 0.0}, true);
    s.enabled = enabled;
    return s;
  }

  // Stationarity of the cumulative size w at tier j against the next
  // enabled tier up: h'(w) * T * B = D with B the link prices bridged and
  // D the net marginal storage price. Merging (dropping the upper tier of
  // a violating pair) re-solves the same equations on the reduced set.
  auto solve_chain = [&](const std::vector<int>& js, std::vector<double>& w) -> bool {
    w.assign(js.size(), 0.0);
    for (std::size_t t = 0; t < js.size(); ++t) {
      const int j = js[t];
      const int next = t + 1 < js.size() ? js[t + 1] : 3;
      double bridge = 0.0;
      for (int i = j; i < next; ++i) bridge += p.link_price[static_cast<std::size_t>(i)];
      double dstor = m[static_cast<std::size_t>(j)] * p.storage_price[static_cast<std::size_t>(j)];
      if (next < 3) dstor -= m[static_cast<std::size_t>(next)] * p.storage_price[static_cast<std::size_t>(next)];
      if (!(dstor > 0.0)) return false;  // degenerate pricing
      if (bridge == 0.0 || p.demand_mbps == 0.0) {
        w[t] = 0.0;
        continue;
      }
      const double x = (1.0 - p.alpha) * p.demand_mbps * bridge / (p.catalog_gb * dstor);
      double frac;
      if (p.alpha == 0.0) {
        frac = x > 1.0 ? 1.0 : 0.0;  // limit of x^(1/alpha)
      } else {
        frac = std::min(1.0, std::pow(x, 1.0 / p.alpha));
      }
      w[t] = p.catalog_gb * frac;
    }
    return true;
  };

  std::vector<int> js = tiers;
  std::vector<double> w;
  while (true) {
    if (!solve_chain(js, w)) {
      TierSolution s = minimize_tier_cost(p, enabled);
      s.enabled = enabled;
      s.closed_form = false;
      return s;
    }
    std::size_t bad = js.size();
    for (std::size_t t = 0; t + 1 < js.size(); ++t) {
      if (w[t] > w[t + 1]) {
        bad = t;
        break;
      }
    }
    if (bad == js.size()) break;
    js.erase(js.begin() + static_cast<std::ptrdiff_t>(bad) + 1);  // upper tier adds nothing
  }

  std::array<double, 3> cum{};
  double cur = 0.0;
  for (int i = 0; i < 3; ++i) {
    auto it = std::find(js.begin(), js.end(), i);
    if (it != js.end()) cur = w[static_cast<std::size_t>(it - js.begin())];
    cum[static_cast<std::size_t>(i)] = cur;
  }
  TierSolution s = package(p, cum, true);
  s.enabled = enabled;
  return s;
}

TierSolution minimize_tier_cost(const TierParams& p, const std::array<bool, 3>& enabled) {
  check_params(p);
  std::vector<int> js;
  for (int i = 0; i < 3; ++i) {
    if (enabled[static_cast<std::size_t>(i)]) js.push_back(i);
  }

  auto expand = [&](const std::vector<double>& w) {
    std::array<double, 3> cum{};
    double cur = 0.0;
    for (int i = 0; i < 3; ++i) {
      auto it = std::find(js.begin(), js.end(), i);
      if (it != js.end()) cur = w[static_cast<std::size_t>(it - js.begin())];
      cum[static_cast<std::size_t>(i)] = cur;
    }
    return cum;
  };

  std::vector<double> w(js.size(), 0.0);
  if (!js.empty()) {
    // Coordinate descent over single tiers is not enough: the optimum can
    // pin neighboring tiers to a common size (an active chain constraint),
    // and then no one-at-a-time move improves. Sliding every contiguous
    // block as one variable covers exactly the extreme feasible directions
    // of the chain w_1 <= w_2 <= w_3, so a sweep-stable point is optimal.
    double best = tier_cost(p, expand(w));
    std::vector<double> trial;
    for (int sweep = 0; sweep < 200; ++sweep) {
      const double before = best;
      for (std::size_t t0 = 0; t0 < js.size(); ++t0) {
        for (std::size_t t1 = t0; t1 < js.size(); ++t1) {
          double lo = t0 > 0 ? w[t0 - 1] : 0.0;
          double hi = t1 + 1 < js.size() ? w[t1 + 1] : p.catalog_gb;
          hi = std::max(hi, lo);
          trial = w;
          auto set_block = [&trial, t0, t1](double v) {
            for (std::size_t t = t0; t <= t1; ++t) trial[t] = v;
          };
          for (int it = 0; it < 200; ++it) {
            const double m1 = lo + (hi - lo) / 3.0;
            const double m2 = hi - (hi - lo) / 3.0;
            set_block(m1);
            const double c1 = tier_cost(p, expand(trial));
            set_block(m2);
            const double c2 = tier_cost(p, expand(trial));
            if (c1 <= c2) {
              hi = m2;
            } else {
              lo = m1;
            }
          }
          set_block(0.5 * (lo + hi));
          const double cand = tier_cost(p, expand(trial));
          if (cand < best) {
            best = cand;
            w = trial;
          }
        }
      }
      if (before - best <= 1e-14 * std::max(1.0, std::abs(best))) break;
    }
  }

  TierSolution s = package(p, expand(w), false);
  s.enabled = enabled;
  return s;
}

std::vector<SavingsPoint> savings_curve(const TierParams& base, const std::vector<double>& gammas,
                                        const std::vector<std::array<bool, 3>>& subsets) {
  check_params(base);
  if (!(base.link_price[0] > 0.0)) {
    throw std::invalid_argument("gamma sweep needs a positive tier-1 link price");
  }
  std::vector<SavingsPoint> out;
  out.reserve(gammas.size() * subsets.size());
  for (double g : gammas) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw std::invalid_argument("gamma must be finite and >= 0");
    TierParams p = base;
    p.demand_mbps = g * base.catalog_gb * base.storage_price[0] / base.link_price[0];
    for (const auto& sub : subsets) {
      SavingsPoint pt;
      pt.gamma = g;
      pt.subset = sub;
      pt.solution = optimal_subset_tiers(p, sub);
      out.push_back(std::move(pt));
    }
  }
  return out;
}

}  // namespace cachesub
