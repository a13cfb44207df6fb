#pragma once

#include <array>
#include <vector>

#include "cachesub/types.hpp"

namespace cachesub {

// Symmetric three-tier dimensioning problem: e2 intermediate nodes, e1
// leaves each, one CO, aggregate demand T (Mb/s) spread uniformly over the
// leaves, one catalog of volume F (GB) with Zipf(alpha) popularity,
// 0 <= alpha < 1. Tier 1 = leaves, tier 2 = intermediates, tier 3 = CO.
struct TierParams {
  double demand_mbps = 0.0;     // T
  double catalog_gb = 0.0;      // F
  double alpha = 0.8;
  int e1 = 1;
  int e2 = 1;
  std::array<double, 3> storage_price{};  // s per tier, $/GB/month
  std::array<double, 3> link_price{};     // b per tier, $/(Mb/s)/month; [2] = transit
};

struct TierSolution {
  std::array<double, 3> size_gb{};   // per-node cache size per tier
  std::array<bool, 3> enabled{};     // tiers allowed to hold content
  double total_cost = 0.0;           // $/month, storage + residual bandwidth
  double baseline_cost = 0.0;        // all-origin bandwidth bill T*(b1+b2+b3)
  double saving_fraction = 0.0;      // 1 - total/baseline (0 when baseline is 0)
  bool closed_form = true;           // false when the numeric fallback ran
};

// Cost of a concrete choice of cumulative per-path cache sizes
// u[i] = tier-1..i content visible from a leaf (GB), using the continuous
// hit-probability model. Exposed for tests and for the minimizer.
double tier_cost(const TierParams& p, const std::array<double, 3>& cumulative);

// Closed-form optimum with all three tiers enabled.
TierSolution optimal_tier_sizes(const TierParams& p);

// Closed-form optimum with a subset of tiers enabled (at least tier 1 or a
// higher tier must be present; disabled tiers get size 0). Falls back to
// the numeric minimizer and clears `closed_form` when a storage-price
// denominator is not positive (degenerate pricing).
TierSolution optimal_subset_tiers(const TierParams& p, const std::array<bool, 3>& enabled);

// Convex minimization of tier_cost over the cumulative sizes by cyclic
// coordinate descent with ternary search. Serves as the independent check
// of the closed form and as the degenerate-pricing fallback.
TierSolution minimize_tier_cost(const TierParams& p, const std::array<bool, 3>& enabled);

struct SavingsPoint {
  double gamma = 0.0;  // T*b / (F*s) with the tier-1 prices
  std::array<bool, 3> subset{};
  TierSolution solution;
};

// Sweeps the cost factor gamma by scaling T with everything else fixed and
// solves every requested subset at every grid point.
std::vector<SavingsPoint> savings_curve(const TierParams& base, const std::vector<double>& gammas,
                                        const std::vector<std::array<bool, 3>>& subsets);

}  // namespace cachesub
