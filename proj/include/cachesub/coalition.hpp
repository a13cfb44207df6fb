#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "cachesub/demand.hpp"
#include "cachesub/types.hpp"

namespace cachesub {

// Cooperative cache-subsidy game between one CP and a set of ANOs sharing a
// CO cache. Demand is per (ANO, content): lambda_a^f in Mb/s. `s` is the
// monthly cost of keeping one content cached, `b` the transit price, and
// `share[a]` the fraction r_a of ANO a's value gain handed back as subsidy.
class CoGame {
 public:
  // Explicit demand matrix, rates[a][f].
  static CoGame explicit_demand(std::vector<std::vector<double>> rates, double s, double b,
                                std::vector<double> share);
  // Zipf totals: ANO a's demand is total[a] * weight[rank_of_a(f)]; ANO 0
  // keeps the canonical ranking, rank permutations attach to higher ANOs.
  static CoGame zipf_demand(std::vector<double> total_mbps, std::shared_ptr<const ZipfTable> zipf,
                            std::map<AnoId, std::vector<std::uint32_t>> rank_of, double s, double b,
                            std::vector<double> share);

  int num_anos() const { return static_cast<int>(share_.size()); }
  std::int64_t files() const { return files_; }
  double rate(AnoId a, std::int64_t f) const;
  double storage_price_per_content() const { return s_; }
  double traffic_price() const { return b_; }
  const std::vector<double>& share() const { return share_; }

 private:
  CoGame() = default;
  std::int64_t files_ = 0;
  double s_ = 0.0;
  double b_ = 0.0;
  std::vector<double> share_;
  std::vector<std::vector<double>> rates_;  // explicit mode
  std::vector<double> total_;               // zipf mode
  std::shared_ptr<const ZipfTable> zipf_;
  std::map<AnoId, std::vector<std::uint32_t>> rank_of_;
};

// Contents worth caching for the ANO subset `members` (bit a set = ANO a
// participates): aggregate demand strictly above s/b.
std::vector<std::int64_t> optimal_set(const CoGame& g, std::uint32_t members);
inline std::vector<std::int64_t> optimal_set(const CoGame& g) {
  return optimal_set(g, (1u << static_cast<std::uint32_t>(g.num_anos())) - 1u);
}

// Total monthly saving of the coalition of `members` with the CP when the
// given contents are cached at the CO.
double savings(const CoGame& g, const std::vector<std::int64_t>& cached, std::uint32_t members);
inline double savings(const CoGame& g, const std::vector<std::int64_t>& cached) {
  return savings(g, cached, (1u << static_cast<std::uint32_t>(g.num_anos())) - 1u);
}

// Characteristic value of an ANO subset together with the CP: the optimal
// saving the sub-coalition can generate on its own.
double coalition_value(const CoGame& g, std::uint32_t members);

struct ValueLedger {
  std::vector<std::int64_t> cached;
  double total_saving = 0.0;           // sum of phi over ANOs
  std::vector<double> phi;             // per-ANO value gain
  std::vector<double> subsidy;         // r_a * phi_a
  double subsidy_total = 0.0;
  std::vector<double> zeta;            // co-cost shares (zeta ledger only)
  std::vector<std::vector<double>> eta;  // eta[a][i] for cached[i] (optional)
};

// Demand-proportional split: eta_a(f) = lambda_a^f / sum_n lambda_n^f and
// phi_a = sum_{f in C} (lambda_a^f b - eta_a(f) s). Per-file shares are
// materialized only when keep_per_file is set.
ValueLedger eta_distribution(const CoGame& g, const std::vector<std::int64_t>& cached,
                             bool keep_per_file = false);

// Aggregate split from hit volumes only: zeta_a = T_a h_a / sum_n T_n h_n
// and phi_a = T_a h_a b - zeta_a |C| s, where T_a h_a is ANO a's demand
// falling on the cached set.
ValueLedger zeta_distribution(const CoGame& g, const std::vector<std::int64_t>& cached);

// Contents maximizing the total subsidy under per-ANO pass-through shares
// r: include f when sum_a r_a lambda_a^f b - sum_a r_a eta_a(f) s > 0.
std::vector<std::int64_t> subsidy_maximizing_set(const CoGame& g, const std::vector<double>& r);

// Exact Shapley value over the player set {CP, ANO_0, .., ANO_{A-1}} by
// full permutation enumeration; refuses more than 8 players. Index 0 of the
// result is the CP. Verification fixture, not a production path.
std::vector<double> shapley_oracle(const CoGame& g);

// Two-ANO comparison of the exact eta split against the aggregate zeta
// estimate, averaged over random rank permutations of ANO 1 (ANO 0 keeps
// the canonical order). err values are percentages.
struct VerificationParams {
  std::int64_t files = 100000;
  double alpha = 0.8;
  double total1_mbps = 160.0;
  double total2_mbps = 80.0;
  double storage_price_per_content = 3e-5;
  double traffic_price = 4.0;
  double r2 = 0.5;
  std::vector<double> r1_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int repetitions = 10;
  std::uint64_t seed = 1;
};

struct VerificationRow {
  double r1 = 0.0;
  double err1 = 0.0;     // per-ANO estimate error, constant in r1
  double err2 = 0.0;
  double err_tot = 0.0;  // total-subsidy estimate error
  double cached_fraction = 0.0;
};

std::vector<VerificationRow> verification_error_experiment(const VerificationParams& p);

}  // namespace cachesub
