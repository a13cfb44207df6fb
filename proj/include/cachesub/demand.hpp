#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "cachesub/net_model.hpp"
#include "cachesub/types.hpp"

namespace cachesub {

// Zipf popularity over a catalog of `files` items:
//   weight[f] = (f+1)^-alpha / H,   H = sum_{j=1..files} j^-alpha.
// Ranks are 0-based in code; formulas in comments use 1-based ranks.
struct ZipfTable {
  std::int64_t files = 0;
  double alpha = 0.0;
  std::vector<double> weight;  // non-increasing, sums to 1
  std::vector<double> prefix;  // prefix[f] = weight[0] + ... + weight[f]

  // Probability that a request falls on the `count` most popular items.
  double hit_prob_exact(std::int64_t count) const;
};

// Builds the table with compensated summation of the normalizer so the
// weights sum to 1 within 1e-12 even for 1e7-item catalogs.
ZipfTable zipf_weights(std::int64_t files, double alpha);

// Continuous approximation of the hit probability when the `cached` most
// popular part of a `catalog` is stored: (cached/catalog)^(1-alpha),
// clamped to [0,1]. Both arguments share a unit (GB or items). Valid for
// 0 <= alpha < 1.
double hit_prob_continuous(double cached, double catalog, double alpha);

struct Catalog {
  CpId cp = 0;
  std::int64_t files = 0;
  double file_size_gb = kDefaultFileSizeGb;
};

// Busy-hour demand for every (leaf, CP, content rank). Zipf-synthesized
// demand is stored implicitly: per-leaf totals plus one shared weight table
// and one ranking permutation per ANO, so large catalogs never materialize
// per-leaf tables. Explicit tables are supported for small instances.
class DemandModel {
 public:
  struct CpDemand {
    Catalog catalog;
    std::shared_ptr<const ZipfTable> zipf;        // null for explicit demand
    std::vector<double> leaf_total_mbps;          // indexed by NodeId, 0 elsewhere
    // rank_of[a][f] = popularity rank of content f at ANO a; an absent
    // entry means the identity ranking.
    std::map<AnoId, std::vector<std::uint32_t>> rank_of;
    // Explicit mode: rates[leaf][f], only for small instances.
    std::map<NodeId, std::vector<double>> explicit_rates;
  };

  // lambda_l^f in Mb/s.
  double rate(const TreeNetwork& net, CpId cp, NodeId leaf, std::int64_t file) const;
  // T_l^k in Mb/s.
  double leaf_total(CpId cp, NodeId leaf) const;
  // Total demand of one CP across all leaves.
  double total(CpId cp) const;

  const CpDemand& of(CpId cp) const { return cps_.at(static_cast<std::size_t>(cp)); }
  std::size_t num_cps() const { return cps_.size(); }
  void add_cp(CpDemand d) { cps_.push_back(std::move(d)); }

 private:
  std::vector<CpDemand> cps_;  // indexed by CpId, 0..K-1
};

// Spreads each ANO's total uniformly over its leaves and applies Zipf
// weights per content. When permute_per_ano is set, the first ANO keeps the
// canonical ranking and every further ANO gets an independent random
// permutation of it; sub-seeds are derived as splitmix64(seed ^ (ano+1)).
// per_ano_total_mbps is indexed by AnoId and must cover every ANO in `net`.
DemandModel::CpDemand synthesize_zipf_demand(const TreeNetwork& net, const Catalog& catalog,
                                             const std::vector<double>& per_ano_total_mbps,
                                             double alpha, bool permute_per_ano,
                                             std::uint64_t seed);

}  // namespace cachesub
