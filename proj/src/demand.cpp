#include "cachesub/demand.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "cachesub/numeric.hpp"

namespace cachesub {

double ZipfTable::hit_prob_exact(std::int64_t count) const {
  if (count <= 0) return 0.0;
  if (count >= files) return 1.0;
  return prefix[static_cast<std::size_t>(count - 1)];
}

ZipfTable zipf_weights(std::int64_t files, double alpha) {
  if (files < 1) throw std::invalid_argument("catalog must contain at least one item");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("zipf exponent must be finite and >= 0");
  }
  ZipfTable t;
  t.files = files;
  t.alpha = alpha;
  t.weight.resize(static_cast<std::size_t>(files));
  t.prefix.resize(static_cast<std::size_t>(files));

  // Sum small terms first so the normalizer keeps full precision.
  KahanSum h;
  for (std::int64_t f = files; f >= 1; --f) {
    h.add(std::pow(static_cast<double>(f), -alpha));
  }
  const double norm = h.value();

  KahanSum run;
  for (std::int64_t f = 1; f <= files; ++f) {
    const double w = std::pow(static_cast<double>(f), -alpha) / norm;
    t.weight[static_cast<std::size_t>(f - 1)] = w;
    run.add(w);
    t.prefix[static_cast<std::size_t>(f - 1)] = run.value();
  }
  return t;
}

double hit_prob_continuous(double cached, double catalog, double alpha) {
  if (!(catalog > 0.0)) throw std::invalid_argument("catalog volume must be positive");
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("continuous approximation requires 0 <= alpha < 1");
  }
  if (cached <= 0.0) return 0.0;
  if (cached >= catalog) return 1.0;
  return std::pow(cached / catalog, 1.0 - alpha);
}

double DemandModel::rate(const TreeNetwork& net, CpId cp, NodeId leaf, std::int64_t file) const {
  const CpDemand& d = cps_.at(static_cast<std::size_t>(cp));
  if (file < 0 || file >= d.catalog.files) throw std::invalid_argument("content rank out of range");
  if (!d.explicit_rates.empty()) {
    auto it = d.explicit_rates.find(leaf);
    if (it == d.explicit_rates.end()) return 0.0;
    return it->second[static_cast<std::size_t>(file)];
  }
  const double total = d.leaf_total_mbps[static_cast<std::size_t>(leaf)];
  if (total == 0.0) return 0.0;
  std::int64_t rank = file;
  const AnoId a = net.ano[static_cast<std::size_t>(leaf)];
  auto it = d.rank_of.find(a);
  if (it != d.rank_of.end()) rank = it->second[static_cast<std::size_t>(file)];
  return total * d.zipf->weight[static_cast<std::size_t>(rank)];
}

double DemandModel::leaf_total(CpId cp, NodeId leaf) const {
  const CpDemand& d = cps_.at(static_cast<std::size_t>(cp));
  if (!d.explicit_rates.empty()) {
    auto it = d.explicit_rates.find(leaf);
    if (it == d.explicit_rates.end()) return 0.0;
    double s = 0.0;
    for (double v : it->second) s += v;
    return s;
  }
  return d.leaf_total_mbps[static_cast<std::size_t>(leaf)];
}

double DemandModel::total(CpId cp) const {
  const CpDemand& d = cps_.at(static_cast<std::size_t>(cp));
  double s = 0.0;
  if (!d.explicit_rates.empty()) {
    for (const auto& [leaf, rates] : d.explicit_rates) {
      (void)leaf;
      for (double v : rates) s += v;
    }
    return s;
  }
  for (double v : d.leaf_total_mbps) s += v;
  return s;
}

DemandModel::CpDemand synthesize_zipf_demand(const TreeNetwork& net, const Catalog& catalog,
                                             const std::vector<double>& per_ano_total_mbps,
                                             double alpha, bool permute_per_ano,
                                             std::uint64_t seed) {
  if (net.num_anos < 1) throw std::invalid_argument("network has no operators");
  if (per_ano_total_mbps.size() != static_cast<std::size_t>(net.num_anos)) {
    throw std::invalid_argument("need one demand total per operator");
  }
  for (double t : per_ano_total_mbps) {
    if (!(t >= 0.0) || !std::isfinite(t)) {
      throw std::invalid_argument("demand totals must be finite and >= 0");
    }
  }

  DemandModel::CpDemand d;
  d.catalog = catalog;
  d.zipf = std::make_shared<ZipfTable>(zipf_weights(catalog.files, alpha));
  d.leaf_total_mbps.assign(net.size(), 0.0);

  std::vector<std::size_t> leaves_per_ano(static_cast<std::size_t>(net.num_anos), 0);
  for (NodeId l : net.leaves) ++leaves_per_ano[static_cast<std::size_t>(net.ano[static_cast<std::size_t>(l)])];
  for (NodeId l : net.leaves) {
    const auto a = static_cast<std::size_t>(net.ano[static_cast<std::size_t>(l)]);
    d.leaf_total_mbps[static_cast<std::size_t>(l)] =
        per_ano_total_mbps[a] / static_cast<double>(leaves_per_ano[a]);
  }

  if (permute_per_ano) {
    for (AnoId a = 1; a < net.num_anos; ++a) {
      std::vector<std::uint32_t> rank(static_cast<std::size_t>(catalog.files));
      std::iota(rank.begin(), rank.end(), 0u);
      std::mt19937_64 gen(splitmix64(seed ^ static_cast<std::uint64_t>(a + 1)));
      deterministic_shuffle(rank, gen);
      d.rank_of.emplace(a, std::move(rank));
    }
  }
  return d;
}

}  // namespace cachesub
