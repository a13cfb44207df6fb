#pragma once

// Random miniature instances for cross-checking the optimizer against the
// exhaustive search in toy_oracle.hpp. Shapes stay at or below 7 nodes and
// 2 CPs x 3 contents so the oracle's enumeration stays trivial.

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "cachesub/demand.hpp"
#include "cachesub/net_model.hpp"
#include "cachesub/types.hpp"

namespace support {

struct Toy {
  cachesub::TreeNetwork net;
  cachesub::DemandModel demand;
};

// One or two ANOs, each a mid node with one or two leaves. CO storage,
// transit, and mid storage are metered; leaf storage is usually a hard cap
// of 1-2 items (sometimes metered instead); leaf uplinks are free. With
// `with_link_caps`, every mid uplink gets a cap below its all-origin load,
// which is always repairable because mid storage is elastic.
inline Toy random_toy(std::mt19937_64& gen, bool with_link_caps) {
  using namespace cachesub;
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  Toy t;
  auto& net = t.net;
  net.parent.push_back(kOrigin);
  net.ano.push_back(kNoAno);
  const int anos = 1 + static_cast<int>(gen() % 2);
  std::vector<NodeId> mids;
  for (int a = 0; a < anos; ++a) {
    const auto mid = static_cast<NodeId>(net.parent.size());
    net.parent.push_back(0);
    net.ano.push_back(static_cast<AnoId>(a));
    mids.push_back(mid);
    const int leaves = 1 + static_cast<int>(gen() % 2);
    for (int j = 0; j < leaves; ++j) {
      net.parent.push_back(mid);
      net.ano.push_back(static_cast<AnoId>(a));
    }
  }
  const std::size_t n = net.parent.size();
  net.file_size_gb = 1.0;
  net.storage_price.assign(n, 0.0);
  net.uplink_price.assign(n, 0.0);
  net.storage_cap.assign(n, std::nullopt);
  net.uplink_cap.assign(n, std::nullopt);
  net.storage_price[0] = 0.1 + 0.4 * uni(gen);
  net.uplink_price[0] = 1.5 + 2.5 * uni(gen);
  for (NodeId m : mids) {
    net.storage_price[static_cast<std::size_t>(m)] = 0.2 + 0.6 * uni(gen);
  }
  net.finalize();
  for (NodeId l : net.leaves) {
    if (uni(gen) < 0.7) {
      net.storage_cap[static_cast<std::size_t>(l)] = static_cast<double>(1 + gen() % 2);
    } else {
      net.storage_price[static_cast<std::size_t>(l)] = 0.3 + 0.7 * uni(gen);
    }
  }

  const int cps = 1 + static_cast<int>(gen() % 2);
  for (int k = 0; k < cps; ++k) {
    DemandModel::CpDemand d;
    d.catalog = Catalog{static_cast<CpId>(k), 2 + static_cast<std::int64_t>(gen() % 2),
                        net.file_size_gb};
    d.leaf_total_mbps.assign(n, 0.0);
    for (NodeId l : net.leaves) {
      std::vector<double> rates;
      double total = 0.0;
      for (std::int64_t f = 0; f < d.catalog.files; ++f) {
        const double lam = uni(gen) < 0.2 ? 0.0 : 0.2 + 1.8 * uni(gen);
        rates.push_back(lam);
        total += lam;
      }
      d.leaf_total_mbps[static_cast<std::size_t>(l)] = total;
      d.explicit_rates.emplace(l, std::move(rates));
    }
    t.demand.add_cp(std::move(d));
  }

  if (with_link_caps) {
    for (NodeId m : mids) {
      double origin_load = 0.0;
      for (NodeId c : net.children[static_cast<std::size_t>(m)]) {
        for (std::size_t k = 0; k < t.demand.num_cps(); ++k) {
          origin_load += t.demand.leaf_total(static_cast<CpId>(k), c);
        }
      }
      if (origin_load > 0.0) {
        net.uplink_cap[static_cast<std::size_t>(m)] = origin_load * (0.35 + 0.45 * uni(gen));
      }
    }
  }
  return t;
}

}  // namespace support
