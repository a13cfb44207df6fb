#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cachesub/types.hpp"

namespace cachesub {

// Rooted tree of cache locations. Node 0 is the CO; every other node hangs
// below it. uplink_price[n] / uplink_cap[n] describe the link from n toward
// its parent; for node 0 that link is the transit link to the content
// origin. A capacity of nullopt means the resource is not limited; a
// capacity-limited resource normally carries a price of zero (sunk cost).
struct TreeNetwork {
  std::vector<NodeId> parent;                       // parent[0] == kOrigin
  std::vector<double> storage_price;                // $/GB/month
  std::vector<double> uplink_price;                 // $/(Mb/s)/month
  std::vector<std::optional<double>> storage_cap;   // GB
  std::vector<std::optional<double>> uplink_cap;    // Mb/s
  std::vector<AnoId> ano;                           // kNoAno for the CO
  double file_size_gb = kDefaultFileSizeGb;

  // Derived on finalize().
  std::vector<std::vector<NodeId>> children;
  std::vector<int> depth;
  std::vector<NodeId> leaves;       // nodes with no children, ascending id
  std::vector<NodeId> bfs_order;    // root first
  int num_anos = 0;                 // 1 + max ano id

  std::size_t size() const { return parent.size(); }
  bool is_leaf(NodeId n) const { return children[static_cast<std::size_t>(n)].empty(); }

  // Recomputes children/depth/leaves/bfs_order; must be called after the
  // flat arrays are filled in. Throws std::invalid_argument when the parent
  // array does not describe a tree rooted at node 0.
  void finalize();
};

// Price of pushing one Mb/s from n all the way to the content origin: the
// sum of uplink prices on the path n -> 0 plus the transit price.
double path_price(const TreeNetwork& net, NodeId n);

// Structural and unit sanity checks. Returns human-readable violations;
// empty means the network is usable.
std::vector<std::string> validate(const TreeNetwork& net);

// Parameters for one tier of the symmetric three-tier tree used in the
// evaluation scenarios (leaf caches -> intermediate caches -> CO).
struct TierConfig {
  double storage_price = 0.0;
  double uplink_price = 0.0;
  std::optional<double> storage_cap;  // per node, GB
  std::optional<double> uplink_cap;   // per link, Mb/s
};

struct SymmetricSpec {
  int e1 = 1;        // leaves per intermediate node
  int e2 = 1;        // intermediate nodes per ANO
  int num_anos = 1;  // each ANO owns e2 intermediates and e1*e2 leaves
  TierConfig leaf;
  TierConfig mid;
  TierConfig root;   // root.uplink_* describe the transit link
  double file_size_gb = kDefaultFileSizeGb;
};

// Builds the symmetric tree: node 0, then all intermediates grouped by ANO,
// then all leaves grouped by parent. Node count is
// 1 + num_anos*e2 + num_anos*e2*e1.
TreeNetwork build_symmetric_3tier(const SymmetricSpec& spec);

}  // namespace cachesub
