#pragma once

#include <cstdint>
#include <vector>

#include "cachesub/demand.hpp"
#include "cachesub/net_model.hpp"
#include "cachesub/types.hpp"

namespace cachesub {

// One uncapacitated facility-location problem on a tree: pick the set of
// nodes that hold a copy of a single content so that copy costs plus
// demand-weighted delivery costs are minimal. Demand not served by any
// copy travels to the origin and pays the full path price including
// transit.
struct UflInstance {
  std::vector<NodeId> parent;       // parent[0] == kOrigin
  std::vector<double> open_cost;    // $/month per copy
  std::vector<double> link_price;   // $/(Mb/s)/month, [0] = transit
  std::vector<double> demand_mbps;  // per node; interior nodes may carry demand
};

struct UflSolution {
  std::vector<NodeId> open;    // ascending node ids
  std::vector<NodeId> server;  // per node: nearest copy at-or-above it, or kOrigin
  double cost = 0.0;
};

// Exact dynamic program over (node, nearest-open-ancestor) states,
// O(nodes * depth). Ties prefer not opening a copy, and demand is always
// served by the nearest (deepest) copy on its path.
UflSolution solve_ufl(const UflInstance& inst);

// Exhaustive 2^N enumeration for cross-checking; refuses instances with
// more than 20 nodes.
UflSolution brute_force_ufl(const UflInstance& inst);

// Reusable solver for sweeping many contents over one tree with fixed
// prices: the tree layout and prices are prepared once, then solve() runs
// per content with only the demand vector changing.
class UflTreeSolver {
 public:
  explicit UflTreeSolver(const std::vector<NodeId>& parent);

  void set_prices(const std::vector<double>& open_cost, const std::vector<double>& link_price);

  // demand_by_node must have one entry per node. Fills `open` (ascending)
  // and `server` (per node) when non-null. Returns the optimal cost.
  double solve(const std::vector<double>& demand_by_node, std::vector<NodeId>* open,
               std::vector<NodeId>* server) const;

  std::size_t size() const { return parent_.size(); }
  // Sum of link prices from n up to and through the transit link.
  double path_price_to_origin(NodeId n) const { return path_sum_[static_cast<std::size_t>(n)]; }

 private:
  std::vector<NodeId> parent_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<int> depth_;
  std::vector<NodeId> order_;             // BFS from root
  std::vector<std::vector<NodeId>> anc_;  // anc_[n][d] = ancestor of n at depth d
  std::vector<double> open_cost_;
  std::vector<double> path_sum_;          // sum of link prices n..0 inclusive
  std::vector<std::size_t> state_off_;    // flat offset of (n, j) states
  std::size_t num_states_ = 0;
  mutable std::vector<double> val_;
  mutable std::vector<char> take_;
};

// Effective per-content prices derived from a network: open_cost =
// storage_price * file_size (plus any shadow surcharge the caller adds) and
// per-link unit prices.
struct EffectivePrices {
  std::vector<double> open_cost;
  std::vector<double> link_price;
};

EffectivePrices fixed_prices(const TreeNetwork& net);

// Placement of a whole catalog, one UFL per content, processed in
// decreasing order of network-wide demand. With early_stop set, solving
// ceases once a more popular content was refused everywhere (exact for
// leaf-homogeneous demand, heuristic otherwise); remaining contents are
// served from the origin.
struct CatalogPlacement {
  CpId cp = 0;
  // Indexed by content rank; servers are indexed by position in net.leaves.
  std::vector<std::vector<NodeId>> open;
  std::vector<std::vector<NodeId>> server;
  double cost = 0.0;              // storage plus delivery across all contents
  std::int64_t solved_upto = 0;   // contents actually solved before early stop
};

CatalogPlacement place_catalog(const TreeNetwork& net, const DemandModel& demand, CpId cp,
                               const EffectivePrices& prices, bool early_stop = false);

}  // namespace cachesub
