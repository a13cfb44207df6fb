#include "cachesub/ufl.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

namespace cachesub {

UflTreeSolver::UflTreeSolver(const std::vector<NodeId>& parent) : parent_(parent) {
  const std::size_t n = parent_.size();
  if (n == 0) throw std::invalid_argument("tree has no nodes");
  if (parent_[0] != kOrigin) throw std::invalid_argument("node 0 must be the root");

  children_.assign(n, {});
  for (std::size_t i = 1; i < n; ++i) {
    const NodeId p = parent_[i];
    if (p < 0 || static_cast<std::size_t>(p) >= n) {
      throw std::invalid_argument("out-of-range parent");
    }
    children_[static_cast<std::size_t>(p)].push_back(static_cast<NodeId>(i));
  }

  depth_.assign(n, -1);
  order_.clear();
  order_.reserve(n);
  std::deque<NodeId> queue{0};
  depth_[0] = 0;
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    order_.push_back(v);
    for (NodeId c : children_[static_cast<std::size_t>(v)]) {
      depth_[static_cast<std::size_t>(c)] = depth_[static_cast<std::size_t>(v)] + 1;
      queue.push_back(c);
    }
  }
  if (order_.size() != n) throw std::invalid_argument("parent pointers do not form a tree");

  anc_.assign(n, {});
  for (NodeId v : order_) {
    const auto vi = static_cast<std::size_t>(v);
    auto& chain = anc_[vi];
    chain.resize(static_cast<std::size_t>(depth_[vi]) + 1);
    chain[static_cast<std::size_t>(depth_[vi])] = v;
    for (int d = depth_[vi] - 1; d >= 0; --d) {
      chain[static_cast<std::size_t>(d)] =
          anc_[static_cast<std::size_t>(parent_[vi])][static_cast<std::size_t>(d)];
    }
  }

  state_off_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    state_off_[i + 1] = state_off_[i] + static_cast<std::size_t>(depth_[i]) + 1;
  }
  num_states_ = state_off_[n];
  val_.resize(num_states_);
  take_.resize(num_states_);
}

void UflTreeSolver::set_prices(const std::vector<double>& open_cost,
                               const std::vector<double>& link_price) {
  const std::size_t n = parent_.size();
  if (open_cost.size() != n || link_price.size() != n) {
    throw std::invalid_argument("price arrays disagree with the node count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(open_cost[i] >= 0.0) || !(link_price[i] >= 0.0)) {
      throw std::invalid_argument("prices must be >= 0");
    }
  }
  open_cost_ = open_cost;
  path_sum_.assign(n, 0.0);
  for (NodeId v : order_) {
    const auto vi = static_cast<std::size_t>(v);
    path_sum_[vi] = link_price[vi] + (v == 0 ? 0.0 : path_sum_[static_cast<std::size_t>(parent_[vi])]);
  }
}

double UflTreeSolver::solve(const std::vector<double>& demand, std::vector<NodeId>* open,
                            std::vector<NodeId>* server) const {
  const std::size_t n = parent_.size();
  if (demand.size() != n) throw std::invalid_argument("demand array disagrees with the node count");
  if (open_cost_.empty()) throw std::invalid_argument("set_prices() has not been called");

  // States of node v: j in [0, depth(v)) = nearest open ancestor is the one
  // at depth j; j == depth(v) = no open ancestor, the origin serves.
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const NodeId v = *it;
    const auto vi = static_cast<std::size_t>(v);
    const int dv = depth_[vi];

    double open_total = open_cost_[vi];
    for (NodeId c : children_[vi]) {
      // Child state "ancestor at depth dv" (that ancestor is v itself).
      open_total += val_[state_off_[static_cast<std::size_t>(c)] + static_cast<std::size_t>(dv)];
    }

    for (int j = 0; j <= dv; ++j) {
      const double remote = j == dv
                                ? path_sum_[vi]
                                : path_sum_[vi] - path_sum_[static_cast<std::size_t>(
                                                      anc_[vi][static_cast<std::size_t>(j)])];
      double closed_total = demand[vi] * remote;
      for (NodeId c : children_[vi]) {
        const std::size_t coff = state_off_[static_cast<std::size_t>(c)];
        const int cj = j == dv ? depth_[static_cast<std::size_t>(c)] : j;
        closed_total += val_[coff + static_cast<std::size_t>(cj)];
      }
      const bool take = open_total < closed_total;  // tie -> keep it closed
      const std::size_t s = state_off_[vi] + static_cast<std::size_t>(j);
      val_[s] = take ? open_total : closed_total;
      take_[s] = take ? 1 : 0;
    }
  }

  const double best = val_[state_off_[0]];
  if (open != nullptr || server != nullptr) {
    if (open != nullptr) open->clear();
    if (server != nullptr) server->assign(n, kOrigin);
    // Walk down in BFS order carrying each node's decided state.
    std::vector<int> state(n, 0);
    for (NodeId v : order_) {
      const auto vi = static_cast<std::size_t>(v);
      const int dv = depth_[vi];
      const int j = state[vi];
      const bool take = take_[state_off_[vi] + static_cast<std::size_t>(j)] != 0;
      if (take) {
        if (open != nullptr) open->push_back(v);
        if (server != nullptr) (*server)[vi] = v;
        for (NodeId c : children_[vi]) state[static_cast<std::size_t>(c)] = dv;
      } else {
        if (server != nullptr) {
          (*server)[vi] = j == dv ? kOrigin : anc_[vi][static_cast<std::size_t>(j)];
        }
        for (NodeId c : children_[vi]) {
          state[static_cast<std::size_t>(c)] = j == dv ? depth_[static_cast<std::size_t>(c)] : j;
        }
      }
    }
    if (open != nullptr) std::sort(open->begin(), open->end());
  }
  return best;
}

UflSolution solve_ufl(const UflInstance& inst) {
  UflTreeSolver solver(inst.parent);
  solver.set_prices(inst.open_cost, inst.link_price);
  UflSolution sol;
  sol.cost = solver.solve(inst.demand_mbps, &sol.open, &sol.server);
  return sol;
}

UflSolution brute_force_ufl(const UflInstance& inst) {
  const std::size_t n = inst.parent.size();
  if (n == 0) throw std::invalid_argument("tree has no nodes");
  if (n > 20) throw std::invalid_argument("brute force is limited to 20 nodes");
  if (inst.parent[0] != kOrigin) throw std::invalid_argument("node 0 must be the root");

  // Path sums via repeated relaxation; node ids are not guaranteed to be
  // topologically ordered and n is tiny.
  std::vector<double> path_sum(n, 0.0);
  for (std::size_t pass = 0; pass < n; ++pass) {
    for (std::size_t i = 0; i < n; ++i) {
      const NodeId p = inst.parent[i];
      path_sum[i] = inst.link_price[i] + (p == kOrigin ? 0.0 : path_sum[static_cast<std::size_t>(p)]);
    }
  }

  UflSolution best;
  best.cost = std::numeric_limits<double>::infinity();
  const std::uint32_t limit = static_cast<std::uint32_t>(1u) << n;
  std::vector<NodeId> server(n);
  for (std::uint32_t mask = 0; mask < limit; ++mask) {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) cost += inst.open_cost[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      NodeId at = kOrigin;
      for (NodeId v = static_cast<NodeId>(i); v != kOrigin; v = inst.parent[static_cast<std::size_t>(v)]) {
        if (mask & (1u << static_cast<std::uint32_t>(v))) {
          at = v;
          break;
        }
      }
      server[i] = at;
      if (inst.demand_mbps[i] != 0.0) {
        const double remote =
            at == kOrigin ? path_sum[i] : path_sum[i] - path_sum[static_cast<std::size_t>(at)];
        cost += inst.demand_mbps[i] * remote;
      }
    }
    if (cost < best.cost) {
      best.cost = cost;
      best.server = server;
      best.open.clear();
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (1u << i)) best.open.push_back(static_cast<NodeId>(i));
      }
    }
  }
  return best;
}

EffectivePrices fixed_prices(const TreeNetwork& net) {
  EffectivePrices p;
  p.open_cost.resize(net.size());
  p.link_price = net.uplink_price;
  for (std::size_t i = 0; i < net.size(); ++i) {
    p.open_cost[i] = net.storage_price[i] * net.file_size_gb;
  }
  return p;
}

CatalogPlacement place_catalog(const TreeNetwork& net, const DemandModel& demand, CpId cp,
                               const EffectivePrices& prices, bool early_stop) {
  const auto& d = demand.of(cp);
  const std::int64_t files = d.catalog.files;
  const std::size_t n = net.size();

  UflTreeSolver solver(net.parent);
  solver.set_prices(prices.open_cost, prices.link_price);

  // Network-wide demand per content decides the processing order.
  std::vector<double> aggregate(static_cast<std::size_t>(files), 0.0);
  for (NodeId l : net.leaves) {
    for (std::int64_t f = 0; f < files; ++f) {
      aggregate[static_cast<std::size_t>(f)] += demand.rate(net, cp, l, f);
    }
  }
  std::vector<std::int64_t> by_popularity(static_cast<std::size_t>(files));
  std::iota(by_popularity.begin(), by_popularity.end(), std::int64_t{0});
  std::stable_sort(by_popularity.begin(), by_popularity.end(),
                   [&aggregate](std::int64_t a, std::int64_t b) {
                     return aggregate[static_cast<std::size_t>(a)] >
                            aggregate[static_cast<std::size_t>(b)];
                   });

  CatalogPlacement out;
  out.cp = cp;
  out.open.resize(static_cast<std::size_t>(files));
  out.server.assign(static_cast<std::size_t>(files),
                    std::vector<NodeId>(net.leaves.size(), kOrigin));

  std::vector<double> buf(n, 0.0);
  std::vector<NodeId> server_by_node;
  bool stopped = false;
  for (std::int64_t pos = 0; pos < files; ++pos) {
    const std::int64_t f = by_popularity[static_cast<std::size_t>(pos)];
    if (stopped) {
      // Served from the origin; only the delivery bill accrues.
      for (std::size_t li = 0; li < net.leaves.size(); ++li) {
        out.cost += demand.rate(net, cp, net.leaves[li], f) *
                    solver.path_price_to_origin(net.leaves[li]);
      }
      continue;
    }
    for (NodeId l : net.leaves) buf[static_cast<std::size_t>(l)] = demand.rate(net, cp, l, f);
    auto& open_f = out.open[static_cast<std::size_t>(f)];
    out.cost += solver.solve(buf, &open_f, &server_by_node);
    auto& srv = out.server[static_cast<std::size_t>(f)];
    for (std::size_t li = 0; li < net.leaves.size(); ++li) {
      srv[li] = server_by_node[static_cast<std::size_t>(net.leaves[li])];
    }
    out.solved_upto = pos + 1;
    if (early_stop && open_f.empty()) stopped = true;
  }
  return out;
}

}  // namespace cachesub
