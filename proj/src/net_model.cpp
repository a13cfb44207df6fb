#include "cachesub/net_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace cachesub {

void TreeNetwork::finalize() {
  const std::size_t n = parent.size();
  if (n == 0) throw std::invalid_argument("network has no nodes");
  if (parent[0] != kOrigin) throw std::invalid_argument("node 0 must be the root");

  children.assign(n, {});
  for (std::size_t i = 1; i < n; ++i) {
    NodeId p = parent[i];
    if (p < 0 || static_cast<std::size_t>(p) >= n) {
      throw std::invalid_argument("node " + std::to_string(i) + " has an out-of-range parent");
    }
    children[static_cast<std::size_t>(p)].push_back(static_cast<NodeId>(i));
  }

  depth.assign(n, -1);
  bfs_order.clear();
  bfs_order.reserve(n);
  std::deque<NodeId> queue{0};
  depth[0] = 0;
  while (!queue.empty()) {
    NodeId v = queue.front();
    queue.pop_front();
    bfs_order.push_back(v);
    for (NodeId c : children[static_cast<std::size_t>(v)]) {
      depth[static_cast<std::size_t>(c)] = depth[static_cast<std::size_t>(v)] + 1;
      queue.push_back(c);
    }
  }
  if (bfs_order.size() != n) {
    throw std::invalid_argument("parent pointers contain a cycle or an unreachable node");
  }

  leaves.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (children[i].empty()) leaves.push_back(static_cast<NodeId>(i));
  }

  num_anos = 0;
  for (AnoId a : ano) num_anos = std::max(num_anos, a + 1);
}

double path_price(const TreeNetwork& net, NodeId n) {
  double total = 0.0;
  for (NodeId v = n; v != kOrigin; v = net.parent[static_cast<std::size_t>(v)]) {
    total += net.uplink_price[static_cast<std::size_t>(v)];
  }
  return total;
}

std::vector<std::string> validate(const TreeNetwork& net) {
  std::vector<std::string> bad;
  const std::size_t n = net.size();
  auto complain = [&bad](std::string msg) { bad.push_back(std::move(msg)); };

  if (n == 0) {
    complain("network has no nodes");
    return bad;
  }
  if (net.storage_price.size() != n || net.uplink_price.size() != n ||
      net.storage_cap.size() != n || net.uplink_cap.size() != n || net.ano.size() != n) {
    complain("attribute arrays disagree on node count");
    return bad;
  }
  if (net.children.size() != n || net.depth.size() != n) {
    complain("finalize() has not been run");
    return bad;
  }
  if (!(net.file_size_gb > 0.0) || !std::isfinite(net.file_size_gb)) {
    complain("file size must be positive and finite");
  }

  for (std::size_t i = 0; i < n; ++i) {
    const std::string node = "node " + std::to_string(i);
    if (!(net.storage_price[i] >= 0.0) || !std::isfinite(net.storage_price[i])) {
      complain(node + ": storage price must be finite and >= 0");
    }
    if (!(net.uplink_price[i] >= 0.0) || !std::isfinite(net.uplink_price[i])) {
      complain(node + ": uplink price must be finite and >= 0");
    }
    if (net.storage_cap[i] && !(*net.storage_cap[i] > 0.0 && std::isfinite(*net.storage_cap[i]))) {
      complain(node + ": storage capacity must be positive and finite when set");
    }
    if (net.uplink_cap[i] && !(*net.uplink_cap[i] > 0.0 && std::isfinite(*net.uplink_cap[i]))) {
      complain(node + ": uplink capacity must be positive and finite when set");
    }
  }

  if (net.ano[0] != kNoAno) complain("the CO cannot be owned by an operator");
  for (std::size_t i = 1; i < n; ++i) {
    const std::string node = "node " + std::to_string(i);
    if (net.ano[i] < 0) {
      complain(node + ": every node below the CO needs an owner");
      continue;
    }
    NodeId p = net.parent[i];
    if (p != 0 && net.ano[static_cast<std::size_t>(p)] != net.ano[i]) {
      complain(node + ": owner differs from its parent's owner");
    }
  }
  return bad;
}

TreeNetwork build_symmetric_3tier(const SymmetricSpec& spec) {
  if (spec.e1 < 1 || spec.e2 < 1 || spec.num_anos < 1) {
    throw std::invalid_argument("fanouts and operator count must be >= 1");
  }
  const std::size_t mids = static_cast<std::size_t>(spec.num_anos) * spec.e2;
  const std::size_t total = 1 + mids + mids * static_cast<std::size_t>(spec.e1);

  TreeNetwork net;
  net.parent.resize(total);
  net.storage_price.resize(total);
  net.uplink_price.resize(total);
  net.storage_cap.resize(total);
  net.uplink_cap.resize(total);
  net.ano.resize(total);
  net.file_size_gb = spec.file_size_gb;

  net.parent[0] = kOrigin;
  net.storage_price[0] = spec.root.storage_price;
  net.uplink_price[0] = spec.root.uplink_price;
  net.storage_cap[0] = spec.root.storage_cap;
  net.uplink_cap[0] = spec.root.uplink_cap;
  net.ano[0] = kNoAno;

  for (std::size_t m = 0; m < mids; ++m) {
    const std::size_t id = 1 + m;
    net.parent[id] = 0;
    net.storage_price[id] = spec.mid.storage_price;
    net.uplink_price[id] = spec.mid.uplink_price;
    net.storage_cap[id] = spec.mid.storage_cap;
    net.uplink_cap[id] = spec.mid.uplink_cap;
    net.ano[id] = static_cast<AnoId>(m / static_cast<std::size_t>(spec.e2));
  }
  for (std::size_t m = 0; m < mids; ++m) {
    for (int k = 0; k < spec.e1; ++k) {
      const std::size_t id = 1 + mids + m * static_cast<std::size_t>(spec.e1) + k;
      net.parent[id] = static_cast<NodeId>(1 + m);
      net.storage_price[id] = spec.leaf.storage_price;
      net.uplink_price[id] = spec.leaf.uplink_price;
      net.storage_cap[id] = spec.leaf.storage_cap;
      net.uplink_cap[id] = spec.leaf.uplink_cap;
      net.ano[id] = net.ano[1 + m];
    }
  }
  net.finalize();
  return net;
}

}  // namespace cachesub
