#include "gridtopo/grid.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "gridtopo/rng.hpp"

namespace gridtopo {
namespace {

std::uint64_t pack_pair(NodeId u, NodeId v) {
  const auto lo = static_cast<std::uint64_t>(std::min(u, v));
  const auto hi = static_cast<std::uint64_t>(std::max(u, v));
  return (lo << 32) | hi;
}

void validate_edges(int num_nodes, const std::vector<CandidateEdge>& edges,
                    const char* what) {
  if (num_nodes < 2)
    throw std::invalid_argument(std::string(what) + ": num_nodes must be >= 2");
  std::unordered_set<std::uint64_t> seen;
  for (const auto& e : edges) {
    if (e.u < 0 || e.u >= num_nodes || e.v < 0 || e.v >= num_nodes)
      throw std::invalid_argument(std::string(what) + ": edge (" +
                                  std::to_string(e.u) + "," + std::to_string(e.v) +
                                  ") out of node range");
    if (e.u == e.v)
      throw std::invalid_argument(std::string(what) + ": self-loop at node " +
                                  std::to_string(e.u));
    if (!(e.z.r > 0.0) || !(e.z.x > 0.0))
      throw std::invalid_argument(std::string(what) + ": edge (" +
                                  std::to_string(e.u) + "," + std::to_string(e.v) +
                                  ") needs positive r and x");
    if (!seen.insert(pack_pair(e.u, e.v)).second)
      throw std::invalid_argument(std::string(what) + ": duplicate edge (" +
                                  std::to_string(e.u) + "," + std::to_string(e.v) + ")");
  }
}

}  // namespace

GridGraph::GridGraph(int num_nodes, std::vector<CandidateEdge> edges)
    : num_nodes_(num_nodes), edges_(std::move(edges)) {
  validate_edges(num_nodes_, edges_, "GridGraph");
  keys_.reserve(edges_.size());
  order_.resize(edges_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    return pack_pair(edges_[a].u, edges_[a].v) < pack_pair(edges_[b].u, edges_[b].v);
  });
  for (std::size_t i : order_) keys_.push_back(pack_pair(edges_[i].u, edges_[i].v));
}

bool GridGraph::has_edge(NodeId u, NodeId v) const {
  return impedance(u, v).has_value();
}

std::optional<Impedance> GridGraph::impedance(NodeId u, NodeId v) const {
  if (u == v) return std::nullopt;
  const auto key = pack_pair(u, v);
  const auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it == keys_.end() || *it != key) return std::nullopt;
  return edges_[order_[static_cast<std::size_t>(it - keys_.begin())]].z;
}

RadialTree::RadialTree(int num_nodes, const std::vector<CandidateEdge>& edges)
    : num_nodes_(num_nodes), edges_(edges) {
  validate_edges(num_nodes_, edges_, "RadialTree");
  if (edges_.size() != static_cast<std::size_t>(num_nodes_ - 1))
    throw std::invalid_argument("RadialTree: expected " +
                                std::to_string(num_nodes_ - 1) + " edges, got " +
                                std::to_string(edges_.size()));

  std::vector<std::vector<std::pair<NodeId, Impedance>>> adj(num_nodes_);
  for (const auto& e : edges_) {
    adj[e.u].push_back({e.v, e.z});
    adj[e.v].push_back({e.u, e.z});
  }
  if (adj[kRoot].size() != 1)
    throw std::invalid_argument("RadialTree: substation degree must be 1, got " +
                                std::to_string(adj[kRoot].size()));

  parent_.assign(num_nodes_, -1);
  z_up_.assign(num_nodes_, Impedance{});
  children_.assign(num_nodes_, {});
  depth_.assign(num_nodes_, 0);
  wdepth_r_.assign(num_nodes_, 0.0);
  wdepth_x_.assign(num_nodes_, 0.0);
  tin_.assign(num_nodes_, -1);
  tout_.assign(num_nodes_, -1);
  preorder_.reserve(num_nodes_);

  // DFS from the substation; children kept in ascending id order so every
  // derived ordering is deterministic.
  std::vector<NodeId> stack = {kRoot};
  std::vector<char> visited(num_nodes_, 0);
  visited[kRoot] = 1;
  int timer = 0;
  while (!stack.empty()) {
    const NodeId a = stack.back();
    stack.pop_back();
    tin_[a] = timer++;
    preorder_.push_back(a);
    auto& nb = adj[a];
    std::sort(nb.begin(), nb.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });
    for (const auto& [b, z] : nb) {
      if (b == parent_[a]) continue;
      if (visited[b])
        throw std::invalid_argument("RadialTree: edges contain a loop through node " +
                                    std::to_string(b));
      visited[b] = 1;
      parent_[b] = a;
      z_up_[b] = z;
      depth_[b] = depth_[a] + 1;
      wdepth_r_[b] = wdepth_r_[a] + z.r;
      wdepth_x_[b] = wdepth_x_[a] + z.x;
      children_[a].push_back(b);
      stack.push_back(b);
    }
  }
  if (preorder_.size() != static_cast<std::size_t>(num_nodes_))
    throw std::invalid_argument("RadialTree: not all nodes reachable from the substation");

  // tout via reverse scan: a node's interval closes after all deeper entries.
  for (int i = num_nodes_ - 1; i >= 0; --i) {
    const NodeId a = preorder_[static_cast<std::size_t>(i)];
    tout_[a] = tin_[a] + 1;
    for (NodeId c : children_[a]) tout_[a] = std::max(tout_[a], tout_[c]);
  }
}

NodeId RadialTree::parent(NodeId a) const {
  if (a <= 0 || a >= num_nodes_)
    throw std::invalid_argument("RadialTree::parent: invalid node " + std::to_string(a));
  return parent_[a];
}

const Impedance& RadialTree::impedance_to_parent(NodeId a) const {
  if (a <= 0 || a >= num_nodes_)
    throw std::invalid_argument("RadialTree::impedance_to_parent: invalid node " +
                                std::to_string(a));
  return z_up_[a];
}

bool RadialTree::is_descendant(NodeId d, NodeId a) const {
  return tin_[a] <= tin_[d] && tin_[d] < tout_[a];
}

std::vector<std::pair<NodeId, NodeId>> RadialTree::path_to_root(NodeId a) const {
  std::vector<std::pair<NodeId, NodeId>> path;
  for (NodeId c = a; c != kRoot; c = parent_[c]) path.push_back({c, parent_[c]});
  return path;
}

std::vector<NodeId> RadialTree::descendants(NodeId a) const {
  std::vector<NodeId> out;
  for (NodeId b = 0; b < num_nodes_; ++b)
    if (is_descendant(b, a)) out.push_back(b);
  return out;
}

NodeId RadialTree::lowest_common_ancestor(NodeId a, NodeId b) const {
  while (depth_[a] > depth_[b]) a = parent_[a];
  while (depth_[b] > depth_[a]) b = parent_[b];
  while (a != b) {
    a = parent_[a];
    b = parent_[b];
  }
  return a;
}

int RadialTree::hop_distance(NodeId a, NodeId b) const {
  const NodeId l = lowest_common_ancestor(a, b);
  return depth_[a] + depth_[b] - 2 * depth_[l];
}

double h_inverse_entry(const RadialTree& tree, NodeId a, NodeId b, WeightKind kind) {
  if (a < 0 || a >= tree.num_nodes() || b < 0 || b >= tree.num_nodes())
    throw std::invalid_argument("h_inverse_entry: node out of range");
  if (a == kRoot || b == kRoot) return 0.0;
  const NodeId l = tree.lowest_common_ancestor(a, b);
  return kind == WeightKind::resistance ? tree.weighted_depth_r(l)
                                        : tree.weighted_depth_x(l);
}

Mat h_inverse(const RadialTree& tree, WeightKind kind) {
  const std::size_t n = static_cast<std::size_t>(tree.num_nodes()) - 1;
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = h_inverse_entry(tree, static_cast<NodeId>(i + 1),
                                       static_cast<NodeId>(j + 1), kind);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

double h_inverse_difference(const RadialTree& tree, NodeId a, NodeId b, NodeId c,
                            WeightKind kind) {
  if (tree.parent(a) != b)
    throw std::invalid_argument("h_inverse_difference: " + std::to_string(b) +
                                " is not the parent of " + std::to_string(a));
  if (c < 0 || c >= tree.num_nodes())
    throw std::invalid_argument("h_inverse_difference: node out of range");
  if (!tree.is_descendant(c, a)) return 0.0;
  const Impedance& z = tree.impedance_to_parent(a);
  return kind == WeightKind::resistance ? z.r : z.x;
}

Feeder generate_random_feeder(int num_nodes, int num_extra, double z_lo,
                              double z_hi, std::uint64_t seed) {
  if (num_nodes < 2)
    throw std::invalid_argument("generate_random_feeder: num_nodes must be >= 2");
  if (num_extra < 0)
    throw std::invalid_argument("generate_random_feeder: num_extra must be >= 0");
  if (!(0.0 < z_lo && z_lo <= z_hi))
    throw std::invalid_argument("generate_random_feeder: need 0 < z_lo <= z_hi");

  auto rng = make_rng(derive_seed(seed, 0x11));
  std::uniform_real_distribution<double> draw_z(z_lo, z_hi);

  std::vector<CandidateEdge> tree_edges;
  tree_edges.reserve(static_cast<std::size_t>(num_nodes) - 1);
  for (NodeId k = 1; k < num_nodes; ++k) {
    NodeId p = kRoot;
    if (k >= 2) {
      // attach under a non-root node so the substation keeps degree 1
      std::uniform_int_distribution<NodeId> pick(1, k - 1);
      p = pick(rng);
    }
    const double r = draw_z(rng);
    const double x = draw_z(rng);
    tree_edges.push_back({p, k, {r, x}});
  }

  std::unordered_set<std::uint64_t> used;
  for (const auto& e : tree_edges) used.insert(pack_pair(e.u, e.v));

  std::vector<std::pair<NodeId, NodeId>> free_pairs;
  for (NodeId u = 1; u < num_nodes; ++u)
    for (NodeId v = u + 1; v < num_nodes; ++v)
      if (!used.count(pack_pair(u, v))) free_pairs.push_back({u, v});
  if (static_cast<std::size_t>(num_extra) > free_pairs.size())
    throw std::invalid_argument(
        "generate_random_feeder: num_extra exceeds available non-root pairs (" +
        std::to_string(free_pairs.size()) + ")");
  std::shuffle(free_pairs.begin(), free_pairs.end(), rng);

  std::vector<CandidateEdge> all = tree_edges;
  for (int i = 0; i < num_extra; ++i) {
    const auto [u, v] = free_pairs[static_cast<std::size_t>(i)];
    const double r = draw_z(rng);
    const double x = draw_z(rng);
    all.push_back({u, v, {r, x}});
  }

  return Feeder{GridGraph(num_nodes, std::move(all)),
                RadialTree(num_nodes, tree_edges)};
}

}  // namespace gridtopo
