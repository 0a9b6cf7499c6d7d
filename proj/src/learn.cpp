#include "gridtopo/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "gridtopo/kernels.hpp"

namespace gridtopo {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct UnionFind {
  std::vector<int> parent, rank_;
  explicit UnionFind(int n) : parent(n), rank_(n, 0) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }
};

}  // namespace

PhiWeights::PhiWeights(int num_nodes) : num_nodes_(num_nodes) {
  if (num_nodes < 2) throw std::invalid_argument("PhiWeights: num_nodes must be >= 2");
  w_ = Mat(static_cast<std::size_t>(num_nodes), static_cast<std::size_t>(num_nodes), kNaN);
}

double PhiWeights::at(NodeId a, NodeId b) const {
  if (a < 0 || a >= num_nodes_ || b < 0 || b >= num_nodes_)
    throw std::invalid_argument("PhiWeights: node out of range");
  if (a == b) return 0.0;
  return w_(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
}

bool PhiWeights::available(NodeId a, NodeId b) const {
  return !std::isnan(at(a, b));
}

void PhiWeights::set(NodeId a, NodeId b, double value) {
  if (a < 0 || a >= num_nodes_ || b < 0 || b >= num_nodes_)
    throw std::invalid_argument("PhiWeights: node out of range");
  if (a == b) throw std::invalid_argument("PhiWeights: diagonal is fixed at zero");
  w_(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) = value;
  w_(static_cast<std::size_t>(b), static_cast<std::size_t>(a)) = value;
}

PhiWeights empirical_phi(const SampleSet& samples) {
  const std::size_t m = samples.num_samples();
  if (m < 2) throw std::invalid_argument("empirical_phi: need at least 2 snapshots");
  if (samples.num_nodes < 2)
    throw std::invalid_argument("empirical_phi: malformed sample set");
  PhiWeights phi(samples.num_nodes);
  const double dm = static_cast<double>(m);
  const auto var_of = [&](double s, double s2) {
    return (s2 - s * s / dm) / (dm - 1.0);
  };
  const auto& nodes = samples.nodes;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double* xi = samples.eps.row(i);
    // substation pair: the reference deviation is identically zero
    phi.set(kRoot, nodes[i], var_of(kernels::sum(xi, m), kernels::dot(xi, xi, m)));
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      const auto st = kernels::diff_stats(xi, samples.eps.row(j), m);
      phi.set(nodes[i], nodes[j], var_of(st.sum, st.sum_sq));
    }
  }
  return phi;
}

PhiWeights exact_phi_matrix(const RadialTree& tree, const InjectionStats& stats) {
  LcpfAnalytic an(tree, stats);
  PhiWeights phi(tree.num_nodes());
  for (NodeId a = 0; a < tree.num_nodes(); ++a)
    for (NodeId b = a + 1; b < tree.num_nodes(); ++b) phi.set(a, b, an.phi(a, b));
  return phi;
}

LearnedTopology constrained_mst(std::span<const std::pair<NodeId, NodeId>> candidates,
                                const PhiWeights& phi) {
  const int n = phi.num_nodes();
  std::vector<WeightedEdge> nonroot;
  WeightedEdge best_root{0, 0, kNaN};
  for (const auto& [cu, cv] : candidates) {
    const NodeId u = std::min(cu, cv), v = std::max(cu, cv);
    if (u == v || u < 0 || v >= n)
      throw std::invalid_argument("constrained_mst: invalid candidate edge (" +
                                  std::to_string(cu) + "," + std::to_string(cv) + ")");
    if (!phi.available(u, v))
      throw std::invalid_argument("constrained_mst: no weight for candidate edge (" +
                                  std::to_string(u) + "," + std::to_string(v) + ")");
    const double w = phi.at(u, v);
    if (u == kRoot) {
      if (std::isnan(best_root.weight) || w < best_root.weight ||
          (w == best_root.weight && v < best_root.v))
        best_root = {u, v, w};
    } else {
      nonroot.push_back({u, v, w});
    }
  }
  if (std::isnan(best_root.weight))
    throw std::invalid_argument("constrained_mst: no candidate edge touches the substation");

  std::sort(nonroot.begin(), nonroot.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    if (a.weight != b.weight) return a.weight < b.weight;
    if (a.u != b.u) return a.u < b.u;
    return a.v < b.v;
  });

  LearnedTopology out;
  out.num_nodes = n;
  UnionFind uf(n);
  for (const auto& e : nonroot)
    if (uf.unite(e.u, e.v)) out.edges.push_back(e);
  if (out.edges.size() != static_cast<std::size_t>(n) - 2)
    throw std::invalid_argument(
        "constrained_mst: candidates cannot span the non-substation nodes");
  out.edges.push_back(best_root);
  std::sort(out.edges.begin(), out.edges.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    if (a.u != b.u) return a.u < b.u;
    return a.v < b.v;
  });
  out.total_weight = 0.0;
  for (const auto& e : out.edges) out.total_weight += e.weight;
  return out;
}

LearnedTopology learn_topology(const SampleSet& samples, const GridGraph& grid,
                               bool complete_graph) {
  if (grid.num_nodes() != samples.num_nodes)
    throw std::invalid_argument("learn_topology: samples built for a different grid size");
  const PhiWeights phi = empirical_phi(samples);
  std::vector<std::pair<NodeId, NodeId>> candidates;
  if (complete_graph) {
    std::vector<NodeId> present = {kRoot};
    present.insert(present.end(), samples.nodes.begin(), samples.nodes.end());
    for (std::size_t i = 0; i < present.size(); ++i)
      for (std::size_t j = i + 1; j < present.size(); ++j)
        candidates.push_back({present[i], present[j]});
  } else {
    for (const auto& e : grid.edges()) candidates.push_back({e.u, e.v});
  }
  return constrained_mst(candidates, phi);
}

double topology_error(const LearnedTopology& estimated, const RadialTree& truth) {
  if (estimated.num_nodes != truth.num_nodes())
    throw std::invalid_argument("topology_error: node counts differ");
  std::vector<std::pair<NodeId, NodeId>> est;
  est.reserve(estimated.edges.size());
  for (const auto& e : estimated.edges) est.push_back({e.u, e.v});
  std::sort(est.begin(), est.end());
  int missed = 0;
  for (const auto& e : truth.edges()) {
    const auto key = std::make_pair(std::min(e.u, e.v), std::max(e.u, e.v));
    if (!std::binary_search(est.begin(), est.end(), key)) ++missed;
  }
  return static_cast<double>(missed) / static_cast<double>(truth.num_nodes() - 1);
}

std::vector<std::vector<NodeId>> partition_into_trees(const PhiWeights& phi,
                                                      double tolerance) {
  const int n = phi.num_nodes();
  if (!(tolerance >= 0.0 && tolerance < 1.0))
    throw std::invalid_argument("partition_into_trees: tolerance must lie in [0, 1)");
  UnionFind uf(n);
  for (NodeId a = 1; a < n; ++a) {
    if (!phi.available(kRoot, a)) continue;
    for (NodeId b = a + 1; b < n; ++b) {
      if (!phi.available(kRoot, b) || !phi.available(a, b)) continue;
      const double split = phi.at(kRoot, a) + phi.at(kRoot, b);
      // correlated voltages pull the pair weight below the independent split
      if (phi.at(a, b) < (1.0 - tolerance) * split) uf.unite(a, b);
    }
  }
  std::vector<std::vector<NodeId>> groups;
  std::vector<int> group_of(n, -1);
  for (NodeId a = 1; a < n; ++a) {
    if (!phi.available(kRoot, a)) continue;
    const int r = uf.find(a);
    if (group_of[r] < 0) {
      group_of[r] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[static_cast<std::size_t>(group_of[r])].push_back(a);
  }
  return groups;
}

MstMargins mst_margins(const LearnedTopology& learned,
                       std::span<const std::pair<NodeId, NodeId>> candidates,
                       const PhiWeights& phi) {
  const int n = learned.num_nodes;
  std::vector<std::vector<std::pair<NodeId, double>>> adj(static_cast<std::size_t>(n));
  std::vector<std::pair<NodeId, NodeId>> in_tree;
  for (const auto& e : learned.edges) {
    adj[static_cast<std::size_t>(e.u)].push_back({e.v, e.weight});
    adj[static_cast<std::size_t>(e.v)].push_back({e.u, e.weight});
    in_tree.push_back({e.u, e.v});
  }
  std::sort(in_tree.begin(), in_tree.end());

  MstMargins out;
  out.min_margin = std::numeric_limits<double>::infinity();
  std::vector<double> heaviest(static_cast<std::size_t>(n));
  std::vector<NodeId> bfs_from(static_cast<std::size_t>(n), -1);
  for (const auto& [cu, cv] : candidates) {
    const NodeId u = std::min(cu, cv), v = std::max(cu, cv);
    if (std::binary_search(in_tree.begin(), in_tree.end(), std::make_pair(u, v)))
      continue;
    // heaviest tree edge on the u-v path, via BFS from u
    std::fill(bfs_from.begin(), bfs_from.end(), -1);
    std::vector<NodeId> queue = {u};
    bfs_from[static_cast<std::size_t>(u)] = u;
    heaviest[static_cast<std::size_t>(u)] = 0.0;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const NodeId a = queue[qi];
      for (const auto& [b, w] : adj[static_cast<std::size_t>(a)]) {
        if (bfs_from[static_cast<std::size_t>(b)] != -1) continue;
        bfs_from[static_cast<std::size_t>(b)] = a;
        heaviest[static_cast<std::size_t>(b)] =
            std::max(heaviest[static_cast<std::size_t>(a)], w);
        queue.push_back(b);
      }
    }
    const double margin = phi.at(u, v) - heaviest[static_cast<std::size_t>(v)];
    out.entries.push_back({u, v, margin});
    out.min_margin = std::min(out.min_margin, margin);
  }
  if (out.entries.empty()) out.min_margin = 0.0;
  return out;
}

}  // namespace gridtopo
