#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "gridtopo/linalg.hpp"

namespace gridtopo {

using NodeId = int;

// The substation is always node 0; buses are 1..N-1.
inline constexpr NodeId kRoot = 0;

struct Impedance {
  double r = 0.0;  // resistance, > 0
  double x = 0.0;  // reactance, > 0
};

struct CandidateEdge {
  NodeId u = 0;
  NodeId v = 0;
  Impedance z;
};

// Set of permissible lines: the operational lines plus open tie switches.
// Undirected, no self-loops, no parallel edges, all impedances positive.
// May contain loops; need not be connected.
class GridGraph {
 public:
  GridGraph() = default;
  GridGraph(int num_nodes, std::vector<CandidateEdge> edges);

  int num_nodes() const { return num_nodes_; }
  const std::vector<CandidateEdge>& edges() const { return edges_; }

  bool has_edge(NodeId u, NodeId v) const;
  // nullopt when (u,v) is not a candidate line.
  std::optional<Impedance> impedance(NodeId u, NodeId v) const;

 private:
  int num_nodes_ = 0;
  std::vector<CandidateEdge> edges_;
  std::vector<std::uint64_t> keys_;  // sorted packed (min,max) pairs, index-aligned with order_
  std::vector<std::size_t> order_;
};

// Operational radial topology: a spanning tree of all N nodes in which the
// substation has exactly one child. Parent/depth/subtree queries are O(1)
// after construction.
class RadialTree {
 public:
  RadialTree(int num_nodes, const std::vector<CandidateEdge>& edges);

  int num_nodes() const { return num_nodes_; }
  const std::vector<CandidateEdge>& edges() const { return edges_; }

  NodeId parent(NodeId a) const;                    // a != root
  const Impedance& impedance_to_parent(NodeId a) const;  // a != root
  const std::vector<NodeId>& children(NodeId a) const { return children_[a]; }
  int depth(NodeId a) const { return depth_[a]; }

  // true when d lies in the subtree rooted at a (nodes count as their own
  // descendants).
  bool is_descendant(NodeId d, NodeId a) const;

  // Edges from a up to the root as (child, parent) pairs, nearest first.
  std::vector<std::pair<NodeId, NodeId>> path_to_root(NodeId a) const;

  // Subtree of a, ascending node ids, a included.
  std::vector<NodeId> descendants(NodeId a) const;

  // Nodes in root-first order; every parent precedes its children.
  const std::vector<NodeId>& preorder() const { return preorder_; }

  NodeId lowest_common_ancestor(NodeId a, NodeId b) const;
  int hop_distance(NodeId a, NodeId b) const;

  // Sum of per-edge resistances (or reactances) along the path root->a.
  double weighted_depth_r(NodeId a) const { return wdepth_r_[a]; }
  double weighted_depth_x(NodeId a) const { return wdepth_x_[a]; }

 private:
  int num_nodes_ = 0;
  std::vector<CandidateEdge> edges_;
  std::vector<NodeId> parent_;
  std::vector<Impedance> z_up_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<int> depth_;
  std::vector<NodeId> preorder_;
  std::vector<int> tin_, tout_;  // preorder intervals for is_descendant
  std::vector<double> wdepth_r_, wdepth_x_;
};

enum class WeightKind { resistance, reactance };

// Entry (a,b) of the inverse reduced weighted Laplacian: the weighted depth
// of lca(a,b), i.e. the summed edge weight on the shared part of the two
// root paths. Zero when either node is the root.
double h_inverse_entry(const RadialTree& tree, NodeId a, NodeId b, WeightKind kind);

// Full (N-1)x(N-1) inverse; row/col i maps to node i+1.
Mat h_inverse(const RadialTree& tree, WeightKind kind);

// Closed form of h_inverse_entry(a, c) - h_inverse_entry(b, c) for b the
// parent of a: the a-b edge weight when c sits under a, else zero.
double h_inverse_difference(const RadialTree& tree, NodeId a, NodeId b, NodeId c,
                            WeightKind kind);

struct Feeder {
  GridGraph grid;   // operational lines plus open switches
  RadialTree tree;  // the operational topology
};

// Random feeder: uniform-attachment spanning tree (node 1 under the root,
// each later node under a uniformly drawn earlier non-root node) plus
// num_extra open switches between distinct non-root node pairs. Impedances
// r and x are drawn independently from [z_lo, z_hi]. Deterministic in seed.
Feeder generate_random_feeder(int num_nodes, int num_extra, double z_lo,
                              double z_hi, std::uint64_t seed);

}  // namespace gridtopo
