#pragma once

#include <span>
#include <utility>
#include <vector>

#include "gridtopo/lcpf.hpp"

namespace gridtopo {

// Symmetric matrix of variance-of-voltage-difference weights over node pairs.
// Entries for pairs involving an unmetered node are NaN ("unavailable"); the
// substation row holds plain voltage variances (its deviation is zero).
class PhiWeights {
 public:
  PhiWeights() = default;
  explicit PhiWeights(int num_nodes);

  int num_nodes() const { return num_nodes_; }
  double at(NodeId a, NodeId b) const;
  bool available(NodeId a, NodeId b) const;
  void set(NodeId a, NodeId b, double value);

 private:
  int num_nodes_ = 0;
  Mat w_;
};

// Unbiased empirical weights from voltage snapshots: phi(a,b) estimates
// Var(eps_a - eps_b) over the metered nodes plus the substation. Needs at
// least two snapshots.
PhiWeights empirical_phi(const SampleSet& samples);

// Closed-form weights for every pair under the given injection statistics.
PhiWeights exact_phi_matrix(const RadialTree& tree, const InjectionStats& stats);

struct WeightedEdge {
  NodeId u = 0, v = 0;  // normalized u < v
  double weight = 0.0;
};

struct LearnedTopology {
  int num_nodes = 0;
  std::vector<WeightedEdge> edges;  // sorted by (u, v)
  double total_weight = 0.0;
};

// Minimum-weight spanning tree over the candidate edges with the substation
// forced to degree one: Kruskal over the non-substation edges, then the
// cheapest substation edge appended. Ties break lexicographically on
// (weight, smaller endpoint, larger endpoint). Throws when the candidates
// cannot span, or when a candidate pair has no available weight.
LearnedTopology constrained_mst(std::span<const std::pair<NodeId, NodeId>> candidates,
                                const PhiWeights& phi);

// Snapshot pipeline: empirical weights over the grid's candidate lines (or
// over every node pair when complete_graph is set), then the constrained
// minimum spanning tree.
LearnedTopology learn_topology(const SampleSet& samples, const GridGraph& grid,
                               bool complete_graph = false);

// Fraction of operational lines the estimate missed, in [0, 1].
double topology_error(const LearnedTopology& estimated, const RadialTree& truth);

// Groups the non-substation nodes into distinct feeder trees: uncorrelated
// voltages make the pair weight split into the two variances, so a deficit
// of at least `tolerance` times the variance sum marks nodes sharing a tree.
std::vector<std::vector<NodeId>> partition_into_trees(const PhiWeights& phi,
                                                      double tolerance);

struct ExcludedEdgeMargin {
  NodeId u = 0, v = 0;
  double margin = 0.0;  // edge weight minus the heaviest tree edge on its cycle
};

struct MstMargins {
  std::vector<ExcludedEdgeMargin> entries;
  double min_margin = 0.0;  // 0 when nothing was excluded
};

// How decisively each non-tree candidate lost: nonpositive margins flag ties
// or inconsistent weights.
MstMargins mst_margins(const LearnedTopology& learned,
                       std::span<const std::pair<NodeId, NodeId>> candidates,
                       const PhiWeights& phi);

}  // namespace gridtopo
