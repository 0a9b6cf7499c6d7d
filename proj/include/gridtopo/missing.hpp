#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridtopo/learn.hpp"

namespace gridtopo {

// Reconstruction with unmetered buses. The metered buses give a provisional
// spanning tree; its leaf neighborhoods are then peeled bottom-up, each step
// either confirming a direct line or explaining the local weights through one
// unmetered bus whose injection statistics are known. Confirmed subtrees fold
// their injection covariances into the node they hang from, so every check
// runs against accumulated descendant sums.

// Minimum-weight spanning tree over the metered buses only (substation
// degree one, complete graph on `observed`). `observed` must contain the
// substation.
LearnedTopology observable_mst(const PhiWeights& phi, std::span<const NodeId> observed);

// Expected pair weight across one line: the child side carries summed
// injection covariances s.
double predicted_phi_edge(const Impedance& z, const StatSums& s);

// Across two lines in series through an unmetered bus: `far_side` hangs below
// both lines, `mid` (the bus itself plus its other subtrees) below the upper
// line only.
double predicted_phi_grandparent(const Impedance& z_upper, const Impedance& z_lower,
                                 const StatSums& far_side, const StatSums& mid);

// Between two subtrees joined at an unmetered bus; each side sees only its
// own line.
double predicted_phi_siblings(const Impedance& z_a, const StatSums& s_a,
                              const Impedance& z_c, const StatSums& s_c);

struct StatementCheck {
  double score = 0.0;  // |observed - predicted| / predicted
  bool accepted = false;
};

// Relative agreement of an observed weight with one of the three line
// configurations: 1 = direct line (z1, s1), 2 = grandparent through an
// unmetered bus (z1 upper, z2 lower, s1 far side, s2 middle), 3 = siblings
// under an unmetered bus (z1/s1 and z2/s2 per side). Accepts when the score
// is at most `tolerance`.
StatementCheck check_statement(int statement, double observed_phi, const Impedance& z1,
                               const StatSums& s1, const Impedance& z2,
                               const StatSums& s2, double tolerance);

struct ReconstructionStep {
  int statement = 0;  // 1/2/3 as above, 0 = forced substation attachment
  NodeId node = -1;   // the neighborhood that was resolved
  NodeId hidden = -1; // unmetered bus involved, -1 for plain confirmations
  std::vector<NodeId> attached;
  double score = 0.0;
};

struct MissingDiagnostics {
  std::vector<ReconstructionStep> steps;
  double max_accepted_score = 0.0;
  int ambiguous_steps = 0;  // steps where several hypotheses fit the tolerance
};

struct MissingLearnResult {
  LearnedTopology topology;
  MissingDiagnostics diagnostics;
};

class ReconstructionError : public std::runtime_error {
 public:
  ReconstructionError(const std::string& reason, NodeId node,
                      std::vector<NodeId> pending,
                      std::vector<std::pair<NodeId, NodeId>> partial);

  NodeId node() const { return node_; }
  const std::vector<NodeId>& pending_children() const { return pending_; }
  const std::vector<std::pair<NodeId, NodeId>>& partial_edges() const { return partial_; }

 private:
  NodeId node_;
  std::vector<NodeId> pending_;
  std::vector<std::pair<NodeId, NodeId>> partial_;
};

// Full reconstruction: pair weights over the metered buses, the candidate
// line set, the unmetered bus ids, and injection statistics covering every
// bus. Throws ReconstructionError when a neighborhood fits no configuration
// within the tolerance.
MissingLearnResult learn_with_missing(const PhiWeights& phi,
                                      std::span<const NodeId> observed,
                                      const GridGraph& grid,
                                      std::span<const NodeId> hidden,
                                      const InjectionStats& stats, double tolerance);

// Snapshot convenience wrapper: drops the unmetered rows, builds empirical
// weights, runs the reconstruction.
MissingLearnResult learn_with_missing(const SampleSet& samples, const GridGraph& grid,
                                      std::span<const NodeId> hidden,
                                      const InjectionStats& stats, double tolerance);

}  // namespace gridtopo
