#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gridtopo/grid.hpp"
#include "gridtopo/linalg.hpp"

namespace gridtopo {

// Second-order statistics of the complex bus injections. Vectors are indexed
// by node id; slot 0 belongs to the substation and is ignored (the slack bus
// balances the feeder, it has no modeled injection).
struct InjectionStats {
  int num_nodes = 0;
  std::vector<double> mu_p, mu_q;
  std::vector<double> var_p, var_q, cov_pq;
};

// Shape checks plus per-node covariance consistency (var >= 0,
// cov^2 <= var_p * var_q). Enough for moment computations.
void validate_psd(const InjectionStats& stats);

// Strict form required by samplers and the learners: positive variances and
// positive p-q covariance at every non-root node.
void validate_assumption1(const InjectionStats& stats);

// Summed injection covariances over a node set; the quadratic weights the
// reconstruction checks consume.
struct StatSums {
  double p = 0.0, q = 0.0, pq = 0.0;
  StatSums& operator+=(const StatSums& o) {
    p += o.p;
    q += o.q;
    pq += o.pq;
    return *this;
  }
};

StatSums stat_sums(const InjectionStats& stats, NodeId a);
StatSums stat_sums(const InjectionStats& stats, std::span<const NodeId> nodes);

// One injection / voltage snapshot. Vectors sized num_nodes, entry 0 zero.
struct InjectionSample {
  std::vector<double> p, q;
};
struct VoltageSample {
  std::vector<double> eps, theta;
};

// Node-major sample block: row i holds all snapshots of node nodes[i].
struct InjectionBatch {
  int num_nodes = 0;
  Mat p, q;  // (num_nodes-1) x m, row = node id - 1
  std::size_t num_samples() const { return p.cols(); }
};

// Voltage snapshots for a subset of buses (all non-root buses when produced
// by the simulator; the learners also build reduced views).
struct SampleSet {
  int num_nodes = 0;            // of the underlying grid
  std::vector<NodeId> nodes;    // row -> node id, ascending
  Mat eps;                      // nodes.size() x m
  std::optional<Mat> theta;     // same shape when angles were kept

  std::size_t num_samples() const { return eps.cols(); }
  int row_of(NodeId a) const;   // -1 when the node is not present
  const double* eps_row(NodeId a) const;
  const double* theta_row(NodeId a) const;

  // Same nodes, first m snapshots.
  SampleSet prefix(std::size_t m) const;
  // Rows restricted to `keep` (must all be present), ascending.
  SampleSet restrict_to(std::span<const NodeId> keep) const;
};

// i.i.d. Gaussian snapshots of every non-root injection, independent across
// nodes, each node drawing from its own 2x2 (p,q) covariance. Deterministic
// in (stats, m, seed); each node has its own stream, so draws never shift
// across nodes.
InjectionBatch sample_injections(const InjectionStats& stats, std::size_t m,
                                 std::uint64_t seed);

// Voltage deviation profile for one injection snapshot: two O(N) tree sweeps
// (flows up, potentials down). eps[0] = theta[0] = 0 by construction.
VoltageSample solve_lcpf(const RadialTree& tree, const InjectionSample& inj);

// Batched solver; same sweeps over whole snapshot rows at once.
SampleSet simulate_voltages(const RadialTree& tree, const InjectionBatch& batch,
                            bool with_theta = true);

struct VoltageMoments {
  std::vector<double> mean_eps, mean_theta;  // size num_nodes, entry 0 zero
  Mat omega_eps;                             // (num_nodes-1)^2, row = node-1
};

// Closed-form mean and covariance of the voltage deviations under the given
// injection statistics.
VoltageMoments exact_voltage_moments(const RadialTree& tree,
                                     const InjectionStats& stats);

// Var(eps_a - eps_b) in closed form; either node may be the substation.
double phi_exact(const RadialTree& tree, const InjectionStats& stats, NodeId a,
                 NodeId b);

// Caches the inverse reduced Laplacians and the voltage covariance so many
// phi queries against one (tree, stats) pair stay cheap.
class LcpfAnalytic {
 public:
  LcpfAnalytic(const RadialTree& tree, const InjectionStats& stats);

  const Mat& h_inv_r() const { return a_; }
  const Mat& h_inv_x() const { return b_; }
  const Mat& omega_eps() const { return omega_; }

  // Var(eps_a - eps_b) read off the covariance.
  double phi(NodeId a, NodeId b) const;
  // Same quantity assembled from weighted root-path overlaps; an
  // independent route used to cross-check phi().
  double phi_from_paths(NodeId a, NodeId b) const;

 private:
  int num_nodes_;
  Mat a_, b_, omega_;
  std::vector<double> wp_, wq_, wpq_;  // diagonal injection weights, index node-1
};

// Unbiased covariance of the rows of m (variables in rows, snapshots in
// columns). ddof = 1.
Mat sample_covariance(const Mat& m);

}  // namespace gridtopo
