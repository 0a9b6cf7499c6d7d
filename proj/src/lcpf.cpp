#include "gridtopo/lcpf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "gridtopo/kernels.hpp"
#include "gridtopo/rng.hpp"

namespace gridtopo {
namespace {

void check_shape(const InjectionStats& s) {
  if (s.num_nodes < 2)
    throw std::invalid_argument("InjectionStats: num_nodes must be >= 2");
  const auto n = static_cast<std::size_t>(s.num_nodes);
  if (s.mu_p.size() != n || s.mu_q.size() != n || s.var_p.size() != n ||
      s.var_q.size() != n || s.cov_pq.size() != n)
    throw std::invalid_argument("InjectionStats: vectors must have num_nodes entries");
  for (NodeId a = 1; a < s.num_nodes; ++a) {
    for (double v : {s.mu_p[a], s.mu_q[a], s.var_p[a], s.var_q[a], s.cov_pq[a]})
      if (!std::isfinite(v))
        throw std::invalid_argument("InjectionStats: non-finite entry at node " +
                                    std::to_string(a));
  }
}

}  // namespace

void validate_psd(const InjectionStats& s) {
  check_shape(s);
  for (NodeId a = 1; a < s.num_nodes; ++a) {
    if (s.var_p[a] < 0.0 || s.var_q[a] < 0.0)
      throw std::invalid_argument("InjectionStats: negative variance at node " +
                                  std::to_string(a));
    const double bound = s.var_p[a] * s.var_q[a];
    if (s.cov_pq[a] * s.cov_pq[a] > bound * (1.0 + 1e-9) + 1e-300)
      throw std::invalid_argument(
          "InjectionStats: cov_pq exceeds variance bound at node " + std::to_string(a));
  }
}

void validate_assumption1(const InjectionStats& s) {
  validate_psd(s);
  for (NodeId a = 1; a < s.num_nodes; ++a) {
    if (!(s.var_p[a] > 0.0) || !(s.var_q[a] > 0.0))
      throw std::invalid_argument("InjectionStats: variance must be positive at node " +
                                  std::to_string(a));
    if (!(s.cov_pq[a] > 0.0))
      throw std::invalid_argument("InjectionStats: cov_pq must be positive at node " +
                                  std::to_string(a));
  }
}

StatSums stat_sums(const InjectionStats& stats, NodeId a) {
  if (a < 1 || a >= stats.num_nodes)
    throw std::invalid_argument("stat_sums: invalid node " + std::to_string(a));
  return {stats.var_p[a], stats.var_q[a], stats.cov_pq[a]};
}

StatSums stat_sums(const InjectionStats& stats, std::span<const NodeId> nodes) {
  StatSums s;
  for (NodeId a : nodes) s += stat_sums(stats, a);
  return s;
}

int SampleSet::row_of(NodeId a) const {
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), a);
  if (it == nodes.end() || *it != a) return -1;
  return static_cast<int>(it - nodes.begin());
}

const double* SampleSet::eps_row(NodeId a) const {
  const int r = row_of(a);
  if (r < 0)
    throw std::invalid_argument("SampleSet: node " + std::to_string(a) +
                                " has no voltage row");
  return eps.row(static_cast<std::size_t>(r));
}

const double* SampleSet::theta_row(NodeId a) const {
  if (!theta)
    throw std::invalid_argument("SampleSet: no angle rows were kept");
  const int r = row_of(a);
  if (r < 0)
    throw std::invalid_argument("SampleSet: node " + std::to_string(a) +
                                " has no angle row");
  return theta->row(static_cast<std::size_t>(r));
}

SampleSet SampleSet::prefix(std::size_t m) const {
  if (m < 1 || m > num_samples())
    throw std::invalid_argument("SampleSet::prefix: bad sample count");
  SampleSet out;
  out.num_nodes = num_nodes;
  out.nodes = nodes;
  out.eps = Mat(nodes.size(), m);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    std::memcpy(out.eps.row(i), eps.row(i), m * sizeof(double));
  if (theta) {
    Mat t(nodes.size(), m);
    for (std::size_t i = 0; i < nodes.size(); ++i)
      std::memcpy(t.row(i), theta->row(i), m * sizeof(double));
    out.theta = std::move(t);
  }
  return out;
}

SampleSet SampleSet::restrict_to(std::span<const NodeId> keep) const {
  std::vector<NodeId> want(keep.begin(), keep.end());
  std::sort(want.begin(), want.end());
  SampleSet out;
  out.num_nodes = num_nodes;
  out.nodes = want;
  out.eps = Mat(want.size(), num_samples());
  for (std::size_t i = 0; i < want.size(); ++i)
    std::memcpy(out.eps.row(i), eps_row(want[i]), num_samples() * sizeof(double));
  if (theta) {
    Mat t(want.size(), num_samples());
    for (std::size_t i = 0; i < want.size(); ++i)
      std::memcpy(t.row(i), theta_row(want[i]), num_samples() * sizeof(double));
    out.theta = std::move(t);
  }
  return out;
}

InjectionBatch sample_injections(const InjectionStats& stats, std::size_t m,
                                 std::uint64_t seed) {
  validate_assumption1(stats);
  if (m < 1) throw std::invalid_argument("sample_injections: need m >= 1");
  const int n = stats.num_nodes;
  InjectionBatch batch;
  batch.num_nodes = n;
  batch.p = Mat(static_cast<std::size_t>(n) - 1, m);
  batch.q = Mat(static_cast<std::size_t>(n) - 1, m);
  for (NodeId a = 1; a < n; ++a) {
    // per-node 2x2 Cholesky of [[var_p, cov], [cov, var_q]]
    const double l11 = std::sqrt(stats.var_p[a]);
    const double l21 = stats.cov_pq[a] / l11;
    const double l22 = std::sqrt(std::max(stats.var_q[a] - l21 * l21, 0.0));
    auto rng = make_rng(derive_seed(seed, 0x5a, static_cast<std::uint64_t>(a)));
    std::normal_distribution<double> nd;
    double* prow = batch.p.row(static_cast<std::size_t>(a) - 1);
    double* qrow = batch.q.row(static_cast<std::size_t>(a) - 1);
    for (std::size_t j = 0; j < m; ++j) {
      const double z1 = nd(rng);
      const double z2 = nd(rng);
      prow[j] = stats.mu_p[a] + l11 * z1;
      qrow[j] = stats.mu_q[a] + l21 * z1 + l22 * z2;
    }
  }
  return batch;
}

VoltageSample solve_lcpf(const RadialTree& tree, const InjectionSample& inj) {
  const auto n = static_cast<std::size_t>(tree.num_nodes());
  if (inj.p.size() != n || inj.q.size() != n)
    throw std::invalid_argument("solve_lcpf: injection vectors must have num_nodes entries");
  std::vector<double> fp = inj.p, fq = inj.q;
  const auto& order = tree.preorder();
  // flows: subtree sums pushed onto parents, deepest first
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId a = *it;
    if (a == kRoot) continue;
    const NodeId par = tree.parent(a);
    if (par != kRoot) {
      fp[par] += fp[a];
      fq[par] += fq[a];
    }
  }
  VoltageSample out;
  out.eps.assign(n, 0.0);
  out.theta.assign(n, 0.0);
  for (NodeId a : order) {
    if (a == kRoot) continue;
    const NodeId par = tree.parent(a);
    const Impedance& z = tree.impedance_to_parent(a);
    out.eps[a] = out.eps[par] + z.r * fp[a] + z.x * fq[a];
    out.theta[a] = out.theta[par] + z.x * fp[a] - z.r * fq[a];
  }
  return out;
}

SampleSet simulate_voltages(const RadialTree& tree, const InjectionBatch& batch,
                            bool with_theta) {
  const int n = tree.num_nodes();
  if (batch.num_nodes != n)
    throw std::invalid_argument("simulate_voltages: batch built for a different grid size");
  const std::size_t rows = static_cast<std::size_t>(n) - 1;
  const std::size_t m = batch.num_samples();
  if (batch.p.rows() != rows || batch.q.rows() != rows || batch.q.cols() != m)
    throw std::invalid_argument("simulate_voltages: malformed batch");

  Mat fp = batch.p, fq = batch.q;
  const auto& order = tree.preorder();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId a = *it;
    if (a == kRoot) continue;
    const NodeId par = tree.parent(a);
    if (par != kRoot) {
      kernels::axpy(1.0, fp.row(static_cast<std::size_t>(a) - 1),
                    fp.row(static_cast<std::size_t>(par) - 1), m);
      kernels::axpy(1.0, fq.row(static_cast<std::size_t>(a) - 1),
                    fq.row(static_cast<std::size_t>(par) - 1), m);
    }
  }

  SampleSet out;
  out.num_nodes = n;
  out.nodes.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) out.nodes[i] = static_cast<NodeId>(i + 1);
  out.eps = Mat(rows, m);
  if (with_theta) out.theta = Mat(rows, m);
  for (NodeId a : order) {
    if (a == kRoot) continue;
    const std::size_t ra = static_cast<std::size_t>(a) - 1;
    const NodeId par = tree.parent(a);
    const Impedance& z = tree.impedance_to_parent(a);
    const double* base_eps =
        par == kRoot ? nullptr : out.eps.row(static_cast<std::size_t>(par) - 1);
    kernels::combine(base_eps, z.r, fp.row(ra), z.x, fq.row(ra), out.eps.row(ra), m);
    if (with_theta) {
      const double* base_th =
          par == kRoot ? nullptr : out.theta->row(static_cast<std::size_t>(par) - 1);
      kernels::combine(base_th, z.x, fp.row(ra), -z.r, fq.row(ra), out.theta->row(ra), m);
    }
  }
  return out;
}

VoltageMoments exact_voltage_moments(const RadialTree& tree,
                                     const InjectionStats& stats) {
  validate_psd(stats);
  if (stats.num_nodes != tree.num_nodes())
    throw std::invalid_argument("exact_voltage_moments: stats built for a different grid size");
  const int n = tree.num_nodes();
  const std::size_t k = static_cast<std::size_t>(n) - 1;
  const Mat a = h_inverse(tree, WeightKind::resistance);
  const Mat b = h_inverse(tree, WeightKind::reactance);

  std::vector<double> mp(k), mq(k), wp(k), wq(k), wpq(k);
  for (std::size_t i = 0; i < k; ++i) {
    mp[i] = stats.mu_p[i + 1];
    mq[i] = stats.mu_q[i + 1];
    wp[i] = stats.var_p[i + 1];
    wq[i] = stats.var_q[i + 1];
    wpq[i] = stats.cov_pq[i + 1];
  }

  VoltageMoments out;
  out.mean_eps.assign(static_cast<std::size_t>(n), 0.0);
  out.mean_theta.assign(static_cast<std::size_t>(n), 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double ap = kernels::dot(a.row(i), mp.data(), k);
    const double aq = kernels::dot(a.row(i), mq.data(), k);
    const double bp = kernels::dot(b.row(i), mp.data(), k);
    const double bq = kernels::dot(b.row(i), mq.data(), k);
    out.mean_eps[i + 1] = ap + bq;
    out.mean_theta[i + 1] = bp - aq;
  }

  out.omega_eps = Mat(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      const double v = kernels::quad_weighted(a.row(i), a.row(j), b.row(i), b.row(j),
                                              wp.data(), wq.data(), wpq.data(), k);
      out.omega_eps(i, j) = v;
      out.omega_eps(j, i) = v;
    }
  }
  return out;
}

double phi_exact(const RadialTree& tree, const InjectionStats& stats, NodeId a,
                 NodeId b) {
  validate_psd(stats);
  if (stats.num_nodes != tree.num_nodes())
    throw std::invalid_argument("phi_exact: stats built for a different grid size");
  const int n = tree.num_nodes();
  if (a < 0 || a >= n || b < 0 || b >= n)
    throw std::invalid_argument("phi_exact: node out of range");
  const std::size_t k = static_cast<std::size_t>(n) - 1;
  std::vector<double> dr(k), dx(k), wp(k), wq(k), wpq(k);
  for (std::size_t i = 0; i < k; ++i) {
    const NodeId d = static_cast<NodeId>(i + 1);
    dr[i] = h_inverse_entry(tree, a, d, WeightKind::resistance) -
            h_inverse_entry(tree, b, d, WeightKind::resistance);
    dx[i] = h_inverse_entry(tree, a, d, WeightKind::reactance) -
            h_inverse_entry(tree, b, d, WeightKind::reactance);
    wp[i] = stats.var_p[d];
    wq[i] = stats.var_q[d];
    wpq[i] = stats.cov_pq[d];
  }
  return kernels::quad_weighted(dr.data(), dr.data(), dx.data(), dx.data(), wp.data(),
                                wq.data(), wpq.data(), k);
}

LcpfAnalytic::LcpfAnalytic(const RadialTree& tree, const InjectionStats& stats)
    : num_nodes_(tree.num_nodes()) {
  validate_psd(stats);
  if (stats.num_nodes != num_nodes_)
    throw std::invalid_argument("LcpfAnalytic: stats built for a different grid size");
  a_ = h_inverse(tree, WeightKind::resistance);
  b_ = h_inverse(tree, WeightKind::reactance);
  const std::size_t k = static_cast<std::size_t>(num_nodes_) - 1;
  wp_.resize(k);
  wq_.resize(k);
  wpq_.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    wp_[i] = stats.var_p[i + 1];
    wq_[i] = stats.var_q[i + 1];
    wpq_[i] = stats.cov_pq[i + 1];
  }
  omega_ = Mat(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      const double v = kernels::quad_weighted(a_.row(i), a_.row(j), b_.row(i),
                                              b_.row(j), wp_.data(), wq_.data(),
                                              wpq_.data(), k);
      omega_(i, j) = v;
      omega_(j, i) = v;
    }
  }
}

double LcpfAnalytic::phi(NodeId a, NodeId b) const {
  if (a < 0 || a >= num_nodes_ || b < 0 || b >= num_nodes_)
    throw std::invalid_argument("LcpfAnalytic::phi: node out of range");
  auto om = [&](NodeId i, NodeId j) {
    if (i == kRoot || j == kRoot) return 0.0;
    return omega_(static_cast<std::size_t>(i) - 1, static_cast<std::size_t>(j) - 1);
  };
  return om(a, a) - 2.0 * om(a, b) + om(b, b);
}

double LcpfAnalytic::phi_from_paths(NodeId a, NodeId b) const {
  if (a < 0 || a >= num_nodes_ || b < 0 || b >= num_nodes_)
    throw std::invalid_argument("LcpfAnalytic::phi_from_paths: node out of range");
  const std::size_t k = static_cast<std::size_t>(num_nodes_) - 1;
  std::vector<double> zero;
  auto row = [&](const Mat& m, NodeId i) -> const double* {
    if (i == kRoot) {
      if (zero.empty()) zero.assign(k, 0.0);
      return zero.data();
    }
    return m.row(static_cast<std::size_t>(i) - 1);
  };
  std::vector<double> dr(k), dx(k);
  const double *ar = row(a_, a), *br = row(a_, b);
  const double *ax = row(b_, a), *bx = row(b_, b);
  for (std::size_t i = 0; i < k; ++i) {
    dr[i] = ar[i] - br[i];
    dx[i] = ax[i] - bx[i];
  }
  return kernels::quad_weighted(dr.data(), dr.data(), dx.data(), dx.data(), wp_.data(),
                                wq_.data(), wpq_.data(), k);
}

Mat sample_covariance(const Mat& m) {
  if (m.cols() < 2)
    throw std::invalid_argument("sample_covariance: need at least 2 snapshots");
  const std::size_t n = m.rows(), cols = m.cols();
  Mat centered = m;
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = kernels::sum(centered.row(i), cols) / static_cast<double>(cols);
    double* r = centered.row(i);
    for (std::size_t j = 0; j < cols; ++j) r[j] -= mean;
  }
  Mat cov(n, n);
  const double scale = 1.0 / static_cast<double>(cols - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = kernels::dot(centered.row(i), centered.row(j), cols) * scale;
      cov(i, j) = v;
      cov(j, i) = v;
    }
  }
  return cov;
}

}  // namespace gridtopo
