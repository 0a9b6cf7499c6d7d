#include "gridtopo/inject.hpp"

#include <cmath>
#include <stdexcept>

#include "gridtopo/kernels.hpp"

namespace gridtopo {
namespace {

struct EdgeFactors {
  double g, bt;  // r/|z|^2, x/|z|^2
};

EdgeFactors factors(const Impedance& z) {
  const double d = z.r * z.r + z.x * z.x;
  return {z.r / d, z.x / d};
}

}  // namespace

InjectionSample invert_lcpf(const RadialTree& tree, const VoltageSample& v) {
  const auto n = static_cast<std::size_t>(tree.num_nodes());
  if (v.eps.size() != n || v.theta.size() != n)
    throw std::invalid_argument("invert_lcpf: voltage vectors must have num_nodes entries");
  InjectionSample out;
  out.p.assign(n, 0.0);
  out.q.assign(n, 0.0);
  for (NodeId a = 1; a < tree.num_nodes(); ++a) {
    const NodeId u = tree.parent(a);
    const auto [g, bt] = factors(tree.impedance_to_parent(a));
    const double de = v.eps[a] - v.eps[u];
    const double dt = v.theta[a] - v.theta[u];
    const double tp = g * de + bt * dt;
    const double tq = bt * de - g * dt;
    out.p[a] += tp;
    out.q[a] += tq;
    if (u != kRoot) {
      out.p[u] -= tp;
      out.q[u] -= tq;
    }
  }
  return out;
}

InjectionBatch invert_lcpf_batch(const RadialTree& tree, const SampleSet& samples) {
  const int n = tree.num_nodes();
  if (samples.num_nodes != n)
    throw std::invalid_argument("invert_lcpf_batch: samples built for a different grid size");
  if (!samples.theta)
    throw std::invalid_argument("invert_lcpf_batch: angle rows are required");
  if (samples.nodes.size() != static_cast<std::size_t>(n) - 1)
    throw std::invalid_argument("invert_lcpf_batch: samples must cover every non-root bus");
  const std::size_t m = samples.num_samples();

  InjectionBatch out;
  out.num_nodes = n;
  out.p = Mat(static_cast<std::size_t>(n) - 1, m);
  out.q = Mat(static_cast<std::size_t>(n) - 1, m);
  std::vector<double> de(m), dt(m), t(m);
  for (NodeId a = 1; a < n; ++a) {
    const NodeId u = tree.parent(a);
    const auto [g, bt] = factors(tree.impedance_to_parent(a));
    const double* ea = samples.eps_row(a);
    const double* ta = samples.theta_row(a);
    const double* dep = ea;
    const double* dth = ta;
    if (u != kRoot) {
      kernels::combine(nullptr, 1.0, ea, -1.0, samples.eps_row(u), de.data(), m);
      kernels::combine(nullptr, 1.0, ta, -1.0, samples.theta_row(u), dt.data(), m);
      dep = de.data();
      dth = dt.data();
    }
    const std::size_t ra = static_cast<std::size_t>(a) - 1;
    kernels::combine(nullptr, g, dep, bt, dth, t.data(), m);
    kernels::axpy(1.0, t.data(), out.p.row(ra), m);
    if (u != kRoot) kernels::axpy(-1.0, t.data(), out.p.row(static_cast<std::size_t>(u) - 1), m);
    kernels::combine(nullptr, bt, dep, -g, dth, t.data(), m);
    kernels::axpy(1.0, t.data(), out.q.row(ra), m);
    if (u != kRoot) kernels::axpy(-1.0, t.data(), out.q.row(static_cast<std::size_t>(u) - 1), m);
  }
  return out;
}

InjectionEstimate estimate_injection_stats(const RadialTree& tree,
                                           const SampleSet& samples) {
  if (samples.num_samples() < 2)
    throw std::invalid_argument("estimate_injection_stats: need at least 2 snapshots");
  const InjectionBatch batch = invert_lcpf_batch(tree, samples);
  const int n = tree.num_nodes();
  const std::size_t m = batch.num_samples();
  const double dm = static_cast<double>(m);

  InjectionEstimate out;
  out.stats.num_nodes = n;
  out.stats.mu_p.assign(static_cast<std::size_t>(n), 0.0);
  out.stats.mu_q.assign(static_cast<std::size_t>(n), 0.0);
  out.stats.var_p.assign(static_cast<std::size_t>(n), 0.0);
  out.stats.var_q.assign(static_cast<std::size_t>(n), 0.0);
  out.stats.cov_pq.assign(static_cast<std::size_t>(n), 0.0);

  Mat cp = batch.p, cq = batch.q;  // centered in place
  for (NodeId a = 1; a < n; ++a) {
    const std::size_t ra = static_cast<std::size_t>(a) - 1;
    const double mp = kernels::sum(cp.row(ra), m) / dm;
    const double mq = kernels::sum(cq.row(ra), m) / dm;
    out.stats.mu_p[a] = mp;
    out.stats.mu_q[a] = mq;
    double* rp = cp.row(ra);
    double* rq = cq.row(ra);
    for (std::size_t j = 0; j < m; ++j) {
      rp[j] -= mp;
      rq[j] -= mq;
    }
    const double scale = 1.0 / (dm - 1.0);
    out.stats.var_p[a] = kernels::dot(rp, rp, m) * scale;
    out.stats.var_q[a] = kernels::dot(rq, rq, m) * scale;
    out.stats.cov_pq[a] = kernels::dot(rp, rq, m) * scale;
  }

  // cross-bus coupling of the recovered injections, as correlations
  auto max_off_corr = [&](const Mat& c) {
    double best = 0.0;
    const std::size_t k = c.rows();
    const double scale = 1.0 / (dm - 1.0);
    std::vector<double> sd(k);
    for (std::size_t i = 0; i < k; ++i)
      sd[i] = std::sqrt(kernels::dot(c.row(i), c.row(i), m) * scale);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        const double denom = sd[i] * sd[j];
        if (denom <= 0.0) continue;
        const double corr = std::abs(kernels::dot(c.row(i), c.row(j), m) * scale / denom);
        best = std::max(best, corr);
      }
    }
    return best;
  };
  out.max_cross_corr_p = max_off_corr(cp);
  out.max_cross_corr_q = max_off_corr(cq);
  return out;
}

}  // namespace gridtopo
