#pragma once

#include "gridtopo/lcpf.hpp"

namespace gridtopo {

// Exact inverse of the voltage model on a known tree: applying the reduced
// line-admittance Laplacian to eps + i*theta returns p - i*q, edge by edge,
// O(N) per snapshot. Round-trips with the forward solver to rounding error.
InjectionSample invert_lcpf(const RadialTree& tree, const VoltageSample& v);

// Batched form over full snapshot rows; the sample set must carry angles and
// cover every non-root bus.
InjectionBatch invert_lcpf_batch(const RadialTree& tree, const SampleSet& samples);

struct InjectionEstimate {
  InjectionStats stats;
  // Largest off-diagonal correlation magnitude among the recovered active
  // (resp. reactive) injections. Near zero when the assumed tree matches the
  // one that produced the voltages; spurious coupling otherwise.
  double max_cross_corr_p = 0.0;
  double max_cross_corr_q = 0.0;
};

// Per-bus injection means and (p, q) second moments recovered from voltage
// snapshots through the assumed tree. Needs at least two snapshots.
InjectionEstimate estimate_injection_stats(const RadialTree& tree,
                                           const SampleSet& samples);

}  // namespace gridtopo
