#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridtopo/inject.hpp"
#include "gridtopo/missing.hpp"

namespace gridtopo {

struct FeederSpec {
  int num_nodes = 30;
  int extra_edges = 30;
  double z_lo = 0.01;
  double z_hi = 0.1;
};

// Per-bus statistics drawn per trial: var_p uniform in its range, var_q =
// beta^2 * var_p with beta the reactive scale, cov_pq = rho * sqrt(var_p *
// var_q). Means are negative (net load), mu_q = beta * mu_p.
struct StatsEnsemble {
  double var_p_lo = 1.0, var_p_hi = 2.0;
  double beta_lo = 0.2, beta_hi = 0.5;
  double rho_lo = 0.1, rho_hi = 0.9;
  double mu_p_lo = 0.5, mu_p_hi = 1.5;
};

struct ExperimentConfig {
  FeederSpec feeder;
  std::string grid_file;  // when set, replaces the random feeder
  StatsEnsemble stats;
  std::vector<std::size_t> sample_counts = {50, 500};
  std::vector<int> hidden_counts = {0};
  int trials = 100;
  std::uint64_t seed = 1;
  double tolerance = 0.25;
  int threads = 0;  // 0 = all hardware threads
  bool estimate_covariance = false;
  bool complete_graph = false;  // fully-metered runs rank all pairs, not just candidates
  std::string out_dir;          // where write_sweep_outputs should go; may be empty
};

struct SweepRow {
  int trial = 0;
  int hidden_count = 0;
  std::size_t samples = 0;
  double topology_error = 0.0;
  double covariance_error = 0.0;  // NaN when not computed
  bool failed = false;            // reconstruction gave up; error counted as 1
  double runtime_ms = 0.0;
};

struct SweepSummaryRow {
  int hidden_count = 0;
  std::size_t samples = 0;
  int trials = 0;
  int failures = 0;
  double mean_error = 0.0;
  double stderr_error = 0.0;
  double mean_cov_error = 0.0;  // NaN when not computed
};

struct SweepResult {
  std::vector<SweepRow> rows;        // sorted by (trial, hidden, samples)
  std::vector<SweepSummaryRow> summary;
};

InjectionStats draw_stats_ensemble(int num_nodes, const StatsEnsemble& ensemble,
                                   std::uint64_t seed);

// Unmetered bus placement: pairwise at least three hops apart, none adjacent
// to the substation. Shuffled greedy packing; nullopt when no packing of the
// requested size was found.
std::optional<std::vector<NodeId>> try_place_hidden_nodes(const RadialTree& tree,
                                                          int count,
                                                          std::uint64_t seed,
                                                          int attempts = 200);
std::vector<NodeId> place_hidden_nodes(const RadialTree& tree, int count,
                                       std::uint64_t seed, int attempts = 200);

// Relative difference of the per-bus (p, q) covariance blocks, Frobenius
// over all buses.
double covariance_error(const InjectionStats& estimate, const InjectionStats& truth);

// Monte Carlo sweep over trials x hidden counts x sample counts. Each trial
// draws one feeder, one statistics set and one snapshot block, reused across
// the grid of combinations (hidden sets are nested, sample prefixes shared).
// Deterministic in the config regardless of thread count.
SweepResult run_sweep(const ExperimentConfig& config);

// results.csv, summary.csv (deterministic) and timings.csv (wall clock,
// excluded from determinism guarantees) under out_dir.
void write_sweep_outputs(const SweepResult& result, const std::string& out_dir);

ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace gridtopo
