#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "gridtopo/learn.hpp"
#include "gridtopo/missing.hpp"

namespace gridtopo {

// Malformed or inconsistent input files; the message names the file and the
// offending field.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridFile {
  GridGraph grid;
  std::optional<RadialTree> tree;  // present when edges carry operational flags
};

// {"num_nodes": N, "root": 0, "edges": [{"u", "v", "r", "x", "operational"}]}
GridFile load_grid(const std::string& path);
void save_grid(const std::string& path, const GridGraph& grid,
               const RadialTree* tree);

// Snapshot CSV: one row per snapshot, header eps_<id>,... then optionally
// theta_<id>,... with matching ids. num_nodes_hint pins the grid size when
// the caller knows it; otherwise max id + 1 is assumed.
SampleSet load_samples(const std::string& path, int num_nodes_hint = 0);
void save_samples(const std::string& path, const SampleSet& samples);

// {"num_nodes": N, "nodes": [{"id", "mu_p", "mu_q", "var_p", "var_q",
// "cov_pq"}]} with one entry per non-root bus.
InjectionStats load_stats(const std::string& path);
void save_stats(const std::string& path, const InjectionStats& stats);

// {"num_nodes": N, "root": 0, "total_weight": W,
//  "edges": [{"u", "v", "phi"}]}; error_vs_operational added when given
// (fraction of operational lines missed).
LearnedTopology load_topology(const std::string& path);
void save_topology(const std::string& path, const LearnedTopology& topo,
                   std::optional<double> error_vs_operational = std::nullopt);

// Topology plus the per-step reconstruction log.
void save_missing_result(const std::string& path, const MissingLearnResult& result,
                         std::optional<double> error_vs_operational = std::nullopt);

// Operational tree from a learned edge list, impedances looked up in the
// candidate set.
RadialTree tree_from_topology(const LearnedTopology& topo, const GridGraph& grid);

}  // namespace gridtopo
