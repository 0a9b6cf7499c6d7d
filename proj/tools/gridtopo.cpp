// Command-line front end. Every subcommand is a thin wrapper over the library:
// it reads the documented file formats, calls one or two library functions and
// writes the documented outputs. On failure a single JSON object describing
// the error goes to stderr and the exit code is 1.

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridtopo/harness.hpp"
#include "gridtopo/inject.hpp"
#include "gridtopo/io.hpp"
#include "gridtopo/learn.hpp"
#include "gridtopo/missing.hpp"
#include "gridtopo/rng.hpp"

namespace {

using namespace gridtopo;

struct GenerateArgs {
  int nodes = 30;
  int extra = 30;
  double z_lo = 0.01;
  double z_hi = 0.1;
  std::uint64_t seed = 1;
  std::string out;
};

struct SimulateArgs {
  std::string grid;
  std::string stats;      // empty: draw from the default ensemble
  std::string stats_out;  // optionally record the statistics used
  std::size_t samples = 0;
  std::uint64_t seed = 1;
  bool no_theta = false;
  std::string out;
};

struct LearnArgs {
  std::string grid;
  std::string samples;
  bool complete_graph = false;
  std::string out;
};

struct LearnMissingArgs {
  std::string grid;
  std::string samples;
  std::vector<int> hidden;
  std::string stats;
  double tolerance = 0.25;
  std::string out;
};

struct EstimateArgs {
  std::string grid;
  std::string tree;  // empty: fall back to the grid's operational flags
  std::string samples;
  std::string out;
};

struct SweepArgs {
  std::string config;
  std::string out;  // overrides out_dir from the config
};

void run_generate(const GenerateArgs& a) {
  const Feeder feeder = generate_random_feeder(a.nodes, a.extra, a.z_lo, a.z_hi, a.seed);
  save_grid(a.out, feeder.grid, &feeder.tree);
  std::printf("wrote %s: %d buses, %zu candidate lines\n", a.out.c_str(),
              feeder.grid.num_nodes(), feeder.grid.edges().size());
}

const RadialTree& operational_tree(const GridFile& gf, const std::string& path) {
  if (!gf.tree)
    throw SchemaError(path + ": no operational line markings");
  return *gf.tree;
}

void run_simulate(const SimulateArgs& a) {
  const GridFile gf = load_grid(a.grid);
  const RadialTree& tree = operational_tree(gf, a.grid);
  InjectionStats stats;
  if (a.stats.empty())
    stats = draw_stats_ensemble(gf.grid.num_nodes(), StatsEnsemble{}, derive_seed(a.seed, 3));
  else
    stats = load_stats(a.stats);
  if (!a.stats_out.empty()) save_stats(a.stats_out, stats);
  const InjectionBatch batch = sample_injections(stats, a.samples, derive_seed(a.seed, 4));
  const SampleSet sim = simulate_voltages(tree, batch, !a.no_theta);
  save_samples(a.out, sim);
  std::printf("wrote %s: %zu snapshots, %d buses%s\n", a.out.c_str(), sim.num_samples(),
              gf.grid.num_nodes() - 1, a.no_theta ? "" : ", with angles");
}

void run_learn(const LearnArgs& a) {
  const GridFile gf = load_grid(a.grid);
  const SampleSet samples = load_samples(a.samples, gf.grid.num_nodes());
  const LearnedTopology topo = learn_topology(samples, gf.grid, a.complete_graph);
  std::optional<double> err;
  if (gf.tree) err = topology_error(topo, *gf.tree);
  save_topology(a.out, topo, err);
  std::printf("wrote %s: %zu lines, total weight %.6g", a.out.c_str(), topo.edges.size(),
              topo.total_weight);
  if (err) std::printf(", error vs operational %.6g", *err);
  std::printf("\n");
}

void run_learn_missing(const LearnMissingArgs& a) {
  const GridFile gf = load_grid(a.grid);
  const SampleSet samples = load_samples(a.samples, gf.grid.num_nodes());
  const InjectionStats stats = load_stats(a.stats);
  std::vector<NodeId> hidden(a.hidden.begin(), a.hidden.end());
  const MissingLearnResult res =
      learn_with_missing(samples, gf.grid, hidden, stats, a.tolerance);
  std::optional<double> err;
  if (gf.tree) err = topology_error(res.topology, *gf.tree);
  save_missing_result(a.out, res, err);
  std::printf("wrote %s: %zu lines, %zu reconstruction steps, max score %.6g",
              a.out.c_str(), res.topology.edges.size(), res.diagnostics.steps.size(),
              res.diagnostics.max_accepted_score);
  if (err) std::printf(", error vs operational %.6g", *err);
  std::printf("\n");
}

void run_estimate(const EstimateArgs& a) {
  const GridFile gf = load_grid(a.grid);
  const SampleSet samples = load_samples(a.samples, gf.grid.num_nodes());
  std::optional<RadialTree> tree;
  if (a.tree.empty())
    tree = operational_tree(gf, a.grid);
  else
    tree = tree_from_topology(load_topology(a.tree), gf.grid);
  const InjectionEstimate est = estimate_injection_stats(*tree, samples);
  save_stats(a.out, est.stats);
  std::printf("wrote %s: max off-bus correlation p %.4f, q %.4f\n", a.out.c_str(),
              est.max_cross_corr_p, est.max_cross_corr_q);
}

void run_sweep(const SweepArgs& a) {
  ExperimentConfig cfg = load_experiment_config(a.config);
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (cfg.out_dir.empty())
    throw std::runtime_error("no output directory: set out_dir in the config or pass --out");
  const SweepResult result = run_sweep(cfg);
  write_sweep_outputs(result, cfg.out_dir);
  for (const auto& s : result.summary)
    std::printf("hidden %d  m %zu  mean error %.6g  stderr %.6g  failures %d/%d\n",
                s.hidden_count, s.samples, s.mean_error, s.stderr_error, s.failures,
                s.trials);
  std::printf("wrote %s/results.csv, summary.csv, timings.csv\n", cfg.out_dir.c_str());
}

void print_error_line(const std::string& message, const ReconstructionError* rec) {
  nlohmann::json j{{"error", message}};
  if (rec) {
    j["node"] = rec->node();
    j["pending"] = rec->pending_children();
  }
  std::fprintf(stderr, "%s\n", j.dump().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radial feeder simulation and topology learning"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Generate a random feeder grid file");
  c_gen->add_option("--nodes", gen.nodes, "Bus count including the substation")
      ->check(CLI::Range(2, 1000000));
  c_gen->add_option("--extra", gen.extra, "Non-operational candidate lines")
      ->check(CLI::NonNegativeNumber);
  c_gen->add_option("--z-lo", gen.z_lo, "Impedance range lower bound");
  c_gen->add_option("--z-hi", gen.z_hi, "Impedance range upper bound");
  c_gen->add_option("--seed", gen.seed, "Random seed");
  c_gen->add_option("--out", gen.out, "Output grid JSON")->required();

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Sample injections and solve voltages");
  c_sim->add_option("--grid", sim.grid, "Grid JSON with operational flags")->required();
  c_sim->add_option("--stats", sim.stats, "Injection statistics JSON (default: drawn)");
  c_sim->add_option("--stats-out", sim.stats_out, "Record the statistics used");
  c_sim->add_option("--samples", sim.samples, "Snapshot count")
      ->required()
      ->check(CLI::PositiveNumber);
  c_sim->add_option("--seed", sim.seed, "Random seed");
  c_sim->add_flag("--no-theta", sim.no_theta, "Omit angle columns");
  c_sim->add_option("--out", sim.out, "Output snapshot CSV")->required();

  LearnArgs lrn;
  auto* c_lrn = app.add_subcommand("learn", "Learn the operational tree from snapshots");
  c_lrn->add_option("--grid", lrn.grid, "Grid JSON (candidate lines)")->required();
  c_lrn->add_option("--samples", lrn.samples, "Snapshot CSV")->required();
  c_lrn->add_flag("--complete-graph", lrn.complete_graph,
                  "Rank all bus pairs instead of candidate lines");
  c_lrn->add_option("--out", lrn.out, "Output topology JSON")->required();

  LearnMissingArgs lm;
  auto* c_lm = app.add_subcommand("learn-missing",
                                  "Learn the operational tree with unmetered buses");
  c_lm->add_option("--grid", lm.grid, "Grid JSON (candidate lines)")->required();
  c_lm->add_option("--samples", lm.samples, "Snapshot CSV")->required();
  c_lm->add_option("--hidden", lm.hidden, "Unmetered bus ids")
      ->required()
      ->delimiter(',');
  c_lm->add_option("--stats", lm.stats, "Injection statistics JSON")->required();
  c_lm->add_option("--tolerance", lm.tolerance, "Relative score acceptance bound");
  c_lm->add_option("--out", lm.out, "Output topology JSON")->required();

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate-injections",
                                   "Recover injection statistics from snapshots");
  c_est->add_option("--grid", est.grid, "Grid JSON (candidate lines)")->required();
  c_est->add_option("--tree", est.tree,
                    "Topology JSON (default: the grid's operational flags)");
  c_est->add_option("--samples", est.samples, "Snapshot CSV with angle columns")
      ->required();
  c_est->add_option("--out", est.out, "Output statistics JSON")->required();

  SweepArgs swp;
  auto* c_swp = app.add_subcommand("sweep", "Monte Carlo error-vs-samples sweep");
  c_swp->add_option("--config", swp.config, "Experiment config JSON")->required();
  c_swp->add_option("--out", swp.out, "Output directory (overrides config out_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (c_gen->parsed()) run_generate(gen);
    else if (c_sim->parsed()) run_simulate(sim);
    else if (c_lrn->parsed()) run_learn(lrn);
    else if (c_lm->parsed()) run_learn_missing(lm);
    else if (c_est->parsed()) run_estimate(est);
    else if (c_swp->parsed()) run_sweep(swp);
  } catch (const ReconstructionError& e) {
    print_error_line(e.what(), &e);
    return 1;
  } catch (const std::exception& e) {
    print_error_line(e.what(), nullptr);
    return 1;
  }
  return 0;
}
