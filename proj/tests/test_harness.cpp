#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gridtopo/harness.hpp"
#include "gridtopo/io.hpp"
#include "gridtopo/rng.hpp"

using namespace gridtopo;

namespace {

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() /
          ("gridtopo_harness_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string operator()(const char* name) const { return (dir / name).string(); }
};

bool rows_equal_ignoring_runtime(const std::vector<SweepRow>& a,
                                 const std::vector<SweepRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = a[i], &y = b[i];
    const bool cov_same =
        (std::isnan(x.covariance_error) && std::isnan(y.covariance_error)) ||
        x.covariance_error == y.covariance_error;
    if (x.trial != y.trial || x.hidden_count != y.hidden_count ||
        x.samples != y.samples || x.topology_error != y.topology_error ||
        x.failed != y.failed || !cov_same)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("per-trial statistics stay inside the configured ranges") {
  const StatsEnsemble e;
  const InjectionStats a = draw_stats_ensemble(30, e, 5);
  const InjectionStats b = draw_stats_ensemble(30, e, 5);
  const InjectionStats c = draw_stats_ensemble(30, e, 6);
  CHECK_NOTHROW(validate_assumption1(a));
  CHECK(a.var_p == b.var_p);
  CHECK(a.cov_pq == b.cov_pq);
  CHECK(a.var_p != c.var_p);

  for (NodeId v = 1; v < 30; ++v) {
    CHECK(a.var_p[v] >= 1.0);
    CHECK(a.var_p[v] <= 2.0);
    const double beta = std::sqrt(a.var_q[v] / a.var_p[v]);
    CHECK(beta >= 0.2);
    CHECK(beta <= 0.5);
    const double rho = a.cov_pq[v] / std::sqrt(a.var_p[v] * a.var_q[v]);
    CHECK(rho >= 0.1);
    CHECK(rho <= 0.9);
    CHECK(a.mu_p[v] <= -0.5);
    CHECK(a.mu_p[v] >= -1.5);
    CHECK(a.mu_q[v] == doctest::Approx(beta * a.mu_p[v]));
  }

  StatsEnsemble bad = e;
  bad.rho_hi = 1.5;
  CHECK_THROWS(draw_stats_ensemble(30, bad, 1));
  bad = e;
  bad.var_p_lo = 0.0;
  CHECK_THROWS(draw_stats_ensemble(30, bad, 1));
}

TEST_CASE("unmetered-bus placement respects the distance rules") {
  const Feeder f = generate_random_feeder(40, 0, 0.01, 0.1, 2);
  const auto placed = try_place_hidden_nodes(f.tree, 4, 9);
  REQUIRE(placed.has_value());
  REQUIRE(placed->size() == 4);
  for (NodeId v : *placed) CHECK(f.tree.parent(v) != kRoot);
  for (std::size_t i = 0; i < placed->size(); ++i)
    for (std::size_t j = i + 1; j < placed->size(); ++j)
      CHECK(f.tree.hop_distance((*placed)[i], (*placed)[j]) > 2);

  // nested growth: a larger request that succeeds still satisfies the rules
  const auto more = try_place_hidden_nodes(f.tree, 6, 9);
  if (more) {
    for (std::size_t i = 0; i < more->size(); ++i)
      for (std::size_t j = i + 1; j < more->size(); ++j)
        CHECK(f.tree.hop_distance((*more)[i], (*more)[j]) > 2);
  }

  // chain 0-1-2-3: only buses 2 and 3 are eligible and they are adjacent
  const RadialTree chain(4, {{0, 1, {1, 1}}, {1, 2, {1, 1}}, {2, 3, {1, 1}}});
  CHECK_FALSE(try_place_hidden_nodes(chain, 2, 1).has_value());
  CHECK(try_place_hidden_nodes(chain, 1, 1).has_value());
  CHECK(try_place_hidden_nodes(chain, 0, 1)->empty());
  CHECK_THROWS(place_hidden_nodes(chain, 2, 1));
}

TEST_CASE("covariance error is a relative block distance") {
  InjectionStats t;
  t.num_nodes = 2;
  t.mu_p = {0, 0};
  t.mu_q = {0, 0};
  t.var_p = {0, 3.0};
  t.var_q = {0, 4.0};
  t.cov_pq = {0, 0.0};
  InjectionStats e = t;
  CHECK(covariance_error(e, t) == 0.0);
  e.var_p[1] = 8.0;  // off by 5 against a norm of 5
  CHECK(covariance_error(e, t) == doctest::Approx(1.0));
  e.num_nodes = 3;
  CHECK_THROWS(covariance_error(e, t));
}

TEST_CASE("sweeps are deterministic across thread counts") {
  ExperimentConfig cfg;
  cfg.feeder.num_nodes = 12;
  cfg.feeder.extra_edges = 8;
  cfg.sample_counts = {100, 400};
  cfg.hidden_counts = {0, 1};
  cfg.trials = 3;
  cfg.seed = 21;
  cfg.estimate_covariance = true;
  cfg.threads = 1;
  const SweepResult serial = run_sweep(cfg);
  cfg.threads = 2;
  const SweepResult parallel = run_sweep(cfg);

  REQUIRE(serial.rows.size() == 12);  // trials x hidden x samples
  CHECK(rows_equal_ignoring_runtime(serial.rows, parallel.rows));

  // covariance error only accompanies fully metered runs
  for (const auto& r : serial.rows)
    CHECK(std::isnan(r.covariance_error) == (r.hidden_count != 0));

  // summaries aggregate the rows they claim to
  REQUIRE(serial.summary.size() == 4);
  for (const auto& s : serial.summary) {
    double sum = 0.0;
    int count = 0, failures = 0;
    for (const auto& r : serial.rows) {
      if (r.hidden_count != s.hidden_count || r.samples != s.samples) continue;
      sum += r.topology_error;
      ++count;
      failures += r.failed ? 1 : 0;
    }
    CHECK(count == s.trials);
    CHECK(failures == s.failures);
    CHECK(s.mean_error == doctest::Approx(sum / count));
  }
}

TEST_CASE("a fixed grid file replaces the random feeder") {
  TempDir tmp;
  const Feeder f = generate_random_feeder(14, 10, 0.01, 0.1, 77);
  save_grid(tmp("fixed.json"), f.grid, &f.tree);

  ExperimentConfig cfg;
  cfg.grid_file = tmp("fixed.json");
  cfg.sample_counts = {600};
  cfg.hidden_counts = {0};
  cfg.trials = 2;
  cfg.seed = 5;
  cfg.threads = 1;
  const SweepResult r = run_sweep(cfg);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].topology_error == 0.0);
  CHECK(r.rows[1].topology_error == 0.0);
  // fresh statistics per trial: different trials, different errors in general,
  // but the same feeder; just confirm both trials ran against it
  CHECK(r.summary[0].trials == 2);

  save_grid(tmp("bare.json"), f.grid, nullptr);
  cfg.grid_file = tmp("bare.json");
  CHECK_THROWS_AS(run_sweep(cfg), SchemaError);
}

TEST_CASE("sweep outputs land in the documented files") {
  TempDir tmp;
  ExperimentConfig cfg;
  cfg.feeder.num_nodes = 10;
  cfg.feeder.extra_edges = 5;
  cfg.sample_counts = {80};
  cfg.hidden_counts = {0};
  cfg.trials = 2;
  cfg.seed = 3;
  cfg.threads = 1;
  const SweepResult r = run_sweep(cfg);
  write_sweep_outputs(r, tmp("out"));

  std::ifstream results(tmp("out") + std::string("/results.csv"));
  REQUIRE(results.good());
  std::string line;
  std::getline(results, line);
  CHECK(line == "trial,hidden_count,samples,topology_error,covariance_error,failed");
  int rows = 0;
  while (std::getline(results, line)) ++rows;
  CHECK(rows == 2);

  std::ifstream summary(tmp("out") + std::string("/summary.csv"));
  REQUIRE(summary.good());
  std::getline(summary, line);
  CHECK(line ==
        "hidden_count,samples,trials,failures,mean_topology_error,"
        "stderr_topology_error,mean_covariance_error");

  std::ifstream timings(tmp("out") + std::string("/timings.csv"));
  REQUIRE(timings.good());
  std::getline(timings, line);
  CHECK(line == "trial,hidden_count,samples,runtime_ms");
}

TEST_CASE("config files parse with defaults and reject junk") {
  TempDir tmp;
  {
    std::ofstream out(tmp("full.json"));
    out << R"({
      "feeder": {"num_nodes": 18, "extra_edges": 12, "impedance_range": [0.02, 0.05]},
      "stats": {"var_p_range": [1.0, 1.5], "q_scale_range": [0.3, 0.4],
                "correlation_range": [0.2, 0.8], "mu_p_range": [0.6, 1.2]},
      "sample_counts": [50, 200],
      "hidden_counts": [0, 2],
      "trials": 7,
      "seed": 99,
      "tolerance": 0.2,
      "threads": 2,
      "estimate_covariance": true,
      "complete_graph": true,
      "out_dir": "somewhere"
    })";
  }
  const ExperimentConfig cfg = load_experiment_config(tmp("full.json"));
  CHECK(cfg.feeder.num_nodes == 18);
  CHECK(cfg.feeder.extra_edges == 12);
  CHECK(cfg.feeder.z_lo == 0.02);
  CHECK(cfg.feeder.z_hi == 0.05);
  CHECK(cfg.stats.var_p_lo == 1.0);
  CHECK(cfg.stats.beta_hi == 0.4);
  CHECK(cfg.stats.rho_lo == 0.2);
  CHECK(cfg.stats.mu_p_hi == 1.2);
  CHECK(cfg.sample_counts == std::vector<std::size_t>{50, 200});
  CHECK(cfg.hidden_counts == std::vector<int>{0, 2});
  CHECK(cfg.trials == 7);
  CHECK(cfg.seed == 99);
  CHECK(cfg.tolerance == 0.2);
  CHECK(cfg.threads == 2);
  CHECK(cfg.estimate_covariance);
  CHECK(cfg.complete_graph);
  CHECK(cfg.out_dir == "somewhere");

  {
    std::ofstream out(tmp("min.json"));
    out << R"({"trials": 2})";
  }
  const ExperimentConfig min = load_experiment_config(tmp("min.json"));
  CHECK(min.feeder.num_nodes == 30);
  CHECK(min.sample_counts == std::vector<std::size_t>{50, 500});
  CHECK(min.tolerance == 0.25);
  CHECK(min.out_dir.empty());

  {
    std::ofstream out(tmp("junk.json"));
    out << R"({"trails": 2})";
  }
  CHECK_THROWS_AS(load_experiment_config(tmp("junk.json")), SchemaError);

  {
    std::ofstream out(tmp("bad.json"));
    out << R"({"sample_counts": [1]})";
  }
  CHECK_THROWS(load_experiment_config(tmp("bad.json")));
}
