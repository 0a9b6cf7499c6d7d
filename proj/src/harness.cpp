#include "gridtopo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "gridtopo/io.hpp"
#include "gridtopo/rng.hpp"

namespace gridtopo {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_range(double lo, double hi, bool positive, const char* name) {
  if (!(lo <= hi) || (positive && !(lo > 0.0)))
    throw std::invalid_argument(std::string("StatsEnsemble: bad range for ") + name);
}

}  // namespace

InjectionStats draw_stats_ensemble(int num_nodes, const StatsEnsemble& e,
                                   std::uint64_t seed) {
  if (num_nodes < 2)
    throw std::invalid_argument("draw_stats_ensemble: num_nodes must be >= 2");
  check_range(e.var_p_lo, e.var_p_hi, true, "var_p");
  check_range(e.beta_lo, e.beta_hi, true, "beta");
  check_range(e.rho_lo, e.rho_hi, true, "rho");
  check_range(e.mu_p_lo, e.mu_p_hi, false, "mu_p");
  if (e.rho_hi > 1.0)
    throw std::invalid_argument("StatsEnsemble: rho range exceeds 1");

  auto rng = make_rng(derive_seed(seed, 0x57));
  std::uniform_real_distribution<double> d_vp(e.var_p_lo, e.var_p_hi);
  std::uniform_real_distribution<double> d_beta(e.beta_lo, e.beta_hi);
  std::uniform_real_distribution<double> d_rho(e.rho_lo, e.rho_hi);
  std::uniform_real_distribution<double> d_mu(e.mu_p_lo, e.mu_p_hi);

  InjectionStats s;
  s.num_nodes = num_nodes;
  const auto n = static_cast<std::size_t>(num_nodes);
  s.mu_p.assign(n, 0.0);
  s.mu_q.assign(n, 0.0);
  s.var_p.assign(n, 0.0);
  s.var_q.assign(n, 0.0);
  s.cov_pq.assign(n, 0.0);
  for (NodeId a = 1; a < num_nodes; ++a) {
    const double vp = d_vp(rng);
    const double beta = d_beta(rng);
    const double rho = d_rho(rng);
    const double mu = -d_mu(rng);  // net load
    s.var_p[a] = vp;
    s.var_q[a] = beta * beta * vp;
    s.cov_pq[a] = rho * beta * vp;  // rho * sqrt(var_p * var_q)
    s.mu_p[a] = mu;
    s.mu_q[a] = beta * mu;
  }
  return s;
}

std::optional<std::vector<NodeId>> try_place_hidden_nodes(const RadialTree& tree,
                                                          int count,
                                                          std::uint64_t seed,
                                                          int attempts) {
  if (count < 0) throw std::invalid_argument("try_place_hidden_nodes: count must be >= 0");
  if (count == 0) return std::vector<NodeId>{};
  std::vector<NodeId> pool;
  for (NodeId v = 1; v < tree.num_nodes(); ++v)
    if (tree.parent(v) != kRoot) pool.push_back(v);  // never next to the substation
  if (static_cast<int>(pool.size()) < count) return std::nullopt;

  auto rng = make_rng(derive_seed(seed, 0x91));
  std::vector<NodeId> chosen;
  for (int t = 0; t < attempts; ++t) {
    std::shuffle(pool.begin(), pool.end(), rng);
    chosen.clear();
    for (NodeId v : pool) {
      bool far_enough = true;
      for (NodeId u : chosen)
        if (tree.hop_distance(u, v) <= 2) {
          far_enough = false;
          break;
        }
      if (!far_enough) continue;
      chosen.push_back(v);
      if (static_cast<int>(chosen.size()) == count) return chosen;
    }
  }
  return std::nullopt;
}

std::vector<NodeId> place_hidden_nodes(const RadialTree& tree, int count,
                                       std::uint64_t seed, int attempts) {
  auto placed = try_place_hidden_nodes(tree, count, seed, attempts);
  if (!placed)
    throw std::runtime_error("place_hidden_nodes: no placement of " +
                             std::to_string(count) +
                             " mutually distant unmetered buses exists here");
  return *placed;
}

double covariance_error(const InjectionStats& estimate, const InjectionStats& truth) {
  if (estimate.num_nodes != truth.num_nodes)
    throw std::invalid_argument("covariance_error: node counts differ");
  double num = 0.0, den = 0.0;
  for (NodeId a = 1; a < truth.num_nodes; ++a) {
    const double dp = estimate.var_p[a] - truth.var_p[a];
    const double dq = estimate.var_q[a] - truth.var_q[a];
    const double dc = estimate.cov_pq[a] - truth.cov_pq[a];
    num += dp * dp + dq * dq + 2.0 * dc * dc;
    den += truth.var_p[a] * truth.var_p[a] + truth.var_q[a] * truth.var_q[a] +
           2.0 * truth.cov_pq[a] * truth.cov_pq[a];
  }
  if (!(den > 0.0))
    throw std::invalid_argument("covariance_error: reference moments are all zero");
  return std::sqrt(num / den);
}

namespace {

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("ExperimentConfig: trials must be >= 1");
  if (cfg.sample_counts.empty())
    throw std::invalid_argument("ExperimentConfig: sample_counts must not be empty");
  for (std::size_t m : cfg.sample_counts)
    if (m < 2)
      throw std::invalid_argument("ExperimentConfig: each sample count must be >= 2");
  if (cfg.hidden_counts.empty())
    throw std::invalid_argument("ExperimentConfig: hidden_counts must not be empty");
  for (int h : cfg.hidden_counts)
    if (h < 0)
      throw std::invalid_argument("ExperimentConfig: hidden counts must be >= 0");
  if (!(cfg.tolerance > 0.0))
    throw std::invalid_argument("ExperimentConfig: tolerance must be positive");
  if (cfg.threads < 0)
    throw std::invalid_argument("ExperimentConfig: threads must be >= 0");
}

struct TrialSetup {
  std::optional<Feeder> feeder;  // used when no fixed grid was supplied
  const GridGraph* grid = nullptr;
  const RadialTree* tree = nullptr;
  std::vector<NodeId> hidden_max;
};

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg) {
  validate_config(cfg);
  std::vector<std::size_t> sample_counts = cfg.sample_counts;
  std::sort(sample_counts.begin(), sample_counts.end());
  sample_counts.erase(std::unique(sample_counts.begin(), sample_counts.end()),
                      sample_counts.end());
  std::vector<int> hidden_counts = cfg.hidden_counts;
  std::sort(hidden_counts.begin(), hidden_counts.end());
  hidden_counts.erase(std::unique(hidden_counts.begin(), hidden_counts.end()),
                      hidden_counts.end());
  const std::size_t m_max = sample_counts.back();
  const int max_hidden = hidden_counts.back();

  std::optional<GridFile> fixed;
  if (!cfg.grid_file.empty()) {
    fixed = load_grid(cfg.grid_file);
    if (!fixed->tree)
      throw SchemaError(cfg.grid_file +
                        ": sweep input must mark the operational lines");
  }

  auto run_trial = [&](int trial) {
    const std::uint64_t trial_seed = derive_seed(cfg.seed, 1, static_cast<std::uint64_t>(trial));
    TrialSetup setup;
    if (fixed) {
      setup.grid = &fixed->grid;
      setup.tree = &*fixed->tree;
      if (max_hidden > 0)
        setup.hidden_max = place_hidden_nodes(*setup.tree, max_hidden,
                                              derive_seed(trial_seed, 5));
    } else {
      bool placed = false;
      for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        setup.feeder = generate_random_feeder(cfg.feeder.num_nodes, cfg.feeder.extra_edges,
                                              cfg.feeder.z_lo, cfg.feeder.z_hi,
                                              derive_seed(trial_seed, 2, attempt));
        if (max_hidden == 0) {
          placed = true;
          break;
        }
        auto h = try_place_hidden_nodes(setup.feeder->tree, max_hidden,
                                        derive_seed(trial_seed, 5, attempt));
        if (h) {
          setup.hidden_max = std::move(*h);
          placed = true;
        }
      }
      if (!placed)
        throw std::runtime_error("run_sweep: no feeder admitting " +
                                 std::to_string(max_hidden) +
                                 " unmetered buses found for trial " +
                                 std::to_string(trial));
      setup.grid = &setup.feeder->grid;
      setup.tree = &setup.feeder->tree;
    }

    const int n = setup.grid->num_nodes();
    const InjectionStats stats = draw_stats_ensemble(n, cfg.stats, derive_seed(trial_seed, 3));
    const InjectionBatch batch = sample_injections(stats, m_max, derive_seed(trial_seed, 4));
    const SampleSet sim = simulate_voltages(*setup.tree, batch, cfg.estimate_covariance);

    std::vector<SweepRow> rows;
    for (int h : hidden_counts) {
      const std::span<const NodeId> hidden(setup.hidden_max.data(),
                                           static_cast<std::size_t>(h));
      for (std::size_t m : sample_counts) {
        SweepRow row;
        row.trial = trial;
        row.hidden_count = h;
        row.samples = m;
        row.covariance_error = kNaN;
        const auto t0 = std::chrono::steady_clock::now();
        const SampleSet part = sim.prefix(m);
        try {
          if (h == 0) {
            const LearnedTopology topo =
                learn_topology(part, *setup.grid, cfg.complete_graph);
            row.topology_error = topology_error(topo, *setup.tree);
          } else {
            const MissingLearnResult res =
                learn_with_missing(part, *setup.grid, hidden, stats, cfg.tolerance);
            row.topology_error = topology_error(res.topology, *setup.tree);
          }
        } catch (const ReconstructionError&) {
          row.failed = true;
          row.topology_error = 1.0;
        }
        if (cfg.estimate_covariance && h == 0) {
          const InjectionEstimate est = estimate_injection_stats(*setup.tree, part);
          row.covariance_error = covariance_error(est.stats, stats);
        }
        row.runtime_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
        rows.push_back(row);
      }
    }
    return rows;
  };

  int nthreads = cfg.threads > 0 ? cfg.threads
                                 : static_cast<int>(std::thread::hardware_concurrency());
  if (nthreads < 1) nthreads = 1;
  nthreads = std::min(nthreads, cfg.trials);

  SweepResult result;
  std::mutex mu;
  std::exception_ptr first_error;
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int trial = next.fetch_add(1);
      if (trial >= cfg.trials) return;
      {
        std::lock_guard<std::mutex> lk(mu);
        if (first_error) return;
      }
      try {
        auto rows = run_trial(trial);
        std::lock_guard<std::mutex> lk(mu);
        result.rows.insert(result.rows.end(), rows.begin(), rows.end());
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::sort(result.rows.begin(), result.rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.trial != b.trial) return a.trial < b.trial;
    if (a.hidden_count != b.hidden_count) return a.hidden_count < b.hidden_count;
    return a.samples < b.samples;
  });

  for (int h : hidden_counts) {
    for (std::size_t m : sample_counts) {
      SweepSummaryRow s;
      s.hidden_count = h;
      s.samples = m;
      double sum = 0.0, sum_sq = 0.0, cov_sum = 0.0;
      int cov_n = 0;
      for (const auto& row : result.rows) {
        if (row.hidden_count != h || row.samples != m) continue;
        ++s.trials;
        if (row.failed) ++s.failures;
        sum += row.topology_error;
        sum_sq += row.topology_error * row.topology_error;
        if (!std::isnan(row.covariance_error)) {
          cov_sum += row.covariance_error;
          ++cov_n;
        }
      }
      const double t = static_cast<double>(s.trials);
      s.mean_error = sum / t;
      s.stderr_error =
          s.trials > 1
              ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / t) / (t - 1.0)) / t)
              : 0.0;
      s.mean_cov_error = cov_n == s.trials && cov_n > 0 ? cov_sum / cov_n : kNaN;
      result.summary.push_back(s);
    }
  }
  return result;
}

void write_sweep_outputs(const SweepResult& result, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto join = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };

  {
    std::ofstream out(join("results.csv"), std::ios::binary);
    if (!out) throw std::runtime_error("write_sweep_outputs: cannot write results.csv");
    out << "trial,hidden_count,samples,topology_error,covariance_error,failed\n";
    for (const auto& r : result.rows) {
      out << r.trial << ',' << r.hidden_count << ',' << r.samples << ','
          << fmt(r.topology_error) << ',';
      if (!std::isnan(r.covariance_error)) out << fmt(r.covariance_error);
      out << ',' << (r.failed ? 1 : 0) << '\n';
    }
  }
  {
    std::ofstream out(join("summary.csv"), std::ios::binary);
    if (!out) throw std::runtime_error("write_sweep_outputs: cannot write summary.csv");
    out << "hidden_count,samples,trials,failures,mean_topology_error,"
           "stderr_topology_error,mean_covariance_error\n";
    for (const auto& s : result.summary) {
      out << s.hidden_count << ',' << s.samples << ',' << s.trials << ',' << s.failures
          << ',' << fmt(s.mean_error) << ',' << fmt(s.stderr_error) << ',';
      if (!std::isnan(s.mean_cov_error)) out << fmt(s.mean_cov_error);
      out << '\n';
    }
  }
  {
    std::ofstream out(join("timings.csv"), std::ios::binary);
    if (!out) throw std::runtime_error("write_sweep_outputs: cannot write timings.csv");
    out << "trial,hidden_count,samples,runtime_ms\n";
    char buf[40];
    for (const auto& r : result.rows) {
      std::snprintf(buf, sizeof(buf), "%.3f", r.runtime_ms);
      out << r.trial << ',' << r.hidden_count << ',' << r.samples << ',' << buf << '\n';
    }
  }
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
  if (!j.is_object()) throw SchemaError(path + ": config must be a JSON object");

  static const char* known[] = {"feeder",        "grid_file", "stats",
                                "sample_counts", "hidden_counts", "trials",
                                "seed",          "tolerance", "threads",
                                "estimate_covariance", "complete_graph", "out_dir"};
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw SchemaError(path + ": unknown config key '" + key + "'");
  }

  const auto range2 = [&](const nlohmann::json& v, const std::string& field,
                          double& lo, double& hi) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw SchemaError(path + ": '" + field + "' must be [lo, hi]");
    lo = v[0].get<double>();
    hi = v[1].get<double>();
  };

  ExperimentConfig cfg;
  if (j.contains("feeder")) {
    const auto& f = j["feeder"];
    if (!f.is_object()) throw SchemaError(path + ": 'feeder' must be an object");
    if (f.contains("num_nodes")) cfg.feeder.num_nodes = f["num_nodes"].get<int>();
    if (f.contains("extra_edges")) cfg.feeder.extra_edges = f["extra_edges"].get<int>();
    if (f.contains("impedance_range"))
      range2(f["impedance_range"], "feeder.impedance_range", cfg.feeder.z_lo, cfg.feeder.z_hi);
  }
  if (j.contains("grid_file")) cfg.grid_file = j["grid_file"].get<std::string>();
  if (j.contains("stats")) {
    const auto& s = j["stats"];
    if (!s.is_object()) throw SchemaError(path + ": 'stats' must be an object");
    if (s.contains("var_p_range"))
      range2(s["var_p_range"], "stats.var_p_range", cfg.stats.var_p_lo, cfg.stats.var_p_hi);
    if (s.contains("q_scale_range"))
      range2(s["q_scale_range"], "stats.q_scale_range", cfg.stats.beta_lo, cfg.stats.beta_hi);
    if (s.contains("correlation_range"))
      range2(s["correlation_range"], "stats.correlation_range", cfg.stats.rho_lo,
             cfg.stats.rho_hi);
    if (s.contains("mu_p_range"))
      range2(s["mu_p_range"], "stats.mu_p_range", cfg.stats.mu_p_lo, cfg.stats.mu_p_hi);
  }
  if (j.contains("sample_counts"))
    cfg.sample_counts = j["sample_counts"].get<std::vector<std::size_t>>();
  if (j.contains("hidden_counts"))
    cfg.hidden_counts = j["hidden_counts"].get<std::vector<int>>();
  if (j.contains("trials")) cfg.trials = j["trials"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("tolerance")) cfg.tolerance = j["tolerance"].get<double>();
  if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
  if (j.contains("estimate_covariance"))
    cfg.estimate_covariance = j["estimate_covariance"].get<bool>();
  if (j.contains("complete_graph")) cfg.complete_graph = j["complete_graph"].get<bool>();
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  validate_config(cfg);
  return cfg;
}

}  // namespace gridtopo
