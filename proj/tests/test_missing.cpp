#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gridtopo/harness.hpp"
#include "gridtopo/missing.hpp"
#include "gridtopo/rng.hpp"

using namespace gridtopo;

namespace {

InjectionStats uniform_stats(int n, double vp, double vq, double cpq) {
  InjectionStats s;
  s.num_nodes = n;
  s.mu_p.assign(n, 0.0);
  s.mu_q.assign(n, 0.0);
  s.var_p.assign(n, 0.0);
  s.var_q.assign(n, 0.0);
  s.cov_pq.assign(n, 0.0);
  for (NodeId a = 1; a < n; ++a) {
    s.var_p[a] = vp;
    s.var_q[a] = vq;
    s.cov_pq[a] = cpq;
  }
  return s;
}

InjectionStats random_stats(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> vp(1.0, 2.0), beta(0.2, 0.5), rho(0.1, 0.9);
  InjectionStats s = uniform_stats(n, 1.0, 1.0, 0.5);
  for (NodeId a = 1; a < n; ++a) {
    const double v = vp(rng), b = beta(rng);
    s.var_p[a] = v;
    s.var_q[a] = b * b * v;
    s.cov_pq[a] = rho(rng) * b * v;
  }
  return s;
}

StatSums subtree_sums(const RadialTree& tree, const InjectionStats& stats, NodeId a) {
  const auto d = tree.descendants(a);
  return stat_sums(stats, d);
}

std::vector<NodeId> all_observed(int n, std::span<const NodeId> hidden) {
  std::vector<NodeId> out;
  for (NodeId v = 0; v < n; ++v)
    if (std::find(hidden.begin(), hidden.end(), v) == hidden.end()) out.push_back(v);
  return out;
}

bool edges_match_tree(const LearnedTopology& t, const RadialTree& truth) {
  return topology_error(t, truth) == 0.0 &&
         t.edges.size() == truth.edges().size();
}

}  // namespace

TEST_CASE("direct line weight equals its closed form on random feeders") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Feeder f = generate_random_feeder(20, 0, 0.01, 0.1, seed);
    auto rng = make_rng(seed * 10);
    const InjectionStats stats = random_stats(20, rng);
    for (NodeId a = 1; a < 20; ++a) {
      const NodeId b = f.tree.parent(a);
      const double pred =
          predicted_phi_edge(f.tree.impedance_to_parent(a), subtree_sums(f.tree, stats, a));
      CHECK(pred == doctest::Approx(phi_exact(f.tree, stats, b, a)).epsilon(1e-9));
    }
  }
}

TEST_CASE("two-line weight through a middle bus equals its closed form") {
  for (std::uint64_t seed : {4u, 5u}) {
    const Feeder f = generate_random_feeder(20, 0, 0.01, 0.1, seed);
    auto rng = make_rng(seed * 10);
    const InjectionStats stats = random_stats(20, rng);
    for (NodeId h = 1; h < 20; ++h) {
      const NodeId g = f.tree.parent(h);
      for (NodeId c : f.tree.children(h)) {
        const StatSums far = subtree_sums(f.tree, stats, c);
        StatSums mid = subtree_sums(f.tree, stats, h);
        mid.p -= far.p;
        mid.q -= far.q;
        mid.pq -= far.pq;
        const double pred = predicted_phi_grandparent(
            f.tree.impedance_to_parent(h), f.tree.impedance_to_parent(c), far, mid);
        CHECK(pred == doctest::Approx(phi_exact(f.tree, stats, g, c)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("sibling pair weight splits into the two line terms") {
  for (std::uint64_t seed : {6u, 7u}) {
    const Feeder f = generate_random_feeder(20, 0, 0.01, 0.1, seed);
    auto rng = make_rng(seed * 10);
    const InjectionStats stats = random_stats(20, rng);
    for (NodeId h = 1; h < 20; ++h) {
      const auto& kids = f.tree.children(h);
      for (std::size_t i = 0; i < kids.size(); ++i)
        for (std::size_t j = i + 1; j < kids.size(); ++j) {
          const NodeId a = kids[i], c = kids[j];
          const double pred = predicted_phi_siblings(
              f.tree.impedance_to_parent(a), subtree_sums(f.tree, stats, a),
              f.tree.impedance_to_parent(c), subtree_sums(f.tree, stats, c));
          CHECK(pred == doctest::Approx(phi_exact(f.tree, stats, a, c)).epsilon(1e-9));
        }
    }
  }
}

TEST_CASE("statement checks score and gate on relative error") {
  const Impedance z{1.0, 0.5};
  const StatSums s{1.0, 0.25, 0.25};
  const double pred = predicted_phi_edge(z, s);
  CHECK(pred == doctest::Approx(1.3125));

  auto ok = check_statement(1, pred * 1.1, z, s, z, s, 0.15);
  CHECK(ok.accepted);
  CHECK(ok.score == doctest::Approx(0.1));
  auto nope = check_statement(1, pred * 1.1, z, s, z, s, 0.05);
  CHECK_FALSE(nope.accepted);

  const double pred2 = predicted_phi_grandparent(z, z, s, s);
  auto g = check_statement(2, pred2, z, s, z, s, 1e-12);
  CHECK(g.accepted);
  CHECK(g.score == doctest::Approx(0.0));

  const double pred3 = predicted_phi_siblings(z, s, z, s);
  CHECK(pred3 == doctest::Approx(2.625));
  CHECK(check_statement(3, pred3, z, s, z, s, 1e-12).accepted);

  CHECK_THROWS(check_statement(4, 1.0, z, s, z, s, 0.1));
  CHECK_THROWS(check_statement(1, 1.0, z, s, z, s, -0.1));
}

TEST_CASE("observable tree over a subset of metered buses") {
  PhiWeights phi(5);
  for (NodeId a = 0; a < 5; ++a)
    for (NodeId b = a + 1; b < 5; ++b) phi.set(a, b, 10.0);
  phi.set(0, 1, 1.0);
  phi.set(1, 3, 2.0);
  phi.set(0, 3, 5.0);
  const std::vector<NodeId> obs = {0, 1, 3};
  const LearnedTopology t = observable_mst(phi, obs);
  REQUIRE(t.edges.size() == 2);
  CHECK(t.edges[0].u == 0);
  CHECK(t.edges[0].v == 1);
  CHECK(t.edges[1].u == 1);
  CHECK(t.edges[1].v == 3);
  CHECK(t.num_nodes == 5);

  CHECK_THROWS(observable_mst(phi, std::vector<NodeId>{1, 3}));  // substation missing
}

TEST_CASE("unmetered leaf is folded into its parent line") {
  // 0 - 1 - 2 with bus 2 unmetered
  const RadialTree tree(3, {{0, 1, {1.0, 0.5}}, {1, 2, {1.0, 0.5}}});
  const GridGraph grid(3, {{0, 1, {1.0, 0.5}}, {1, 2, {1.0, 0.5}}});
  const auto stats = uniform_stats(3, 1.0, 0.25, 0.25);
  const PhiWeights phi = exact_phi_matrix(tree, stats);
  const std::vector<NodeId> hidden = {2};

  const auto res =
      learn_with_missing(phi, all_observed(3, hidden), grid, hidden, stats, 1e-6);
  CHECK(edges_match_tree(res.topology, tree));
  REQUIRE(res.diagnostics.steps.size() == 1);
  const auto& step = res.diagnostics.steps[0];
  CHECK(step.statement == 1);
  CHECK(step.node == 0);
  CHECK(step.hidden == 2);
  CHECK(step.attached == std::vector<NodeId>{1, 2});
  CHECK(res.diagnostics.max_accepted_score <= 1e-9);
}

TEST_CASE("unmetered bus in the middle of a chain is bridged") {
  // 0 - 1 - 2 - 3 with bus 2 unmetered; no (1,3) candidate exists
  const std::vector<CandidateEdge> lines = {
      {0, 1, {1.0, 0.5}}, {1, 2, {0.8, 0.4}}, {2, 3, {0.5, 0.3}}};
  const RadialTree tree(4, lines);
  const GridGraph grid(4, lines);
  const auto stats = uniform_stats(4, 1.0, 0.25, 0.25);
  const PhiWeights phi = exact_phi_matrix(tree, stats);
  const std::vector<NodeId> hidden = {2};

  const auto res =
      learn_with_missing(phi, all_observed(4, hidden), grid, hidden, stats, 1e-6);
  CHECK(edges_match_tree(res.topology, tree));
  REQUIRE(res.diagnostics.steps.size() == 1);
  CHECK(res.diagnostics.steps[0].statement == 2);
  CHECK(res.diagnostics.steps[0].node == 1);
  CHECK(res.diagnostics.steps[0].hidden == 2);
  CHECK(res.diagnostics.steps[0].attached == std::vector<NodeId>{3});

  // the bridged lines carry their model-implied weights
  for (const auto& e : res.topology.edges) {
    if (e.u == 2 && e.v == 3)
      CHECK(e.weight ==
            doctest::Approx(predicted_phi_edge({0.5, 0.3}, stat_sums(stats, 3))));
    if (e.u == 1 && e.v == 2) {
      const std::vector<NodeId> below = {2, 3};
      CHECK(e.weight ==
            doctest::Approx(predicted_phi_edge({0.8, 0.4}, stat_sums(stats, below))));
    }
  }
}

TEST_CASE("unmetered junction is recovered from its sibling pattern") {
  // star: 0 - 1, 1 - {2, 3}, bus 1 unmetered
  const std::vector<CandidateEdge> lines = {
      {0, 1, {1.0, 0.5}}, {1, 2, {1.0, 0.5}}, {1, 3, {1.0, 0.5}}};
  const RadialTree tree(4, lines);
  const GridGraph grid(4, lines);
  const auto stats = uniform_stats(4, 1.0, 0.25, 0.25);
  const PhiWeights phi = exact_phi_matrix(tree, stats);
  const std::vector<NodeId> hidden = {1};

  const auto res =
      learn_with_missing(phi, all_observed(4, hidden), grid, hidden, stats, 1e-6);
  CHECK(edges_match_tree(res.topology, tree));
  REQUIRE(res.diagnostics.steps.size() == 2);
  CHECK(res.diagnostics.steps[0].statement == 3);
  CHECK(res.diagnostics.steps[0].hidden == 1);
  CHECK(res.diagnostics.steps[1].statement == 0);  // forced substation attachment
  CHECK(res.diagnostics.steps[1].node == 0);
  CHECK(res.diagnostics.steps[1].hidden == 1);

  for (const auto& e : res.topology.edges) {
    if (e.u == 1 && e.v == 2) CHECK(e.weight == doctest::Approx(1.3125));
    if (e.u == 0 && e.v == 1) CHECK(e.weight == doctest::Approx(3.9375));
  }
}

TEST_CASE("no unmetered buses reduces to the all-pairs spanning tree") {
  const Feeder f = generate_random_feeder(16, 10, 0.01, 0.1, 17);
  auto rng = make_rng(170);
  const InjectionStats stats = random_stats(16, rng);
  const PhiWeights phi = exact_phi_matrix(f.tree, stats);
  std::vector<NodeId> observed(16);
  for (NodeId v = 0; v < 16; ++v) observed[v] = v;

  const auto res = learn_with_missing(phi, observed, f.grid, {}, stats, 1e-6);
  const LearnedTopology direct = observable_mst(phi, observed);
  REQUIRE(res.topology.edges.size() == direct.edges.size());
  for (std::size_t i = 0; i < direct.edges.size(); ++i) {
    CHECK(res.topology.edges[i].u == direct.edges[i].u);
    CHECK(res.topology.edges[i].v == direct.edges[i].v);
    CHECK(res.topology.edges[i].weight == direct.edges[i].weight);
  }
  CHECK(res.diagnostics.steps.empty());
}

TEST_CASE("exact weights recover randomly hidden buses") {
  int instances = 0;
  for (std::uint64_t seed = 0; seed < 40 && instances < 12; ++seed) {
    const Feeder f = generate_random_feeder(25, 15, 0.01, 0.1, seed);
    const auto hidden = try_place_hidden_nodes(f.tree, 2 + static_cast<int>(seed % 2),
                                               derive_seed(seed, 77));
    if (!hidden) continue;
    ++instances;
    auto rng = make_rng(derive_seed(seed, 78));
    const InjectionStats stats = random_stats(25, rng);
    const PhiWeights phi = exact_phi_matrix(f.tree, stats);
    const auto res = learn_with_missing(phi, all_observed(25, *hidden), f.grid, *hidden,
                                        stats, 1e-6);
    CHECK(edges_match_tree(res.topology, f.tree));
    CHECK(res.diagnostics.max_accepted_score <= 1e-8);
  }
  CHECK(instances >= 12);
}

TEST_CASE("snapshot wrapper drops unmetered rows and still recovers") {
  const Feeder f = generate_random_feeder(15, 10, 0.01, 0.1, 23);
  const auto hidden = place_hidden_nodes(f.tree, 1, 9);
  auto rng = make_rng(231);
  const InjectionStats stats = random_stats(15, rng);
  const SampleSet sim =
      simulate_voltages(f.tree, sample_injections(stats, 20000, 232), false);
  const auto res = learn_with_missing(sim, f.grid, hidden, stats, 0.25);
  CHECK(edges_match_tree(res.topology, f.tree));
}

TEST_CASE("an unresolvable neighborhood reports what was pending") {
  // chain 0-1-2-3 with bus 2 unmetered, but no candidate reaches bus 2
  const std::vector<CandidateEdge> tree_lines = {
      {0, 1, {1.0, 0.5}}, {1, 2, {0.8, 0.4}}, {2, 3, {0.5, 0.3}}};
  const RadialTree tree(4, tree_lines);
  const GridGraph crippled(4, {{0, 1, {1.0, 0.5}}, {2, 3, {0.5, 0.3}}});
  const auto stats = uniform_stats(4, 1.0, 0.25, 0.25);
  const PhiWeights phi = exact_phi_matrix(tree, stats);
  const std::vector<NodeId> hidden = {2};

  try {
    learn_with_missing(phi, all_observed(4, hidden), crippled, hidden, stats, 1e-6);
    FAIL("expected a reconstruction error");
  } catch (const ReconstructionError& e) {
    CHECK(e.node() == 1);
    CHECK(e.pending_children() == std::vector<NodeId>{3});
    CHECK(std::string(e.what()).find("fits no line configuration") != std::string::npos);
  }
}

TEST_CASE("a stranded pending bus reports the failure site") {
  // star with hidden junction, but the substation line is not a candidate
  const std::vector<CandidateEdge> tree_lines = {
      {0, 1, {1.0, 0.5}}, {1, 2, {1.0, 0.5}}, {1, 3, {1.0, 0.5}}};
  const RadialTree tree(4, tree_lines);
  const GridGraph crippled(4, {{1, 2, {1.0, 0.5}}, {1, 3, {1.0, 0.5}}, {2, 3, {0.7, 0.7}}});
  const auto stats = uniform_stats(4, 1.0, 0.25, 0.25);
  const PhiWeights phi = exact_phi_matrix(tree, stats);
  const std::vector<NodeId> hidden = {1};

  try {
    learn_with_missing(phi, all_observed(4, hidden), crippled, hidden, stats, 1e-6);
    FAIL("expected a reconstruction error");
  } catch (const ReconstructionError& e) {
    CHECK(e.node() == -1);
    CHECK(e.pending_children() == std::vector<NodeId>{1});
  }
}

TEST_CASE("input validation") {
  const Feeder f = generate_random_feeder(8, 4, 0.01, 0.1, 3);
  auto rng = make_rng(30);
  const InjectionStats stats = random_stats(8, rng);
  const PhiWeights phi = exact_phi_matrix(f.tree, stats);
  std::vector<NodeId> observed(8);
  for (NodeId v = 0; v < 8; ++v) observed[v] = v;

  CHECK_THROWS(learn_with_missing(phi, observed, f.grid, {}, stats, 0.0));
  // node 3 both observed and hidden
  CHECK_THROWS(learn_with_missing(phi, observed, f.grid, std::vector<NodeId>{3}, stats, 0.1));
  // node 7 in neither set
  std::vector<NodeId> short_obs(observed.begin(), observed.end() - 1);
  CHECK_THROWS(learn_with_missing(phi, short_obs, f.grid, {}, stats, 0.1));
  // the substation cannot be hidden
  std::vector<NodeId> no_root(observed.begin() + 1, observed.end());
  CHECK_THROWS(
      learn_with_missing(phi, no_root, f.grid, std::vector<NodeId>{0}, stats, 0.1));
}
