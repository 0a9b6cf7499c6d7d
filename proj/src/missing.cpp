#include "gridtopo/missing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace gridtopo {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double rel_score(double observed, double predicted) {
  if (!(predicted > 0.0)) return kInf;
  return std::abs(observed - predicted) / predicted;
}

std::pair<NodeId, NodeId> norm_edge(NodeId u, NodeId v) {
  return {std::min(u, v), std::max(u, v)};
}

}  // namespace

LearnedTopology observable_mst(const PhiWeights& phi, std::span<const NodeId> observed) {
  std::vector<NodeId> obs(observed.begin(), observed.end());
  std::sort(obs.begin(), obs.end());
  obs.erase(std::unique(obs.begin(), obs.end()), obs.end());
  if (obs.empty() || obs.front() != kRoot)
    throw std::invalid_argument("observable_mst: the substation must be observed");
  if (obs.back() >= phi.num_nodes() || obs.size() < 2)
    throw std::invalid_argument("observable_mst: bad observed node set");

  // Re-index the observed buses 0..k-1 so the constrained MST spans exactly
  // them; the map is increasing, so edge orientation and order survive.
  const int k = static_cast<int>(obs.size());
  PhiWeights sub(k);
  std::vector<std::pair<NodeId, NodeId>> candidates;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      if (!phi.available(obs[i], obs[j]))
        throw std::invalid_argument("observable_mst: no weight for pair (" +
                                    std::to_string(obs[i]) + "," +
                                    std::to_string(obs[j]) + ")");
      sub.set(i, j, phi.at(obs[i], obs[j]));
      candidates.push_back({i, j});
    }
  LearnedTopology out = constrained_mst(candidates, sub);
  out.num_nodes = phi.num_nodes();
  for (auto& e : out.edges) {
    e.u = obs[static_cast<std::size_t>(e.u)];
    e.v = obs[static_cast<std::size_t>(e.v)];
  }
  return out;
}

double predicted_phi_edge(const Impedance& z, const StatSums& s) {
  return z.r * z.r * s.p + z.x * z.x * s.q + 2.0 * z.r * z.x * s.pq;
}

double predicted_phi_grandparent(const Impedance& z_upper, const Impedance& z_lower,
                                 const StatSums& far_side, const StatSums& mid) {
  const Impedance both{z_upper.r + z_lower.r, z_upper.x + z_lower.x};
  return predicted_phi_edge(both, far_side) + predicted_phi_edge(z_upper, mid);
}

double predicted_phi_siblings(const Impedance& z_a, const StatSums& s_a,
                              const Impedance& z_c, const StatSums& s_c) {
  return predicted_phi_edge(z_a, s_a) + predicted_phi_edge(z_c, s_c);
}

StatementCheck check_statement(int statement, double observed_phi, const Impedance& z1,
                               const StatSums& s1, const Impedance& z2,
                               const StatSums& s2, double tolerance) {
  if (tolerance < 0.0)
    throw std::invalid_argument("check_statement: tolerance must be >= 0");
  double predicted = 0.0;
  switch (statement) {
    case 1:
      predicted = predicted_phi_edge(z1, s1);
      break;
    case 2:
      predicted = predicted_phi_grandparent(z1, z2, s1, s2);
      break;
    case 3:
      predicted = predicted_phi_siblings(z1, s1, z2, s2);
      break;
    default:
      throw std::invalid_argument("check_statement: statement must be 1, 2 or 3");
  }
  const double score = rel_score(observed_phi, predicted);
  return {score, score <= tolerance};
}

ReconstructionError::ReconstructionError(const std::string& reason, NodeId node,
                                         std::vector<NodeId> pending,
                                         std::vector<std::pair<NodeId, NodeId>> partial)
    : std::runtime_error(reason), node_(node), pending_(std::move(pending)),
      partial_(std::move(partial)) {}

namespace {

// Mutable working tree plus the bookkeeping the peeling loop needs.
struct Peeler {
  const GridGraph& grid;
  const PhiWeights& phi;
  double tol;
  int n;

  std::vector<char> in_tm;
  std::vector<NodeId> par;                 // -1 for root / removed nodes
  std::vector<std::vector<NodeId>> kids;   // ascending
  std::vector<char> in_m;
  std::vector<NodeId> hidden_ids;          // ascending
  std::vector<StatSums> acc;
  int tm_size = 0;
  int m_count = 0;

  std::map<std::pair<NodeId, NodeId>, double> edges;
  MissingDiagnostics diag;

  Peeler(const GridGraph& g, const PhiWeights& p, double t)
      : grid(g), phi(p), tol(t), n(g.num_nodes()), in_tm(n, 0), par(n, -1),
        kids(static_cast<std::size_t>(n)), in_m(n, 0), acc(static_cast<std::size_t>(n)) {}

  void add_edge(NodeId u, NodeId v, double w) { edges.emplace(norm_edge(u, v), w); }

  std::vector<std::pair<NodeId, NodeId>> edge_pairs() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    out.reserve(edges.size());
    for (const auto& [e, w] : edges) out.push_back(e);
    return out;
  }

  [[noreturn]] void fail(const std::string& reason, NodeId node,
                         std::vector<NodeId> pending) {
    throw ReconstructionError(reason, node, std::move(pending), edge_pairs());
  }

  void drop_from_tm(NodeId v) {
    const NodeId p = par[v];
    if (p != -1) {
      auto& k = kids[static_cast<std::size_t>(p)];
      k.erase(std::remove(k.begin(), k.end(), v), k.end());
    }
    par[v] = -1;
    kids[static_cast<std::size_t>(v)].clear();
    in_tm[v] = 0;
    --tm_size;
  }

  int depth_of(NodeId v) const {
    int d = 0;
    for (NodeId i = v; par[i] != -1; i = par[i]) ++d;
    return d;
  }

  // deepest node whose children are all leaves; smaller id on depth ties
  NodeId pick_neighborhood() const {
    NodeId best = -1;
    int best_depth = -1;
    for (NodeId v = 0; v < n; ++v) {
      if (!in_tm[v] || kids[static_cast<std::size_t>(v)].empty()) continue;
      bool all_leaves = true;
      for (NodeId c : kids[static_cast<std::size_t>(v)])
        if (!kids[static_cast<std::size_t>(c)].empty()) {
          all_leaves = false;
          break;
        }
      if (!all_leaves) continue;
      const int d = depth_of(v);
      if (d > best_depth || (d == best_depth && v < best)) {
        best = v;
        best_depth = d;
      }
    }
    return best;
  }

  void note_step(int statement, NodeId node, NodeId hidden, std::vector<NodeId> attached,
                 double score) {
    diag.steps.push_back({statement, node, hidden, std::move(attached), score});
    diag.max_accepted_score = std::max(diag.max_accepted_score, score);
  }

  // confirm child b of a as a direct line, possibly with one unmetered leaf
  // below it; true when something was accepted
  bool resolve_child(NodeId a, NodeId b) {
    const auto za = grid.impedance(a, b);
    if (!za) return false;
    struct Hyp {
      double score;
      NodeId h;  // -1 = direct
    };
    std::vector<Hyp> hyps;
    const double observed = phi.at(a, b);
    hyps.push_back({rel_score(observed, predicted_phi_edge(*za, acc[b])), -1});
    for (NodeId h : hidden_ids) {
      if (!in_m[h] || !grid.has_edge(b, h)) continue;
      StatSums s = acc[b];
      s += acc[h];
      hyps.push_back({rel_score(observed, predicted_phi_edge(*za, s)), h});
    }
    const auto best = std::min_element(hyps.begin(), hyps.end(), [](const Hyp& l, const Hyp& r) {
      if (l.score != r.score) return l.score < r.score;
      if ((l.h < 0) != (r.h < 0)) return l.h < 0;  // prefer the direct reading
      return l.h < r.h;
    });
    if (best->score > tol) return false;
    int fitting = 0;
    for (const auto& h : hyps)
      if (h.score <= tol) ++fitting;
    if (fitting > 1) ++diag.ambiguous_steps;

    StatSums child_side = acc[b];
    std::vector<NodeId> attached = {b};
    if (best->h >= 0) {
      const NodeId h = best->h;
      child_side += acc[h];
      add_edge(b, h, predicted_phi_edge(*grid.impedance(b, h), acc[h]));
      acc[a] += acc[h];
      in_m[h] = 0;
      --m_count;
      attached.push_back(h);
    }
    add_edge(a, b, predicted_phi_edge(*za, child_side));
    acc[a] += acc[b];
    drop_from_tm(b);
    note_step(1, a, best->h, std::move(attached), best->score);
    return true;
  }

  // one unmetered bus between a and every remaining child
  bool resolve_below(NodeId a, const std::vector<NodeId>& c) {
    double best_score = kInf;
    NodeId best_h = -1;
    int fitting = 0;
    for (NodeId h : hidden_ids) {
      if (!in_m[h]) continue;
      const auto zah = grid.impedance(a, h);
      if (!zah) continue;
      bool usable = true;
      double total = 0.0;
      for (NodeId ci : c) {
        const auto zhc = grid.impedance(h, ci);
        if (!zhc) {
          usable = false;
          break;
        }
        StatSums rest = acc[h];
        for (NodeId cj : c)
          if (cj != ci) rest += acc[cj];
        const double pred = predicted_phi_grandparent(*zah, *zhc, acc[ci], rest);
        total += rel_score(phi.at(a, ci), pred);
      }
      if (!usable) continue;
      const double s = total / static_cast<double>(c.size());
      if (s <= tol) ++fitting;
      if (s < best_score) {
        best_score = s;
        best_h = h;
      }
    }
    if (best_score > tol) return false;
    if (fitting > 1) ++diag.ambiguous_steps;

    const NodeId h = best_h;
    StatSums below_h = acc[h];
    for (NodeId ci : c) {
      add_edge(h, ci, predicted_phi_edge(*grid.impedance(h, ci), acc[ci]));
      below_h += acc[ci];
    }
    add_edge(a, h, predicted_phi_edge(*grid.impedance(a, h), below_h));
    acc[a] += below_h;
    in_m[h] = 0;
    --m_count;
    std::vector<NodeId> attached = c;
    for (NodeId ci : c) drop_from_tm(ci);
    note_step(2, a, h, std::move(attached), best_score);
    return true;
  }

  // a and its remaining children are siblings under an unmetered bus, which
  // stays pending until a later step places its own parent
  bool resolve_siblings(NodeId a, const std::vector<NodeId>& c) {
    double best_score = kInf;
    NodeId best_h = -1;
    int fitting = 0;
    for (NodeId h : hidden_ids) {
      if (!in_m[h]) continue;
      const auto zha = grid.impedance(h, a);
      if (!zha) continue;
      bool usable = true;
      double total = 0.0;
      for (NodeId ci : c) {
        const auto zhc = grid.impedance(h, ci);
        if (!zhc) {
          usable = false;
          break;
        }
        const double pred = predicted_phi_siblings(*zha, acc[a], *zhc, acc[ci]);
        total += rel_score(phi.at(a, ci), pred);
      }
      if (!usable) continue;
      const double s = total / static_cast<double>(c.size());
      if (s <= tol) ++fitting;
      if (s < best_score) {
        best_score = s;
        best_h = h;
      }
    }
    if (best_score > tol) return false;
    if (fitting > 1) ++diag.ambiguous_steps;

    const NodeId h = best_h;
    add_edge(h, a, predicted_phi_edge(*grid.impedance(h, a), acc[a]));
    acc[h] += acc[a];
    for (NodeId ci : c) {
      add_edge(h, ci, predicted_phi_edge(*grid.impedance(h, ci), acc[ci]));
      acc[h] += acc[ci];
    }
    std::vector<NodeId> attached = {a};
    attached.insert(attached.end(), c.begin(), c.end());
    for (NodeId ci : c) drop_from_tm(ci);
    drop_from_tm(a);
    note_step(3, a, h, std::move(attached), best_score);
    return true;
  }
};

}  // namespace

MissingLearnResult learn_with_missing(const PhiWeights& phi,
                                      std::span<const NodeId> observed,
                                      const GridGraph& grid,
                                      std::span<const NodeId> hidden,
                                      const InjectionStats& stats, double tolerance) {
  const int n = grid.num_nodes();
  if (phi.num_nodes() != n || stats.num_nodes != n)
    throw std::invalid_argument("learn_with_missing: grid, weights and stats disagree on size");
  if (!(tolerance > 0.0))
    throw std::invalid_argument("learn_with_missing: tolerance must be positive");
  validate_assumption1(stats);

  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<NodeId> obs(observed.begin(), observed.end());
  std::sort(obs.begin(), obs.end());
  std::vector<NodeId> hid(hidden.begin(), hidden.end());
  std::sort(hid.begin(), hid.end());
  for (NodeId v : obs) {
    if (v < 0 || v >= n || seen[v])
      throw std::invalid_argument("learn_with_missing: bad observed node " + std::to_string(v));
    seen[v] = 1;
  }
  for (NodeId v : hid) {
    if (v < 1 || v >= n || seen[v])
      throw std::invalid_argument("learn_with_missing: bad hidden node " + std::to_string(v));
    seen[v] = 1;
  }
  if (std::count(seen.begin(), seen.end(), char(1)) != n)
    throw std::invalid_argument(
        "learn_with_missing: every bus must be either observed or hidden");

  Peeler st(grid, phi, tolerance);
  st.hidden_ids = hid;
  for (NodeId h : hid) {
    st.in_m[h] = 1;
    ++st.m_count;
  }
  for (NodeId v = 1; v < n; ++v) st.acc[static_cast<std::size_t>(v)] = stat_sums(stats, v);

  // provisional spanning tree over the metered buses
  const LearnedTopology tm = observable_mst(phi, obs);
  {
    std::vector<std::vector<NodeId>> adj(static_cast<std::size_t>(n));
    for (const auto& e : tm.edges) {
      adj[static_cast<std::size_t>(e.u)].push_back(e.v);
      adj[static_cast<std::size_t>(e.v)].push_back(e.u);
    }
    std::vector<NodeId> stack = {kRoot};
    st.in_tm[kRoot] = 1;
    st.tm_size = 1;
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (NodeId v : adj[static_cast<std::size_t>(u)]) {
        if (st.in_tm[v]) continue;
        st.in_tm[v] = 1;
        ++st.tm_size;
        st.par[v] = u;
        st.kids[static_cast<std::size_t>(u)].push_back(v);
        stack.push_back(v);
      }
    }
    for (auto& k : st.kids) std::sort(k.begin(), k.end());
  }

  int guard = 0;
  while (st.m_count > 0) {
    if (++guard > 10 * n + 10) st.fail("iteration limit exceeded", -1, {});
    const NodeId a = st.pick_neighborhood();
    if (a == -1) {
      // everything metered has folded away; a single pending bus must be the
      // substation's child
      if (st.tm_size == 1 && st.m_count == 1) {
        NodeId h = -1;
        for (NodeId v : st.hidden_ids)
          if (st.in_m[v]) h = v;
        const auto z = st.grid.impedance(kRoot, h);
        if (z) {
          st.add_edge(kRoot, h, predicted_phi_edge(*z, st.acc[static_cast<std::size_t>(h)]));
          st.in_m[h] = 0;
          --st.m_count;
          st.note_step(0, kRoot, h, {h}, 0.0);
          continue;
        }
      }
      std::vector<NodeId> pending;
      for (NodeId v : st.hidden_ids)
        if (st.in_m[v]) pending.push_back(v);
      st.fail("no resolvable neighborhood left with unmetered buses pending", -1,
              std::move(pending));
    }

    bool progress = false;
    std::vector<NodeId> c = st.kids[static_cast<std::size_t>(a)];
    for (NodeId b : c)
      if (st.resolve_child(a, b)) progress = true;

    std::vector<NodeId> remaining = st.kids[static_cast<std::size_t>(a)];
    if (!remaining.empty()) {
      if (st.resolve_below(a, remaining) || st.resolve_siblings(a, remaining)) {
        progress = true;
      } else {
        st.fail("neighborhood of node " + std::to_string(a) +
                    " fits no line configuration within tolerance",
                a, std::move(remaining));
      }
    }
    if (!progress) st.fail("no progress at node " + std::to_string(a), a, {});
  }

  // surviving provisional edges are real lines
  for (NodeId v = 1; v < n; ++v)
    if (st.in_tm[v] && st.par[v] != -1) st.add_edge(v, st.par[v], phi.at(v, st.par[v]));

  MissingLearnResult out;
  out.topology.num_nodes = n;
  for (const auto& [e, w] : st.edges) out.topology.edges.push_back({e.first, e.second, w});
  std::sort(out.topology.edges.begin(), out.topology.edges.end(),
            [](const WeightedEdge& a, const WeightedEdge& b) {
              if (a.u != b.u) return a.u < b.u;
              return a.v < b.v;
            });
  out.topology.total_weight = 0.0;
  for (const auto& e : out.topology.edges) out.topology.total_weight += e.weight;
  out.diagnostics = std::move(st.diag);
  return out;
}

MissingLearnResult learn_with_missing(const SampleSet& samples, const GridGraph& grid,
                                      std::span<const NodeId> hidden,
                                      const InjectionStats& stats, double tolerance) {
  std::vector<char> is_hidden(static_cast<std::size_t>(grid.num_nodes()), 0);
  for (NodeId h : hidden) {
    if (h < 0 || h >= grid.num_nodes())
      throw std::invalid_argument("learn_with_missing: bad hidden node " + std::to_string(h));
    is_hidden[static_cast<std::size_t>(h)] = 1;
  }
  std::vector<NodeId> keep;
  for (NodeId v : samples.nodes)
    if (!is_hidden[static_cast<std::size_t>(v)]) keep.push_back(v);
  const SampleSet reduced = samples.restrict_to(keep);
  const PhiWeights phi = empirical_phi(reduced);
  std::vector<NodeId> observed = {kRoot};
  observed.insert(observed.end(), reduced.nodes.begin(), reduced.nodes.end());
  return learn_with_missing(phi, observed, grid, hidden, stats, tolerance);
}

}  // namespace gridtopo
