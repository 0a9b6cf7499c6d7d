#include "gridtopo/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gridtopo {
namespace {

using nlohmann::json;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError(path + ": cannot open for writing");
  out << text;
  if (!out) throw SchemaError(path + ": write failed");
}

double need_number(const json& j, const std::string& path, const std::string& field) {
  if (!j.contains(field) || !j[field].is_number())
    throw SchemaError(path + ": missing numeric field '" + field + "'");
  return j[field].get<double>();
}

int need_int(const json& j, const std::string& path, const std::string& field) {
  if (!j.contains(field) || !j[field].is_number_integer())
    throw SchemaError(path + ": missing integer field '" + field + "'");
  return j[field].get<int>();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

NodeId parse_id(const char* s) {
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (end == s || *end != '\0' || v < 1 || v > 1 << 30) return -1;
  return static_cast<NodeId>(v);
}

}  // namespace

GridFile load_grid(const std::string& path) {
  const json j = read_json(path);
  const int n = need_int(j, path, "num_nodes");
  if (need_int(j, path, "root") != kRoot)
    throw SchemaError(path + ": root must be 0");
  if (!j.contains("edges") || !j["edges"].is_array())
    throw SchemaError(path + ": missing array field 'edges'");

  std::vector<CandidateEdge> all;
  std::vector<CandidateEdge> operational;
  bool any_flag = false;
  for (const auto& e : j["edges"]) {
    CandidateEdge ce;
    ce.u = need_int(e, path, "u");
    ce.v = need_int(e, path, "v");
    ce.z.r = need_number(e, path, "r");
    ce.z.x = need_number(e, path, "x");
    all.push_back(ce);
    if (e.contains("operational")) {
      if (!e["operational"].is_boolean())
        throw SchemaError(path + ": field 'operational' must be boolean");
      any_flag = true;
      if (e["operational"].get<bool>()) operational.push_back(ce);
    }
  }

  GridFile out{GridGraph(), std::nullopt};
  try {
    out.grid = GridGraph(n, std::move(all));
    if (any_flag) out.tree = RadialTree(n, operational);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return out;
}

void save_grid(const std::string& path, const GridGraph& grid, const RadialTree* tree) {
  json edges = json::array();
  for (const auto& e : grid.edges()) {
    json je = {{"u", e.u}, {"v", e.v}, {"r", e.z.r}, {"x", e.z.x}};
    if (tree) {
      bool op = false;
      for (const auto& t : tree->edges())
        if ((t.u == e.u && t.v == e.v) || (t.u == e.v && t.v == e.u)) {
          op = true;
          break;
        }
      je["operational"] = op;
    }
    edges.push_back(je);
  }
  const json j = {{"num_nodes", grid.num_nodes()}, {"root", kRoot}, {"edges", edges}};
  write_text(path, j.dump(2) + "\n");
}

SampleSet load_samples(const std::string& path, int num_nodes_hint) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();

  std::vector<NodeId> eps_ids, theta_ids;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      NodeId id = -1;
      if (tok.rfind("eps_", 0) == 0 && theta_ids.empty() &&
          (id = parse_id(tok.c_str() + 4)) >= 1) {
        eps_ids.push_back(id);
      } else if (tok.rfind("theta_", 0) == 0 && (id = parse_id(tok.c_str() + 6)) >= 1) {
        theta_ids.push_back(id);
      } else {
        throw SchemaError(path + ": unexpected column '" + tok + "'");
      }
    }
  }
  if (eps_ids.empty()) throw SchemaError(path + ": no eps_<id> columns");
  for (std::size_t i = 1; i < eps_ids.size(); ++i)
    if (eps_ids[i] <= eps_ids[i - 1])
      throw SchemaError(path + ": eps columns must have strictly increasing ids");
  if (!theta_ids.empty() && theta_ids != eps_ids)
    throw SchemaError(path + ": theta columns must mirror the eps columns");

  std::vector<double> values;
  std::size_t rows = 0;
  const std::size_t cols = eps_ids.size() + theta_ids.size();
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::size_t got = 0;
    while (std::getline(ss, tok, ',')) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0')
        throw SchemaError(path + ": bad number '" + tok + "' in row " +
                          std::to_string(rows + 1));
      values.push_back(v);
      ++got;
    }
    if (got != cols)
      throw SchemaError(path + ": row " + std::to_string(rows + 1) + " has " +
                        std::to_string(got) + " columns, expected " + std::to_string(cols));
    ++rows;
  }
  if (rows == 0) throw SchemaError(path + ": no snapshot rows");

  int n = num_nodes_hint;
  if (n <= 0) n = eps_ids.back() + 1;
  if (eps_ids.back() >= n)
    throw SchemaError(path + ": column id " + std::to_string(eps_ids.back()) +
                      " exceeds num_nodes " + std::to_string(n));

  SampleSet out;
  out.num_nodes = n;
  out.nodes = eps_ids;
  out.eps = Mat(eps_ids.size(), rows);
  if (!theta_ids.empty()) out.theta = Mat(eps_ids.size(), rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = values.data() + r * cols;
    for (std::size_t i = 0; i < eps_ids.size(); ++i) out.eps(i, r) = row[i];
    if (out.theta)
      for (std::size_t i = 0; i < eps_ids.size(); ++i)
        (*out.theta)(i, r) = row[eps_ids.size() + i];
  }
  return out;
}

void save_samples(const std::string& path, const SampleSet& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError(path + ": cannot open for writing");
  for (std::size_t i = 0; i < samples.nodes.size(); ++i) {
    if (i) out << ',';
    out << "eps_" << samples.nodes[i];
  }
  if (samples.theta)
    for (NodeId id : samples.nodes) out << ",theta_" << id;
  out << '\n';
  for (std::size_t r = 0; r < samples.num_samples(); ++r) {
    for (std::size_t i = 0; i < samples.nodes.size(); ++i) {
      if (i) out << ',';
      out << fmt(samples.eps(i, r));
    }
    if (samples.theta)
      for (std::size_t i = 0; i < samples.nodes.size(); ++i)
        out << ',' << fmt((*samples.theta)(i, r));
    out << '\n';
  }
  if (!out) throw SchemaError(path + ": write failed");
}

InjectionStats load_stats(const std::string& path) {
  const json j = read_json(path);
  InjectionStats s;
  s.num_nodes = need_int(j, path, "num_nodes");
  if (s.num_nodes < 2) throw SchemaError(path + ": num_nodes must be >= 2");
  const auto n = static_cast<std::size_t>(s.num_nodes);
  s.mu_p.assign(n, 0.0);
  s.mu_q.assign(n, 0.0);
  s.var_p.assign(n, 0.0);
  s.var_q.assign(n, 0.0);
  s.cov_pq.assign(n, 0.0);
  if (!j.contains("nodes") || !j["nodes"].is_array())
    throw SchemaError(path + ": missing array field 'nodes'");
  std::vector<char> have(n, 0);
  for (const auto& e : j["nodes"]) {
    const int id = need_int(e, path, "id");
    if (id < 1 || id >= s.num_nodes)
      throw SchemaError(path + ": node id " + std::to_string(id) + " out of range");
    if (have[static_cast<std::size_t>(id)])
      throw SchemaError(path + ": duplicate node id " + std::to_string(id));
    have[static_cast<std::size_t>(id)] = 1;
    s.mu_p[id] = need_number(e, path, "mu_p");
    s.mu_q[id] = need_number(e, path, "mu_q");
    s.var_p[id] = need_number(e, path, "var_p");
    s.var_q[id] = need_number(e, path, "var_q");
    s.cov_pq[id] = need_number(e, path, "cov_pq");
  }
  for (int id = 1; id < s.num_nodes; ++id)
    if (!have[static_cast<std::size_t>(id)])
      throw SchemaError(path + ": missing entry for node " + std::to_string(id));
  try {
    validate_psd(s);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return s;
}

void save_stats(const std::string& path, const InjectionStats& stats) {
  json nodes = json::array();
  for (NodeId a = 1; a < stats.num_nodes; ++a)
    nodes.push_back({{"id", a},
                     {"mu_p", stats.mu_p[a]},
                     {"mu_q", stats.mu_q[a]},
                     {"var_p", stats.var_p[a]},
                     {"var_q", stats.var_q[a]},
                     {"cov_pq", stats.cov_pq[a]}});
  const json j = {{"num_nodes", stats.num_nodes}, {"nodes", nodes}};
  write_text(path, j.dump(2) + "\n");
}

LearnedTopology load_topology(const std::string& path) {
  const json j = read_json(path);
  LearnedTopology t;
  t.num_nodes = need_int(j, path, "num_nodes");
  if (need_int(j, path, "root") != kRoot)
    throw SchemaError(path + ": root must be 0");
  if (!j.contains("edges") || !j["edges"].is_array())
    throw SchemaError(path + ": missing array field 'edges'");
  for (const auto& e : j["edges"]) {
    WeightedEdge we;
    we.u = need_int(e, path, "u");
    we.v = need_int(e, path, "v");
    we.weight = need_number(e, path, "phi");
    if (we.u > we.v) std::swap(we.u, we.v);
    if (we.u < 0 || we.v >= t.num_nodes || we.u == we.v)
      throw SchemaError(path + ": bad edge (" + std::to_string(we.u) + "," +
                        std::to_string(we.v) + ")");
    t.edges.push_back(we);
    t.total_weight += we.weight;
  }
  std::sort(t.edges.begin(), t.edges.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    if (a.u != b.u) return a.u < b.u;
    return a.v < b.v;
  });
  return t;
}

namespace {

json topology_json(const LearnedTopology& topo) {
  json edges = json::array();
  for (const auto& e : topo.edges)
    edges.push_back({{"u", e.u}, {"v", e.v}, {"phi", e.weight}});
  return {{"num_nodes", topo.num_nodes},
          {"root", kRoot},
          {"total_weight", topo.total_weight},
          {"edges", edges}};
}

}  // namespace

void save_topology(const std::string& path, const LearnedTopology& topo,
                   std::optional<double> error_vs_operational) {
  json j = topology_json(topo);
  if (error_vs_operational) j["error_vs_operational"] = *error_vs_operational;
  write_text(path, j.dump(2) + "\n");
}

void save_missing_result(const std::string& path, const MissingLearnResult& result,
                         std::optional<double> error_vs_operational) {
  json j = topology_json(result.topology);
  if (error_vs_operational) j["error_vs_operational"] = *error_vs_operational;
  json steps = json::array();
  for (const auto& s : result.diagnostics.steps)
    steps.push_back({{"statement", s.statement},
                     {"node", s.node},
                     {"hidden", s.hidden},
                     {"attached", s.attached},
                     {"score", s.score}});
  j["reconstruction"] = {{"steps", steps},
                         {"max_accepted_score", result.diagnostics.max_accepted_score},
                         {"ambiguous_steps", result.diagnostics.ambiguous_steps}};
  write_text(path, j.dump(2) + "\n");
}

RadialTree tree_from_topology(const LearnedTopology& topo, const GridGraph& grid) {
  if (topo.num_nodes != grid.num_nodes())
    throw std::invalid_argument("tree_from_topology: node counts differ");
  std::vector<CandidateEdge> edges;
  for (const auto& e : topo.edges) {
    const auto z = grid.impedance(e.u, e.v);
    if (!z)
      throw std::invalid_argument("tree_from_topology: edge (" + std::to_string(e.u) +
                                  "," + std::to_string(e.v) +
                                  ") is not a candidate line");
    edges.push_back({e.u, e.v, *z});
  }
  return RadialTree(topo.num_nodes, edges);
}

}  // namespace gridtopo
