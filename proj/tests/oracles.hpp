#pragma once

// Slow reference implementations the tests compare the library against.
// Nothing here is used by the library itself.

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "gridtopo/grid.hpp"
#include "gridtopo/learn.hpp"
#include "gridtopo/linalg.hpp"

namespace oracles {

// Gauss-Jordan with partial pivoting; throws on a singular matrix.
inline gridtopo::Mat gj_inverse(gridtopo::Mat a) {
  const std::size_t n = a.rows();
  if (n != a.cols()) throw std::invalid_argument("gj_inverse: square input required");
  gridtopo::Mat inv(n, n);
  for (std::size_t i = 0; i < n; ++i) inv(i, i) = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a(r, col)) > std::fabs(a(pivot, col))) pivot = r;
    if (a(pivot, col) == 0.0) throw std::runtime_error("gj_inverse: singular");
    if (pivot != col)
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a(pivot, j), a(col, j));
        std::swap(inv(pivot, j), inv(col, j));
      }
    const double d = a(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      a(col, j) /= d;
      inv(col, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || a(r, col) == 0.0) continue;
      const double f = a(r, col);
      for (std::size_t j = 0; j < n; ++j) {
        a(r, j) -= f * a(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

// Reduced weighted Laplacian over the non-substation buses, index = id - 1.
inline gridtopo::Mat reduced_laplacian(const gridtopo::RadialTree& tree,
                                       gridtopo::WeightKind kind) {
  const int n = tree.num_nodes();
  gridtopo::Mat lap(static_cast<std::size_t>(n - 1), static_cast<std::size_t>(n - 1));
  for (gridtopo::NodeId a = 1; a < n; ++a) {
    const gridtopo::Impedance z = tree.impedance_to_parent(a);
    const double w = 1.0 / (kind == gridtopo::WeightKind::resistance ? z.r : z.x);
    const gridtopo::NodeId p = tree.parent(a);
    lap(a - 1, a - 1) += w;
    if (p != gridtopo::kRoot) {
      lap(p - 1, p - 1) += w;
      lap(a - 1, p - 1) -= w;
      lap(p - 1, a - 1) -= w;
    }
  }
  return lap;
}

// Exhaustive minimum over spanning trees with substation degree one.
// Feasible only for small candidate sets; returns the minimum total weight
// and optionally how many subsets attain it exactly.
inline double brute_force_min_tree_weight(int n,
                                          const std::vector<gridtopo::WeightedEdge>& cand,
                                          int* optima = nullptr) {
  const int k = n - 1;
  const int e = static_cast<int>(cand.size());
  if (k < 1 || e < k) throw std::invalid_argument("brute_force: too few candidates");
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  double best = HUGE_VAL;
  int count = 0;
  std::vector<int> parent(static_cast<std::size_t>(n));
  const auto find = [&](int v) {
    while (parent[static_cast<std::size_t>(v)] != v) {
      parent[static_cast<std::size_t>(v)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
      v = parent[static_cast<std::size_t>(v)];
    }
    return v;
  };
  for (;;) {
    for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
    int joins = 0, root_deg = 0;
    double total = 0.0;
    for (int i : idx) {
      const auto& we = cand[static_cast<std::size_t>(i)];
      const int ru = find(we.u), rv = find(we.v);
      if (ru != rv) {
        parent[static_cast<std::size_t>(ru)] = rv;
        ++joins;
      }
      if (we.u == gridtopo::kRoot || we.v == gridtopo::kRoot) ++root_deg;
      total += we.weight;
    }
    if (joins == k && root_deg == 1) {
      if (total < best) {
        best = total;
        count = 1;
      } else if (total == best) {
        ++count;
      }
    }
    // next k-combination of {0..e-1}
    int pos = k - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == e - k + pos) --pos;
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
    for (int i = pos + 1; i < k; ++i)
      idx[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i - 1)] + 1;
  }
  if (!(best < HUGE_VAL)) throw std::runtime_error("brute_force: no feasible tree");
  if (optima) *optima = count;
  return best;
}

}  // namespace oracles
