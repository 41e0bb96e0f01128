#pragma once

// Independent brute-force references shared by the unit and acceptance tests.

#include "opinet/numkit/recovery.hpp"
#include "opinet/rng.hpp"

#include <algorithm>
#include <functional>
#include <random>

namespace oracle {

using opinet::Index;
using opinet::Matrix;
using opinet::Vector;

inline Matrix gaussian(Index rows, Index cols, opinet::CounterRng& rng) {
  std::normal_distribution<double> nd;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = nd(rng);
  return m;
}

// All vectors with at most s nonzeros solving phi w = y, found by trying
// every support. Returns the solutions that differ from z.
inline std::vector<Vector> other_sparse_solutions(const Matrix& phi, const Vector& y, const Vector& z, Index s) {
  std::vector<Vector> out;
  const Index n = phi.cols();
  for (Index k = 1; k <= s; ++k) {
    opinet::numkit::for_each_subset(n, k, [&](const std::vector<Index>& sup) {
      const Matrix a = opinet::numkit::select_columns(phi, sup);
      if (opinet::numkit::numerical_rank(a) < k) {
        // Dependent columns: the support contains a nonzero kernel vector,
        // so y either has no or infinitely many solutions here.
        const Vector w = a.colPivHouseholderQr().solve(y);
        if ((a * w - y).norm() < 1e-9 * (1.0 + y.norm())) {
          Vector full = Vector::Zero(n);
          Eigen::FullPivLU<Matrix> lu(a);
          const Matrix ker = lu.kernel();
          for (std::size_t j = 0; j < sup.size(); ++j) full(sup[j]) = w(static_cast<Index>(j)) + ker(static_cast<Index>(j), 0);
          out.push_back(full);
        }
        return true;
      }
      const Vector w = a.colPivHouseholderQr().solve(y);
      if ((a * w - y).norm() > 1e-9 * (1.0 + y.norm())) return true;
      Vector full = Vector::Zero(n);
      for (std::size_t j = 0; j < sup.size(); ++j) full(sup[j]) = w(static_cast<Index>(j));
      if ((full - z).lpNorm<Eigen::Infinity>() > 1e-8) out.push_back(full);
      return true;
    });
  }
  return out;
}

// Two distinct vectors with at most s nonzeros and equal image, built from a
// minimal dependent column set of size at most 2s. Empty when none exists.
inline std::pair<Vector, Vector> colliding_pair(const Matrix& phi, Index s) {
  const Index n = phi.cols();
  for (Index k = 1; k <= std::min<Index>(2 * s, n); ++k) {
    std::pair<Vector, Vector> found;
    bool ok = false;
    opinet::numkit::for_each_subset(n, k, [&](const std::vector<Index>& sup) {
      const Matrix a = opinet::numkit::select_columns(phi, sup);
      if (opinet::numkit::numerical_rank(a) == k) return true;
      Eigen::FullPivLU<Matrix> lu(a);
      const Vector eta = lu.kernel().col(0);
      Vector z1 = Vector::Zero(n), z2 = Vector::Zero(n);
      const Index half = (k + 1) / 2;
      for (Index j = 0; j < k; ++j) {
        if (j < half) z1(sup[static_cast<std::size_t>(j)]) = eta(j);
        else z2(sup[static_cast<std::size_t>(j)]) = -eta(j);
      }
      found = {z1, z2};
      ok = true;
      return false;
    });
    if (ok) return found;
  }
  return {};
}

// Exhaustive simple-path enumeration on small graphs (edges i -> j for
// w_ij != 0, i != j). Returns closeness and betweenness computed straight from
// the shortest-path sets.
struct PathCentralities {
  Vector closeness;
  Vector betweenness;
};

inline PathCentralities enumerate_paths(const Matrix& w, bool weighted, bool undirected) {
  const Index n = w.rows();
  std::vector<std::vector<std::vector<std::vector<Index>>>> paths(
      static_cast<std::size_t>(n), std::vector<std::vector<std::vector<Index>>>(static_cast<std::size_t>(n)));
  std::vector<std::vector<std::vector<double>>> lens(
      static_cast<std::size_t>(n), std::vector<std::vector<double>>(static_cast<std::size_t>(n)));
  std::vector<Index> cur;
  std::vector<bool> on(static_cast<std::size_t>(n), false);
  std::function<void(Index, double)> dfs = [&](Index v, double len) {
    const Index s = cur.front();
    if (v != s) {
      paths[static_cast<std::size_t>(s)][static_cast<std::size_t>(v)].push_back(cur);
      lens[static_cast<std::size_t>(s)][static_cast<std::size_t>(v)].push_back(len);
    }
    for (Index u = 0; u < n; ++u) {
      if (u == v || on[static_cast<std::size_t>(u)] || std::abs(w(v, u)) < 1e-12) continue;
      on[static_cast<std::size_t>(u)] = true;
      cur.push_back(u);
      dfs(u, len + (weighted ? 1.0 / w(v, u) : 1.0));
      cur.pop_back();
      on[static_cast<std::size_t>(u)] = false;
    }
  };
  for (Index s = 0; s < n; ++s) {
    cur = {s};
    on.assign(static_cast<std::size_t>(n), false);
    on[static_cast<std::size_t>(s)] = true;
    dfs(s, 0.0);
  }
  PathCentralities out{Vector::Zero(n), Vector::Zero(n)};
  for (Index s = 0; s < n; ++s) {
    double total = 0.0;
    for (Index t = 0; t < n; ++t) {
      const auto& L = lens[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)];
      if (t == s || L.empty()) continue;
      const double best = *std::min_element(L.begin(), L.end());
      total += best;
      std::vector<const std::vector<Index>*> shortest;
      for (std::size_t k = 0; k < L.size(); ++k)
        if (std::abs(L[k] - best) <= 1e-12 * std::max(1.0, best))
          shortest.push_back(&paths[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)][k]);
      for (Index v = 0; v < n; ++v) {
        if (v == s || v == t) continue;
        double through = 0;
        for (const auto* p : shortest) through += std::find(p->begin(), p->end(), v) != p->end();
        out.betweenness(v) += through / static_cast<double>(shortest.size());
      }
    }
    out.closeness(s) = total > 0 ? 1.0 / total : 0.0;
  }
  if (undirected) out.betweenness /= 2.0;
  return out;
}

}  // namespace oracle
