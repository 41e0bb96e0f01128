#pragma once

// Node importance on weighted directed graphs. Paths follow edges i -> j with
// w_ij != 0 (self-loops ignored); weighted distances use edge length 1/w_ij.

#include "opinet/dynamics.hpp"

#include <limits>
#include <optional>
#include <queue>

namespace opinet {

enum class CentralityKind { in_degree, out_degree, closeness, betweenness, eigenvector, pagerank, friedkin };

inline const char* to_string(CentralityKind k) {
  switch (k) {
    case CentralityKind::in_degree: return "in_degree";
    case CentralityKind::out_degree: return "out_degree";
    case CentralityKind::closeness: return "closeness";
    case CentralityKind::betweenness: return "betweenness";
    case CentralityKind::eigenvector: return "eigenvector";
    case CentralityKind::pagerank: return "pagerank";
    case CentralityKind::friedkin: return "friedkin";
  }
  return "unknown";
}

struct CentralityVector {
  Vector values;
  CentralityKind kind = CentralityKind::in_degree;
  bool normalized = false;
  Diagnostics warnings;
};

enum class Direction { in, out };

// in-degree of i counts the agents i listens to (row i), out-degree the
// agents listening to i (column i). Weighted variants sum the weights.
inline CentralityVector degree_centrality(const InfluenceNetwork& net, Direction dir, bool weighted) {
  const Index n = net.n();
  CentralityVector c;
  c.kind = dir == Direction::in ? CentralityKind::in_degree : CentralityKind::out_degree;
  c.values = Vector::Zero(n);
  for (const Edge& e : edges(net.W)) {
    const Index node = dir == Direction::in ? e.i : e.j;
    c.values(node) += weighted ? e.w : 1.0;
  }
  return c;
}

namespace detail {

struct Adjacency {
  std::vector<std::vector<std::pair<Index, double>>> out;  // (target, length)
};

inline Adjacency path_graph(const Matrix& w, bool weighted) {
  Adjacency g;
  g.out.resize(static_cast<std::size_t>(w.rows()));
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j)
      if (i != j && is_edge(w(i, j))) g.out[static_cast<std::size_t>(i)].emplace_back(j, weighted ? 1.0 / w(i, j) : 1.0);
  return g;
}

inline bool same_length(double a, double b) { return std::isfinite(b) && std::abs(a - b) <= 1e-12 * std::max(1.0, std::max(a, b)); }

// Single-source shortest paths with path counts and predecessor lists.
struct ShortestPaths {
  std::vector<double> dist;
  std::vector<double> sigma;
  std::vector<std::vector<Index>> pred;
  std::vector<Index> order;  // nodes by non-decreasing distance
};

inline ShortestPaths shortest_paths(const Adjacency& g, Index src) {
  const std::size_t n = g.out.size();
  ShortestPaths sp;
  sp.dist.assign(n, kInf);
  sp.sigma.assign(n, 0.0);
  sp.pred.assign(n, {});
  using Item = std::pair<double, Index>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  std::vector<bool> done(n, false);
  sp.dist[static_cast<std::size_t>(src)] = 0.0;
  sp.sigma[static_cast<std::size_t>(src)] = 1.0;
  pq.emplace(0.0, src);
  while (!pq.empty()) {
    const auto [d, v] = pq.top();
    pq.pop();
    const auto vs = static_cast<std::size_t>(v);
    if (done[vs] || d > sp.dist[vs]) continue;
    done[vs] = true;
    sp.order.push_back(v);
    for (const auto& [u, len] : g.out[vs]) {
      const auto us = static_cast<std::size_t>(u);
      const double nd = d + len;
      if (done[us]) continue;
      if (same_length(nd, sp.dist[us])) {
        sp.sigma[us] += sp.sigma[vs];
        sp.pred[us].push_back(v);
      } else if (nd < sp.dist[us]) {
        sp.dist[us] = nd;
        sp.sigma[us] = sp.sigma[vs];
        sp.pred[us].assign(1, v);
        pq.emplace(nd, u);
      }
    }
  }
  return sp;
}

}  // namespace detail

// c_i = 1 / sum_j d_ij over the nodes reachable from i. Nodes that reach
// nobody get 0; partial reachability is flagged.
inline CentralityVector closeness_centrality(const InfluenceNetwork& net, bool weighted = false) {
  const Index n = net.n();
  CentralityVector c;
  c.kind = CentralityKind::closeness;
  c.values = Vector::Zero(n);
  const auto g = detail::path_graph(net.W, weighted);
  bool partial = false;
  for (Index i = 0; i < n; ++i) {
    const auto sp = detail::shortest_paths(g, i);
    double total = 0.0;
    Index reached = 0;
    for (Index j = 0; j < n; ++j)
      if (j != i && std::isfinite(sp.dist[static_cast<std::size_t>(j)])) {
        total += sp.dist[static_cast<std::size_t>(j)];
        ++reached;
      }
    if (reached == 0) {
      c.warnings.push_back("node " + std::to_string(i) + " reaches no other node; closeness set to 0");
      continue;
    }
    partial |= reached < n - 1;
    c.values(i) = 1.0 / total;
  }
  if (partial) c.warnings.push_back("graph is not strongly connected; closeness uses reachable sets only");
  return c;
}

// Brandes accumulation of pair dependencies. Undirected networks count each
// unordered pair once. With `normalize`, values are divided by the number of
// pairs not involving the node.
inline CentralityVector betweenness_centrality(const InfluenceNetwork& net, bool weighted = false,
                                               bool normalize = false) {
  const Index n = net.n();
  CentralityVector c;
  c.kind = CentralityKind::betweenness;
  c.normalized = normalize;
  c.values = Vector::Zero(n);
  const auto g = detail::path_graph(net.W, weighted);
  for (Index s = 0; s < n; ++s) {
    const auto sp = detail::shortest_paths(g, s);
    std::vector<double> delta(static_cast<std::size_t>(n), 0.0);
    for (auto it = sp.order.rbegin(); it != sp.order.rend(); ++it) {
      const auto w = static_cast<std::size_t>(*it);
      for (Index v : sp.pred[w]) {
        const auto vs = static_cast<std::size_t>(v);
        delta[vs] += sp.sigma[vs] / sp.sigma[w] * (1.0 + delta[w]);
      }
      if (*it != s) c.values(*it) += delta[w];
    }
  }
  if (!net.directed) c.values /= 2.0;
  if (normalize && n > 2) {
    double pairs = static_cast<double>(n - 1) * static_cast<double>(n - 2);
    if (!net.directed) pairs /= 2.0;
    c.values /= pairs;
  }
  return c;
}

inline bool strongly_connected(const Matrix& a) {
  const Index n = a.rows();
  if (n == 0) return true;
  auto sweep = [&](bool transpose) {
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::vector<Index> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const Index v = stack.back();
      stack.pop_back();
      for (Index u = 0; u < n; ++u) {
        const double e = transpose ? a(u, v) : a(v, u);
        if (!seen[static_cast<std::size_t>(u)] && is_edge(e)) {
          seen[static_cast<std::size_t>(u)] = true;
          stack.push_back(u);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  };
  return sweep(false) && sweep(true);
}

// Dominant right eigenvector A x = rho(A) x with 1'x = 1, by power iteration
// on A + sI (the shift removes periodicity without moving the eigenvector).
inline CentralityVector eigenvector_centrality(const Matrix& a, int max_iter = 100000) {
  require(a.rows() == a.cols(), ErrorKind::structural, "eigenvector centrality needs a square matrix");
  require(a.size() == 0 || a.minCoeff() >= 0.0, ErrorKind::parameter,
          "eigenvector centrality needs a nonnegative matrix");
  const Index n = a.rows();
  CentralityVector c;
  c.kind = CentralityKind::eigenvector;
  c.normalized = true;
  if (!strongly_connected(a))
    c.warnings.push_back("matrix is reducible; the dominant eigenvector may not be unique");
  Vector x = Vector::Constant(n, 1.0 / static_cast<double>(n));
  const double shift = 0.5 * (n ? a.rowwise().sum().maxCoeff() : 0.0);
  if (shift == 0.0) {
    c.warnings.push_back("zero matrix; returning the uniform vector");
    c.values = x;
    return c;
  }
  auto residual = [&](const Vector& v) {
    const Vector av = a * v;
    const double lam = av.sum();  // 1'v = 1
    return (av - lam * v).lpNorm<Eigen::Infinity>() / std::max(1.0, lam);
  };
  int it = 0;
  for (; it < max_iter && residual(x) >= 1e-10; ++it) {
    x = a * x + shift * x;
    x /= x.sum();
  }
  if (residual(x) >= 1e-10) throw Error(ErrorKind::numerical, "eigenvector centrality did not converge");
  // Keep iterating while the vector still moves, which tightens it well
  // below the residual test.
  for (int k = 0; k < 1000 && it + k < max_iter; ++k) {
    Vector z = a * x + shift * x;
    z /= z.sum();
    const double diff = (z - x).lpNorm<Eigen::Infinity>();
    x = std::move(z);
    if (diff < 1e-16) break;
  }
  c.values = x.cwiseMax(0.0);
  c.values /= c.values.sum();
  return c;
}

// Damped matrix A(M) = (1 - m) M + (m / n) 1 1'.
inline Matrix pagerank_matrix(const Matrix& m_col, double m) {
  const Index n = m_col.rows();
  return (1.0 - m) * m_col + Matrix::Constant(n, n, m / static_cast<double>(n));
}

// Stationary vector of A(M) for column-stochastic M; `transpose` accepts a
// row-stochastic influence matrix instead.
inline CentralityVector pagerank(const Matrix& input, double m, bool transpose = false, int max_iter = 100000) {
  require(input.rows() == input.cols(), ErrorKind::structural, "pagerank needs a square matrix");
  require(m > 0.0 && m < 1.0, ErrorKind::parameter, "damping m must lie in (0,1)");
  const Matrix mm = transpose ? Matrix(input.transpose()) : input;
  const Index n = mm.rows();
  require(n == 0 || mm.minCoeff() >= 0.0, ErrorKind::parameter, "pagerank matrix must be nonnegative");
  for (Index j = 0; j < n; ++j)
    require(std::abs(mm.col(j).sum() - 1.0) <= 1e-9, ErrorKind::parameter,
            "pagerank matrix is not column-stochastic (column " + std::to_string(j) + ")");
  CentralityVector c;
  c.kind = CentralityKind::pagerank;
  c.normalized = true;
  Vector x = Vector::Constant(n, 1.0 / static_cast<double>(n));
  const double tele = m / static_cast<double>(n);
  for (int it = 0; it < max_iter; ++it) {
    Vector y = (1.0 - m) * (mm * x);
    y.array() += tele * x.sum();
    y /= y.sum();
    const double diff = (y - x).lpNorm<Eigen::Infinity>();
    x = std::move(y);
    if (diff < 1e-15) break;
    if (it + 1 == max_iter) throw Error(ErrorKind::numerical, "pagerank did not converge");
  }
  c.values = x;
  return c;
}

// c = (1/n) V' 1 with V the control matrix; alpha, if given, sets Lambda = alpha I.
inline CentralityVector friedkin_centrality(const InfluenceNetwork& net, std::optional<double> alpha = std::nullopt) {
  InfluenceNetwork use = net;
  if (alpha) {
    require(*alpha >= 0.0 && *alpha <= 1.0, ErrorKind::parameter, "alpha must lie in [0,1]");
    use.lambda = Vector::Constant(net.n(), *alpha);
  }
  const Matrix v = control_matrix(use);
  CentralityVector c;
  c.kind = CentralityKind::friedkin;
  c.normalized = true;
  c.values = v.colwise().sum().transpose() / static_cast<double>(net.n());
  return c;
}

}  // namespace opinet
