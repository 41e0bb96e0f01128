#pragma once

// Influence networks: a row-stochastic weight matrix W plus susceptibilities
// lambda, multiplex collections of them, structural metrics and generators.

#include "opinet/core.hpp"
#include "opinet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace opinet {

struct InfluenceNetwork {
  Matrix W;
  Vector lambda;
  bool directed = true;

  Index n() const { return W.rows(); }
  // Lambda * W, the matrix driving Friedkin-Johnsen dynamics.
  Matrix lambda_w() const { return lambda.asDiagonal() * W; }
};

struct Edge {
  Index i;
  Index j;
  double w;
  friend bool operator==(const Edge&, const Edge&) = default;
};

inline bool is_edge(double w) { return std::abs(w) >= kStructuralZero; }

// Row-major list of (i, j, w_ij) for structurally nonzero entries.
inline std::vector<Edge> edges(const Matrix& w) {
  std::vector<Edge> out;
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j)
      if (is_edge(w(i, j))) out.push_back({i, j, w(i, j)});
  return out;
}

inline std::set<std::pair<Index, Index>> support(const Matrix& w, double threshold = kStructuralZero) {
  std::set<std::pair<Index, Index>> s;
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j)
      if (std::abs(w(i, j)) >= threshold) s.emplace(i, j);
  return s;
}

inline std::size_t edge_count(const InfluenceNetwork& net) { return edges(net.W).size(); }

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {
inline std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
}  // namespace detail

inline ValidationReport validate_network(const InfluenceNetwork& net, double tol = 1e-9) {
  require(net.W.rows() == net.W.cols(), ErrorKind::structural, "influence matrix must be square");
  require(net.lambda.size() == net.W.rows(), ErrorKind::structural,
          "lambda has length " + std::to_string(net.lambda.size()) + " but the network has " +
              std::to_string(net.W.rows()) + " nodes");
  ValidationReport rep;
  const Index n = net.n();
  for (Index i = 0; i < n; ++i) {
    const double s = net.W.row(i).sum();
    if (!std::isfinite(s) || std::abs(s - 1.0) > tol)
      rep.violations.push_back("row " + std::to_string(i) + " sums to " + detail::fmt_real(s));
    for (Index j = 0; j < n; ++j) {
      const double w = net.W(i, j);
      if (w < 0.0) {
        rep.violations.push_back("negative weight " + detail::fmt_real(w) + " at (" + std::to_string(i) + "," +
                                 std::to_string(j) + ")");
      } else if (w > 1.0 + tol) {
        rep.violations.push_back("weight " + detail::fmt_real(w) + " above 1 at (" + std::to_string(i) + "," +
                                 std::to_string(j) + ")");
      }
    }
    const double l = net.lambda(i);
    if (!(l >= 0.0 && l <= 1.0))
      rep.violations.push_back("lambda " + std::to_string(i) + " = " + detail::fmt_real(l) + " outside [0,1]");
  }
  if (!net.directed && !is_symmetric(net.W.unaryExpr([](double v) { return is_edge(v) ? 1.0 : 0.0; }), 0.0))
    rep.violations.push_back("undirected network has an asymmetric edge set");
  return rep;
}

// Throws a parameter error naming the first violations.
inline void require_valid(const InfluenceNetwork& net, double tol = 1e-9) {
  const auto rep = validate_network(net, tol);
  if (rep.ok()) return;
  std::string msg = "invalid influence network: " + rep.violations.front();
  if (rep.violations.size() > 1) msg += " (+" + std::to_string(rep.violations.size() - 1) + " more)";
  throw Error(ErrorKind::parameter, msg);
}

inline double network_density(const InfluenceNetwork& net) {
  const Index n = net.n();
  if (n == 0) return 0.0;
  return static_cast<double>(edge_count(net)) / (static_cast<double>(n) * static_cast<double>(n));
}

inline double density_from_counts(double n, double edges) { return edges / (n * n); }

// Sparse in the sense |E| <= alpha * n.
inline bool is_sparse(const InfluenceNetwork& net, double alpha) {
  return static_cast<double>(edge_count(net)) <= alpha * static_cast<double>(net.n());
}

struct DegreeProfile {
  std::vector<int> in_deg, out_deg;  // in: row support (who i listens to); out: column support
  Vector in_deg_w, out_deg_w;
  int d_max = 0;
};

inline DegreeProfile degree_profile(const InfluenceNetwork& net) {
  const Index n = net.n();
  DegreeProfile d;
  d.in_deg.assign(static_cast<std::size_t>(n), 0);
  d.out_deg.assign(static_cast<std::size_t>(n), 0);
  d.in_deg_w = Vector::Zero(n);
  d.out_deg_w = Vector::Zero(n);
  for (const Edge& e : edges(net.W)) {
    ++d.in_deg[static_cast<std::size_t>(e.i)];
    ++d.out_deg[static_cast<std::size_t>(e.j)];
    d.in_deg_w(e.i) += e.w;
    d.out_deg_w(e.j) += e.w;
  }
  for (int v : d.in_deg) d.d_max = std::max(d.d_max, v);
  return d;
}

struct Laplacian {
  Matrix D;
  Matrix L;
};

inline Laplacian laplacian(const InfluenceNetwork& net) {
  Laplacian out;
  out.D = net.W.rowwise().sum().asDiagonal();
  out.L = out.D - net.W;
  return out;
}

// (1/2) sum_ij w_ij (x_i - x_j)^2. Directed inputs use the same formula and
// are flagged in diag.
inline double laplacian_quadratic(const InfluenceNetwork& net, const Vector& x, Diagnostics* diag = nullptr) {
  require(x.size() == net.n(), ErrorKind::structural, "vector length must match node count");
  if (!is_symmetric(net.W, 1e-12))
    warn(diag, "laplacian quadratic form evaluated on a non-symmetric weight matrix");
  double q = 0.0;
  for (const Edge& e : edges(net.W)) q += e.w * (x(e.i) - x(e.j)) * (x(e.i) - x(e.j));
  return 0.5 * q;
}

// ---------------------------------------------------------------------------
// Random generators

enum class GraphModel { erdos_renyi, watts_strogatz, barabasi_albert, k_out };
enum class WeightScheme { equal, uniform };

inline const char* to_string(GraphModel m) {
  switch (m) {
    case GraphModel::erdos_renyi: return "erdos_renyi";
    case GraphModel::watts_strogatz: return "watts_strogatz";
    case GraphModel::barabasi_albert: return "barabasi_albert";
    case GraphModel::k_out: return "k_out";
  }
  return "unknown";
}

inline const char* to_string(WeightScheme w) { return w == WeightScheme::equal ? "equal" : "uniform"; }

struct GeneratorSpec {
  GraphModel model = GraphModel::erdos_renyi;
  double p = 0.1;          // erdos_renyi: probability of each ordered pair, self-loops included
  int k = 4;               // watts_strogatz: even ring degree
  double rewire = 0.1;     // watts_strogatz: rewiring probability
  int m0 = 2;              // barabasi_albert: edges added per new node
  int out_degree = 3;      // k_out: distinct influencers per node
  WeightScheme weights = WeightScheme::uniform;
  double weight_lo = 0.1;  // uniform scheme draws raw weights in [weight_lo, 1]
  double lambda_lo = 0.5;
  double lambda_hi = 0.9;
};

namespace detail {

inline void check_spec(const GeneratorSpec& s, Index n) {
  require(n >= 1, ErrorKind::parameter, "network needs at least one node");
  require(s.lambda_lo >= 0.0 && s.lambda_hi <= 1.0 && s.lambda_lo <= s.lambda_hi, ErrorKind::parameter,
          "lambda range must satisfy 0 <= lo <= hi <= 1");
  require(s.weight_lo > 0.0 && s.weight_lo <= 1.0, ErrorKind::parameter, "weight_lo must lie in (0,1]");
  switch (s.model) {
    case GraphModel::erdos_renyi:
      require(s.p >= 0.0 && s.p <= 1.0, ErrorKind::parameter, "erdos_renyi p must lie in [0,1]");
      break;
    case GraphModel::watts_strogatz:
      require(s.k >= 2 && s.k % 2 == 0, ErrorKind::parameter, "watts_strogatz k must be even and >= 2");
      require(s.k < n, ErrorKind::parameter, "watts_strogatz k must be smaller than n");
      require(s.rewire >= 0.0 && s.rewire <= 1.0, ErrorKind::parameter, "rewiring probability must lie in [0,1]");
      break;
    case GraphModel::barabasi_albert:
      require(s.m0 >= 1, ErrorKind::parameter, "barabasi_albert m0 must be >= 1");
      require(s.m0 < n, ErrorKind::parameter,
              "barabasi_albert m0 = " + std::to_string(s.m0) + " must be smaller than n = " + std::to_string(n));
      break;
    case GraphModel::k_out:
      require(s.out_degree >= 1 && s.out_degree < n, ErrorKind::parameter, "k_out degree must lie in [1, n)");
      break;
  }
}

// Boolean adjacency; adj(i,j) = 1 means j influences i.
inline Matrix random_support(const GeneratorSpec& s, Index n, CounterRng rng) {
  Matrix adj = Matrix::Zero(n, n);
  switch (s.model) {
    case GraphModel::erdos_renyi:
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
          if (s.p >= 1.0 || rng.uniform() < s.p) adj(i, j) = 1.0;
      break;
    case GraphModel::watts_strogatz: {
      const int half = s.k / 2;
      for (Index i = 0; i < n; ++i)
        for (int d = 1; d <= half; ++d) {
          const Index j = (i + d) % n;
          adj(i, j) = adj(j, i) = 1.0;
        }
      // Rewire each lattice edge (i, i+d) once, keeping the far endpoint
      // uniformly random among non-neighbours.
      for (int d = 1; d <= half; ++d)
        for (Index i = 0; i < n; ++i) {
          const Index j = (i + d) % n;
          if (!(rng.uniform() < s.rewire)) continue;
          if (adj(i, j) == 0.0) continue;
          std::vector<Index> cand;
          for (Index t = 0; t < n; ++t)
            if (t != i && adj(i, t) == 0.0) cand.push_back(t);
          if (cand.empty()) continue;
          const Index t = cand[rng.below(cand.size())];
          adj(i, j) = adj(j, i) = 0.0;
          adj(i, t) = adj(t, i) = 1.0;
        }
      break;
    }
    case GraphModel::barabasi_albert: {
      // The first new node links to all m0 seed nodes; afterwards targets
      // are drawn proportionally to degree via the repeated-endpoint list.
      const Index m0 = s.m0;
      std::vector<Index> ends;
      std::vector<Index> targets(static_cast<std::size_t>(m0));
      for (Index t = 0; t < m0; ++t) targets[static_cast<std::size_t>(t)] = t;
      for (Index v = m0; v < n; ++v) {
        for (Index t : targets) {
          adj(v, t) = adj(t, v) = 1.0;
          ends.push_back(v);
          ends.push_back(t);
        }
        std::set<Index> chosen;
        while (static_cast<Index>(chosen.size()) < m0) chosen.insert(ends[rng.below(ends.size())]);
        targets.assign(chosen.begin(), chosen.end());
      }
      break;
    }
    case GraphModel::k_out:
      for (Index i = 0; i < n; ++i) {
        std::vector<Index> others;
        for (Index j = 0; j < n; ++j)
          if (j != i) others.push_back(j);
        for (int d = 0; d < s.out_degree; ++d) {
          const std::size_t pick = d + rng.below(others.size() - static_cast<std::size_t>(d));
          std::swap(others[static_cast<std::size_t>(d)], others[pick]);
          adj(i, others[static_cast<std::size_t>(d)]) = 1.0;
        }
      }
      break;
  }
  return adj;
}

// Positive weights on the support followed by row normalisation; empty rows
// become a unit self-loop.
inline Matrix weights_on_support(const Matrix& adj, WeightScheme scheme, double lo, CounterRng rng) {
  const Index n = adj.rows();
  Matrix w = Matrix::Zero(n, n);
  std::uniform_real_distribution<double> ud(lo, 1.0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j)
      if (adj(i, j) != 0.0) w(i, j) = scheme == WeightScheme::equal ? 1.0 : ud(rng);
    const double s = w.row(i).sum();
    if (s == 0.0) {
      w(i, i) = 1.0;
    } else {
      w.row(i) /= s;
    }
  }
  return w;
}

inline Vector random_lambda(Index n, double lo, double hi, CounterRng rng) {
  Vector l(n);
  for (Index i = 0; i < n; ++i) l(i) = lo == hi ? lo : lo + (hi - lo) * rng.uniform();
  return l;
}

}  // namespace detail

// Deterministic in (spec, n, seed). Separate RNG substreams drive the
// support, the weights and lambda, so changing one leaves the others intact.
inline InfluenceNetwork generate_network(const GeneratorSpec& spec, Index n, std::uint64_t seed) {
  detail::check_spec(spec, n);
  const CounterRng root(seed);
  InfluenceNetwork net;
  const Matrix adj = detail::random_support(spec, n, root.split(1));
  net.W = detail::weights_on_support(adj, spec.weights, spec.weight_lo, root.split(2));
  net.lambda = detail::random_lambda(n, spec.lambda_lo, spec.lambda_hi, root.split(3));
  net.directed = spec.model == GraphModel::erdos_renyi || spec.model == GraphModel::k_out;
  return net;
}

// Continuous maximum-likelihood tail exponent with the half-integer
// correction for discrete data.
inline double fit_power_law(const std::vector<int>& degrees, int k_min) {
  require(k_min >= 1, ErrorKind::parameter, "k_min must be >= 1");
  std::vector<int> tail;
  for (int d : degrees)
    if (d >= k_min) tail.push_back(d);
  if (tail.size() < 10)
    throw Error(ErrorKind::numerical, "power-law fit needs at least 10 samples >= k_min, got " +
                                          std::to_string(tail.size()));
  if (std::all_of(tail.begin(), tail.end(), [&](int d) { return d == tail.front(); }))
    throw Error(ErrorKind::numerical, "power-law fit is degenerate: all tail degrees equal " +
                                          std::to_string(tail.front()));
  const double shift = static_cast<double>(k_min) - 0.5;
  double acc = 0.0;
  for (int d : tail) acc += std::log(static_cast<double>(d) / shift);
  return 1.0 + static_cast<double>(tail.size()) / acc;
}

// ---------------------------------------------------------------------------
// Multiplex networks

enum class MultiplexModel { common_component, common_support, independent };

inline const char* to_string(MultiplexModel m) {
  switch (m) {
    case MultiplexModel::common_component: return "common_component";
    case MultiplexModel::common_support: return "common_support";
    case MultiplexModel::independent: return "independent";
  }
  return "unknown";
}

struct MultiplexNetwork {
  std::vector<InfluenceNetwork> layers;
  MultiplexModel model_tag = MultiplexModel::independent;
  std::optional<InfluenceNetwork> base;

  Index n() const { return layers.empty() ? 0 : layers.front().n(); }
};

// Jaccard ratio |intersection| / |union| of the chosen layers' edge sets.
inline double pair_d_correlation(const MultiplexNetwork& mx, const std::vector<std::size_t>& dims,
                                 Diagnostics* diag = nullptr) {
  require(!dims.empty(), ErrorKind::parameter, "pair D-correlation needs at least one layer");
  for (std::size_t d : dims) require(d < mx.layers.size(), ErrorKind::parameter, "layer index out of range");
  const Index n = mx.layers[dims.front()].n();
  std::size_t inter = 0, uni = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      std::size_t hits = 0;
      for (std::size_t d : dims) {
        require(mx.layers[d].n() == n, ErrorKind::structural, "layers must share the node set");
        if (is_edge(mx.layers[d].W(i, j))) ++hits;
      }
      if (hits == dims.size()) ++inter;
      if (hits > 0) ++uni;
    }
  if (uni == 0) {
    warn(diag, "pair D-correlation of empty edge sets defined as 0");
    return 0.0;
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Perturbation added on top of the base network in each layer, before row
// renormalisation. Under common_support only the weights change.
struct InnovationSpec {
  double scale = 0.3;    // magnitude of innovation weights relative to [weight_lo,1] draws
  double density = 0.05; // common_component: probability of a new innovation edge per off-diagonal pair
};

inline MultiplexNetwork build_multiplex(MultiplexModel tag, const GeneratorSpec& base, const InnovationSpec& innov,
                                        Index n, std::size_t n_layers, std::uint64_t seed) {
  require(n_layers >= 1, ErrorKind::parameter, "multiplex needs at least one layer");
  require(innov.scale >= 0.0 && innov.density >= 0.0 && innov.density <= 1.0, ErrorKind::parameter,
          "innovation scale must be >= 0 and density in [0,1]");
  const CounterRng root(seed);
  MultiplexNetwork mx;
  mx.model_tag = tag;
  mx.layers.resize(n_layers);
  const InfluenceNetwork shared = generate_network(base, n, root.split(0)());
  const Matrix adj = shared.W.unaryExpr([](double v) { return is_edge(v) ? 1.0 : 0.0; });

  auto make_layer = [&](std::size_t l) {
    CounterRng rng = root.split(100 + l);
    InfluenceNetwork layer;
    layer.directed = shared.directed;
    layer.lambda = shared.lambda;
    switch (tag) {
      case MultiplexModel::independent:
        layer = generate_network(base, n, rng());
        break;
      case MultiplexModel::common_support:
        layer.W = detail::weights_on_support(adj, WeightScheme::uniform, base.weight_lo, rng.split(1));
        break;
      case MultiplexModel::common_component: {
        Matrix w = shared.W;
        CounterRng r = rng.split(2);
        for (Index i = 0; i < n; ++i)
          for (Index j = 0; j < n; ++j) {
            const bool pick = i != j && r.uniform() < innov.density;
            const double v = r.uniform();
            if (pick && innov.scale > 0.0) w(i, j) += innov.scale * v;
          }
        for (Index i = 0; i < n; ++i) w.row(i) /= w.row(i).sum();
        layer.W = w;
        break;
      }
    }
    mx.layers[l] = std::move(layer);
  };
  // Layers are independent draws from split streams; the result does not
  // depend on the thread schedule.
  std::vector<std::thread> pool;
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  if (hw > 1 && n_layers > 1) {
    for (std::size_t l = 0; l < n_layers; ++l) pool.emplace_back(make_layer, l);
    for (auto& t : pool) t.join();
  } else {
    for (std::size_t l = 0; l < n_layers; ++l) make_layer(l);
  }
  if (tag != MultiplexModel::independent) mx.base = shared;
  return mx;
}

// Checks the declared correlation model; returns violated conditions.
inline ValidationReport validate_multiplex(const MultiplexNetwork& mx, double tol = 1e-9) {
  ValidationReport rep;
  if (mx.layers.empty()) {
    rep.violations.push_back("multiplex has no layers");
    return rep;
  }
  const Index n = mx.n();
  for (std::size_t l = 0; l < mx.layers.size(); ++l) {
    if (mx.layers[l].n() != n) {
      rep.violations.push_back("layer " + std::to_string(l) + " has a different node count");
      continue;
    }
    for (const auto& v : validate_network(mx.layers[l], tol).violations)
      rep.violations.push_back("layer " + std::to_string(l) + ": " + v);
  }
  if (!rep.ok()) return rep;
  if (mx.model_tag == MultiplexModel::common_support) {
    const auto s0 = support(mx.layers.front().W);
    for (std::size_t l = 1; l < mx.layers.size(); ++l)
      if (support(mx.layers[l].W) != s0)
        rep.violations.push_back("layer " + std::to_string(l) + " support differs from layer 0");
  }
  if (mx.model_tag == MultiplexModel::common_component && mx.base) {
    for (std::size_t l = 0; l < mx.layers.size(); ++l) {
      // Innovation only adds weight, so each layer row is a rescaled base row
      // plus a nonnegative remainder.
      for (Index i = 0; i < n; ++i) {
        const Eigen::RowVectorXd b = mx.base->W.row(i);
        const Eigen::RowVectorXd w = mx.layers[l].W.row(i);
        double scale = kInf;
        for (Index j = 0; j < n; ++j)
          if (is_edge(b(j))) scale = std::min(scale, w(j) / b(j));
        if (!std::isfinite(scale) || (w - scale * b).minCoeff() < -tol) {
          rep.violations.push_back("layer " + std::to_string(l) + " row " + std::to_string(i) +
                                   " is not base plus a nonnegative innovation");
          break;
        }
      }
    }
  }
  return rep;
}

}  // namespace opinet
