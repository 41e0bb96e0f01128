#pragma once

// Opinion dynamics: Friedkin-Johnsen and DeGroot iterations, multi-issue
// belief systems, reflected appraisal, randomized gossip and noisy multiplex
// dynamics, together with their closed-form equilibria and moments.

#include "opinet/netgraph.hpp"
#include "opinet/numkit/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace opinet {

struct ModelInfo {
  std::string kind;
  std::vector<std::pair<std::string, double>> params;
  std::optional<std::uint64_t> seed;
};

struct OpinionTrajectory {
  std::vector<Matrix> X;           // stored states, X.front() is X(0)
  std::vector<std::int64_t> steps; // step index of each stored state
  ModelInfo model;
  std::optional<std::int64_t> converged_at;

  std::size_t size() const { return X.size(); }
  const Matrix& initial() const { return X.front(); }
  const Matrix& final_state() const { return X.back(); }
};

struct SimOptions {
  std::int64_t stride = 1;          // store every stride-th state (the last one is always kept)
  bool stop_at_convergence = false; // end early once the detector fires
};

// Fires after three consecutive steps with |X(k+1) - X(k)|_inf < 1e-10.
class ConvergenceDetector {
 public:
  bool update(double step_change) {
    run_ = step_change < 1e-10 ? run_ + 1 : 0;
    return run_ >= 3;
  }

 private:
  int run_ = 0;
};

namespace detail {

inline void record(OpinionTrajectory& t, const Matrix& x, std::int64_t k, std::int64_t stride, bool last) {
  if (k % stride == 0 || last) {
    t.X.push_back(x);
    t.steps.push_back(k);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stability

struct StabilityReport {
  bool schur_stable = false;
  double spectral_radius = 0.0;
  std::vector<Index> stubborn_set;       // {i : lambda_i < 1}
  std::vector<Index> unreachable_nodes;  // nodes with no walk into the stubborn set
};

inline constexpr double kStabilityMargin = 1e-10;

// Nodes that reach `targets` by a walk along edges i -> j with w_ij != 0.
inline std::vector<bool> reaches(const Matrix& w, const std::vector<bool>& targets) {
  const Index n = w.rows();
  std::vector<bool> hit = targets;
  std::deque<Index> queue;
  for (Index i = 0; i < n; ++i)
    if (hit[static_cast<std::size_t>(i)]) queue.push_back(i);
  while (!queue.empty()) {
    const Index j = queue.front();
    queue.pop_front();
    for (Index i = 0; i < n; ++i) {
      if (!hit[static_cast<std::size_t>(i)] && is_edge(w(i, j))) {
        hit[static_cast<std::size_t>(i)] = true;
        queue.push_back(i);
      }
    }
  }
  return hit;
}

// Graph criterion (every node is, or walks to, a node with lambda < 1) and
// the numerical spectral radius of Lambda W. The criterion is authoritative
// when the radius sits within 1e-8 of one.
inline StabilityReport is_schur_stable(const InfluenceNetwork& net) {
  require_valid(net);
  const Index n = net.n();
  StabilityReport rep;
  std::vector<bool> stubborn(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    stubborn[static_cast<std::size_t>(i)] = net.lambda(i) < 1.0;
    if (net.lambda(i) < 1.0) rep.stubborn_set.push_back(i);
  }
  const auto hit = reaches(net.W, stubborn);
  for (Index i = 0; i < n; ++i)
    if (!hit[static_cast<std::size_t>(i)]) rep.unreachable_nodes.push_back(i);
  const bool criterion = rep.unreachable_nodes.empty();
  rep.spectral_radius = numkit::spectral_radius(net.lambda_w());
  const bool numeric = rep.spectral_radius < 1.0 - kStabilityMargin;
  if (criterion != numeric && std::abs(rep.spectral_radius - 1.0) >= 1e-8) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "walk criterion says %s but spectral radius is %.17g",
                  criterion ? "stable" : "unstable", rep.spectral_radius);
    throw Error(ErrorKind::internal, buf);
  }
  rep.schur_stable = criterion;
  return rep;
}

inline void require_stable(const InfluenceNetwork& net) {
  const auto rep = is_schur_stable(net);
  if (!rep.schur_stable) {
    std::string msg = "Lambda W is not Schur stable (spectral radius " +
                      detail::fmt_real(rep.spectral_radius) + "); nodes without a walk to a node with lambda < 1:";
    for (std::size_t k = 0; k < rep.unreachable_nodes.size() && k < 10; ++k)
      msg += " " + std::to_string(rep.unreachable_nodes[k]);
    throw Error(ErrorKind::stability, msg);
  }
}

// ---------------------------------------------------------------------------
// Friedkin-Johnsen / DeGroot

inline OpinionTrajectory simulate_fj(const InfluenceNetwork& net, const Matrix& x0, std::int64_t steps,
                                     const SimOptions& opt = {}) {
  require_valid(net);
  require(x0.rows() == net.n(), ErrorKind::structural, "X0 must have one row per agent");
  require(steps >= 0 && opt.stride >= 1, ErrorKind::parameter, "steps must be >= 0 and stride >= 1");
  OpinionTrajectory t;
  t.model.kind = (net.lambda.array() == 1.0).all() ? "degroot" : "friedkin_johnsen";
  const Matrix a = net.lambda_w();
  const Matrix anchor = (Vector::Ones(net.n()) - net.lambda).asDiagonal() * x0;
  Matrix x = x0;
  detail::record(t, x, 0, opt.stride, steps == 0);
  ConvergenceDetector conv;
  for (std::int64_t k = 1; k <= steps; ++k) {
    Matrix next = a * x + anchor;
    const bool done = conv.update((next - x).cwiseAbs().maxCoeff());
    x = std::move(next);
    if (done && !t.converged_at) t.converged_at = k;
    const bool stop = done && opt.stop_at_convergence;
    detail::record(t, x, k, opt.stride, k == steps || stop);
    if (stop) break;
  }
  return t;
}

inline OpinionTrajectory simulate_degroot(const Matrix& w, const Matrix& x0, std::int64_t steps,
                                          const SimOptions& opt = {}) {
  InfluenceNetwork net;
  net.W = w;
  net.lambda = Vector::Ones(w.rows());
  return simulate_fj(net, x0, steps, opt);
}

struct Equilibrium {
  Matrix X;       // limiting opinions V X0
  Matrix V;       // control matrix (I - Lambda W)^{-1} (I - Lambda)
  double rcond;   // reciprocal condition estimate of I - Lambda W
};

inline Matrix control_matrix(const InfluenceNetwork& net, double* rcond_out = nullptr) {
  require_stable(net);
  const Index n = net.n();
  const Matrix m = Matrix::Identity(n, n) - net.lambda_w();
  const Eigen::PartialPivLU<Matrix> lu(m);
  const double rc = lu.rcond();
  if (rcond_out) *rcond_out = rc;
  if (!(rc > 1e-13))
    throw Error(ErrorKind::numerical,
                "I - Lambda W is numerically singular (reciprocal condition " + detail::fmt_real(rc) + ")");
  return lu.solve(Matrix((Vector::Ones(n) - net.lambda).asDiagonal()));
}

inline Equilibrium fj_equilibrium(const InfluenceNetwork& net, const Matrix& x0) {
  require(x0.rows() == net.n(), ErrorKind::structural, "X0 must have one row per agent");
  Equilibrium eq;
  eq.V = control_matrix(net, &eq.rcond);
  eq.X = eq.V * x0;
  return eq;
}

// ---------------------------------------------------------------------------
// Belief systems: X(k+1) = Lambda W X(k) C' + (I - Lambda) X(0)

inline OpinionTrajectory simulate_belief_system(const InfluenceNetwork& net, const Matrix& c, const Matrix& x0,
                                                std::int64_t steps, Diagnostics* diag = nullptr,
                                                const SimOptions& opt = {}) {
  require_valid(net);
  require(c.rows() == c.cols() && c.rows() == x0.cols(), ErrorKind::structural,
          "dependency matrix must be m x m for m issues");
  require(x0.rows() == net.n(), ErrorKind::structural, "X0 must have one row per agent");
  require(steps >= 0 && opt.stride >= 1, ErrorKind::parameter, "steps must be >= 0 and stride >= 1");
  for (Index l = 0; l < c.rows(); ++l) {
    const double s = c.row(l).cwiseAbs().sum();
    if (s > 1.0 + 1e-12)
      warn(diag, "issue-dependency row " + std::to_string(l) + " has absolute sum " + detail::fmt_real(s) +
                     " > 1; contractivity not guaranteed");
  }
  OpinionTrajectory t;
  t.model.kind = "belief_system";
  const Matrix a = net.lambda_w();
  const Matrix anchor = (Vector::Ones(net.n()) - net.lambda).asDiagonal() * x0;
  const Matrix ct = c.transpose();
  const double bound = 1e6 * (1.0 + (x0.size() ? x0.cwiseAbs().maxCoeff() : 0.0));
  Matrix x = x0;
  detail::record(t, x, 0, opt.stride, steps == 0);
  ConvergenceDetector conv;
  for (std::int64_t k = 1; k <= steps; ++k) {
    Matrix next = a * x * ct + anchor;
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > bound)
      throw Error(ErrorKind::numerical, "belief-system iteration diverged at step " + std::to_string(k));
    const bool done = conv.update((next - x).cwiseAbs().maxCoeff());
    x = std::move(next);
    if (done && !t.converged_at) t.converged_at = k;
    const bool stop = done && opt.stop_at_convergence;
    detail::record(t, x, k, opt.stride, k == steps || stop);
    if (stop) break;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Reflected appraisal over a sequence of issues

struct AppraisalStep {
  Matrix W;  // W(s) = diag(c(s)) + (I - diag(c(s))) C
  Vector c;  // self-weights entering issue s; sums to 1
};

inline std::vector<AppraisalStep> simulate_reflected_appraisal(const Matrix& c_rel, const Vector& c0,
                                                               std::size_t n_issues) {
  const Index n = c_rel.rows();
  require(c_rel.cols() == n && c0.size() == n, ErrorKind::structural, "relative interaction matrix must be n x n");
  for (Index i = 0; i < n; ++i) {
    require(std::abs(c_rel(i, i)) < kStructuralZero, ErrorKind::parameter,
            "relative interaction matrix must have a zero diagonal");
    require(std::abs(c_rel.row(i).sum() - 1.0) <= 1e-9 && c_rel.row(i).minCoeff() >= 0.0, ErrorKind::parameter,
            "relative interaction matrix rows must be stochastic");
    require(c0(i) > 0.0 && c0(i) < 1.0, ErrorKind::parameter, "initial self-weights must lie in (0,1)");
  }
  require(std::abs(c0.sum() - 1.0) <= 1e-9, ErrorKind::parameter, "initial self-weights must sum to 1");
  std::vector<AppraisalStep> out;
  out.reserve(n_issues);
  Vector c = c0;
  const Matrix eye = Matrix::Identity(n, n);
  for (std::size_t s = 0; s < n_issues; ++s) {
    AppraisalStep st;
    st.c = c;
    const Vector lam = Vector::Ones(n) - c;
    st.W = Matrix(c.asDiagonal()) + lam.asDiagonal() * c_rel;
    const Matrix m = eye - lam.asDiagonal() * st.W;
    const Eigen::PartialPivLU<Matrix> lu(m);
    if (!(lu.rcond() > 1e-13))
      throw Error(ErrorKind::numerical, "singular solve in reflected appraisal at issue " + std::to_string(s));
    const Matrix v = lu.solve(Matrix(c.asDiagonal()));
    out.push_back(std::move(st));
    c = v.colwise().sum().transpose() / static_cast<double>(n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Randomized gossip Friedkin-Johnsen

struct GossipParams {
  Index activation_size = 1;
  std::uint64_t seed = 0;

  double beta(Index n) const { return static_cast<double>(activation_size) / static_cast<double>(n); }
};

// Neighbourhoods N_i = {j != i : w_ij != 0}.
inline std::vector<std::vector<Index>> gossip_neighbours(const Matrix& w) {
  const Index n = w.rows();
  std::vector<std::vector<Index>> nb(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j)
      if (j != i && is_edge(w(i, j))) nb[static_cast<std::size_t>(i)].push_back(j);
    if (nb[static_cast<std::size_t>(i)].empty())
      throw Error(ErrorKind::structural, "agent " + std::to_string(i) + " has no gossip neighbour");
  }
  return nb;
}

// Step-by-step simulator: each step activates a uniformly random subset of
// fixed size, and every active agent averages with one uniformly chosen
// neighbour against the state at the start of the step.
class GossipSimulator {
 public:
  GossipSimulator(const InfluenceNetwork& net, const Vector& x0, const GossipParams& p)
      : w_(net.W), lambda_(net.lambda), x0_(x0), x_(x0), nb_(gossip_neighbours(net.W)), rng_(p.seed),
        size_(p.activation_size) {
    require_valid(net);
    require(x0.size() == net.n(), ErrorKind::structural, "x0 must have one entry per agent");
    require(size_ >= 1 && size_ <= net.n(), ErrorKind::parameter, "activation size must lie in [1, n]");
    order_.resize(static_cast<std::size_t>(net.n()));
    for (Index i = 0; i < net.n(); ++i) order_[static_cast<std::size_t>(i)] = i;
  }

  const Vector& state() const { return x_; }
  std::int64_t step_index() const { return k_; }

  void step() {
    const std::size_t n = order_.size();
    // Partial Fisher-Yates: the first size_ entries form a uniform subset.
    for (std::size_t a = 0; a < static_cast<std::size_t>(size_); ++a) {
      const std::size_t pick = a + rng_.below(n - a);
      std::swap(order_[a], order_[pick]);
    }
    prev_ = x_;
    for (std::size_t a = 0; a < static_cast<std::size_t>(size_); ++a) {
      const Index i = order_[a];
      const auto& nb = nb_[static_cast<std::size_t>(i)];
      const Index th = nb[rng_.below(nb.size())];
      const double wi = w_(i, th);
      x_(i) = lambda_(i) * ((1.0 - wi) * prev_(i) + wi * prev_(th)) + (1.0 - lambda_(i)) * x0_(i);
    }
    ++k_;
  }

 private:
  Matrix w_;
  Vector lambda_, x0_, x_, prev_;
  std::vector<std::vector<Index>> nb_;
  CounterRng rng_;
  Index size_;
  std::vector<Index> order_;
  std::int64_t k_ = 0;
};

inline OpinionTrajectory simulate_gossip_fj(const InfluenceNetwork& net, const Vector& x0, const GossipParams& p,
                                            std::int64_t steps, const SimOptions& opt = {}) {
  require(steps >= 0 && opt.stride >= 1, ErrorKind::parameter, "steps must be >= 0 and stride >= 1");
  GossipSimulator sim(net, x0, p);
  OpinionTrajectory t;
  t.model.kind = "gossip_fj";
  t.model.params = {{"activation_size", static_cast<double>(p.activation_size)},
                    {"beta", p.beta(net.n())}};
  t.model.seed = p.seed;
  t.X.reserve(static_cast<std::size_t>(steps / opt.stride + 2));
  detail::record(t, sim.state(), 0, opt.stride, steps == 0);
  for (std::int64_t k = 1; k <= steps; ++k) {
    sim.step();
    detail::record(t, sim.state(), k, opt.stride, k == steps);
  }
  return t;
}

struct ExpectedGossip {
  Matrix Gamma;   // E[Gamma(k)] = (1-beta) I + beta Lambda (I - D^{-1}(I - W))
  Vector b;       // E[b(k)] = beta (I - Lambda) x(0)
  Vector x_mean;  // (I - Gamma)^{-1} b
};

inline ExpectedGossip expected_gossip_dynamics(const InfluenceNetwork& net, double beta, const Vector& x0) {
  require_valid(net);
  require(beta > 0.0 && beta <= 1.0, ErrorKind::parameter, "beta must lie in (0,1]");
  require(x0.size() == net.n(), ErrorKind::structural, "x0 must have one entry per agent");
  const Index n = net.n();
  const auto nb = gossip_neighbours(net.W);
  Vector dinv(n);
  for (Index i = 0; i < n; ++i) dinv(i) = 1.0 / static_cast<double>(nb[static_cast<std::size_t>(i)].size());
  const Matrix eye = Matrix::Identity(n, n);
  ExpectedGossip g;
  g.Gamma = (1.0 - beta) * eye + beta * net.lambda.asDiagonal() * (eye - dinv.asDiagonal() * (eye - net.W));
  g.b = beta * (Vector::Ones(n) - net.lambda).cwiseProduct(x0);
  const double rho = numkit::spectral_radius(g.Gamma);
  if (!(rho < 1.0 - kStabilityMargin))
    throw Error(ErrorKind::stability, "expected gossip matrix has spectral radius " + detail::fmt_real(rho));
  g.x_mean = (eye - g.Gamma).partialPivLu().solve(g.b);
  return g;
}

// Exact stationary mean and uncentered lag-0 moment E[x x'] of the gossip
// chain, by iterating the second-moment map to its fixed point.
struct GossipMoments {
  Vector mean;
  Matrix second;  // E[x(inf) x(inf)']
};

inline GossipMoments gossip_stationary_moments(const InfluenceNetwork& net, Index activation_size, const Vector& x0,
                                               double tol = 1e-14, int max_iter = 200000) {
  const Index n = net.n();
  const auto g = expected_gossip_dynamics(net, static_cast<double>(activation_size) / static_cast<double>(n), x0);
  const auto nb = gossip_neighbours(net.W);
  const double nn = static_cast<double>(n);
  const double a = static_cast<double>(activation_size);
  const double p1 = a / nn;
  const double p11 = n > 1 ? a * (a - 1.0) / (nn * (nn - 1.0)) : 0.0;
  // Row i of Gamma(k) when active equals the mean row r_i with per-neighbour
  // variation; b_i = (1 - lambda_i) x0_i when active.
  Matrix mean_row = Matrix::Zero(n, n);  // E[g_i | active]
  for (Index i = 0; i < n; ++i) {
    const auto& nbi = nb[static_cast<std::size_t>(i)];
    for (Index th : nbi) {
      const double wi = net.W(i, th);
      mean_row(i, i) += net.lambda(i) * (1.0 - wi) / static_cast<double>(nbi.size());
      mean_row(i, th) += net.lambda(i) * wi / static_cast<double>(nbi.size());
    }
  }
  const Vector bi = (Vector::Ones(n) - net.lambda).cwiseProduct(x0);
  const Vector mu = g.x_mean;
  Matrix s = mu * mu.transpose();
  for (int it = 0; it < max_iter; ++it) {
    Matrix next(n, n);
    // Off-diagonal: rows independent given the activation pattern.
    const Matrix m_act = mean_row * s;   // E[g_i|act]' S, per row
    const Vector gm = mean_row * mu;      // E[g_i|act]' mu
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (i == j) continue;
        // (active_i, active_j) patterns.
        const double p10 = p1 - p11, p00 = 1.0 - 2.0 * p1 + p11;
        const double both = m_act.row(i).dot(mean_row.row(j)) + bi(i) * gm(j) + gm(i) * bi(j) + bi(i) * bi(j);
        const double only_i = m_act(i, j) + bi(i) * mu(j);
        const double only_j = m_act(j, i) + bi(j) * mu(i);
        next(i, j) = p11 * both + p10 * (only_i + only_j) + p00 * s(i, j);
      }
      // Diagonal: average over the neighbour choice inside the square.
      const auto& nbi = nb[static_cast<std::size_t>(i)];
      double act = 0.0;
      for (Index th : nbi) {
        const double wi = net.W(i, th);
        const double ci = net.lambda(i) * (1.0 - wi), ct = net.lambda(i) * wi;
        const double quad = ci * ci * s(i, i) + 2.0 * ci * ct * s(i, th) + ct * ct * s(th, th);
        const double lin = ci * mu(i) + ct * mu(th);
        act += quad + 2.0 * bi(i) * lin + bi(i) * bi(i);
      }
      act /= static_cast<double>(nbi.size());
      next(i, i) = p1 * act + (1.0 - p1) * s(i, i);
    }
    const double change = (next - s).cwiseAbs().maxCoeff();
    s = std::move(next);
    if (change < tol * (1.0 + s.cwiseAbs().maxCoeff())) return {mu, s};
  }
  throw Error(ErrorKind::numerical, "gossip second-moment iteration did not converge");
}

// Running means x_bar(k) = (1/(k+1)) sum_{l <= k} x(l) over stored states.
inline std::vector<Matrix> cesaro_average(const OpinionTrajectory& t) {
  require(!t.X.empty(), ErrorKind::parameter, "empty trajectory");
  std::vector<Matrix> out;
  out.reserve(t.X.size());
  Matrix acc = Matrix::Zero(t.X.front().rows(), t.X.front().cols());
  for (std::size_t k = 0; k < t.X.size(); ++k) {
    acc += t.X[k];
    out.push_back(acc / static_cast<double>(k + 1));
  }
  return out;
}

inline Matrix cesaro_limit(const OpinionTrajectory& t) {
  require(!t.X.empty(), ErrorKind::parameter, "empty trajectory");
  Matrix acc = Matrix::Zero(t.X.front().rows(), t.X.front().cols());
  for (const auto& x : t.X) acc += x;
  return acc / static_cast<double>(t.X.size());
}

// Sigma[l+1] = Sigma[l] Gamma' + x_mean b', starting from Sigma[0] = sigma0.
inline std::vector<Matrix> cross_correlation_recursion(const Matrix& gamma, const Vector& b, const Vector& x_mean,
                                                       const Matrix& sigma0, std::size_t max_lag) {
  const Index n = gamma.rows();
  require(gamma.cols() == n && b.size() == n && x_mean.size() == n && sigma0.rows() == n && sigma0.cols() == n,
          ErrorKind::structural, "recursion inputs must share dimension n");
  std::vector<Matrix> out;
  out.reserve(max_lag + 1);
  out.push_back(sigma0);
  const Matrix gt = gamma.transpose();
  const Matrix drift = x_mean * b.transpose();
  for (std::size_t l = 0; l < max_lag; ++l) out.push_back(out.back() * gt + drift);
  return out;
}

// ---------------------------------------------------------------------------
// Noisy multiplex dynamics: x(k+1) = Lambda W x(k) + (I - Lambda) u + eta(k)

// Symmetric square root of a covariance; rejects matrices that are not
// positive semidefinite.
inline Matrix covariance_sqrt(const Matrix& q) {
  require(q.rows() == q.cols(), ErrorKind::structural, "covariance must be square");
  require(is_symmetric(q, 1e-12 * (1.0 + q.cwiseAbs().maxCoeff())), ErrorKind::parameter,
          "noise covariance must be symmetric");
  if (q.size() == 0) return q;
  const Eigen::SelfAdjointEigenSolver<Matrix> es(q);
  const Vector ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  require(ev.minCoeff() >= -1e-10 * scale, ErrorKind::parameter, "noise covariance must be positive semidefinite");
  return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

// Solves P = A P A' + Q by squaring (converges quadratically for rho(A) < 1).
inline Matrix solve_stein(const Matrix& a, const Matrix& q) {
  Matrix p = q, ak = a;
  for (int it = 0; it < 64; ++it) {
    const Matrix inc = ak * p * ak.transpose();
    p += inc;
    ak = ak * ak;
    if (inc.cwiseAbs().maxCoeff() <= 1e-16 * (1.0 + p.cwiseAbs().maxCoeff())) return p;
  }
  throw Error(ErrorKind::numerical, "Stein equation did not converge");
}

struct LinearMoments {
  Vector mean;      // (I - A)^{-1} c
  Matrix second;    // uncentered E[x x'] solving S = A S A' + A mu c' + c mu' A' + c c' + Q
  Matrix centered;  // S - mu mu'
};

inline LinearMoments stationary_moments(const Matrix& a, const Vector& c, const Matrix& q) {
  const Index n = a.rows();
  require(numkit::spectral_radius(a) < 1.0 - kStabilityMargin, ErrorKind::stability,
          "stationary moments need a Schur stable system matrix");
  LinearMoments m;
  m.mean = (Matrix::Identity(n, n) - a).partialPivLu().solve(c);
  m.centered = solve_stein(a, q);
  m.second = m.centered + m.mean * m.mean.transpose();
  return m;
}

// One trajectory per layer; u holds one column per layer and doubles as the
// initial state. Noise is fresh N(0, Q) each step, from per-layer substreams.
inline std::vector<OpinionTrajectory> simulate_multiplex_fj(const MultiplexNetwork& mx, const Matrix& u,
                                                            const Matrix& q_eta, std::int64_t steps,
                                                            std::uint64_t seed, const SimOptions& opt = {}) {
  const Index n = mx.n();
  const std::size_t layers = mx.layers.size();
  require(u.rows() == n && static_cast<std::size_t>(u.cols()) == layers, ErrorKind::structural,
          "u must be n x (number of layers)");
  require(q_eta.rows() == n && q_eta.cols() == n, ErrorKind::structural, "noise covariance must be n x n");
  require(steps >= 0 && opt.stride >= 1, ErrorKind::parameter, "steps must be >= 0 and stride >= 1");
  for (const auto& l : mx.layers) require_stable(l);
  const Matrix root_q = covariance_sqrt(q_eta);
  const bool noisy = q_eta.cwiseAbs().maxCoeff() > 0.0;
  const CounterRng root(seed);
  std::vector<OpinionTrajectory> out(layers);
  auto run = [&](std::size_t s) {
    const auto& net = mx.layers[s];
    const Matrix a = net.lambda_w();
    const Vector anchor = (Vector::Ones(n) - net.lambda).cwiseProduct(u.col(static_cast<Index>(s)));
    CounterRng rng = root.split(s);
    std::normal_distribution<double> nd;
    OpinionTrajectory t;
    t.model.kind = "multiplex_fj";
    t.model.params = {{"layer", static_cast<double>(s)}};
    t.model.seed = seed;
    Vector x = u.col(static_cast<Index>(s));
    Vector e(n);
    detail::record(t, x, 0, opt.stride, steps == 0);
    for (std::int64_t k = 1; k <= steps; ++k) {
      Vector next = a * x + anchor;
      if (noisy) {
        for (Index i = 0; i < n; ++i) e(i) = nd(rng);
        next += root_q * e;
      }
      x = std::move(next);
      detail::record(t, x, k, opt.stride, k == steps);
    }
    out[s] = std::move(t);
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (hw > 1 && layers > 1) {
    std::vector<std::thread> pool;
    for (std::size_t s = 0; s < layers; ++s) pool.emplace_back(run, s);
    for (auto& th : pool) th.join();
  } else {
    for (std::size_t s = 0; s < layers; ++s) run(s);
  }
  return out;
}

}  // namespace opinet
