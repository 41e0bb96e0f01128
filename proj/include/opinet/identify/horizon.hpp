#pragma once

// Influence-matrix recovery from full-state opinion data: finite-horizon
// trajectories and infinite-horizon (equilibrium) snapshots.

#include "opinet/dynamics.hpp"
#include "opinet/identify/report.hpp"
#include "opinet/numkit/l1.hpp"

#include <cmath>
#include <string>

namespace opinet {

struct HorizonOptions {
  double eps = 0.0;                // componentwise residual tolerance (0: equality)
  bool nonneg = false;             // infinite horizon: impose w >= 0
  double support_threshold = 1e-8; // |W_ij| above this enters the recovered support
  numkit::LpOptions lp{};
};

namespace detail {

inline EdgeSet threshold_support(const Matrix& w, double thr) {
  EdgeSet s;
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j)
      if (std::abs(w(i, j)) > thr) s.insert({i, j});
  return s;
}

inline numkit::SolveResult solve_row(const numkit::L1Problem& p, const HorizonOptions& opt, Index row,
                                     const char* what) {
  const auto r = numkit::solve_l1(p, opt.lp);
  if (r.status == numkit::SolveStatus::infeasible) {
    const double need = numkit::minimal_feasible_tolerance(p, opt.lp);
    throw InfeasibleError(std::string(what) + ": row " + std::to_string(row) + " is infeasible at eps " +
                              detail::fmt_real(p.tolerance) + "; smallest feasible eps is " + detail::fmt_real(need),
                          need);
  }
  require(r.status == numkit::SolveStatus::optimal, ErrorKind::numerical,
          std::string(what) + ": row " + std::to_string(row) + " hit the simplex iteration cap");
  return r;
}

inline void require_nonconsensus(const Matrix& x0) {
  for (Index l = 0; l < x0.cols(); ++l) {
    const double spread = x0.col(l).maxCoeff() - x0.col(l).minCoeff();
    require(spread > 1e-12 * (1.0 + x0.col(l).cwiseAbs().maxCoeff()), ErrorKind::identifiability,
            "initial opinions of issue " + std::to_string(l) +
                " are a consensus; every stochastic matrix explains such data");
  }
}

// Lambda close to I pulls X(inf) towards consensus, which makes X(inf)' nearly
// rank one and the recovery ill-conditioned.
inline void warn_near_consensus(const Matrix& x0, const Matrix& xinf, Diagnostics* diag) {
  for (Index l = 0; l < x0.cols(); ++l) {
    const double s0 = x0.col(l).maxCoeff() - x0.col(l).minCoeff();
    const double s1 = xinf.col(l).maxCoeff() - xinf.col(l).minCoeff();
    if (s1 < 1e-3 * s0) {
      warn(diag, "issue " + std::to_string(l) +
                     ": equilibrium is close to consensus (Lambda near I); recovery is ill-conditioned");
      return;
    }
  }
}

// Rows with lambda_i == 0 carry no information about w_i; they are reported
// as stubborn self-loops.
inline Matrix unscale_rows(const Matrix& a, const Vector& lambda) {
  Matrix w = Matrix::Zero(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    if (lambda(i) > 1e-12)
      w.row(i) = a.row(i) / lambda(i);
    else
      w(i, i) = 1.0;
  }
  return w;
}

}  // namespace detail

// Sparse regression over a noiseless or eps-noisy trajectory
//   X(k+1) = A X(k) + B X(0),  A = Lambda W >= 0,  B = I - Lambda.
// Each row minimises the off-diagonal l1 mass of A.
inline EstimationReport identify_finite_horizon(const OpinionTrajectory& traj,
                                                const std::optional<Vector>& lambda_known,
                                                const HorizonOptions& opt = {}) {
  require(traj.X.size() >= 2, ErrorKind::parameter, "finite-horizon identification needs at least two states");
  for (std::size_t t = 1; t < traj.steps.size(); ++t)
    require(traj.steps[t] == traj.steps[t - 1] + 1, ErrorKind::structural,
            "finite-horizon identification needs consecutive states (stride 1)");
  require(opt.eps >= 0.0, ErrorKind::parameter, "eps must be nonnegative");
  const Matrix& x0 = traj.X.front();
  const Index n = x0.rows(), m = x0.cols();
  if (lambda_known) {
    require(lambda_known->size() == n, ErrorKind::structural, "lambda length must equal n");
    require(lambda_known->minCoeff() >= 0.0 && lambda_known->maxCoeff() <= 1.0, ErrorKind::parameter,
            "lambda must lie in [0,1]");
  }
  const Index K = static_cast<Index>(traj.X.size()) - 1;

  EstimationReport rep;
  rep.estimator = "finite_horizon";
  Matrix a(n, n);
  Vector b(n);
  for (Index i = 0; i < n; ++i) {
    numkit::L1Problem p;
    p.phi.resize(K * m, n + 1);
    p.psi.resize(K * m);
    for (Index k = 0; k < K; ++k)
      for (Index l = 0; l < m; ++l) {
        const Index r = k * m + l;
        p.phi.row(r).head(n) = traj.X[static_cast<std::size_t>(k)].col(l).transpose();
        p.phi(r, n) = x0(i, l);
        p.psi(r) = traj.X[static_cast<std::size_t>(k + 1)](i, l);
      }
    p.sum_constraint = 1.0;
    p.nonneg = true;
    p.lower = Vector::Zero(n + 1);
    p.upper = Vector::Constant(n + 1, kInf);
    p.upper(n) = 1.0;
    if (lambda_known) p.lower(n) = p.upper(n) = 1.0 - (*lambda_known)(i);
    // A constant x_i is explained equally by a_ii or b_i; the small self-weight
    // cost settles that tie on the anchored (stubborn) reading.
    p.weight_mask = Vector::Ones(n + 1);
    p.weight_mask(i) = 1e-6;
    p.weight_mask(n) = 0.0;
    p.tolerance = opt.eps;
    const auto r = detail::solve_row(p, opt, i, "finite-horizon identification");
    a.row(i) = r.w.head(n).transpose();
    b(i) = r.w(n);
    rep.solver_log.push_back("row " + std::to_string(i) + ": " + r.log + ", residual " + detail::fmt_real(r.residual));
  }
  const Vector lambda = lambda_known ? *lambda_known : Vector(Vector::Ones(n) - b);
  rep.Gamma_hat = a;
  rep.Lambda_hat = lambda;
  rep.W_hat = detail::unscale_rows(a, lambda);
  rep.support_threshold = opt.support_threshold;
  rep.support = detail::threshold_support(rep.W_hat, opt.support_threshold);
  return rep;
}

// Known-Lambda equilibrium recovery: per row j,
//   min |w_j|_1  s.t.  X(inf)' w_j = Lambda_j^{-1} (x_j(inf) - (1 - lambda_j) x_j(0)),  1' w_j = 1.
inline EstimationReport identify_infinite_horizon(const Matrix& x0, const Matrix& xinf, const Vector& lambda,
                                                  const HorizonOptions& opt = {}) {
  const Index n = x0.rows(), m = x0.cols();
  require(xinf.rows() == n && xinf.cols() == m, ErrorKind::structural, "X0 and Xinf must have the same shape");
  require(lambda.size() == n, ErrorKind::structural, "lambda length must equal n");
  require(lambda.maxCoeff() <= 1.0 && lambda.minCoeff() >= 0.0, ErrorKind::parameter, "lambda must lie in [0,1]");
  for (Index i = 0; i < n; ++i)
    require(lambda(i) > 0.0, ErrorKind::identifiability,
            "lambda_" + std::to_string(i) + " = 0: a fully stubborn agent reveals nothing about its weights");
  require(lambda.minCoeff() < 1.0, ErrorKind::identifiability,
          "Lambda = I: every stochastic W sharing the consensus eigenvector fits the data");
  detail::require_nonconsensus(x0);

  EstimationReport rep;
  rep.estimator = "infinite_horizon";
  detail::warn_near_consensus(x0, xinf, &rep.warnings);
  rep.W_hat.resize(n, n);
  const Matrix phi = xinf.transpose();
  for (Index j = 0; j < n; ++j) {
    numkit::L1Problem p;
    p.phi = phi;
    p.psi = (xinf.row(j) - (1.0 - lambda(j)) * x0.row(j)).transpose() / lambda(j);
    p.sum_constraint = 1.0;
    p.nonneg = opt.nonneg;
    p.tolerance = opt.eps;
    const auto r = detail::solve_row(p, opt, j, "infinite-horizon identification");
    rep.W_hat.row(j) = r.w.transpose();
    rep.solver_log.push_back("row " + std::to_string(j) + ": " + r.log + ", residual " + detail::fmt_real(r.residual));
  }
  rep.Lambda_hat = lambda;
  rep.Gamma_hat = lambda.asDiagonal() * rep.W_hat;
  rep.support_threshold = opt.support_threshold;
  rep.support = detail::threshold_support(rep.W_hat, opt.support_threshold);
  return rep;
}

// Unknown Lambda with diag(W) = 0. Row j uses
//   x_j(inf) = w_j' X(inf) + kappa_j (x_j(0) - x_j(inf)),  kappa_j = (1 - lambda_j) / lambda_j >= 0,
// which is linear in (w_j, kappa_j); lambda_j = 1 / (1 + kappa_j).
inline EstimationReport identify_unknown_lambda(const Matrix& x0, const Matrix& xinf, const HorizonOptions& opt = {}) {
  const Index n = x0.rows(), m = x0.cols();
  require(xinf.rows() == n && xinf.cols() == m, ErrorKind::structural, "X0 and Xinf must have the same shape");
  detail::require_nonconsensus(x0);

  EstimationReport rep;
  rep.estimator = "unknown_lambda";
  detail::warn_near_consensus(x0, xinf, &rep.warnings);
  rep.W_hat.resize(n, n);
  Vector lambda(n);
  const double scale = xinf.size() ? xinf.cwiseAbs().maxCoeff() : 0.0;
  for (Index j = 0; j < n; ++j) {
    numkit::L1Problem p;
    p.phi.resize(m, n + 1);
    p.phi.leftCols(n) = xinf.transpose();
    p.phi.col(n) = (x0.row(j) - xinf.row(j)).transpose();
    p.psi = xinf.row(j).transpose();
    p.sum_constraint = 1.0;
    p.sum_mask = Vector::Ones(n + 1);
    p.sum_mask(n) = 0.0;
    p.lower = Vector::Constant(n + 1, opt.nonneg ? 0.0 : -kInf);
    p.upper = Vector::Constant(n + 1, kInf);
    p.lower(j) = p.upper(j) = 0.0;
    p.lower(n) = 0.0;
    p.weight_mask = Vector::Ones(n + 1);
    p.weight_mask(n) = 0.0;
    p.tolerance = opt.eps;
    const double col = p.phi.col(n).lpNorm<Eigen::Infinity>();
    if (col <= 1e-6 * (1.0 + scale))
      warn(&rep.warnings, "row " + std::to_string(j) +
                              ": x_j(0) - x_j(inf) is nearly zero, lambda_j is ill-conditioned (near 1 or 0)");
    const auto r = detail::solve_row(p, opt, j, "unknown-lambda identification");
    rep.W_hat.row(j) = r.w.head(n).transpose();
    lambda(j) = 1.0 / (1.0 + r.w(n));
    rep.solver_log.push_back("row " + std::to_string(j) + ": " + r.log + ", residual " + detail::fmt_real(r.residual));
  }
  rep.Lambda_hat = lambda;
  rep.Gamma_hat = lambda.asDiagonal() * rep.W_hat;
  rep.support_threshold = opt.support_threshold;
  rep.support = detail::threshold_support(rep.W_hat, opt.support_threshold);
  return rep;
}

// Member of the ambiguity class with zero diagonal:
//   a'_jk = a_jk / (1 - a_jj) (k != j),  b'_j = b_j / (1 - a_jj),  A = Lambda W, B = I - Lambda.
inline InfluenceNetwork canonicalize(const InfluenceNetwork& net) {
  const Index n = net.n();
  InfluenceNetwork out = net;
  for (Index j = 0; j < n; ++j) {
    const double ajj = net.lambda(j) * net.W(j, j);
    require(ajj < 1.0 - 1e-12, ErrorKind::parameter,
            "agent " + std::to_string(j) + " has lambda_j w_jj = 1 and no canonical representative");
    const double lam = 1.0 - (1.0 - net.lambda(j)) / (1.0 - ajj);
    out.lambda(j) = lam;
    if (lam > 0.0) {
      out.W.row(j) = net.W.row(j) / (1.0 - net.W(j, j));
      out.W(j, j) = 0.0;
    }
  }
  return out;
}

// Lambda' = I - D (I - Lambda), off(Lambda' W') = D off(Lambda W),
// diag(Lambda' W') = 1 - D ((I - Lambda) 1 + off(Lambda W) 1). Same X(inf) for
// every X(0) when d_j > 0.
inline InfluenceNetwork ambiguity_transform(const InfluenceNetwork& net, const Vector& d) {
  const Index n = net.n();
  require(d.size() == n, ErrorKind::structural, "D must have one entry per agent");
  require(d.minCoeff() >= 0.0 && d.maxCoeff() <= 1.0, ErrorKind::parameter, "D entries must lie in [0,1]");
  const Matrix a = net.lambda_w();
  InfluenceNetwork out = net;
  Matrix a2 = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double off = 0.0;
    for (Index k = 0; k < n; ++k) {
      if (k == j) continue;
      a2(j, k) = d(j) * a(j, k);
      off += a(j, k);
    }
    a2(j, j) = 1.0 - d(j) * ((1.0 - net.lambda(j)) + off);
    out.lambda(j) = 1.0 - d(j) * (1.0 - net.lambda(j));
  }
  for (Index j = 0; j < n; ++j) {
    if (out.lambda(j) > 0.0) out.W.row(j) = a2.row(j) / out.lambda(j);
    require(out.W.row(j).minCoeff() >= -1e-12 && out.lambda(j) >= -1e-12 && out.lambda(j) <= 1.0 + 1e-12,
            ErrorKind::parameter, "ambiguity transform produced an invalid row " + std::to_string(j));
  }
  require(is_schur_stable(out).schur_stable, ErrorKind::parameter,
          "ambiguity transform breaks stability: some agent no longer reaches a partially stubborn agent");
  return out;
}

// Sample-size scaling law for infinite-horizon recovery with free constant c:
//   m >= 4 c (1 + lmax)^2 (1 - lmin)^2 / (1 - lmax)^4 * d_max * log n.
inline double infinite_horizon_sample_bound(double c, double lambda_min, double lambda_max, int d_max, Index n) {
  if (lambda_max >= 1.0) return kInf;
  return 4.0 * c * std::pow(1.0 + lambda_max, 2) * std::pow(1.0 - lambda_min, 2) / std::pow(1.0 - lambda_max, 4) *
         d_max * std::log(static_cast<double>(n));
}

}  // namespace opinet
