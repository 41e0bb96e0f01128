#pragma once

// Moment-based identification from partially observed gossip or noisy FJ
// streams: lagged cross-correlations corrected by the sampling moments, then
// the Yule-Walker relation Sigma[l+1] = Sigma[l] Gamma' + x b'.

#include "opinet/identify/horizon.hpp"
#include "opinet/numkit/linalg.hpp"
#include "opinet/observe.hpp"

#include <algorithm>

namespace opinet {

struct MomentEstimates {
  Vector x_hat;
  std::vector<Matrix> Sigma_hat;  // lags 0..max_lag
  Matrix Sigma_minus, Sigma_plus;
  std::size_t n_sigma = 5;
  std::int64_t t = 0;  // samples (steps) used

  // Recomputes the lag-window averages from Sigma_hat.
  void refresh_windows() {
    require(n_sigma >= 1 && Sigma_hat.size() >= n_sigma + 1, ErrorKind::parameter,
            "lag window needs lags 0..n_sigma");
    const Index n = Sigma_hat.front().rows();
    Sigma_minus = Matrix::Zero(n, n);
    Sigma_plus = Matrix::Zero(n, n);
    for (std::size_t l = 0; l < n_sigma; ++l) {
      Sigma_minus += Sigma_hat[l];
      Sigma_plus += Sigma_hat[l + 1];
    }
    Sigma_minus /= static_cast<double>(n_sigma);
    Sigma_plus /= static_cast<double>(n_sigma);
  }
};

struct MomentOptions {
  std::size_t n_sigma = 5;
  std::size_t max_lag = 0;   // 0: use n_sigma
  std::int64_t burn_in = 0;  // leading steps of the stream to ignore
  // Correct the products of mean-removed observations z - m x_hat and add
  // x_hat x_hat' back afterwards. Same limit as the raw estimator, but the
  // mask noise no longer scales with the squared mean.
  bool centered = true;
};

// Exact moment object from an analytic lag sequence (forward recursion).
inline MomentEstimates moments_from_lags(const Vector& x_mean, std::vector<Matrix> lags, std::size_t n_sigma) {
  MomentEstimates me;
  me.x_hat = x_mean;
  me.Sigma_hat = std::move(lags);
  me.n_sigma = n_sigma;
  me.refresh_windows();
  return me;
}

namespace detail {

inline void check_pi(const SamplingMoments& sm) {
  for (Index i = 0; i < sm.pi.size(); ++i)
    require(sm.pi(i) > 0.0, ErrorKind::numerical,
            "agent " + std::to_string(i) + " is never observed (pi = 0); its moments cannot be recovered");
  require(!sm.has_zero, ErrorKind::numerical, "a sampling moment Pi vanishes; moment division is impossible");
}

// Columns of the dense view after the burn-in, with the observation mask.
inline std::pair<Matrix, Matrix> usable_block(const ObservationStream& s, std::int64_t burn_in) {
  require(burn_in >= 0 && burn_in < s.horizon, ErrorKind::parameter, "burn-in must be shorter than the stream");
  const auto d = to_dense(s);
  const Index keep = d.Z.cols() - static_cast<Index>(burn_in);
  return {d.Z.rightCols(keep), d.mask.rightCols(keep).cast<double>()};
}

}  // namespace detail

// x_hat_i = (1/T) sum_k z_i(k) / pi_i.
inline Vector estimate_state_mean(const ObservationStream& s, std::int64_t burn_in = 0) {
  require(!s.records.empty(), ErrorKind::parameter, "empty observation stream");
  const auto sm = observation_moments(s.model, s.n, 0);
  for (Index i = 0; i < s.n; ++i)
    require(sm.pi(i) > 0.0, ErrorKind::numerical,
            "agent " + std::to_string(i) + " has sampling probability 0; its mean cannot be estimated");
  require(burn_in >= 0 && burn_in < s.horizon, ErrorKind::parameter, "burn-in must be shorter than the stream");
  Vector acc = Vector::Zero(s.n);
  for (const auto& r : s.records)
    if (r.k - s.first_step >= burn_in) acc(r.agent) += r.z;
  return acc.cwiseQuotient(sm.pi) / static_cast<double>(s.horizon - burn_in);
}

// Sigma_hat[l] = S_hat[l] ./ Pi[l] with S_hat[l] = (1/(t-l)) sum_k z(k) z(k+l)',
// or its centered variant (see MomentOptions::centered).
inline MomentEstimates estimate_cross_correlations(const ObservationStream& s, const MomentOptions& opt = {}) {
  require(!s.records.empty(), ErrorKind::parameter, "empty observation stream");
  const std::size_t L = std::max(opt.max_lag, opt.n_sigma);
  require(opt.n_sigma >= 1, ErrorKind::parameter, "n_sigma must be at least 1");
  const auto sm = observation_moments(s.model, s.n, L);
  detail::check_pi(sm);
  auto [z, mask] = detail::usable_block(s, opt.burn_in);
  const Index t = z.cols();
  require(t > static_cast<Index>(L), ErrorKind::parameter,
          "stream length " + std::to_string(t) + " must exceed the largest lag " + std::to_string(L));
  MomentEstimates me;
  me.t = t;
  me.n_sigma = opt.n_sigma;
  me.x_hat = (z.rowwise().sum() / static_cast<double>(t)).cwiseQuotient(sm.pi);
  const Matrix mean_part = opt.centered ? Matrix(me.x_hat * me.x_hat.transpose()) : Matrix::Zero(s.n, s.n);
  if (opt.centered) z -= mask.cwiseProduct(me.x_hat.replicate(1, t));
  for (std::size_t l = 0; l <= L; ++l) {
    const Index cnt = t - static_cast<Index>(l);
    const Matrix sh = z.leftCols(cnt) * z.rightCols(cnt).transpose() / static_cast<double>(cnt);
    me.Sigma_hat.push_back(sh.cwiseQuotient(sm.Pi[l]) + mean_part);
  }
  me.refresh_windows();
  return me;
}

enum class GammaMode { dense, sparse };

struct GammaEstimate {
  Matrix Gamma;
  double condition = 0.0;  // of Sigma_minus (dense mode)
  Diagnostics warnings;
  std::vector<std::string> log;
};

// dense:  Gamma' = pinv(Sigma_minus) (Sigma_plus - x b')
// sparse: column-wise min sum_{i != j} |M_ij| s.t. |Sigma_minus M - (Sigma_plus - x b')|_max <= eta, Gamma = M'
inline GammaEstimate estimate_gamma(const MomentEstimates& me, const Vector& b_bar, GammaMode mode = GammaMode::dense,
                                    double eta = 0.0, const numkit::LpOptions& lp = {}) {
  const Index n = me.Sigma_minus.rows();
  require(b_bar.size() == n && me.x_hat.size() == n, ErrorKind::structural, "b_bar and x_hat must have length n");
  const Matrix rhs = me.Sigma_plus - me.x_hat * b_bar.transpose();
  GammaEstimate out;
  if (mode == GammaMode::dense) {
    const auto pinv = numkit::pseudoinverse_ex(me.Sigma_minus);
    out.condition = pinv.condition;
    if (pinv.truncated || pinv.rank < n)
      warn(&out.warnings, "Sigma_minus is rank deficient (rank " + std::to_string(pinv.rank) + " of " +
                              std::to_string(n) + "); pseudoinverse solution used");
    else if (pinv.condition > 1e8)
      warn(&out.warnings, "Sigma_minus is ill-conditioned (condition " + detail::fmt_real(pinv.condition) + ")");
    out.Gamma = (pinv.value * rhs).transpose();
    out.log.push_back("dense Yule-Walker solve, condition " + detail::fmt_real(pinv.condition));
    return out;
  }
  require(eta >= 0.0, ErrorKind::parameter, "eta must be nonnegative");
  Matrix m(n, n);
  for (Index j = 0; j < n; ++j) {
    numkit::L1Problem p;
    p.phi = me.Sigma_minus;
    p.psi = rhs.col(j);
    p.weight_mask = Vector::Ones(n);
    p.weight_mask(j) = 0.0;
    p.tolerance = eta;
    const auto r = numkit::solve_l1(p, lp);
    if (r.status == numkit::SolveStatus::infeasible) {
      const double need = numkit::minimal_feasible_tolerance(p, lp);
      throw InfeasibleError("sparse Gamma program for column " + std::to_string(j) + " is infeasible at eta " +
                                detail::fmt_real(eta) + "; increase eta to at least " + detail::fmt_real(need),
                            need);
    }
    require(r.status == numkit::SolveStatus::optimal, ErrorKind::numerical,
            "sparse Gamma program hit the simplex iteration cap");
    m.col(j) = r.w;
    out.log.push_back("column " + std::to_string(j) + ": " + r.log);
  }
  out.Gamma = m.transpose();
  return out;
}

struct RecoveryOptions {
  std::optional<double> threshold;  // absolute cut on |Gamma_ij|; default ratio * max off-diagonal
  double threshold_ratio = 0.05;
};

// Support from the off-diagonal of Gamma_hat, D_ii = row support size, then
//   W = D [ (1/beta) Lambda^{-1} (Gamma - (1 - beta) I) - (I - D^{-1}) ].
// A diagonal weight is kept when its Gamma-scale magnitude beta lambda_i w_ii / D_ii
// clears the same threshold. Negative weights are clipped and rows renormalized.
inline EstimationReport recover_topology_and_w(const Matrix& gamma, const Vector& lambda, double beta,
                                               const RecoveryOptions& opt = {}) {
  const Index n = gamma.rows();
  require(gamma.cols() == n && lambda.size() == n, ErrorKind::structural, "Gamma must be n x n and lambda length n");
  require(beta > 0.0 && beta <= 1.0, ErrorKind::parameter, "beta must lie in (0,1]");
  require(n == 0 || lambda.minCoeff() > 0.0, ErrorKind::parameter, "recovery requires lambda_i > 0 for every agent");
  double max_off = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j) max_off = std::max(max_off, std::abs(gamma(i, j)));
  const double thr = opt.threshold ? *opt.threshold : opt.threshold_ratio * max_off;
  require(thr >= 0.0, ErrorKind::parameter, "support threshold must be nonnegative");

  EstimationReport rep;
  rep.estimator = "yule_walker";
  rep.support_threshold = thr;
  rep.W_hat = Matrix::Zero(n, n);
  double adjust = 0.0;
  for (Index i = 0; i < n; ++i) {
    std::vector<Index> nb;
    for (Index j = 0; j < n; ++j)
      if (j != i && std::abs(gamma(i, j)) > thr) nb.push_back(j);
    require(!nb.empty(), ErrorKind::numerical,
            "degenerate row " + std::to_string(i) + ": no off-diagonal entry of Gamma exceeds the threshold " +
                detail::fmt_real(thr) + " (lower the threshold, or the sparsity budget eta)");
    const double d = static_cast<double>(nb.size());
    const double scale = beta * lambda(i);
    for (Index j : nb) rep.W_hat(i, j) = d * gamma(i, j) / scale;
    double wii = d * ((gamma(i, i) - (1.0 - beta)) / scale - 1.0) + 1.0;
    if (!(scale * wii / d > thr)) wii = 0.0;
    rep.W_hat(i, i) = wii;
    rep.W_hat.row(i) = rep.W_hat.row(i).cwiseMax(0.0);
    const double sum = rep.W_hat.row(i).sum();
    require(sum > 0.0, ErrorKind::numerical, "degenerate row " + std::to_string(i) + ": all weights clipped to zero");
    adjust = std::max(adjust, std::abs(sum - 1.0));
    rep.W_hat.row(i) /= sum;
  }
  rep.support = detail::threshold_support(rep.W_hat, 0.0);
  rep.Gamma_hat = gamma;
  rep.Lambda_hat = lambda;
  rep.metrics["renormalization"] = adjust;
  rep.solver_log.push_back("support threshold " + detail::fmt_real(thr) + ", max row-sum adjustment " +
                           detail::fmt_real(adjust));
  return rep;
}

}  // namespace opinet
