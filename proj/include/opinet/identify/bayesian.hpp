#pragma once

// Inverse-Wishart covariance shrinkage across related systems and the
// empirical-Bayes fit of its hyperparameters.

#include "opinet/netgraph.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace opinet {

struct InverseWishartPrior {
  Matrix psi;
  double nu = 0.0;
};

inline void check_prior(const InverseWishartPrior& p) {
  const Index n = p.psi.rows();
  require(p.psi.cols() == n, ErrorKind::parameter, "Psi must be square");
  require(is_symmetric(p.psi, 1e-10 * (1.0 + p.psi.cwiseAbs().maxCoeff())), ErrorKind::parameter,
          "Psi must be symmetric");
  require(n == 0 || Eigen::LLT<Matrix>(p.psi).info() == Eigen::Success, ErrorKind::parameter,
          "Psi must be positive definite");
  require(p.nu > static_cast<double>(n) + 1.0, ErrorKind::parameter, "nu must exceed n + 1");
}

// Weight of the prior mean Psi / (nu - n - 1) for a system with T samples.
inline double shrinkage_weight(double nu, Index n, double T) {
  const double k = nu - static_cast<double>(n + 1);
  return k / (k + T);
}

inline Matrix prior_mean(const InverseWishartPrior& p) {
  return p.psi / (p.nu - static_cast<double>(p.psi.rows() + 1));
}

// gamma S_bar + (1 - gamma) SCM for a sample covariance from T samples.
inline Matrix bayesian_covariance(const Matrix& scm, double T, const InverseWishartPrior& prior) {
  check_prior(prior);
  require(T >= 0.0, ErrorKind::parameter, "sample count must be nonnegative");
  const Index n = prior.psi.rows();
  const double g = shrinkage_weight(prior.nu, n, T);
  if (T == 0.0) return prior_mean(prior);
  require(scm.rows() == n && scm.cols() == n, ErrorKind::structural, "sample covariance must match Psi");
  return g * prior_mean(prior) + (1.0 - g) * scm;
}

// One T_s x n sample matrix per system (rows are zero-mean observations).
inline std::vector<Matrix> bayesian_covariance(const std::vector<Matrix>& samples, const InverseWishartPrior& prior) {
  check_prior(prior);
  std::vector<Matrix> out;
  for (const auto& x : samples) {
    const double T = static_cast<double>(x.rows());
    if (T == 0)
      out.push_back(prior_mean(prior));
    else
      out.push_back(bayesian_covariance(Matrix(x.transpose() * x / T), T, prior));
  }
  return out;
}

// Scatter matrix S = sum_k x_k x_k' and its sample count.
struct ScatterData {
  Matrix scatter;
  double T = 0.0;
};

inline std::vector<ScatterData> scatter_from_samples(const std::vector<Matrix>& samples) {
  std::vector<ScatterData> out;
  for (const auto& x : samples) out.push_back({x.transpose() * x, static_cast<double>(x.rows())});
  return out;
}

struct HyperparameterFit {
  InverseWishartPrior prior;
  double objective = 0.0;
  double initial_objective = 0.0;
  std::vector<double> trace;  // objective after each outer iteration
  int iterations = 0;
  bool converged = false;
  bool low_confidence = false;
  std::string note;
};

namespace detail {

inline double log_mv_gamma(double a, Index n) {
  double s = 0.25 * static_cast<double>(n * (n - 1)) * std::log(M_PI);
  for (Index j = 1; j <= n; ++j) s += std::lgamma(a + 0.5 * static_cast<double>(1 - j));
  return s;
}

inline double log_det_spd(const Matrix& m) {
  const Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) return kInf;
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace detail

// Negative log marginal likelihood of zero-mean Gaussian samples whose
// per-system covariance is drawn from IW(Psi, nu), up to an additive constant.
inline double iw_negative_log_marginal(const std::vector<ScatterData>& data, const Matrix& psi, double nu) {
  const Index n = psi.rows();
  const double ld = detail::log_det_spd(psi);
  if (!std::isfinite(ld)) return kInf;
  double f = 0.0;
  for (const auto& d : data) {
    if (d.T == 0.0) continue;
    f += -0.5 * nu * ld + 0.5 * (nu + d.T) * detail::log_det_spd(psi + d.scatter) -
         detail::log_mv_gamma(0.5 * (nu + d.T), n) + detail::log_mv_gamma(0.5 * nu, n);
  }
  return f;
}

// Alternating minimisation: majorise-minimise steps in Psi at fixed nu, then
// a golden-section search for nu on (n + 1, n + 1000] at fixed Psi.
inline HyperparameterFit fit_hyperparameters(const std::vector<ScatterData>& data, int max_iter = 200,
                                             double rel_tol = 1e-8) {
  require(!data.empty(), ErrorKind::parameter, "hyperparameter fit needs at least one system");
  const Index n = data.front().scatter.rows();
  double total = 0.0;
  std::size_t systems = 0;
  Matrix pooled = Matrix::Zero(n, n);
  for (const auto& d : data) {
    require(d.scatter.rows() == n && d.scatter.cols() == n, ErrorKind::structural, "scatter matrices must be n x n");
    require(d.T >= 0.0, ErrorKind::parameter, "sample counts must be nonnegative");
    pooled += d.scatter;
    total += d.T;
    if (d.T > 0) ++systems;
  }
  require(total > 0.0, ErrorKind::parameter, "hyperparameter fit needs at least one sample");
  pooled /= total;
  const double ridge = 1e-8 * std::max(pooled.trace() / static_cast<double>(n), 1e-300);
  pooled += ridge * Matrix::Identity(n, n);

  const double lo = static_cast<double>(n) + 1.0, hi = static_cast<double>(n) + 1000.0;
  HyperparameterFit fit;
  double nu = static_cast<double>(n) + 3.0;
  Matrix psi = (nu - lo) * pooled;
  double f = iw_negative_log_marginal(data, psi, nu);
  fit.initial_objective = f;

  const auto f_nu = [&](double v) { return iw_negative_log_marginal(data, psi, v); };
  const auto check_descent = [&](double fnew, double fold, const char* step) {
    if (fnew > fold + 1e-10 * (1.0 + std::abs(fold)))
      throw Error(ErrorKind::internal, std::string("hyperparameter objective increased during the ") + step + " step");
  };

  for (int it = 0; it < max_iter; ++it) {
    const double f_start = f;
    for (int inner = 0; inner < 20; ++inner) {
      Matrix acc = Matrix::Zero(n, n);
      double weight = 0.0;
      for (const auto& d : data) {
        if (d.T == 0.0) continue;
        acc += (nu + d.T) * (psi + d.scatter).inverse();
        weight += nu;
      }
      Matrix next = weight * acc.inverse();
      next = 0.5 * (next + next.transpose());
      const double fn = iw_negative_log_marginal(data, next, nu);
      check_descent(fn, f, "Psi");
      const double change = std::abs(f - fn);
      psi = std::move(next);
      f = fn;
      if (change <= 1e-12 * (1.0 + std::abs(f))) break;
    }
    // Golden section on a bracket that stays strictly inside (lo, hi].
    double a = lo + 1e-6, b = hi;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), dd = a + g * (b - a);
    double fc = f_nu(c), fd = f_nu(dd);
    for (int k = 0; k < 200 && (b - a) > 1e-10 * (1.0 + b); ++k) {
      if (fc < fd) {
        b = dd; dd = c; fd = fc; c = b - g * (b - a); fc = f_nu(c);
      } else {
        a = c; c = dd; fc = fd; dd = a + g * (b - a); fd = f_nu(dd);
      }
    }
    const double cand = 0.5 * (a + b);
    const double fcand = f_nu(cand);
    if (fcand < f) {
      nu = cand;
      f = fcand;
    }
    check_descent(f, f_start, "nu");
    fit.trace.push_back(f);
    fit.iterations = it + 1;
    if (std::abs(f_start - f) <= rel_tol * (1.0 + std::abs(f))) {
      fit.converged = true;
      break;
    }
  }
  fit.prior = {psi, nu};
  fit.objective = f;
  const bool at_bound = nu > hi - 1e-3 || nu < lo + 1e-3;
  if (systems < 2) {
    fit.low_confidence = true;
    fit.note = "a single system cannot separate Psi from nu; nu is weakly determined";
  } else if (at_bound) {
    fit.low_confidence = true;
    fit.note = "nu estimate sits at the search bound";
  }
  return fit;
}

inline HyperparameterFit fit_hyperparameters(const std::vector<Matrix>& samples, int max_iter = 200) {
  return fit_hyperparameters(scatter_from_samples(samples), max_iter);
}

}  // namespace opinet
