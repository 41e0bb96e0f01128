#pragma once

// Per-layer Yule-Walker estimation for noisy multiplex FJ data
//   x(k+1) = Lambda W x(k) + (I - Lambda) u + eta(k),
// with optional inverse-Wishart shrinkage of the lag-0 covariance across
// layers and a shared support under the common-support model.

#include "opinet/identify/bayesian.hpp"
#include "opinet/identify/yule_walker.hpp"

namespace opinet {

struct MultiplexOptions {
  MomentOptions moments{};
  bool bayesian = true;
  std::optional<InverseWishartPrior> prior;  // fitted across layers when absent
  double threshold_ratio = 0.05;             // support: W_ij > ratio * max |W|
  std::optional<double> threshold;           // absolute override
};

namespace detail {

inline Matrix psd_part(const Matrix& m) {
  const Matrix s = 0.5 * (m + m.transpose());
  const Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

// Core estimator from per-layer moments; lambdas[s] and u.col(s) are known.
inline std::vector<EstimationReport> identify_multiplex_from_moments(std::vector<MomentEstimates> moments,
                                                                     MultiplexModel tag,
                                                                     const std::vector<Vector>& lambdas,
                                                                     const Matrix& u, const MultiplexOptions& opt = {}) {
  const std::size_t layers = moments.size();
  require(layers >= 1, ErrorKind::parameter, "multiplex identification needs at least one layer");
  require(lambdas.size() == layers && static_cast<std::size_t>(u.cols()) == layers, ErrorKind::structural,
          "one lambda vector and one u column per layer required");
  const Index n = moments.front().x_hat.size();
  for (std::size_t s = 0; s < layers; ++s) {
    require(lambdas[s].size() == n && moments[s].x_hat.size() == n && u.rows() == n, ErrorKind::structural,
            "layer dimensions disagree");
    require(lambdas[s].minCoeff() > 0.0, ErrorKind::parameter, "multiplex recovery requires lambda_i > 0");
  }

  std::vector<std::string> shared_log;
  if (opt.bayesian) {
    std::vector<ScatterData> data;
    std::vector<Matrix> centered;
    for (const auto& me : moments) {
      centered.push_back(detail::psd_part(me.Sigma_hat.front() - me.x_hat * me.x_hat.transpose()));
      data.push_back({static_cast<double>(me.t) * centered.back(), static_cast<double>(me.t)});
    }
    InverseWishartPrior prior;
    if (opt.prior) {
      prior = *opt.prior;
    } else {
      const auto fit = fit_hyperparameters(data);
      prior = fit.prior;
      shared_log.push_back("fitted nu " + detail::fmt_real(prior.nu) + " after " + std::to_string(fit.iterations) +
                           " iterations" + (fit.low_confidence ? " (low confidence: " + fit.note + ")" : ""));
    }
    for (std::size_t s = 0; s < layers; ++s) {
      auto& me = moments[s];
      const Matrix shrunk = bayesian_covariance(centered[s], static_cast<double>(me.t), prior);
      me.Sigma_hat.front() = shrunk + me.x_hat * me.x_hat.transpose();
      me.refresh_windows();
    }
  }

  std::vector<EstimationReport> reps(layers);
  std::vector<Matrix> raw(layers);
  std::vector<EdgeSet> supports(layers);
  for (std::size_t s = 0; s < layers; ++s) {
    const Vector b = (Vector::Ones(n) - lambdas[s]).cwiseProduct(u.col(static_cast<Index>(s)));
    auto g = estimate_gamma(moments[s], b, GammaMode::dense);
    raw[s] = lambdas[s].cwiseInverse().asDiagonal() * g.Gamma;
    const double thr = opt.threshold ? *opt.threshold : opt.threshold_ratio * raw[s].cwiseAbs().maxCoeff();
    supports[s] = detail::threshold_support(raw[s].cwiseMax(0.0), thr);
    auto& r = reps[s];
    r.estimator = "multiplex";
    r.Gamma_hat = g.Gamma;
    r.Lambda_hat = lambdas[s];
    r.support_threshold = thr;
    r.warnings = g.warnings;
    r.solver_log = shared_log;
    r.solver_log.insert(r.solver_log.end(), g.log.begin(), g.log.end());
  }
  if (tag == MultiplexModel::common_support && layers > 1) {
    EdgeSet common = supports.front();
    for (std::size_t s = 1; s < layers; ++s) {
      EdgeSet keep;
      for (const auto& e : common)
        if (supports[s].count(e)) keep.insert(e);
      common = std::move(keep);
    }
    supports.assign(layers, common);
  }
  for (std::size_t s = 0; s < layers; ++s) {
    auto& r = reps[s];
    r.W_hat = Matrix::Zero(n, n);
    for (const auto& [i, j] : supports[s]) r.W_hat(i, j) = std::max(raw[s](i, j), 0.0);
    double adjust = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double sum = r.W_hat.row(i).sum();
      require(sum > 0.0, ErrorKind::numerical,
              "degenerate row " + std::to_string(i) + " in layer " + std::to_string(s) + ": empty support");
      adjust = std::max(adjust, std::abs(sum - 1.0));
      r.W_hat.row(i) /= sum;
    }
    r.support = detail::threshold_support(r.W_hat, 0.0);
    r.metrics["renormalization"] = adjust;
  }
  return reps;
}

inline std::vector<EstimationReport> identify_multiplex(const std::vector<ObservationStream>& streams,
                                                        MultiplexModel tag, const std::vector<Vector>& lambdas,
                                                        const Matrix& u, const MultiplexOptions& opt = {}) {
  std::vector<MomentEstimates> moments;
  for (const auto& s : streams) moments.push_back(estimate_cross_correlations(s, opt.moments));
  return identify_multiplex_from_moments(std::move(moments), tag, lambdas, u, opt);
}

}  // namespace opinet
