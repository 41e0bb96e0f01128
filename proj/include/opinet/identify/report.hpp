#pragma once

#include "opinet/netgraph.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace opinet {

using EdgeSet = std::set<std::pair<Index, Index>>;

struct EstimationReport {
  std::string estimator;
  Matrix W_hat;
  std::optional<Vector> Lambda_hat;
  // Estimated one-step dynamics matrix: Lambda W for FJ data, Gamma-bar for gossip.
  std::optional<Matrix> Gamma_hat;
  EdgeSet support;
  double support_threshold = 0.0;
  std::map<std::string, double> metrics;
  std::vector<std::string> solver_log;
  Diagnostics warnings;

  Index n() const { return W_hat.rows(); }
};

struct SupportScores {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Precision and recall of an estimated edge set; an empty estimate of an
// empty truth scores 1.
inline SupportScores score_support(const EdgeSet& truth, const EdgeSet& est) {
  std::size_t hit = 0;
  for (const auto& e : est) hit += truth.count(e);
  SupportScores s;
  const auto ratio = [](std::size_t a, std::size_t b, bool other_empty) {
    return b ? static_cast<double>(a) / static_cast<double>(b) : (other_empty ? 1.0 : 0.0);
  };
  s.precision = ratio(hit, est.size(), truth.empty());
  s.recall = ratio(hit, truth.size(), est.empty());
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

// Fills and returns the metrics map. The true support uses the structural-zero
// tolerance; the estimated support is the report's recovered edge set.
inline std::map<std::string, double> evaluate_estimate(const Matrix& W_true, EstimationReport& report) {
  require(W_true.rows() == report.W_hat.rows() && W_true.cols() == report.W_hat.cols(), ErrorKind::structural,
          "estimate and truth must have the same dimensions");
  const auto s = score_support(support(W_true), report.support);
  const Matrix diff = W_true - report.W_hat;
  report.metrics["support_precision"] = s.precision;
  report.metrics["support_recall"] = s.recall;
  report.metrics["support_f1"] = s.f1;
  report.metrics["frobenius_error"] = diff.norm();
  report.metrics["max_abs_error"] = diff.size() ? diff.cwiseAbs().maxCoeff() : 0.0;
  return report.metrics;
}

inline std::map<std::string, double> evaluate_estimate(const Matrix& W_true, const EstimationReport& report) {
  EstimationReport copy = report;
  return evaluate_estimate(W_true, copy);
}

}  // namespace opinet
