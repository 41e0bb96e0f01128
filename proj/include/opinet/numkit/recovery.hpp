#pragma once

// Exhaustive compressed-sensing diagnostics for small sensing matrices.

#include "opinet/numkit/l1.hpp"
#include "opinet/numkit/linalg.hpp"

#include <functional>
#include <numeric>
#include <vector>

namespace opinet::numkit {

inline constexpr Index kMaxDiagnosticColumns = 20;

// Calls fn(subset) for every k-subset of {0..n-1} in lexicographic order;
// stops early when fn returns false.
inline void for_each_subset(Index n, Index k, const std::function<bool(const std::vector<Index>&)>& fn) {
  if (k > n || k < 0) return;
  std::vector<Index> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), Index{0});
  while (true) {
    if (!fn(idx)) return;
    Index i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

inline Matrix select_columns(const Matrix& m, const std::vector<Index>& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = m.col(cols[j]);
  return out;
}

// Smallest number of linearly dependent columns; n + 1 when the columns are
// independent.
inline int spark(const Matrix& phi, double rcond = 1e-10) {
  const Index n = phi.cols();
  if (n > kMaxDiagnosticColumns)
    throw Error(ErrorKind::capacity, "spark search is limited to " + std::to_string(kMaxDiagnosticColumns) +
                                         " columns, got " + std::to_string(n));
  const double scale = std::max(1.0, phi.size() ? phi.cwiseAbs().maxCoeff() : 0.0);
  for (Index j = 0; j < n; ++j)
    if (phi.col(j).lpNorm<Eigen::Infinity>() <= rcond * scale) return 1;
  for (Index k = 2; k <= n; ++k) {
    if (k > phi.rows()) return static_cast<int>(k);
    bool found = false;
    for_each_subset(n, k, [&](const std::vector<Index>& s) {
      if (numerical_rank(select_columns(phi, s) / scale, rcond) < k) found = true;
      return !found;
    });
    if (found) return static_cast<int>(k);
  }
  return static_cast<int>(n + 1);
}

struct RecoveryDiagnostics {
  int spark = 0;
  bool spark_ok = false;  // spark > 2s: s-sparse solutions are unique
  bool nsp_ok = false;    // null space property of order s
  double rec_delta = 0.0; // min over |S| = s of sigma_min(Phi_S) / sqrt(m)
  int programs_solved = 0;
};

// Null space property of order s: for every support S with |S| = s, no
// nonzero kernel vector has |eta_{S^c}|_1 <= |eta_S|_1. For each S and sign
// pattern sigma the program min |eta_{S^c}|_1 s.t. Phi eta = 0,
// sigma' eta_S = 1 has value <= 1 exactly when such a vector exists.
inline bool null_space_property(const Matrix& phi, Index s, int* programs = nullptr) {
  const Index n = phi.cols(), m = phi.rows();
  if (s == 0) return true;
  bool ok = true;
  for_each_subset(n, s, [&](const std::vector<Index>& support) {
    // sigma and -sigma give the same program up to eta -> -eta.
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (s - 1)); ++mask) {
      L1Problem p;
      p.phi = Matrix::Zero(m + 1, n);
      p.phi.topRows(m) = phi;
      p.psi = Vector::Zero(m + 1);
      p.psi(m) = 1.0;
      p.weight_mask = Vector::Ones(n);
      for (Index k = 0; k < s; ++k) {
        const Index j = support[static_cast<std::size_t>(k)];
        const double sign = (k > 0 && ((mask >> (k - 1)) & 1U)) ? -1.0 : 1.0;
        p.phi(m, j) = sign;
        p.weight_mask(j) = 0.0;
      }
      const SolveResult r = solve_l1(p);
      if (programs) ++*programs;
      if (r.status == SolveStatus::optimal && r.objective <= 1.0 + 1e-9) {
        ok = false;
        return false;
      }
    }
    return true;
  });
  return ok;
}

inline RecoveryDiagnostics check_recovery_conditions(const Matrix& phi, Index s) {
  const Index n = phi.cols();
  if (n > kMaxDiagnosticColumns)
    throw Error(ErrorKind::capacity, "recovery diagnostics are limited to " +
                                         std::to_string(kMaxDiagnosticColumns) + " columns");
  require(s >= 0 && 2 * s <= n, ErrorKind::capacity, "sparsity order must satisfy s <= n/2");
  RecoveryDiagnostics d;
  d.spark = spark(phi);
  d.spark_ok = d.spark > 2 * s;
  d.nsp_ok = null_space_property(phi, s, &d.programs_solved);
  double delta = kInf;
  if (s == 0) {
    delta = 0.0;
  } else {
    for_each_subset(n, s, [&](const std::vector<Index>& support) {
      const Eigen::JacobiSVD<Matrix> svd(select_columns(phi, support));
      const Vector& sv = svd.singularValues();
      const double smin = sv.size() < s ? 0.0 : sv(sv.size() - 1);
      delta = std::min(delta, smin / std::sqrt(static_cast<double>(phi.rows())));
      return true;
    });
  }
  d.rec_delta = delta;
  return d;
}

}  // namespace opinet::numkit
