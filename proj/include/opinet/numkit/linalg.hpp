#pragma once

#include "opinet/core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace opinet::numkit {

struct PseudoInverse {
  Matrix value;
  Index rank = 0;
  double condition = kInf;  // sigma_max / sigma_min over retained values
  bool truncated = false;   // some nonzero singular values were cut
};

// Moore-Penrose inverse via SVD, dropping singular values below
// rcond * sigma_max.
inline PseudoInverse pseudoinverse_ex(const Matrix& m, double rcond = 1e-10) {
  PseudoInverse out;
  out.value = Matrix::Zero(m.cols(), m.rows());
  if (m.size() == 0) return out;
  const Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  if (smax == 0.0) return out;
  const double cut = rcond * smax;
  Vector inv = Vector::Zero(s.size());
  double smin = smax;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut) {
      inv(i) = 1.0 / s(i);
      smin = std::min(smin, s(i));
      ++out.rank;
    }
  }
  out.truncated = out.rank < std::min(m.rows(), m.cols());
  out.condition = smax / smin;
  out.value = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return out;
}

inline Matrix pseudoinverse(const Matrix& m, double rcond = 1e-10) { return pseudoinverse_ex(m, rcond).value; }

inline int numerical_rank(const Matrix& m, double rcond = 1e-10) {
  if (m.size() == 0) return 0;
  const Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  const double cut = rcond * std::max(1.0, s(0));
  int r = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++r;
  return r;
}

// Spectral radius. Dense eigen-solve up to n = 200; beyond that, nonnegative
// matrices use shifted power iteration (Perron root), others stay dense.
inline double spectral_radius(const Matrix& m) {
  require(m.rows() == m.cols(), ErrorKind::structural, "spectral radius needs a square matrix");
  const Index n = m.rows();
  if (n == 0) return 0.0;
  if (n > 200 && m.minCoeff() >= 0.0) {
    // (M + sI) has Perron root rho + s and no other eigenvalue of that modulus.
    const double s = m.rowwise().sum().maxCoeff() * 0.5 + 1e-300;
    Vector x = Vector::Constant(n, 1.0 / static_cast<double>(n));
    double prev = 0.0;
    for (int it = 0; it < 200000; ++it) {
      Vector y = m * x + s * x;
      const double sum = y.sum();
      if (sum <= 0.0) return 0.0;
      y /= sum;
      const double est = (m * y).sum();
      x = std::move(y);
      if (std::abs(est - prev) < 1e-13 * std::max(1.0, est)) return est;
      prev = est;
    }
  }
  const Eigen::EigenSolver<Matrix> es(m, false);
  require(es.info() == Eigen::Success, ErrorKind::numerical, "eigenvalue solver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace opinet::numkit
