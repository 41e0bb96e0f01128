#pragma once

// Dense two-phase primal simplex for small and medium linear programs
//
//   minimise    cost' x
//   subject to  eq_lhs x  = eq_rhs
//               ub_lhs x <= ub_rhs
//               lower <= x <= upper        (bounds may be infinite)
//
// Pricing is Dantzig's rule with a switch to Bland's rule after a run of
// degenerate pivots, which rules out cycling. The final basic solution is
// recomputed from the original data with a QR solve so the returned point
// satisfies the constraints to near machine precision.

#include "opinet/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace opinet::numkit {

struct LinearProgram {
  Vector cost;
  Matrix eq_lhs;
  Vector eq_rhs;
  Matrix ub_lhs;
  Vector ub_rhs;
  Vector lower;  // empty: all zero
  Vector upper;  // empty: all +inf
};

enum class LpStatus { optimal, infeasible, unbounded, max_iter };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

struct LpOptions {
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  double feasibility_tol = 1e-8;
  int max_iterations = 0;        // 0: 50 * (rows + columns)
  int degenerate_before_bland = 40;
};

struct LpResult {
  Vector x;
  double objective = 0.0;
  LpStatus status = LpStatus::max_iter;
  int iterations = 0;
  double max_violation = 0.0;
};

namespace detail {

// Mapping of one original variable onto nonnegative standard-form columns:
// x = offset + sign * y_pos - y_neg (y_neg only for free variables).
struct ColumnMap {
  double offset = 0.0;
  double sign = 1.0;
  Index pos = -1;
  Index neg = -1;
};

class Tableau {
 public:
  Tableau(const Matrix& a, const Vector& b, const Vector& c, std::vector<Index> basis, const LpOptions& opt)
      : t_(a.rows() + 1, a.cols() + 1), basis_(std::move(basis)), opt_(opt) {
    const Index m = a.rows();
    t_.topLeftCorner(m, a.cols()) = a;
    t_.topRightCorner(m, 1) = b;
    set_cost(c);
  }

  Index rows() const { return t_.rows() - 1; }
  Index cols() const { return t_.cols() - 1; }
  const std::vector<Index>& basis() const { return basis_; }
  double objective() const { return -t_(rows(), cols()); }
  double rhs(Index r) const { return t_(r, cols()); }
  double at(Index r, Index c) const { return t_(r, c); }

  void set_cost(const Vector& c) {
    const Index m = rows();
    t_.row(m).head(cols()) = c.transpose();
    t_(m, cols()) = 0.0;
    for (Index r = 0; r < m; ++r) {
      const double cb = c(basis_[r]);
      if (cb != 0.0) t_.row(m) -= cb * t_.row(r);
    }
  }

  void pivot(Index r, Index c) {
    t_.row(r) /= t_(r, c);
    for (Index i = 0; i < t_.rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[r] = c;
  }

  // Runs simplex iterations over columns [0, eligible). Returns status.
  LpStatus run(Index eligible, int max_iter, int& iterations) {
    const Index m = rows();
    int degenerate_run = 0;
    while (true) {
      if (iterations >= max_iter) return LpStatus::max_iter;
      const bool bland = degenerate_run >= opt_.degenerate_before_bland;
      Index enter = -1;
      double best = -opt_.optimality_tol;
      for (Index j = 0; j < eligible; ++j) {
        const double d = t_(m, j);
        if (d < best) {
          enter = j;
          if (bland) break;
          best = d;
        }
      }
      if (enter < 0) return LpStatus::optimal;

      // Ratio test; near ties prefer the largest pivot (or smallest basic
      // index under Bland's rule).
      double theta = kInf;
      for (Index r = 0; r < m; ++r) {
        const double a = t_(r, enter);
        if (a > opt_.pivot_tol) theta = std::min(theta, std::max(rhs(r), 0.0) / a);
      }
      if (!std::isfinite(theta)) return LpStatus::unbounded;
      Index leave = -1;
      const double slack = 1e-12 * (1.0 + theta);
      for (Index r = 0; r < m; ++r) {
        const double a = t_(r, enter);
        if (a <= opt_.pivot_tol) continue;
        if (std::max(rhs(r), 0.0) / a > theta + slack) continue;
        if (leave < 0) {
          leave = r;
        } else if (bland ? basis_[r] < basis_[leave] : a > t_(leave, enter)) {
          leave = r;
        }
      }
      degenerate_run = theta <= 1e-14 ? degenerate_run + 1 : 0;
      pivot(leave, enter);
      ++iterations;
    }
  }

 private:
  Matrix t_;
  std::vector<Index> basis_;
  LpOptions opt_;
};

}  // namespace detail

inline LpResult solve_lp(const LinearProgram& lp, const LpOptions& opt = {}) {
  const Index nv = lp.cost.size();
  const Index n_eq = lp.eq_lhs.rows();
  const Index n_ub = lp.ub_lhs.rows();
  require(n_eq == 0 || lp.eq_lhs.cols() == nv, ErrorKind::structural, "equality matrix width");
  require(n_ub == 0 || lp.ub_lhs.cols() == nv, ErrorKind::structural, "inequality matrix width");
  require(lp.eq_rhs.size() == n_eq && lp.ub_rhs.size() == n_ub, ErrorKind::structural,
          "right-hand side length");
  const Vector lower = lp.lower.size() ? lp.lower : Vector::Zero(nv);
  const Vector upper = lp.upper.size() ? lp.upper : Vector::Constant(nv, kInf);
  require(lower.size() == nv && upper.size() == nv, ErrorKind::structural, "bound vector length");

  // Columns for the structural variables.
  std::vector<detail::ColumnMap> map(nv);
  Index n_cols = 0;
  std::vector<std::pair<Index, double>> extra_upper;  // (column, bound) rows y <= u
  for (Index i = 0; i < nv; ++i) {
    auto& cm = map[i];
    if (lower(i) > upper(i)) {
      LpResult res;
      res.status = LpStatus::infeasible;
      res.x = Vector::Zero(nv);
      return res;
    }
    if (std::isfinite(lower(i))) {
      cm.offset = lower(i);
      cm.pos = n_cols++;
      if (std::isfinite(upper(i))) extra_upper.emplace_back(cm.pos, upper(i) - lower(i));
    } else if (std::isfinite(upper(i))) {
      cm.offset = upper(i);
      cm.sign = -1.0;
      cm.pos = n_cols++;
    } else {
      cm.pos = n_cols++;
      cm.neg = n_cols++;
    }
  }
  const Index n_struct = n_cols;
  const Index n_bound_rows = static_cast<Index>(extra_upper.size());
  const Index n_rows = n_eq + n_ub + n_bound_rows;
  const Index n_slack = n_ub + n_bound_rows;

  Matrix a = Matrix::Zero(n_rows, n_struct + n_slack);
  Vector b = Vector::Zero(n_rows);
  Vector c = Vector::Zero(n_struct + n_slack);
  for (Index i = 0; i < nv; ++i) {
    const auto& cm = map[i];
    c(cm.pos) += cm.sign * lp.cost(i);
    if (cm.neg >= 0) c(cm.neg) -= lp.cost(i);
  }
  auto fill_row = [&](Index row, const Eigen::Ref<const Eigen::RowVectorXd>& coeffs, double rhs) {
    double shift = 0.0;
    for (Index i = 0; i < nv; ++i) {
      const double v = coeffs(i);
      if (v == 0.0) continue;
      const auto& cm = map[i];
      a(row, cm.pos) += cm.sign * v;
      if (cm.neg >= 0) a(row, cm.neg) -= v;
      shift += v * cm.offset;
    }
    b(row) = rhs - shift;
  };
  for (Index r = 0; r < n_eq; ++r) fill_row(r, lp.eq_lhs.row(r), lp.eq_rhs(r));
  for (Index r = 0; r < n_ub; ++r) {
    fill_row(n_eq + r, lp.ub_lhs.row(r), lp.ub_rhs(r));
    a(n_eq + r, n_struct + r) = 1.0;
  }
  for (Index k = 0; k < n_bound_rows; ++k) {
    const Index row = n_eq + n_ub + k;
    a(row, extra_upper[k].first) = 1.0;
    a(row, n_struct + n_ub + k) = 1.0;
    b(row) = extra_upper[k].second;
  }

  // Nonnegative right-hand side; rows whose slack survives the sign flip with
  // coefficient +1 start with the slack basic, the rest get an artificial.
  std::vector<Index> basis(n_rows, -1);
  for (Index r = 0; r < n_rows; ++r) {
    if (b(r) < 0) {
      a.row(r) *= -1.0;
      b(r) = -b(r);
    }
    if (r >= n_eq && a(r, n_struct + (r - n_eq)) > 0) basis[r] = n_struct + (r - n_eq);
  }
  const Index n_real = n_struct + n_slack;
  Index n_art = 0;
  for (Index r = 0; r < n_rows; ++r)
    if (basis[r] < 0) ++n_art;
  Matrix full(n_rows, n_real + n_art);
  full.leftCols(n_real) = a;
  full.rightCols(n_art).setZero();
  {
    Index k = 0;
    for (Index r = 0; r < n_rows; ++r) {
      if (basis[r] < 0) {
        full(r, n_real + k) = 1.0;
        basis[r] = n_real + k;
        ++k;
      }
    }
  }

  LpResult res;
  const int max_iter =
      opt.max_iterations > 0 ? opt.max_iterations : static_cast<int>(50 * (n_rows + full.cols()) + 100);

  Vector phase1 = Vector::Zero(full.cols());
  phase1.tail(n_art).setOnes();
  detail::Tableau tab(full, b, phase1, basis, opt);
  if (n_art > 0) {
    const LpStatus s1 = tab.run(full.cols(), max_iter, res.iterations);
    if (s1 == LpStatus::max_iter) {
      res.status = s1;
      res.x = Vector::Zero(nv);
      return res;
    }
    if (tab.objective() > opt.feasibility_tol * (1.0 + b.lpNorm<Eigen::Infinity>())) {
      res.status = LpStatus::infeasible;
      res.x = Vector::Zero(nv);
      return res;
    }
    // Drive artificials out of the basis where a real column can replace them.
    for (Index r = 0; r < n_rows; ++r) {
      if (tab.basis()[r] < n_real) continue;
      Index best = -1;
      double mag = opt.pivot_tol;
      for (Index j = 0; j < n_real; ++j) {
        if (std::abs(tab.at(r, j)) > mag) {
          mag = std::abs(tab.at(r, j));
          best = j;
        }
      }
      if (best >= 0) tab.pivot(r, best);
    }
  }
  Vector phase2 = Vector::Zero(full.cols());
  phase2.head(n_real) = c;
  tab.set_cost(phase2);
  res.status = tab.run(n_real, max_iter, res.iterations);

  // Basic solution from the tableau, then refined on the original system.
  Vector y = Vector::Zero(full.cols());
  for (Index r = 0; r < n_rows; ++r) y(tab.basis()[r]) = std::max(tab.rhs(r), 0.0);
  if (n_rows > 0) {
    Matrix bmat(n_rows, n_rows);
    for (Index r = 0; r < n_rows; ++r) bmat.col(r) = full.col(tab.basis()[r]);
    const Eigen::ColPivHouseholderQR<Matrix> qr(bmat);
    if (qr.rank() == n_rows) {
      const Vector yb = qr.solve(b);
      if (yb.allFinite() && yb.minCoeff() >= -opt.feasibility_tol) {
        Vector refined = Vector::Zero(full.cols());
        for (Index r = 0; r < n_rows; ++r) refined(tab.basis()[r]) = std::max(yb(r), 0.0);
        const double old_res = (full * y - b).lpNorm<Eigen::Infinity>();
        const double new_res = (full * refined - b).lpNorm<Eigen::Infinity>();
        if (new_res <= old_res) y = refined;
      }
    }
  }

  res.x.resize(nv);
  for (Index i = 0; i < nv; ++i) {
    const auto& cm = map[i];
    double v = cm.offset + cm.sign * y(cm.pos);
    if (cm.neg >= 0) v -= y(cm.neg);
    res.x(i) = v;
  }
  res.objective = lp.cost.dot(res.x);
  double viol = 0.0;
  if (n_eq) viol = std::max(viol, (lp.eq_lhs * res.x - lp.eq_rhs).lpNorm<Eigen::Infinity>());
  if (n_ub) viol = std::max(viol, std::max(0.0, (lp.ub_lhs * res.x - lp.ub_rhs).maxCoeff()));
  for (Index i = 0; i < nv; ++i) {
    viol = std::max(viol, lower(i) - res.x(i));
    viol = std::max(viol, res.x(i) - upper(i));
  }
  res.max_violation = viol;
  return res;
}

}  // namespace opinet::numkit
