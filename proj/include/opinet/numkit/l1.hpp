#pragma once

// Weighted l1 minimisation under linear constraints, solved as the
// split-variable linear program
//
//   min  sum_i weight_i |w_i|
//   s.t. |Phi w - psi|_inf <= tolerance      (equality when tolerance == 0)
//        sum_{i in sum_mask} w_i = sum_value  (optional)
//        lo_i <= w_i <= hi_i

#include "opinet/numkit/lp.hpp"

#include <optional>
#include <string>

namespace opinet::numkit {

struct L1Problem {
  Matrix phi;
  Vector psi;
  std::optional<double> sum_constraint;
  Vector sum_mask;      // empty: every variable enters the sum
  bool nonneg = false;
  Vector lower;         // empty: 0 if nonneg else -inf
  Vector upper;         // empty: +inf
  Vector weight_mask;   // empty: all ones
  double tolerance = 0.0;

  Index size() const { return phi.cols(); }
};

enum class SolveStatus { optimal, infeasible, max_iter };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

struct SolveResult {
  Vector w;
  double objective = 0.0;
  SolveStatus status = SolveStatus::max_iter;
  double residual = 0.0;  // |Phi w - psi|_inf
  int iterations = 0;
  std::string log;
};

namespace detail {

struct L1Layout {
  LinearProgram lp;
  std::vector<Index> pos, neg;  // per original variable; neg = -1 when single column
  Index extra = 0;              // appended variables after the split block
};

inline void check_problem(const L1Problem& p) {
  const Index n = p.size();
  require(p.psi.size() == p.phi.rows(), ErrorKind::structural, "psi length must equal rows of Phi");
  require(p.sum_mask.size() == 0 || p.sum_mask.size() == n, ErrorKind::structural, "sum mask length");
  require(p.lower.size() == 0 || p.lower.size() == n, ErrorKind::structural, "lower bound length");
  require(p.upper.size() == 0 || p.upper.size() == n, ErrorKind::structural, "upper bound length");
  require(p.weight_mask.size() == 0 || p.weight_mask.size() == n, ErrorKind::structural,
          "weight mask length");
  require(p.weight_mask.size() == 0 || p.weight_mask.minCoeff() >= 0.0, ErrorKind::parameter,
          "objective weights must be nonnegative");
  require(p.tolerance >= 0.0, ErrorKind::parameter, "tolerance must be nonnegative");
}

// Builds the LP over [split variables | n_extra trailing variables]. The
// residual rows are emitted by the caller-supplied policy: either equalities,
// +-tolerance bands, or bands against a trailing variable t.
inline L1Layout build_layout(const L1Problem& p, Index n_extra) {
  check_problem(p);
  const Index n = p.size();
  L1Layout out;
  out.pos.assign(n, -1);
  out.neg.assign(n, -1);
  Vector lo(n), hi(n);
  for (Index i = 0; i < n; ++i) {
    lo(i) = p.lower.size() ? p.lower(i) : (p.nonneg ? 0.0 : -kInf);
    hi(i) = p.upper.size() ? p.upper(i) : kInf;
    if (p.nonneg) lo(i) = std::max(lo(i), 0.0);
  }
  Index nv = 0;
  std::vector<double> cost, lower, upper;
  std::vector<Index> box_rows;  // original indices needing explicit box rows
  for (Index i = 0; i < n; ++i) {
    const double wt = p.weight_mask.size() ? p.weight_mask(i) : 1.0;
    if (lo(i) >= 0.0 || hi(i) <= 0.0 || wt == 0.0) {
      // Sign known (or no cost): |w| is linear on the feasible range.
      out.pos[i] = nv++;
      cost.push_back(lo(i) >= 0.0 ? wt : (hi(i) <= 0.0 ? -wt : 0.0));
      lower.push_back(lo(i));
      upper.push_back(hi(i));
    } else {
      out.pos[i] = nv++;
      out.neg[i] = nv++;
      cost.push_back(wt);
      cost.push_back(wt);
      lower.push_back(0.0);
      lower.push_back(0.0);
      upper.push_back(kInf);
      upper.push_back(kInf);
      if (std::isfinite(lo(i)) || std::isfinite(hi(i))) box_rows.push_back(i);
    }
  }
  out.extra = n_extra;
  for (Index k = 0; k < n_extra; ++k) {
    cost.push_back(0.0);
    lower.push_back(0.0);
    upper.push_back(kInf);
  }
  const Index total = nv + n_extra;
  auto& lp = out.lp;
  lp.cost = Eigen::Map<Vector>(cost.data(), total);
  lp.lower = Eigen::Map<Vector>(lower.data(), total);
  lp.upper = Eigen::Map<Vector>(upper.data(), total);

  // Box rows for split variables.
  std::vector<Eigen::RowVectorXd> ub_rows;
  std::vector<double> ub_rhs;
  for (Index i : box_rows) {
    if (std::isfinite(hi(i))) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(total);
      r(out.pos[i]) = 1.0;
      r(out.neg[i]) = -1.0;
      ub_rows.push_back(r);
      ub_rhs.push_back(hi(i));
    }
    if (std::isfinite(lo(i))) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(total);
      r(out.pos[i]) = -1.0;
      r(out.neg[i]) = 1.0;
      ub_rows.push_back(r);
      ub_rhs.push_back(-lo(i));
    }
  }
  lp.ub_lhs.resize(static_cast<Index>(ub_rows.size()), total);
  lp.ub_rhs.resize(static_cast<Index>(ub_rows.size()));
  for (std::size_t k = 0; k < ub_rows.size(); ++k) {
    lp.ub_lhs.row(static_cast<Index>(k)) = ub_rows[k];
    lp.ub_rhs(static_cast<Index>(k)) = ub_rhs[k];
  }
  lp.eq_lhs.resize(0, total);
  lp.eq_rhs.resize(0);
  return out;
}

// Row of the split-variable LP equal to coeffs' w.
inline Eigen::RowVectorXd expand_row(const L1Layout& lay, const Eigen::Ref<const Eigen::RowVectorXd>& coeffs,
                                     Index total) {
  Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(total);
  for (Index i = 0; i < coeffs.size(); ++i) {
    r(lay.pos[i]) += coeffs(i);
    if (lay.neg[i] >= 0) r(lay.neg[i]) -= coeffs(i);
  }
  return r;
}

inline void append_rows(Matrix& m, Vector& rhs, const Matrix& rows, const Vector& vals) {
  const Index old = m.rows();
  Matrix nm(old + rows.rows(), rows.cols());
  nm.topRows(old) = m;
  nm.bottomRows(rows.rows()) = rows;
  Vector nr(old + vals.size());
  nr.head(old) = rhs;
  nr.tail(vals.size()) = vals;
  m = std::move(nm);
  rhs = std::move(nr);
}

inline void add_sum_row(const L1Problem& p, L1Layout& lay) {
  if (!p.sum_constraint) return;
  const Index total = lay.lp.cost.size();
  const Eigen::RowVectorXd mask =
      p.sum_mask.size() ? Eigen::RowVectorXd(p.sum_mask.transpose()) : Eigen::RowVectorXd::Ones(p.size());
  append_rows(lay.lp.eq_lhs, lay.lp.eq_rhs, expand_row(lay, mask, total), Vector::Constant(1, *p.sum_constraint));
}

inline Vector collect(const L1Layout& lay, const Vector& x, Index n) {
  Vector w(n);
  for (Index i = 0; i < n; ++i) {
    w(i) = x(lay.pos[i]);
    if (lay.neg[i] >= 0) w(i) -= x(lay.neg[i]);
  }
  return w;
}

inline double l1_objective(const L1Problem& p, const Vector& w) {
  return p.weight_mask.size() ? p.weight_mask.cwiseProduct(w.cwiseAbs()).sum() : w.lpNorm<1>();
}

}  // namespace detail

inline SolveResult solve_l1(const L1Problem& problem, const LpOptions& opt = {}) {
  auto lay = detail::build_layout(problem, 0);
  const Index total = lay.lp.cost.size();
  const Index m = problem.phi.rows();
  Matrix rows(m, total);
  for (Index r = 0; r < m; ++r) rows.row(r) = detail::expand_row(lay, problem.phi.row(r), total);
  if (problem.tolerance == 0.0) {
    detail::append_rows(lay.lp.eq_lhs, lay.lp.eq_rhs, rows, problem.psi);
  } else {
    Matrix band(2 * m, total);
    Vector rhs(2 * m);
    band.topRows(m) = rows;
    band.bottomRows(m) = -rows;
    rhs.head(m) = problem.psi.array() + problem.tolerance;
    rhs.tail(m) = -problem.psi.array() + problem.tolerance;
    detail::append_rows(lay.lp.ub_lhs, lay.lp.ub_rhs, band, rhs);
  }
  detail::add_sum_row(problem, lay);

  const LpResult lp = solve_lp(lay.lp, opt);
  SolveResult res;
  res.iterations = lp.iterations;
  res.w = detail::collect(lay, lp.x, problem.size());
  res.objective = detail::l1_objective(problem, res.w);
  res.residual = m ? (problem.phi * res.w - problem.psi).lpNorm<Eigen::Infinity>() : 0.0;
  switch (lp.status) {
    case LpStatus::optimal: res.status = SolveStatus::optimal; break;
    case LpStatus::infeasible: res.status = SolveStatus::infeasible; break;
    // A bounded-below objective cannot be unbounded; treat as iteration failure.
    default: res.status = SolveStatus::max_iter; break;
  }
  res.log = std::string("simplex ") + to_string(lp.status) + ", vertex solution, " +
            std::to_string(lp.iterations) + " pivots, violation " + std::to_string(lp.max_violation);
  return res;
}

// Smallest tolerance for which the band |Phi w - psi| <= t admits a point
// satisfying the remaining constraints. Returns +inf if none exists.
inline double minimal_feasible_tolerance(const L1Problem& problem, const LpOptions& opt = {}) {
  auto lay = detail::build_layout(problem, 1);
  const Index total = lay.lp.cost.size();
  const Index t = total - 1;
  lay.lp.cost.setZero();
  lay.lp.cost(t) = 1.0;
  const Index m = problem.phi.rows();
  Matrix band(2 * m, total);
  Vector rhs(2 * m);
  for (Index r = 0; r < m; ++r) {
    const Eigen::RowVectorXd row = detail::expand_row(lay, problem.phi.row(r), total);
    band.row(r) = row;
    band(r, t) = -1.0;
    band.row(m + r) = -row;
    band(m + r, t) = -1.0;
    rhs(r) = problem.psi(r);
    rhs(m + r) = -problem.psi(r);
  }
  detail::append_rows(lay.lp.ub_lhs, lay.lp.ub_rhs, band, rhs);
  detail::add_sum_row(problem, lay);
  const LpResult lp = solve_lp(lay.lp, opt);
  if (lp.status != LpStatus::optimal) return kInf;
  return lp.x(t);
}

}  // namespace opinet::numkit
