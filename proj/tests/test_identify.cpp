#include "opinet/identify.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace opinet;

namespace {

Matrix uniform_matrix(Index r, Index c, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix x(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) x(i, j) = rng.uniform();
  return x;
}

Matrix gaussian_matrix(Index r, Index c, std::uint64_t seed) {
  CounterRng rng(seed);
  std::normal_distribution<double> nd;
  Matrix x(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) x(i, j) = nd(rng);
  return x;
}

InfluenceNetwork kout(Index n, int d, std::uint64_t seed, double llo = 0.5, double lhi = 0.9) {
  GeneratorSpec g;
  g.model = GraphModel::k_out;
  g.out_degree = d;
  g.lambda_lo = llo;
  g.lambda_hi = lhi;
  return generate_network(g, n, seed);
}

// W with self-loops: mixes the k_out weights with a random diagonal.
InfluenceNetwork with_self_loops(InfluenceNetwork net, std::uint64_t seed) {
  CounterRng rng(seed);
  for (Index i = 0; i < net.n(); ++i) {
    const double s = 0.1 + 0.4 * rng.uniform();
    net.W.row(i) *= 1.0 - s;
    net.W(i, i) += s;
  }
  return net;
}

EstimationReport report_for(const Matrix& w) {
  EstimationReport r;
  r.W_hat = w;
  r.support = support(w);
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Evaluation

TEST(Evaluate, IdenticalMatrices) {
  const auto net = kout(6, 2, 1);
  const auto m = evaluate_estimate(net.W, report_for(net.W));
  EXPECT_EQ(m.at("support_f1"), 1.0);
  EXPECT_EQ(m.at("frobenius_error"), 0.0);
  EXPECT_EQ(m.at("max_abs_error"), 0.0);
}

TEST(Evaluate, DisjointSupports) {
  const Matrix a = (Matrix(2, 2) << 0, 1, 1, 0).finished();
  const Matrix b = Matrix::Identity(2, 2);
  EXPECT_EQ(evaluate_estimate(a, report_for(b)).at("support_f1"), 0.0);
}

TEST(Evaluate, NineOfTen) {
  Matrix truth = Matrix::Zero(5, 5), est = Matrix::Zero(5, 5);
  int placed = 0;
  for (Index i = 0; i < 5 && placed < 10; ++i)
    for (Index j = 0; j < 5 && placed < 10; ++j)
      if (i != j) {
        truth(i, j) = 1.0;
        if (placed < 9) est(i, j) = 1.0;
        ++placed;
      }
  est(4, 4) = 1.0;
  const auto m = evaluate_estimate(truth, report_for(est));
  EXPECT_DOUBLE_EQ(m.at("support_precision"), 0.9);
  EXPECT_DOUBLE_EQ(m.at("support_recall"), 0.9);
  EXPECT_DOUBLE_EQ(m.at("support_f1"), 0.9);
}

// ---------------------------------------------------------------------------
// Finite horizon

TEST(FiniteHorizon, ExactRoundTrip) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto net = with_self_loops(kout(6, 2, seed), seed + 50);
    const auto tr = simulate_fj(net, uniform_matrix(6, 3, seed + 100), 4);
    const auto known = identify_finite_horizon(tr, net.lambda);
    EXPECT_LT((known.W_hat - net.W).norm(), 1e-6) << seed;
    const auto unknown = identify_finite_horizon(tr, std::nullopt);
    EXPECT_LT((unknown.W_hat - net.W).norm(), 1e-6) << seed;
    EXPECT_LT((*unknown.Lambda_hat - net.lambda).norm(), 1e-6) << seed;
    EXPECT_EQ(evaluate_estimate(net.W, unknown).at("support_f1"), 1.0);
  }
}

TEST(FiniteHorizon, StubbornAgent) {
  auto net = kout(5, 2, 7);
  net.lambda(2) = 0.0;
  const auto tr = simulate_fj(net, uniform_matrix(5, 3, 8), 4);
  const auto rep = identify_finite_horizon(tr, std::nullopt);
  EXPECT_NEAR((*rep.Lambda_hat)(2), 0.0, 1e-9);
  EXPECT_LT(rep.Gamma_hat->row(2).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FiniteHorizon, NoiseBelowEpsIsInfeasible) {
  const auto net = kout(5, 2, 9);
  auto tr = simulate_fj(net, uniform_matrix(5, 2, 10), 6);
  CounterRng rng(11);
  for (std::size_t k = 1; k < tr.X.size(); ++k)
    for (Index i = 0; i < 5; ++i)
      for (Index l = 0; l < 2; ++l) tr.X[k](i, l) += 1e-3 * (rng.uniform() - 0.5);
  HorizonOptions opt;
  opt.eps = 1e-7;
  try {
    identify_finite_horizon(tr, net.lambda, opt);
    FAIL() << "expected infeasibility";
  } catch (const InfeasibleError& e) {
    EXPECT_GT(e.min_feasible_tolerance(), opt.eps);
    opt.eps = e.min_feasible_tolerance() * (1 + 1e-6) + 1e-12;
  }
  // The probe is per row; the largest value over rows makes every row feasible.
  for (int attempt = 0; attempt < 10; ++attempt) {
    try {
      identify_finite_horizon(tr, net.lambda, opt);
      SUCCEED();
      return;
    } catch (const InfeasibleError& e) {
      opt.eps = std::max(opt.eps, e.min_feasible_tolerance()) * (1 + 1e-6) + 1e-12;
    }
  }
  FAIL() << "probe tolerance did not make the problem feasible";
}

TEST(FiniteHorizon, RejectsShortAndStrided) {
  const auto net = kout(4, 2, 3);
  EXPECT_THROW(identify_finite_horizon(simulate_fj(net, uniform_matrix(4, 1, 1), 0), std::nullopt), Error);
  SimOptions so;
  so.stride = 2;
  EXPECT_THROW(identify_finite_horizon(simulate_fj(net, uniform_matrix(4, 1, 1), 6, so), std::nullopt), Error);
}

// ---------------------------------------------------------------------------
// Infinite horizon

TEST(InfiniteHorizon, FullRankMatchesDenseSolve) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Index n = 8;
    const auto net = kout(n, 3, seed);
    const Matrix x0 = uniform_matrix(n, n + 2, seed + 20);
    const Matrix xinf = fj_equilibrium(net, x0).X;
    const auto rep = identify_infinite_horizon(x0, xinf, net.lambda);
    // Oracle: least-squares solve of the stacked consistent system [Phi; 1'] w = [psi; 1].
    Matrix sys(n + 3, n);
    sys.topRows(n + 2) = xinf.transpose();
    sys.row(n + 2).setOnes();
    for (Index j = 0; j < n; ++j) {
      Vector rhs(n + 3);
      rhs.head(n + 2) = (xinf.row(j) - (1 - net.lambda(j)) * x0.row(j)).transpose() / net.lambda(j);
      rhs(n + 2) = 1.0;
      const Vector w = sys.colPivHouseholderQr().solve(rhs);
      EXPECT_LT((rep.W_hat.row(j).transpose() - w).norm(), 1e-8);
    }
    EXPECT_LT((rep.W_hat - net.W).norm(), 1e-6);
  }
}

TEST(InfiniteHorizon, JointEqualsPerRow) {
  const Index n = 5;
  const auto net = kout(n, 2, 41);
  const Matrix x0 = uniform_matrix(n, 7, 42);
  const Matrix xinf = fj_equilibrium(net, x0).X;
  const auto rep = identify_infinite_horizon(x0, xinf, net.lambda);
  // One program over vec(W): block-diagonal equality rows, one sum row per agent.
  numkit::L1Problem joint;
  const Index m = x0.cols();
  joint.phi = Matrix::Zero(n * (m + 1), n * n);
  joint.psi = Vector::Zero(n * (m + 1));
  for (Index j = 0; j < n; ++j) {
    joint.phi.block(j * (m + 1), j * n, m, n) = xinf.transpose();
    joint.phi.block(j * (m + 1) + m, j * n, 1, n).setOnes();
    joint.psi.segment(j * (m + 1), m) = (xinf.row(j) - (1 - net.lambda(j)) * x0.row(j)).transpose() / net.lambda(j);
    joint.psi(j * (m + 1) + m) = 1.0;
  }
  const auto r = numkit::solve_l1(joint);
  ASSERT_EQ(r.status, numkit::SolveStatus::optimal);
  const Matrix wj = Eigen::Map<const Matrix>(r.w.data(), n, n).transpose();
  EXPECT_LT((wj - rep.W_hat).norm(), 1e-9);
}

TEST(InfiniteHorizon, IdentifiabilityGuards) {
  const Index n = 4;
  const auto net = kout(n, 2, 5);
  Matrix x0 = uniform_matrix(n, 5, 6);
  const Matrix xinf = fj_equilibrium(net, x0).X;
  const auto expect_kind = [](auto&& f, ErrorKind k) {
    try {
      f();
      ADD_FAILURE() << "no error raised";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), k) << e.what();
    }
  };
  Matrix consensus = x0;
  consensus.col(2).setConstant(0.3);
  expect_kind([&] { identify_infinite_horizon(consensus, xinf, net.lambda); }, ErrorKind::identifiability);
  expect_kind([&] { identify_infinite_horizon(x0, xinf, Vector::Ones(n)); }, ErrorKind::identifiability);
  expect_kind([&] { identify_infinite_horizon(x0, xinf, Vector::Zero(n)); }, ErrorKind::identifiability);
  expect_kind([&] { identify_unknown_lambda(consensus, xinf); }, ErrorKind::identifiability);
}

TEST(InfiniteHorizon, SampleBoundCEqualsOne) {
  const Index n = 30;
  const int d = 3;
  const double m_req = infinite_horizon_sample_bound(1.0, 0.4, 0.4, d, n);
  const Index m = static_cast<Index>(std::ceil(m_req));
  int perfect = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto net = kout(n, d, seed, 0.4, 0.4);
    const Matrix x0 = gaussian_matrix(n, m, seed + 1000);
    const Matrix xinf = fj_equilibrium(net, x0).X;
    const auto rep = identify_infinite_horizon(x0, xinf, net.lambda);
    if (evaluate_estimate(net.W, rep).at("support_f1") == 1.0) ++perfect;
  }
  EXPECT_GE(perfect, 18);
}

TEST(InfiniteHorizon, SparseRecoveryBelowN) {
  // Fewer issues than agents: recovery relies on l1 sparsity alone.
  const Index n = 30;
  int perfect = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto net = kout(n, 3, seed, 0.4, 0.4);
    const Matrix x0 = gaussian_matrix(n, 20, seed + 77);
    const auto rep = identify_infinite_horizon(x0, fj_equilibrium(net, x0).X, net.lambda);
    if (evaluate_estimate(net.W, rep).at("support_f1") == 1.0) ++perfect;
  }
  EXPECT_GE(perfect, 8);
}

// ---------------------------------------------------------------------------
// Unknown Lambda and the ambiguity class

TEST(UnknownLambda, ZeroDiagonalRoundTrip) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Index n = 7;
    const auto net = kout(n, 3, seed, 0.3, 0.9);
    const Matrix x0 = uniform_matrix(n, n + 1, seed + 9);
    const auto rep = identify_unknown_lambda(x0, fj_equilibrium(net, x0).X);
    EXPECT_LT((rep.W_hat - net.W).norm(), 1e-6) << seed;
    EXPECT_LT((*rep.Lambda_hat - net.lambda).norm(), 1e-6) << seed;
  }
}

TEST(UnknownLambda, LambdaNearIdentityWarns) {
  const Index n = 6;
  auto net = kout(n, 2, 4);
  net.lambda.setConstant(1.0 - 1e-7);
  const Matrix x0 = uniform_matrix(n, n + 1, 5);
  const auto rep = identify_unknown_lambda(x0, fj_equilibrium(net, x0).X);
  EXPECT_FALSE(rep.warnings.empty());
}

TEST(Ambiguity, IdentityTransform) {
  const auto net = with_self_loops(kout(5, 2, 13), 14);
  const auto t = ambiguity_transform(net, Vector::Ones(5));
  EXPECT_LT((t.W - net.W).norm(), 1e-12);
  EXPECT_LT((t.lambda - net.lambda).norm(), 1e-12);
}

TEST(Ambiguity, SameEquilibrium) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Index n = 6;
    const auto net = with_self_loops(kout(n, 2, seed), seed + 3);
    CounterRng rng(seed + 99);
    Vector d(n);
    for (Index i = 0; i < n; ++i) d(i) = 0.2 + 0.8 * rng.uniform();
    const auto t = ambiguity_transform(net, d);
    EXPECT_TRUE(validate_network(t).ok());
    const Matrix x0 = uniform_matrix(n, 4, seed);
    EXPECT_LT((fj_equilibrium(t, x0).X - fj_equilibrium(net, x0).X).lpNorm<Eigen::Infinity>(), 1e-9);
  }
}

TEST(Ambiguity, ZeroScalingRejected) {
  const auto net = kout(4, 2, 2);
  EXPECT_THROW(ambiguity_transform(net, Vector::Zero(4)), Error);
  Vector bad = Vector::Ones(4);
  bad(1) = 1.5;
  EXPECT_THROW(ambiguity_transform(net, bad), Error);
}

TEST(Ambiguity, CanonicalReportIsClassInvariant) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Index n = 6;
    const auto net = with_self_loops(kout(n, 2, seed + 30), seed + 31);
    Vector d(n);
    CounterRng rng(seed);
    for (Index i = 0; i < n; ++i) d(i) = 0.3 + 0.7 * rng.uniform();
    const auto other = ambiguity_transform(net, d);
    const Matrix x0 = uniform_matrix(n, n + 1, seed + 32);
    const auto r1 = identify_unknown_lambda(x0, fj_equilibrium(net, x0).X);
    const auto r2 = identify_unknown_lambda(x0, fj_equilibrium(other, x0).X);
    const auto canon = canonicalize(net);
    EXPECT_LT((r1.W_hat - r2.W_hat).norm(), 1e-6);
    EXPECT_LT((*r1.Lambda_hat - *r2.Lambda_hat).norm(), 1e-6);
    EXPECT_LT((r1.W_hat - canon.W).norm(), 1e-6);
    EXPECT_LT((*r1.Lambda_hat - canon.lambda).norm(), 1e-6);
    EXPECT_LT((canonicalize(other).W - canon.W).norm(), 1e-9);
  }
}

// ---------------------------------------------------------------------------
// Moments and Yule-Walker

namespace {

ObservationStream constant_stream(Index n, std::int64_t T, double c, const SamplingModel& m, std::uint64_t seed) {
  OpinionTrajectory tr;
  for (std::int64_t k = 0; k < T; ++k) {
    tr.X.push_back(Matrix::Constant(n, 1, c));
    tr.steps.push_back(k);
  }
  return sample_observations(tr, m, seed);
}

OpinionTrajectory iid_trajectory(Index n, std::int64_t T, std::uint64_t seed) {
  CounterRng rng(seed);
  std::normal_distribution<double> nd;
  OpinionTrajectory tr;
  for (std::int64_t k = 0; k < T; ++k) {
    Matrix x(n, 1);
    for (Index i = 0; i < n; ++i) x(i, 0) = nd(rng);
    tr.X.push_back(x);
    tr.steps.push_back(k);
  }
  return tr;
}

}  // namespace

TEST(StateMean, FullConstant) {
  const auto s = constant_stream(4, 100, 0.37, SamplingModel::full(), 1);
  const Vector x = estimate_state_mean(s);
  for (Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(x(i), 0.37);
}

TEST(StateMean, MaskedConstantConcentrates) {
  const double c = 0.8, rho = 0.5;
  const std::int64_t T = 10000;
  const auto s = constant_stream(5, T, c, SamplingModel::homogeneous(5, rho), 3);
  const Vector x = estimate_state_mean(s);
  for (Index i = 0; i < 5; ++i) EXPECT_LT(std::abs(x(i) - c), 3 * c / std::sqrt(rho * T));
}

TEST(StateMean, Errors) {
  auto s = constant_stream(3, 10, 1.0, SamplingModel::intermittent(0.0), 1);
  EXPECT_THROW(estimate_state_mean(s), Error);
  Vector r(3);
  r << 0.5, 0.0, 0.5;
  s = constant_stream(3, 50, 1.0, SamplingModel::independent(r), 2);
  try {
    estimate_state_mean(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("agent 1"), std::string::npos);
  }
}

TEST(CrossCorrelation, FullObservationIsRawAverage) {
  const auto tr = iid_trajectory(3, 200, 4);
  const auto s = sample_observations(tr, SamplingModel::full(), 1);
  MomentOptions mo;
  mo.n_sigma = 2;
  mo.centered = false;
  const auto me = estimate_cross_correlations(s, mo);
  for (std::size_t l = 0; l <= 2; ++l) {
    Matrix acc = Matrix::Zero(3, 3);
    for (std::size_t k = 0; k + l < 200; ++k) acc += tr.X[k] * tr.X[k + l].transpose();
    acc /= static_cast<double>(200 - l);
    EXPECT_LT((me.Sigma_hat[l] - acc).norm(), 1e-13);
  }
  EXPECT_LT((me.Sigma_minus - 0.5 * (me.Sigma_hat[0] + me.Sigma_hat[1])).norm(), 1e-15);
  EXPECT_LT((me.Sigma_plus - 0.5 * (me.Sigma_hat[1] + me.Sigma_hat[2])).norm(), 1e-15);
}

// With every entry observed the centered estimator differs from the raw one
// only through the window edges: C[l] + x x' - raw = O(l / t).
TEST(CrossCorrelation, CenteredMatchesRawUnderFullObservation) {
  const auto tr = iid_trajectory(3, 5000, 6);
  const auto s = sample_observations(tr, SamplingModel::full(), 1);
  MomentOptions raw;
  raw.centered = false;
  const auto a = estimate_cross_correlations(s), b = estimate_cross_correlations(s, raw);
  EXPECT_LT((a.Sigma_hat[0] - b.Sigma_hat[0]).norm(), 1e-12);
  for (std::size_t l = 1; l < a.Sigma_hat.size(); ++l)
    EXPECT_LT((a.Sigma_hat[l] - b.Sigma_hat[l]).cwiseAbs().maxCoeff(), 20.0 * static_cast<double>(l) / 5000.0);
}

// Mask noise in the raw lag products grows with the squared mean. Centering
// leaves only a rank-one x_hat error shared by every lag, so differences
// between lags (what the Yule-Walker relation uses) stay small.
TEST(CrossCorrelation, CenteringRemovesMeanDrivenMaskNoise) {
  auto tr = iid_trajectory(3, 20000, 12);
  for (auto& x : tr.X) x.array() += 10.0;
  const auto s = sample_observations(tr, SamplingModel::homogeneous(3, 0.5), 13);
  MomentOptions raw;
  raw.centered = false;
  const auto c = estimate_cross_correlations(s), r = estimate_cross_correlations(s, raw);
  const double ec = (c.Sigma_hat[1] - c.Sigma_hat[2]).norm();
  const double er = (r.Sigma_hat[1] - r.Sigma_hat[2]).norm();
  EXPECT_LT(10.0 * ec, er);
}

TEST(CrossCorrelation, IndependentInputsDecorrelate) {
  const std::int64_t T = 40000;
  const auto s = sample_observations(iid_trajectory(4, T, 8), SamplingModel::homogeneous(4, 0.7), 9);
  const auto me = estimate_cross_correlations(s);
  for (std::size_t l = 1; l < me.Sigma_hat.size(); ++l)
    EXPECT_LT(me.Sigma_hat[l].cwiseAbs().maxCoeff(), 6.0 / (0.7 * std::sqrt(static_cast<double>(T))));
  EXPECT_LT((me.Sigma_hat[0] - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 0.06);
}

TEST(CrossCorrelation, Errors) {
  const auto s = sample_observations(iid_trajectory(2, 4, 1), SamplingModel::full(), 1);
  EXPECT_THROW(estimate_cross_correlations(s), Error);  // t <= L
  const auto z = sample_observations(iid_trajectory(2, 100, 1), SamplingModel::intermittent(1.0), 1);
  auto zero = z;
  zero.model = SamplingModel::intermittent(0.0);
  EXPECT_THROW(estimate_cross_correlations(zero), Error);
}

TEST(CrossCorrelation, LagZeroErrorShrinksAsSqrtT) {
  GeneratorSpec g;
  g.model = GraphModel::k_out;
  g.out_degree = 2;
  const auto net = generate_network(g, 5, 17);
  const Vector x0 = uniform_matrix(5, 1, 18).col(0);
  const auto truth = gossip_stationary_moments(net, 1, x0);
  const std::int64_t t = 4000, burn = 2000;
  double e1 = 0, e4 = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    GossipParams p;
    p.seed = seed;
    const auto tr = simulate_gossip_fj(net, x0, p, burn + 4 * t);
    const auto s = sample_observations(tr, SamplingModel::homogeneous(5, 0.6), seed + 500);
    MomentOptions mo;
    mo.burn_in = burn;
    auto head = s;
    head.horizon = burn + t;
    head.records.erase(std::remove_if(head.records.begin(), head.records.end(),
                                      [&](const ObservationRecord& r) { return r.k >= burn + t; }),
                       head.records.end());
    e1 += (estimate_cross_correlations(head, mo).Sigma_hat[0] - truth.second).norm();
    e4 += (estimate_cross_correlations(s, mo).Sigma_hat[0] - truth.second).norm();
  }
  const double ratio = e1 / e4;
  EXPECT_GE(ratio, 1.4);
  EXPECT_LE(ratio, 2.8);
}

namespace {

struct ExactGossip {
  InfluenceNetwork net;
  double beta;
  ExpectedGossip g;
  MomentEstimates me;
};

ExactGossip exact_gossip(Index n, std::uint64_t seed, std::size_t n_sigma = 5) {
  ExactGossip e;
  e.net = kout(n, 2, seed, 0.4, 0.8);
  e.beta = 1.0 / static_cast<double>(n);
  const Vector x0 = uniform_matrix(n, 1, seed + 3).col(0);
  e.g = expected_gossip_dynamics(e.net, e.beta, x0);
  const auto mom = gossip_stationary_moments(e.net, 1, x0);
  e.me = moments_from_lags(mom.mean, cross_correlation_recursion(e.g.Gamma, e.g.b, mom.mean, mom.second, n_sigma),
                           n_sigma);
  return e;
}

}  // namespace

TEST(EstimateGamma, DenseExactMoments) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto e = exact_gossip(8, seed);
    const auto est = estimate_gamma(e.me, e.g.b);
    EXPECT_LT((est.Gamma - e.g.Gamma).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_TRUE(est.warnings.empty());
  }
}

TEST(EstimateGamma, SparseWithZeroEtaMatchesDense) {
  const auto e = exact_gossip(6, 3);
  const auto dense = estimate_gamma(e.me, e.g.b);
  const auto sparse = estimate_gamma(e.me, e.g.b, GammaMode::sparse, 0.0);
  EXPECT_LT((dense.Gamma - sparse.Gamma).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(EstimateGamma, HugeEtaGivesDiagonal) {
  const auto e = exact_gossip(5, 4);
  const auto sparse = estimate_gamma(e.me, e.g.b, GammaMode::sparse, 1e6);
  Matrix off = sparse.Gamma;
  off.diagonal().setZero();
  EXPECT_EQ(off.cwiseAbs().maxCoeff(), 0.0);
}

TEST(EstimateGamma, SparseSmallEtaInfeasibleOnNoisyMoments) {
  auto e = exact_gossip(5, 6);
  e.me.Sigma_hat[2](0, 1) += 1e-3;  // breaks the consistency of the lag sequence
  e.me.refresh_windows();
  Matrix sm = e.me.Sigma_minus;
  sm.col(4) = sm.col(3);  // singular Sigma_minus so the perturbation cannot be absorbed
  e.me.Sigma_minus = sm;
  EXPECT_THROW(estimate_gamma(e.me, e.g.b, GammaMode::sparse, 0.0), InfeasibleError);
}

TEST(EstimateGamma, RankDeficientWarns) {
  auto e = exact_gossip(4, 2);
  e.me.Sigma_minus.col(3) = e.me.Sigma_minus.col(2);
  e.me.Sigma_minus.row(3) = e.me.Sigma_minus.row(2);
  EXPECT_FALSE(estimate_gamma(e.me, e.g.b).warnings.empty());
}

TEST(RecoverW, ExactGammaRoundTrip) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto net = with_self_loops(kout(7, 3, seed, 0.3, 0.9), seed);
    const double beta = 2.0 / 7.0;
    const auto g = expected_gossip_dynamics(net, beta, uniform_matrix(7, 1, seed).col(0));
    RecoveryOptions ro;
    ro.threshold = 1e-9;
    const auto rep = recover_topology_and_w(g.Gamma, net.lambda, beta, ro);
    EXPECT_LT((rep.W_hat - net.W).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(rep.metrics.at("renormalization"), 1e-9);
    EXPECT_EQ(evaluate_estimate(net.W, rep).at("support_f1"), 1.0);
  }
}

TEST(RecoverW, TwoAgentHandComputation) {
  const Matrix g = (Matrix(2, 2) << 0.5, 0.25, 0.25, 0.5).finished();
  const auto rep = recover_topology_and_w(g, Vector::Constant(2, 0.5), 0.5);
  EXPECT_LT((rep.W_hat - (Matrix(2, 2) << 0, 1, 1, 0).finished()).norm(), 1e-12);
}

TEST(RecoverW, ThresholdAboveEverythingIsDegenerate) {
  const Matrix g = (Matrix(2, 2) << 0.5, 0.25, 0.25, 0.5).finished();
  RecoveryOptions ro;
  ro.threshold = 0.3;
  EXPECT_THROW(recover_topology_and_w(g, Vector::Constant(2, 0.5), 0.5, ro), Error);
}

TEST(YuleWalker, DenseEqualsSupportRoundTripFromExactMoments) {
  for (Index n : {4, 10, 20}) {
    const auto e = exact_gossip(n, static_cast<std::uint64_t>(n) + 1);
    RecoveryOptions ro;
    ro.threshold = 1e-9;
    const auto rep = recover_topology_and_w(estimate_gamma(e.me, e.g.b).Gamma, e.net.lambda, e.beta, ro);
    EXPECT_LT((rep.W_hat - e.net.W).norm(), 1e-6) << n;
  }
}

// ---------------------------------------------------------------------------
// Bayesian shrinkage

TEST(Bayesian, PurePriorAtZeroSamples) {
  const InverseWishartPrior p{Matrix::Identity(3, 3) * 2.0, 7.0};
  const Matrix s = bayesian_covariance(Matrix::Zero(3, 3), 0.0, p);
  EXPECT_EQ(s, p.psi / 3.0);
  const auto v = bayesian_covariance(std::vector<Matrix>{Matrix(0, 3)}, p);
  EXPECT_EQ(v.front(), p.psi / 3.0);
}

TEST(Bayesian, WeightFormula) { EXPECT_DOUBLE_EQ(shrinkage_weight(8.0, 4, 10.0), 3.0 / 13.0); }

TEST(Bayesian, LargeSampleApproachesScm) {
  const Index n = 3;
  const Matrix x = gaussian_matrix(1000000, n, 5);
  const Matrix scm = x.transpose() * x / 1e6;
  const InverseWishartPrior p{Matrix::Identity(n, n) * 5.0, 9.0};
  const Matrix s = bayesian_covariance(std::vector<Matrix>{x}, p).front();
  EXPECT_LT((s - scm).norm() / scm.norm(), 1e-4);
}

TEST(Bayesian, OutputIsSymmetricPsd) {
  const Matrix x = gaussian_matrix(5, 4, 6);
  const InverseWishartPrior p{Matrix::Identity(4, 4) + Matrix::Constant(4, 4, 0.2), 6.5};
  const Matrix s = bayesian_covariance(std::vector<Matrix>{x}, p).front();
  EXPECT_TRUE(is_symmetric(s, 1e-12));
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues().minCoeff(), -1e-12);
}

TEST(Bayesian, InvalidPrior) {
  EXPECT_THROW(bayesian_covariance(Matrix::Identity(2, 2), 1, {Matrix::Identity(2, 2), 3.0}), Error);
  EXPECT_THROW(bayesian_covariance(Matrix::Identity(2, 2), 1, {-Matrix::Identity(2, 2), 5.0}), Error);
}

namespace {

// Sigma_s ~ IW(Psi, nu) drawn as the inverse of a Wishart(Psi^{-1}, nu) sum of
// outer products; then T samples from N(0, Sigma_s).
std::vector<Matrix> iw_hierarchy(const Matrix& psi, int nu, int systems, int T, std::uint64_t seed) {
  const Index n = psi.rows();
  CounterRng rng(seed);
  std::normal_distribution<double> nd;
  const Matrix lpi = Eigen::LLT<Matrix>(psi.inverse()).matrixL();
  std::vector<Matrix> out;
  for (int s = 0; s < systems; ++s) {
    Matrix g = Matrix::Zero(n, n);
    for (int k = 0; k < nu; ++k) {
      Vector z(n);
      for (Index i = 0; i < n; ++i) z(i) = nd(rng);
      const Vector v = lpi * z;
      g += v * v.transpose();
    }
    const Matrix sigma = g.inverse();
    const Matrix ls = Eigen::LLT<Matrix>(sigma).matrixL();
    Matrix x(T, n);
    for (int t = 0; t < T; ++t) {
      Vector z(n);
      for (Index i = 0; i < n; ++i) z(i) = nd(rng);
      x.row(t) = (ls * z).transpose();
    }
    out.push_back(x);
  }
  return out;
}

}  // namespace

TEST(Hyperparameters, RecoversHierarchy) {
  // Psi error at m = 20 is dominated by the sampling spread of nu_hat, so the
  // 15% level is checked on the median fit over seeded hierarchies.
  const Index n = 3;
  const int nu = 34;
  const Matrix psi = (Matrix::Identity(n, n) + Matrix::Constant(n, n, 0.3)) * (nu - n - 1);
  const auto rel_err = [&](int systems, std::uint64_t seed, HyperparameterFit* out = nullptr) {
    const auto fit = fit_hyperparameters(iw_hierarchy(psi, nu, systems, 400, seed));
    if (out) *out = fit;
    return (fit.prior.psi - psi).norm() / psi.norm();
  };
  std::vector<double> errs;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    HyperparameterFit fit;
    errs.push_back(rel_err(20, seed, &fit));
    EXPECT_FALSE(fit.low_confidence);
    EXPECT_LE(fit.objective, fit.initial_objective);
    for (std::size_t k = 1; k < fit.trace.size(); ++k) EXPECT_LE(fit.trace[k], fit.trace[k - 1] + 1e-9);
  }
  std::nth_element(errs.begin(), errs.begin() + 10, errs.end());
  EXPECT_LT(errs[10], 0.15);
  EXPECT_LT(rel_err(200, 99), 0.07);
}

TEST(Hyperparameters, SingleSystemIsLowConfidence) {
  const auto fit = fit_hyperparameters(iw_hierarchy(Matrix::Identity(3, 3) * 5, 8, 1, 6, 7));
  EXPECT_TRUE(fit.low_confidence);
  EXPECT_LE(fit.objective, fit.initial_objective);
}

// ---------------------------------------------------------------------------
// Multiplex

TEST(Multiplex, ExactMomentsRecoverEveryLayer) {
  GeneratorSpec g;
  g.model = GraphModel::k_out;
  g.out_degree = 2;
  g.lambda_lo = 0.4;
  g.lambda_hi = 0.8;
  for (auto tag : {MultiplexModel::common_support, MultiplexModel::common_component, MultiplexModel::independent}) {
    const auto mx = build_multiplex(tag, g, {}, 8, 3, 19);
    const Matrix u = uniform_matrix(8, 3, 20);
    const Matrix q = 0.01 * Matrix::Identity(8, 8);
    std::vector<MomentEstimates> mom;
    std::vector<Vector> lambdas;
    for (std::size_t s = 0; s < 3; ++s) {
      const auto& net = mx.layers[s];
      const Matrix a = net.lambda_w();
      const Vector c = (Vector::Ones(8) - net.lambda).cwiseProduct(u.col(static_cast<Index>(s)));
      const auto lm = stationary_moments(a, c, q);
      mom.push_back(moments_from_lags(lm.mean, cross_correlation_recursion(a, c, lm.mean, lm.second, 5), 5));
      lambdas.push_back(net.lambda);
    }
    MultiplexOptions mo;
    mo.bayesian = false;
    mo.threshold = 1e-9;
    const auto reps = identify_multiplex_from_moments(mom, tag, lambdas, u, mo);
    for (std::size_t s = 0; s < 3; ++s)
      EXPECT_LT((reps[s].W_hat - mx.layers[s].W).norm(), 1e-6) << to_string(tag) << " layer " << s;
  }
}

TEST(Multiplex, SimulatedStreamsProduceValidEstimates) {
  GeneratorSpec g;
  g.model = GraphModel::k_out;
  g.out_degree = 2;
  const auto mx = build_multiplex(MultiplexModel::common_support, g, {}, 6, 2, 3);
  const Matrix u = uniform_matrix(6, 2, 4);
  const auto trajs = simulate_multiplex_fj(mx, u, 0.01 * Matrix::Identity(6, 6), 20000, 5);
  std::vector<ObservationStream> streams;
  for (std::size_t s = 0; s < 2; ++s)
    streams.push_back(sample_observations(trajs[s], SamplingModel::homogeneous(6, 0.8), 10 + s));
  const auto reps = identify_multiplex(streams, MultiplexModel::common_support,
                                       {mx.layers[0].lambda, mx.layers[1].lambda}, u);
  ASSERT_EQ(reps.size(), 2u);
  EXPECT_EQ(reps[0].support, reps[1].support);
  for (const auto& r : reps) {
    EXPECT_LT((r.W_hat.rowwise().sum() - Vector::Ones(6)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GE(r.W_hat.minCoeff(), 0.0);
  }
}
