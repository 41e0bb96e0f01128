#include "opinet/centrality.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace opinet;

namespace {

InfluenceNetwork undirected(Index n, const std::vector<std::pair<Index, Index>>& e) {
  InfluenceNetwork net;
  net.W = Matrix::Zero(n, n);
  for (auto [i, j] : e) net.W(i, j) = net.W(j, i) = 1.0;
  for (Index i = 0; i < n; ++i) {
    if (net.W.row(i).sum() == 0.0) net.W(i, i) = 1.0;
    net.W.row(i) /= net.W.row(i).sum();
  }
  net.lambda = Vector::Constant(n, 0.5);
  net.directed = false;
  return net;
}

InfluenceNetwork star_out() {
  // Centre 0 influences three leaves; leaves listen only to the centre.
  InfluenceNetwork net;
  net.W = Matrix::Zero(4, 4);
  net.W(0, 0) = 1.0;
  for (Index i = 1; i < 4; ++i) net.W(i, 0) = 1.0;
  net.lambda = Vector::Constant(4, 0.5);
  return net;
}

Matrix swap2() { return (Matrix(2, 2) << 0, 1, 1, 0).finished(); }

}  // namespace

TEST(Degree, Examples) {
  EXPECT_EQ(degree_centrality(star_out(), Direction::out, false).values(0), 4.0);  // self-loop counts as an edge
  const auto net = undirected(2, {{0, 1}});
  EXPECT_EQ(degree_centrality(net, Direction::out, false).values, Vector::Ones(2));
  const auto g = generate_network(GeneratorSpec{}, 20, 3);
  EXPECT_LT((degree_centrality(g, Direction::in, true).values - Vector::Ones(20)).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Degree, StarCentreWithoutSelfLoop) {
  InfluenceNetwork net = star_out();
  net.W(0, 0) = 0.0;
  net.W(0, 1) = 1.0;  // centre listens to one leaf
  EXPECT_EQ(degree_centrality(net, Direction::out, false).values(0), 3.0);
}

TEST(Closeness, PathGraph) {
  const auto c = closeness_centrality(undirected(3, {{0, 1}, {1, 2}}));
  EXPECT_DOUBLE_EQ(c.values(1), 0.5);
  EXPECT_DOUBLE_EQ(c.values(0), 1.0 / 3.0);
  EXPECT_TRUE(c.warnings.empty());
}

TEST(Closeness, SingleNodeIsZeroWithWarning) {
  InfluenceNetwork net;
  net.W = Matrix::Ones(1, 1);
  net.lambda = Vector::Ones(1);
  const auto c = closeness_centrality(net);
  EXPECT_EQ(c.values(0), 0.0);
  EXPECT_FALSE(c.warnings.empty());
}

TEST(Closeness, DisconnectedFlagged) {
  const auto c = closeness_centrality(undirected(4, {{0, 1}, {2, 3}}));
  EXPECT_DOUBLE_EQ(c.values(0), 1.0);
  EXPECT_FALSE(c.warnings.empty());
}

TEST(Betweenness, Examples) {
  const auto star = undirected(4, {{0, 1}, {0, 2}, {0, 3}});
  const auto b = betweenness_centrality(star);
  EXPECT_DOUBLE_EQ(b.values(0), 3.0);
  EXPECT_DOUBLE_EQ(b.values(1), 0.0);
  EXPECT_DOUBLE_EQ(betweenness_centrality(star, false, true).values(0), 1.0);
  const auto complete = undirected(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}});
  EXPECT_EQ(betweenness_centrality(complete).values, Vector::Zero(5));
}

TEST(Centrality, PathMeasuresMatchEnumeration) {
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    CounterRng rng(seed);
    GeneratorSpec spec;
    spec.model = seed % 3 == 0 ? GraphModel::watts_strogatz : GraphModel::erdos_renyi;
    spec.k = 2;
    spec.rewire = 0.3;
    spec.p = 0.15 + 0.4 * rng.uniform();
    spec.weights = seed % 2 ? WeightScheme::equal : WeightScheme::uniform;
    const Index n = 3 + static_cast<Index>(rng.below(6));  // 3..8
    const auto net = generate_network(spec, n, seed);
    for (bool weighted : {false, true}) {
      const auto ref = oracle::enumerate_paths(net.W, weighted, !net.directed);
      const auto b = betweenness_centrality(net, weighted);
      const auto c = closeness_centrality(net, weighted);
      EXPECT_LT((b.values - ref.betweenness).lpNorm<Eigen::Infinity>(), 1e-12) << seed << " " << weighted;
      EXPECT_LT((c.values - ref.closeness).lpNorm<Eigen::Infinity>(), 1e-12) << seed << " " << weighted;
    }
  }
}

TEST(Eigenvector, SymmetricCasesAreUniform) {
  const auto c2 = eigenvector_centrality(swap2());
  EXPECT_NEAR(c2.values(0), 0.5, 1e-15);
  Matrix cyc = Matrix::Zero(5, 5);
  for (Index i = 0; i < 5; ++i) cyc(i, (i + 1) % 5) = cyc((i + 1) % 5, i) = 1.0;
  const auto c5 = eigenvector_centrality(cyc);
  EXPECT_LT((c5.values.array() - 0.2).abs().maxCoeff(), 1e-12);
  EXPECT_TRUE(c5.warnings.empty());
}

TEST(Eigenvector, MatchesDenseSolveAndScaleInvariant) {
  CounterRng rng(4);
  for (int t = 0; t < 30; ++t) {
    Matrix a(3, 3);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j) a(i, j) = rng.uniform() + 0.01;
    const auto c = eigenvector_centrality(a);
    const Eigen::EigenSolver<Matrix> es(a);
    Index k;
    es.eigenvalues().cwiseAbs().maxCoeff(&k);
    Vector v = es.eigenvectors().col(k).real();
    v /= v.sum();
    EXPECT_LT((c.values - v).lpNorm<Eigen::Infinity>(), 1e-10);
    EXPECT_NEAR(c.values.sum(), 1.0, 1e-12);
    EXPECT_LT((eigenvector_centrality(7.5 * a).values - c.values).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(Eigenvector, ReducibleWarns) {
  const Matrix a = (Matrix(2, 2) << 1, 0, 1, 0.5).finished();
  EXPECT_FALSE(eigenvector_centrality(a).warnings.empty());
}

TEST(PageRank, Examples) {
  Matrix cyc = Matrix::Zero(4, 4);
  for (Index i = 0; i < 4; ++i) cyc((i + 1) % 4, i) = 1.0;
  EXPECT_LT((pagerank(cyc, 0.15).values.array() - 0.25).abs().maxCoeff(), 1e-14);
  const Matrix chain = (Matrix(3, 3) << 0, 0, 1, 1, 0, 0, 0, 1, 0).finished() * 0.5 +
                       (Matrix(3, 3) << 0, 1, 0, 0, 0, 1, 1, 0, 0).finished() * 0.5;
  Matrix skew = (Matrix(3, 3) << 0.2, 0.5, 0, 0.8, 0, 0.3, 0, 0.5, 0.7).finished();
  EXPECT_LT((pagerank(skew, 0.999).values.array() - 1.0 / 3).abs().maxCoeff(), 1e-3);
  const Vector ref = (Matrix::Identity(3, 3) - 0.85 * skew).partialPivLu().solve(Vector::Constant(3, 0.15 / 3));
  EXPECT_LT((pagerank(skew, 0.15).values - ref).lpNorm<Eigen::Infinity>(), 1e-13);
  EXPECT_LT((pagerank(chain, 0.15).values.array() - 1.0 / 3).abs().maxCoeff(), 1e-14);
  EXPECT_THROW(pagerank(Matrix::Ones(2, 2), 0.1), Error);
}

TEST(PageRank, TransposeFlagAndAgreement) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto net = generate_network(GeneratorSpec{}, 12, seed);
    const auto a = pagerank(net.W, 0.15, true);
    const auto b = pagerank(Matrix(net.W.transpose()), 0.15);
    EXPECT_EQ(a.values, b.values);
    const auto e = eigenvector_centrality(pagerank_matrix(Matrix(net.W.transpose()), 0.15));
    EXPECT_LT((a.values - e.values).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(Friedkin, Examples) {
  InfluenceNetwork net;
  net.W = swap2();
  net.lambda = Vector::Ones(2);
  const auto c = friedkin_centrality(net, 0.5);
  EXPECT_NEAR(c.values(0), 0.5, 1e-15);
  net.lambda.setZero();
  EXPECT_LT((friedkin_centrality(net).values.array() - 0.5).abs().maxCoeff(), 1e-15);
  net.lambda.setOnes();
  EXPECT_THROW(friedkin_centrality(net), Error);
}

TEST(Friedkin, MatchesDenseSolve) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto net = generate_network(GeneratorSpec{}, 5, seed);
    const Matrix v = (Matrix::Identity(5, 5) - net.lambda_w()).inverse() *
                     Matrix((Vector::Ones(5) - net.lambda).asDiagonal());
    const Vector ref = v.colwise().mean().transpose();  // (1/n) V' 1
    const auto c = friedkin_centrality(net);
    EXPECT_LT((c.values - ref).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_NEAR(c.values.sum(), 1.0, 1e-9);
  }
}
