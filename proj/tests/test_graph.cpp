#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mgccn/graph.hpp"

using namespace mgccn;

namespace {

CsrMatrix edges(Index n, const std::vector<std::pair<Index, Index>>& list) {
  std::vector<std::tuple<Index, Index, double>> t;
  for (auto [i, j] : list) {
    t.emplace_back(i, j, 1.0);
    t.emplace_back(j, i, 1.0);
  }
  return CsrMatrix::from_triplets(n, n, t);
}

CsrMatrix random_graph(Index n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<std::pair<Index, Index>> list;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (coin(rng)) list.emplace_back(i, j);
    }
  }
  return edges(n, list);
}

}  // namespace

TEST(CsrMatrix, FromTripletsSumsDuplicatesAndSortsColumns) {
  auto m = CsrMatrix::from_triplets(2, 3, {{0, 2, 1.0}, {0, 0, 2.0}, {0, 2, 0.5}, {1, 1, 4.0}});
  EXPECT_EQ(m.nnz(), 3u);
  EXPECT_EQ(m.at(0, 0), 2.0);
  EXPECT_EQ(m.at(0, 2), 1.5);
  EXPECT_EQ(m.at(1, 1), 4.0);
  EXPECT_EQ(m.at(1, 0), 0.0);
  const auto cols = m.row_cols(0);
  ASSERT_EQ(cols.size(), 2u);
  EXPECT_LT(cols[0], cols[1]);
}

TEST(CsrMatrix, RejectsUnsortedColumns) {
  EXPECT_THROW(CsrMatrix(1, 3, {0, 2}, {2, 1}, {1.0, 1.0}), ShapeError);
}

TEST(CsrMatrix, RejectsOutOfRangeTriplet) {
  EXPECT_THROW(CsrMatrix::from_triplets(2, 2, {{0, 2, 1.0}}), ShapeError);
}

TEST(CsrMatrix, MultiplyMatchesDense) {
  std::mt19937_64 rng(3);
  auto a = random_graph(9, 0.4, rng);
  Matrix h = Matrix::Random(9, 4);
  EXPECT_LT((a.multiply(h) - a.to_dense() * h).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((a.transpose_multiply(h) - a.to_dense().transpose() * h).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CsrMatrix, HalfMatrixTimesColumn) {
  auto a = CsrMatrix::from_triplets(2, 2, {{0, 0, 0.5}, {0, 1, 0.5}, {1, 0, 0.5}, {1, 1, 0.5}});
  Matrix h(2, 1);
  h << 1, 3;
  const Matrix out = a.multiply(h);
  EXPECT_EQ(out(0, 0), 2.0);
  EXPECT_EQ(out(1, 0), 2.0);
}

TEST(NormalizeLayer, SingleEdge) {
  const auto layer = normalize_layer(edges(2, {{0, 1}}));
  const Matrix d = layer.a_hat.to_dense();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(d(i, j), 0.5);
  }
}

TEST(NormalizeLayer, EmptyGraphGivesIdentity) {
  const auto layer = normalize_layer(CsrMatrix::from_triplets(3, 3, {}));
  EXPECT_EQ(layer.a_hat.to_dense(), Matrix::Identity(3, 3));
  for (Index i = 0; i < 3; ++i) {
    ASSERT_EQ(layer.neighbors(i).size(), 1u);
    EXPECT_EQ(layer.neighbors(i)[0], i);
  }
}

TEST(NormalizeLayer, PathMiddleNode) {
  const auto layer = normalize_layer(edges(3, {{0, 1}, {1, 2}}));
  EXPECT_DOUBLE_EQ(layer.a_hat.at(1, 1), 1.0 / 3.0);
  // Endpoint degree 2, middle degree 3.
  EXPECT_DOUBLE_EQ(layer.a_hat.at(0, 1), 1.0 / std::sqrt(6.0));
  EXPECT_DOUBLE_EQ(layer.a_hat.at(0, 0), 0.5);
  EXPECT_EQ(layer.a_hat.at(0, 2), 0.0);
}

TEST(NormalizeLayer, PropertiesOnRandomGraphs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + rng() % 15;
    const auto adj = random_graph(n, 0.3, rng);
    const auto layer = normalize_layer(adj);
    ASSERT_TRUE(layer.a_hat.is_symmetric());
    const Matrix a = adj.to_dense() + Matrix::Identity(n, n);
    const Eigen::VectorXd deg = a.rowwise().sum();
    const Matrix dense = layer.a_hat.to_dense();
    for (Index i = 0; i < n; ++i) {
      const auto nb = layer.neighbors(i);
      ASSERT_TRUE(std::find(nb.begin(), nb.end(), i) != nb.end());
      for (Index j : nb) {
        const auto back = layer.neighbors(j);
        ASSERT_TRUE(std::find(back.begin(), back.end(), i) != back.end());
      }
      EXPECT_GT(dense.row(i).sum(), 0.0);
      for (Index j = 0; j < n; ++j) {
        const double expect = a(i, j) / std::sqrt(deg(i) * deg(j));
        EXPECT_NEAR(dense(i, j), expect, 1e-15);
        EXPECT_EQ(dense(i, j), dense(j, i));
      }
    }
    // Spectrum of the normalized operator lies in (-1, 1].
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(dense)};
    EXPECT_LE(eig.eigenvalues().maxCoeff(), 1.0 + 1e-12);
    EXPECT_GT(eig.eigenvalues().minCoeff(), -1.0);
  }
}

TEST(SecondView, IdentityRows) {
  EXPECT_EQ(build_second_attribute_view(Matrix::Identity(3, 3)), Matrix::Identity(3, 3));
}

TEST(SecondView, IdenticalRowsGiveOnes) {
  Matrix x(2, 3);
  x << 1, 2, 3, 1, 2, 3;
  const Matrix s = build_second_attribute_view(x);
  EXPECT_NEAR((s - Matrix::Ones(2, 2)).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(SecondView, CosineOfHalfDiagonal) {
  Matrix x(2, 2);
  x << 1, 0, 1, 1;
  const Matrix s = build_second_attribute_view(x);
  EXPECT_NEAR(s(0, 1), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(s(0, 1), s(1, 0));
}

TEST(SecondView, ZeroRowWarnsAndKeepsUnitDiagonal) {
  Matrix x(3, 2);
  x << 1, 0, 0, 0, 0, 1;
  std::vector<std::string> messages;
  ScopedWarningHandler capture([&](const std::string& m) { messages.push_back(m); });
  const Matrix s = build_second_attribute_view(x);
  EXPECT_EQ(messages.size(), 1u);
  EXPECT_EQ(s(1, 1), 1.0);
  EXPECT_EQ(s(1, 0), 0.0);
  EXPECT_EQ(s(0, 1), 0.0);
  EXPECT_EQ(s(2, 1), 0.0);
}

TEST(SecondView, PropertiesOnRandomInputs) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 1 + rng() % 10, d = 1 + rng() % 6;
    Matrix x(n, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = gauss(rng);
    const Matrix s = build_second_attribute_view(x);
    for (Index i = 0; i < n; ++i) {
      EXPECT_EQ(s(i, i), 1.0);
      for (Index j = 0; j < n; ++j) {
        EXPECT_EQ(s(i, j), s(j, i));
        EXPECT_LE(std::abs(s(i, j)), 1.0);
      }
    }
  }
}

TEST(DropLayer, RemovesLayerKeepsNodes) {
  MultilayerGraph g;
  g.n_nodes = 3;
  g.k_classes = 2;
  auto x = std::make_shared<const Matrix>(Matrix::Identity(3, 3));
  g.layers.push_back({edges(3, {{0, 1}}), x});
  g.layers.push_back({edges(3, {{1, 2}}), x});
  const auto one = drop_layer(g, 0);
  EXPECT_EQ(one.n_layers(), 1u);
  EXPECT_EQ(one.n_nodes, 3u);
  EXPECT_EQ(one.layers[0].adjacency, g.layers[1].adjacency);
  EXPECT_THROW(drop_layer(one, 0), ConfigError);
  EXPECT_THROW(drop_layer(g, 2), ConfigError);
}

TEST(MultilayerGraph, ValidateCatchesViolations) {
  MultilayerGraph g;
  g.n_nodes = 2;
  g.k_classes = 2;
  auto x = std::make_shared<const Matrix>(Matrix::Identity(2, 2));
  g.layers.push_back({edges(2, {{0, 1}}), x});
  EXPECT_NO_THROW(g.validate());

  auto asym = g;
  asym.layers[0].adjacency = CsrMatrix::from_triplets(2, 2, {{0, 1, 1.0}});
  EXPECT_THROW(asym.validate(), DataError);

  auto loop = g;
  loop.layers[0].adjacency = CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}});
  EXPECT_THROW(loop.validate(), DataError);

  auto rows = g;
  rows.layers[0].attributes = std::make_shared<const Matrix>(Matrix::Identity(3, 3));
  EXPECT_THROW(rows.validate(), DataError);

  auto labels = g;
  labels.labels = std::vector<int>{0, 2};
  EXPECT_THROW(labels.validate(), DataError);
}
