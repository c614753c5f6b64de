#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mgccn/losses.hpp"

using namespace mgccn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
  return m;
}

Matrix random_stochastic(Eigen::Index n, Eigen::Index k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Matrix q(n, k);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < n; ++i) q.row(i) /= q.row(i).sum();
  return q;
}

ViewInput edge_view(Index n, const std::vector<std::pair<Index, Index>>& list, const Matrix& x) {
  std::vector<std::tuple<Index, Index, double>> t;
  for (auto [i, j] : list) {
    t.emplace_back(i, j, 1.0);
    t.emplace_back(j, i, 1.0);
  }
  return {normalize_layer(CsrMatrix::from_triplets(n, n, t)), std::make_shared<const Matrix>(x)};
}

double cosine(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return a.row(i).dot(b.row(j)) / (a.row(i).norm() * b.row(j).norm());
}

// l(a_i, b_i) from the definition: positives across views, negatives across
// and within views with the within-view self term left out.
double direct_info_nce(const Matrix& a, const Matrix& b, Eigen::Index i, double tau) {
  double denom = 0.0;
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    denom += std::exp(cosine(a, i, b, k) / tau);
    if (k != i) denom += std::exp(cosine(a, i, a, k) / tau);
  }
  return -std::log(std::exp(cosine(a, i, b, i) / tau) / denom);
}

double direct_pair_loss(const Matrix& a, const Matrix& b, double tau) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) total += direct_info_nce(a, b, i, tau) + direct_info_nce(b, a, i, tau);
  return total / (2.0 * static_cast<double>(a.rows()));
}

double contrastive_of(const std::vector<Matrix>& zs, double tau) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& z : zs) vars.push_back(tape.leaf(z));
  return contrastive_loss(vars, tau).scalar();
}

}  // namespace

TEST(StructureLoss, ZeroEmbeddingGivesLogTwoPerPair) {
  const auto view = edge_view(4, {{0, 1}, {1, 2}}, Matrix::Identity(4, 4));
  Tape tape;
  const double loss = structure_loss(tape.leaf(Matrix::Zero(4, 3)), view.layer).scalar();
  EXPECT_NEAR(loss, static_cast<double>(view.layer.a_hat.nnz()) * std::log(2.0), 1e-14);
}

TEST(StructureLoss, TwoNodeExample) {
  const auto view = edge_view(2, {{0, 1}}, Matrix::Identity(2, 2));
  Matrix z(2, 2);
  z << 1, 0, 1, 0;
  Tape tape;
  const double expect = -4.0 * std::log(1.0 / (1.0 + std::exp(-1.0)));
  EXPECT_NEAR(structure_loss(tape.leaf(z), view.layer).scalar(), expect, 1e-14);
}

TEST(StructureLoss, VanishesForLargeDotProducts) {
  const auto view = edge_view(2, {{0, 1}}, Matrix::Identity(2, 2));
  Tape tape;
  EXPECT_LT(structure_loss(tape.leaf(Matrix::Constant(2, 1, 30.0)), view.layer).scalar(), 1e-300);
  // Very negative dot products hit the log clamp instead of overflowing.
  Matrix z(2, 1);
  z << 40.0, -40.0;
  const double clamped = structure_loss(tape.leaf(z), view.layer).scalar();
  EXPECT_TRUE(std::isfinite(clamped));
  EXPECT_NEAR(clamped, -2.0 * std::log(kLogFloor), 1e-9);
}

TEST(ReconstructionLoss, Examples) {
  const Matrix x = Matrix::Identity(2, 2);
  const std::vector<ViewInput> views{edge_view(2, {{0, 1}}, x)};
  Tape tape;
  const std::vector<Var> xs{tape.constant(x)};
  const std::vector<Var> zs{tape.leaf(Matrix::Zero(2, 2))};
  EXPECT_EQ(reconstruction_loss(xs, xs, zs, views, 0.0).total.scalar(), 0.0);
  const std::vector<Var> shifted{tape.constant(x + Matrix::Ones(2, 2))};
  const auto parts = reconstruction_loss(xs, shifted, zs, views, 0.0);
  EXPECT_EQ(parts.total.scalar(), 4.0);
  const auto weighted = reconstruction_loss(xs, shifted, zs, views, 0.5);
  EXPECT_NEAR(weighted.total.scalar(), 4.0 + 0.5 * 4.0 * std::log(2.0), 1e-14);
  EXPECT_EQ(weighted.attribute.scalar(), 4.0);
}

TEST(ReconstructionLoss, ViewCountMismatch) {
  const std::vector<ViewInput> views{edge_view(2, {{0, 1}}, Matrix::Identity(2, 2))};
  Tape tape;
  const std::vector<Var> one{tape.constant(Matrix::Identity(2, 2))};
  const std::vector<Var> two{one[0], one[0]};
  EXPECT_THROW(reconstruction_loss(one, two, one, views, 0.0), ShapeError);
}

TEST(ContrastiveLoss, SingleNodeIsZero) {
  std::mt19937_64 rng(1);
  EXPECT_NEAR(contrastive_of({random_matrix(1, 3, rng), random_matrix(1, 3, rng)}, 0.5), 0.0, 1e-15);
}

TEST(ContrastiveLoss, OrthogonalRowsExample) {
  const Matrix z = Matrix::Identity(2, 2);
  const double e = std::exp(1.0);
  const double per_node = -std::log(e / (e + 2.0));
  Tape tape;
  const Var pair = pair_contrastive_loss(tape.leaf(z), tape.leaf(z), 1.0);
  EXPECT_NEAR(pair.scalar(), per_node, 1e-15);
  // Two ordered view pairs.
  EXPECT_NEAR(contrastive_of({z, z}, 1.0), 2.0 * per_node, 1e-15);
}

TEST(ContrastiveLoss, MatchesDirectFormula) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 8), f = 1 + static_cast<Eigen::Index>(rng() % 4);
    const Index m = 2 + rng() % 2;
    const double tau = 0.2 + 0.1 * static_cast<double>(rng() % 10);
    std::vector<Matrix> zs;
    for (Index s = 0; s < m; ++s) zs.push_back(random_matrix(n, f, rng));
    double expect = 0.0;
    for (Index s = 0; s < m; ++s) {
      for (Index t = 0; t < m; ++t) {
        if (s != t) expect += direct_pair_loss(zs[s], zs[t], tau);
      }
    }
    ASSERT_NEAR(contrastive_of(zs, tau), expect, 1e-12 * std::max(1.0, std::abs(expect)));
  }
}

TEST(ContrastiveLoss, SingleViewWarnsAndIsZero) {
  std::vector<std::string> messages;
  ScopedWarningHandler capture([&](const std::string& m) { messages.push_back(m); });
  std::mt19937_64 rng(3);
  EXPECT_EQ(contrastive_of({random_matrix(3, 2, rng)}, 0.5), 0.0);
  EXPECT_EQ(messages.size(), 1u);
}

TEST(ContrastiveLoss, ScaleInvarianceSymmetryAndSign) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> scale_dist(0.01, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 10), f = 1 + static_cast<Eigen::Index>(rng() % 5);
    const Matrix a = random_matrix(n, f, rng), b = random_matrix(n, f, rng);
    const double c = scale_dist(rng);
    const double base = contrastive_of({a, b}, 0.5);
    EXPECT_NEAR(contrastive_of({c * a, c * b}, 0.5), base, 1e-9);
    EXPECT_GE(base, 0.0);

    Tape tape;
    const Var ua = row_l2_normalize(tape.leaf(a)), ub = row_l2_normalize(tape.leaf(b));
    EXPECT_EQ(pair_contrastive_loss(ua, ub, 0.5).scalar(), pair_contrastive_loss(ub, ua, 0.5).scalar());
  }
}

TEST(ContrastiveLoss, ZeroRowsStayFinite) {
  Matrix a = Matrix::Zero(3, 2), b = Matrix::Zero(3, 2);
  a(0, 0) = 1.0;
  Tape tape;
  Var va = tape.leaf(a), vb = tape.leaf(b);
  const std::vector<Var> zs{va, vb};
  const Var loss = contrastive_loss(zs, 0.5);
  EXPECT_TRUE(std::isfinite(loss.scalar()));
  tape.backward(loss);
  EXPECT_TRUE(va.grad().allFinite());
}

TEST(Fuse, Examples) {
  std::mt19937_64 rng(5);
  const Matrix z = random_matrix(3, 2, rng);
  Tape tape;
  const std::vector<Var> opposite{tape.leaf(z), tape.leaf(-z)};
  EXPECT_EQ(fuse(opposite, FusionWeights({1.0, 1.0})).value(), Matrix::Zero(3, 2));
  const std::vector<Var> single{tape.leaf(z)};
  EXPECT_EQ(fuse(single, FusionWeights({1.0})).value(), z);
  const Matrix w = fuse(opposite, FusionWeights({50.0, 1.0})).value();
  EXPECT_LT((w - 49.0 * z).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_THROW(fuse(single, FusionWeights({1.0, 1.0})), ShapeError);
}

TEST(FusionWeights, Validation) {
  EXPECT_THROW(FusionWeights({0.0, 0.0}), ConfigError);
  EXPECT_THROW(FusionWeights({-1.0, 2.0}), ConfigError);
  EXPECT_NO_THROW(FusionWeights({0.0, 1.0}));
}

TEST(SoftAssignment, Examples) {
  Matrix mu(2, 2);
  mu << 0, 0, 1, 0;
  Matrix z(2, 2);
  z << 0.5, 3.0, 0.0, 0.0;
  const Matrix q = soft_assignment_values(z, mu);
  EXPECT_NEAR(q(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(q(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(q(1, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(q(1, 1), 1.0 / 3.0, 1e-15);
  Tape tape;
  EXPECT_EQ(soft_assignment(tape.leaf(z), tape.leaf(mu)).value(), q);
  EXPECT_THROW(soft_assignment_values(z, mu.topRows(1)), ConfigError);
  EXPECT_THROW(soft_assignment(tape.leaf(z), tape.leaf(mu.topRows(1))), ConfigError);
}

TEST(SoftAssignment, MatchesDirectFormulaAndRowsSumToOne) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 10), f = 1 + static_cast<Eigen::Index>(rng() % 4);
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng() % 4);
    const Matrix z = random_matrix(n, f, rng), mu = random_matrix(k, f, rng);
    Tape tape;
    const Matrix q = soft_assignment(tape.leaf(z), tape.leaf(mu)).value();
    for (Eigen::Index i = 0; i < n; ++i) {
      double denom = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        double d2 = 0.0;
        for (Eigen::Index c = 0; c < f; ++c) d2 += (z(i, c) - mu(j, c)) * (z(i, c) - mu(j, c));
        denom += 1.0 / (1.0 + d2);
      }
      for (Eigen::Index j = 0; j < k; ++j) {
        double d2 = 0.0;
        for (Eigen::Index c = 0; c < f; ++c) d2 += (z(i, c) - mu(j, c)) * (z(i, c) - mu(j, c));
        ASSERT_NEAR(q(i, j), (1.0 / (1.0 + d2)) / denom, 1e-12);
        ASSERT_GE(q(i, j), 0.0);
      }
      ASSERT_NEAR(q.row(i).sum(), 1.0, 1e-9);
    }
  }
}

TEST(TargetDistribution, Examples) {
  Matrix q(1, 2);
  q << 0.5, 0.5;
  EXPECT_EQ(target_distribution(q), q);
  Matrix r(2, 2);
  r << 0.9, 0.1, 0.9, 0.1;
  const Matrix p = target_distribution(r);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(p(i, 0), 0.9, 1e-15);
    EXPECT_NEAR(p(i, 1), 0.1, 1e-15);
  }
}

TEST(TargetDistribution, MatchesDirectFormulaAndRowsSumToOne) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 10), k = 2 + static_cast<Eigen::Index>(rng() % 4);
    const Matrix q = random_stochastic(n, k, rng);
    const Matrix p = target_distribution(q);
    std::vector<double> f(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) f[static_cast<std::size_t>(j)] += q(i, j);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      double denom = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) denom += q(i, j) * q(i, j) / f[static_cast<std::size_t>(j)];
      for (Eigen::Index j = 0; j < k; ++j) {
        ASSERT_NEAR(p(i, j), q(i, j) * q(i, j) / f[static_cast<std::size_t>(j)] / denom, 1e-12);
        ASSERT_GE(p(i, j), 0.0);
      }
      ASSERT_NEAR(p.row(i).sum(), 1.0, 1e-9);
    }
  }
}

TEST(TargetDistribution, SharpensWithEqualClusterFrequencies) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng() % 4);
    const Eigen::Index base = 1 + static_cast<Eigen::Index>(rng() % 4);
    const Matrix rows = random_stochastic(base, k, rng);
    // All cyclic shifts of every row make the column sums equal.
    Matrix q(base * k, k);
    for (Eigen::Index b = 0; b < base; ++b) {
      for (Eigen::Index s = 0; s < k; ++s) {
        for (Eigen::Index j = 0; j < k; ++j) q(b * k + s, j) = rows(b, (j + s) % k);
      }
    }
    const Matrix p = target_distribution(q);
    for (Eigen::Index i = 0; i < q.rows(); ++i) ASSERT_GE(p.row(i).maxCoeff(), q.row(i).maxCoeff() - 1e-15);
  }
}

TEST(ClusteringLoss, Examples) {
  Tape tape;
  Matrix q(1, 2), p(1, 2);
  q << 1, 0;
  p << 0, 1;
  EXPECT_EQ(clustering_loss(tape.leaf(q), q).scalar(), 0.0);
  EXPECT_EQ(clustering_loss(tape.leaf(q), p).scalar(), 2.0);
  EXPECT_THROW(clustering_loss(tape.leaf(q), Matrix::Zero(2, 2)), ShapeError);
}

TEST(ClusteringLoss, GradientFlowsOnlyToQ) {
  Tape tape;
  Var q = tape.leaf(Matrix::Constant(1, 2, 0.5));
  Matrix p(1, 2);
  p << 1.0, 0.0;
  tape.backward(clustering_loss(q, p));
  EXPECT_EQ(q.grad()(0, 0), -1.0);
  EXPECT_EQ(q.grad()(0, 1), 1.0);
}

TEST(TotalLoss, WeightedSum) {
  Tape tape;
  const Var re = tape.leaf(Matrix::Constant(1, 1, 2.0));
  const Var con = tape.leaf(Matrix::Constant(1, 1, 3.0));
  const Var clu = tape.leaf(Matrix::Constant(1, 1, 5.0));
  EXPECT_EQ(total_loss(re, con, clu, 0.0, 0.0).scalar(), 2.0);
  EXPECT_EQ(total_loss(re, con, clu, 10.0, 0.5).scalar(), 2.0 + 30.0 + 2.5);
}
