#include "dage/error.hpp"
#include "dage/graph.hpp"
#include "dage/losses.hpp"
#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <algorithm>
#include <limits>
#include <numeric>

using namespace dage;
using namespace dage::loss;
using dage::test::Rng;

namespace {

constexpr auto S = DomainTag::Source;
constexpr auto T = DomainTag::Target;

struct Pencil {
  Matrix L;
  Matrix B;
};

Pencil pencil_for(const BatchMeta& m) {
  return {graph::laplacian(graph::build_intrinsic_lda(m)),
          graph::laplacian(graph::build_penalty_lda(m))};
}

// Central differences, written out here so the library helper is not its own oracle.
Matrix fd(const std::function<double(const Matrix&)>& f, Matrix x, double h = 1e-6) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double v = x(i, j);
      x(i, j) = v + h;
      const double up = f(x);
      x(i, j) = v - h;
      const double down = f(x);
      x(i, j) = v;
      g(i, j) = (up - down) / (2 * h);
    }
  }
  return g;
}

// The floor keeps roundoff on an exactly-zero gradient from counting as a mismatch.
double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-3});
}

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

}  // namespace

// --- trace ratio -------------------------------------------------------------

TEST(DageLoss, HandExample) {
  const auto p = pencil_for({{0, 0, 1}, {S, T, T}});
  const LossValue v = dage_loss(row({0, 1, 3}), p.L, p.B, 0.0);
  EXPECT_NEAR(v.value, 1.0 / 9.0, 1e-15);
  EXPECT_DOUBLE_EQ(v.components.at("intrinsic"), 1.0);
  EXPECT_DOUBLE_EQ(v.components.at("penalty"), 9.0);
  EXPECT_NEAR(dage_loss(row({0, 2, 6}), p.L, p.B, 0.0).value, 1.0 / 9.0, 1e-15);
}

TEST(DageLoss, DegenerateBatchStaysFinite) {
  const auto p = pencil_for({{1, 1, 1}, {S, T, T}});
  ASSERT_EQ(p.B, Matrix::Zero(3, 3));
  const LossValue v = dage_loss(row({0, 1, 3}), p.L, p.B, 1e-6);
  EXPECT_TRUE(std::isfinite(v.value));
  EXPECT_NEAR(v.value, (1.0 + 9.0) / 1e-6, 1e-3);
  EXPECT_THROW(dage_loss(row({0, 1, 3}), p.L, p.B, 0.0), NumericalError);
}

TEST(DageLoss, Errors) {
  const auto p = pencil_for({{0, 0, 1}, {S, T, T}});
  EXPECT_THROW(dage_loss(row({0, 1}), p.L, p.B, 1e-6), DimensionError);
  EXPECT_THROW(dage_loss(row({0, std::nan(""), 1}), p.L, p.B, 1e-6), NonFiniteError);
  EXPECT_THROW(dage_loss_grad(row({0, INFINITY, 1}), p.L, p.B, 1e-6), NonFiniteError);
  EXPECT_THROW(dage_loss(row({0, 1, 3}), p.L, p.B, -1.0), ConfigError);
}

TEST(DageLoss, GradientZeroWithoutIntrinsicEdges) {
  // Same-domain batch on the intrinsic side: L = 0, so the numerator vanishes.
  Rng rng(3);
  const Matrix L = Matrix::Zero(4, 4);
  const Matrix B = graph::laplacian(graph::build_penalty_lda({{0, 1, 0, 1}, {S, S, T, T}}));
  const Matrix g = dage_loss_grad(test::random_matrix(3, 4, rng), L, B, 1e-6);
  EXPECT_EQ(g, Matrix::Zero(3, 4));
}

TEST(DageLoss, SymmetricGradientForm) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const int n = test::uniform_int(rng, 2, 12);
    const auto p = pencil_for(test::random_meta(n, 3, rng));
    const Matrix phi = test::random_matrix(4, n, rng);
    const double eps = 1e-6;
    const double num = (phi * p.L * phi.transpose()).trace();
    const double den = (phi * p.B * phi.transpose()).trace() + eps;
    const Matrix twice = (2.0 * phi * p.L * den - num * 2.0 * phi * p.B) / (den * den);
    ASSERT_LE(rel_err(dage_loss_grad(phi, p.L, p.B, eps), twice), 1e-12);
  }
}

TEST(DageLossProperty, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const int d = test::uniform_int(rng, 1, 8);
    const int n = test::uniform_int(rng, 2, 16);
    const auto p = pencil_for(test::random_meta(n, 3, rng));
    const Matrix phi = test::random_matrix(d, n, rng);
    const double eps = 1e-6;
    if ((phi * p.B * phi.transpose()).trace() < 1e-3) continue;  // no penalty edges drawn
    const Matrix numeric = fd([&](const Matrix& x) { return dage_loss(x, p.L, p.B, eps).value; }, phi);
    ASSERT_LE(rel_err(dage_loss_grad(phi, p.L, p.B, eps), numeric), 1e-5) << "instance " << t;
  }
}

TEST(DageLossProperty, NonNegative) {
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const int n = test::uniform_int(rng, 2, 16);
    const auto p = pencil_for(test::random_meta(n, 4, rng));
    ASSERT_GE(dage_loss(test::random_matrix(3, n, rng), p.L, p.B, 1e-6).value, 0.0);
  }
}

TEST(DageLossProperty, ScaleInvariance) {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    const int n = test::uniform_int(rng, 3, 16);
    BatchMeta m = test::random_meta(n, 3, rng);
    m.labels[0] = 0;
    m.labels[1] = 1;  // guarantees a penalty edge
    const auto p = pencil_for(m);
    const Matrix phi = test::random_matrix(3, n, rng);
    const double base = dage_loss(phi, p.L, p.B, 0.0).value;
    const double num = graph::trace_form(phi, p.L);
    const double den = graph::trace_form(phi, p.B);
    for (double c : {2.0, -3.0, 10.0, 0.5}) {
      ASSERT_LE(test::rel_diff(dage_loss(c * phi, p.L, p.B, 0.0).value, base), 1e-12);
      const double eps = 1e-6;
      const double diff =
          std::abs(dage_loss(c * phi, p.L, p.B, eps).value - dage_loss(phi, p.L, p.B, eps).value);
      // |n/(d+e) - n/(d+e/c^2)| <= e |1 - 1/c^2| n / d^2
      ASSERT_LE(diff, eps * std::abs(1.0 - 1.0 / (c * c)) * num / (den * den) * (1 + 1e-6));
      if (std::abs(c) >= 1.0) ASSERT_LE(diff, eps * num / (den * den));
    }
  }
}

TEST(DageLossProperty, PermutationInvariance) {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const int n = test::uniform_int(rng, 2, 12);
    const auto p = pencil_for(test::random_meta(n, 3, rng));
    const Matrix phi = test::random_matrix(3, n, rng);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Matrix P = test::permutation_matrix(perm);
    const Matrix pphi = phi * P;
    const Matrix pl = P.transpose() * p.L * P;
    const Matrix pb = P.transpose() * p.B * P;
    ASSERT_LE(test::rel_diff(dage_loss(phi, p.L, p.B, 1e-6).value, dage_loss(pphi, pl, pb, 1e-6).value),
              1e-12);
    const Matrix back = dage_loss_grad(pphi, pl, pb, 1e-6) * P.transpose();
    ASSERT_LE(rel_err(back, dage_loss_grad(phi, p.L, p.B, 1e-6)), 1e-12);
  }
}

// --- CSA ------------------------------------------------------------------------

TEST(CsaLoss, HandExamples) {
  const std::vector<int> zero{0};
  const std::vector<int> one{1};
  EXPECT_DOUBLE_EQ(csa_loss(row({0.0}), row({0.5}), zero, zero).value, 0.125);
  EXPECT_DOUBLE_EQ(csa_loss(row({0.0}), row({1.0}), zero, one).value, 0.0);
  EXPECT_DOUBLE_EQ(csa_loss(row({0.0}), row({2.5}), zero, one).value, 0.0);
  EXPECT_DOUBLE_EQ(csa_loss(row({0.0}), row({0.5}), zero, one, {1.0}).value, 0.125);
  // Squared distance option: d = 0.25 for the same-class pair.
  EXPECT_DOUBLE_EQ(
      csa_loss(row({0.0}), row({0.5}), zero, zero, {1.0, Distance::SquaredEuclidean}).value,
      0.5 * 0.25 * 0.25);
}

TEST(CsaLoss, Errors) {
  const std::vector<int> y{0};
  EXPECT_THROW(csa_loss(Matrix(1, 0), row({1}), {}, y), DimensionError);
  EXPECT_THROW(csa_loss(row({0}), row({1}), y, y, {0.0}), ConfigError);
}

TEST(CsaLoss, ZeroWhenPerfectlyArranged) {
  // Same-class pairs coincide, different-class pairs sit beyond the margin.
  const Matrix s = (Matrix(2, 3) << 0, 5, 0, 0, 0, 5).finished();
  const Matrix t = (Matrix(2, 2) << 5, 0, 0, 5).finished();
  const std::vector<int> ys{0, 1, 2};
  const std::vector<int> yt{1, 2};
  EXPECT_EQ(csa_loss(s, t, ys, yt, {2.0}).value, 0.0);
}

TEST(CsaLossProperty, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const int d = test::uniform_int(rng, 1, 6);
    const int ns = test::uniform_int(rng, 1, 6);
    const int nt = test::uniform_int(rng, 1, 6);
    const auto ys = test::random_labels(ns, 3, rng);
    const auto yt = test::random_labels(nt, 3, rng);
    const Matrix s = test::random_matrix(d, ns, rng);
    const Matrix tt = test::random_matrix(d, nt, rng);
    for (Distance dist : {Distance::Euclidean, Distance::SquaredEuclidean}) {
      const CsaOptions opt{1.5, dist};
      const auto g = csa_loss_grad(s, tt, ys, yt, opt);
      ASSERT_LE(rel_err(g.source, fd([&](const Matrix& x) { return csa_loss(x, tt, ys, yt, opt).value; }, s)),
                1e-5);
      ASSERT_LE(rel_err(g.target, fd([&](const Matrix& x) { return csa_loss(s, x, ys, yt, opt).value; }, tt)),
                1e-5);
    }
  }
}

TEST(CsaGraph, ReproducesDirectLoss) {
  Rng rng(10);
  for (int t = 0; t < 100; ++t) {
    const int ns = test::uniform_int(rng, 1, 6);
    const int nt = test::uniform_int(rng, 1, 12 - ns);
    const auto ys = test::random_labels(ns, 3, rng);
    const auto yt = test::random_labels(nt, 3, rng);
    const Matrix s = test::random_matrix(3, ns, rng, 0.7);
    const Matrix tt = test::random_matrix(3, nt, rng, 0.7);
    const double m = 1.0 + t % 3;
    Matrix phi(3, ns + nt);
    phi << s, tt;
    const CsaGraphForm g = csa_as_graph(s, tt, ys, yt, m);
    ASSERT_TRUE(graph::is_valid_weight_matrix(g.intrinsic));
    ASSERT_TRUE(graph::is_valid_weight_matrix(g.penalty));
    const double direct = csa_loss(s, tt, ys, yt, {m}).value;
    ASSERT_LE(test::rel_diff(g.evaluate(phi), direct), 1e-9) << "batch " << t;
  }
}

TEST(CsaGraph, AllSameClass) {
  Rng rng(11);
  const std::vector<int> y{2, 2, 2};
  const auto g = csa_as_graph(test::random_matrix(2, 3, rng), test::random_matrix(2, 3, rng), y, y);
  EXPECT_EQ(g.penalty, Matrix::Zero(6, 6));
  EXPECT_EQ(g.offset, 0.0);
  EXPECT_DOUBLE_EQ(g.intrinsic.sum(), 2 * 9 * 0.25);
}

TEST(CsaGraph, InactiveHinge) {
  const Matrix s = row({0, 1});
  const Matrix t = row({5, 7});
  const std::vector<int> ys{0, 0};
  const std::vector<int> yt{1, 1};
  const auto g = csa_as_graph(s, t, ys, yt, 1.0);
  Matrix phi(1, 4);
  phi << s, t;
  EXPECT_EQ(g.evaluate(phi), 0.0);
  EXPECT_EQ(csa_loss(s, t, ys, yt).value, 0.0);
}

// --- d-SNE -----------------------------------------------------------------------

TEST(DsneLoss, SupMinusInf) {
  // Euclidean distances are the positions themselves, target at 0.
  const Matrix s = row({1.0, 2.0, 0.5, 3.0});
  const std::vector<int> ys{0, 0, 1, 1};
  const std::vector<int> yt{0};
  EXPECT_DOUBLE_EQ(dsne_loss(s, row({0.0}), ys, yt, {Distance::Euclidean}).value, 1.5);
  // Squared distances: place sources at the square roots.
  const Matrix sq = row({1.0, std::sqrt(2.0), std::sqrt(0.5), std::sqrt(3.0)});
  EXPECT_NEAR(dsne_loss(sq, row({0.0}), ys, yt).value, 1.5, 1e-15);
}

TEST(DsneLoss, EqualDistancesCancel) {
  const std::vector<int> ys{0, 1};
  const std::vector<int> yt{0};
  EXPECT_EQ(dsne_loss(row({-0.7, 0.7}), row({0.0}), ys, yt).value, 0.0);
}

TEST(DsneLoss, SumsOverTargets) {
  // Target 0 contributes 2 - 0.5, target 1 (at 3.5, class 2) contributes 0.2 - 0.5.
  const Matrix s = row({1.0, 2.0, 0.5, 3.0, 3.7});
  const std::vector<int> ys{0, 0, 1, 1, 2};
  const std::vector<int> yt{0, 2};
  EXPECT_NEAR(dsne_loss(s, row({0.0, 3.5}), ys, yt, {Distance::Euclidean}).value, 1.2, 1e-12);
}

TEST(DsneLoss, SkipsTargetsWithoutBothSets) {
  const std::vector<int> ys{0, 0};
  const std::vector<int> yt{0, 1};
  const LossValue v = dsne_loss(row({1, 2}), row({0, 0}), ys, yt);
  EXPECT_EQ(v.value, 0.0);
  EXPECT_EQ(v.components.at("skipped"), 2.0);
}

TEST(DsneLossProperty, GradientMatchesFiniteDifferences) {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    const int d = test::uniform_int(rng, 1, 6);
    const int ns = test::uniform_int(rng, 2, 8);
    const int nt = test::uniform_int(rng, 1, 6);
    const auto ys = test::random_labels(ns, 2, rng);
    const auto yt = test::random_labels(nt, 2, rng);
    const Matrix s = test::random_matrix(d, ns, rng);
    const Matrix tt = test::random_matrix(d, nt, rng);
    for (Distance dist : {Distance::Euclidean, Distance::SquaredEuclidean}) {
      const DsneOptions opt{dist};
      const auto g = dsne_loss_grad(s, tt, ys, yt, opt);
      ASSERT_LE(rel_err(g.source, fd([&](const Matrix& x) { return dsne_loss(x, tt, ys, yt, opt).value; }, s)),
                1e-5);
      ASSERT_LE(rel_err(g.target, fd([&](const Matrix& x) { return dsne_loss(s, x, ys, yt, opt).value; }, tt)),
                1e-5);
    }
  }
}

// --- cross-entropy and the joint objective -----------------------------------------

TEST(CrossEntropy, Examples) {
  EXPECT_EQ(cross_entropy(row({1, 0}), row({1, 0})).value, 0.0);
  EXPECT_NEAR(cross_entropy(row({1, 0}), row({0.5, 0.5})).value, std::log(2.0), 1e-15);
  const Matrix y = Matrix(5, 2).rowwise() = Eigen::RowVector2d(1, 0);
  const Matrix p = Matrix::Constant(5, 2, 0.5);
  EXPECT_NEAR(cross_entropy(y, p).value, 5 * std::log(2.0), 1e-14);
  EXPECT_NEAR(cross_entropy(row({1, 0}), row({0, 1})).value, -std::log(kProbabilityFloor), 1e-9);
  EXPECT_THROW(cross_entropy(row({1, 0}), row({1, 0, 0})), DimensionError);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  const Matrix y = one_hot(std::vector<int>{0, 2, 1}, 3);
  const Matrix p = (Matrix::Random(3, 3).array() * 0.4 + 0.5).matrix();  // inside (0.1, 0.9)
  const Matrix numeric = fd([&](const Matrix& x) { return cross_entropy(y, x).value; }, p);
  EXPECT_LE(rel_err(cross_entropy_grad(y, p), numeric), 1e-7);
}

TEST(CrossEntropy, OneHot) {
  const Matrix y = one_hot(std::vector<int>{1, 0}, 3);
  EXPECT_EQ(y, (Matrix(2, 3) << 0, 1, 0, 1, 0, 0).finished());
  EXPECT_THROW(one_hot(std::vector<int>{3}, 3), ConfigError);
}

TEST(TotalObjective, Examples) {
  LossWeights w;
  w.beta = 0.5;
  w.gamma = 0.5;
  EXPECT_DOUBLE_EQ(total_objective({0.1, {}}, {2.0, {}}, {1.0, {}}, w).value, 1.6);
  w.beta = w.gamma = 0.0;
  EXPECT_DOUBLE_EQ(total_objective({0.1, {}}, {2.0, {}}, {1.0, {}}, w).value, 0.1);
  w.beta = 1.0;
  EXPECT_DOUBLE_EQ(total_objective({0.0, {}}, {2.0, {}}, {1.0, {}}, w).value, 2.0);
  const auto v = total_objective({0.1, {}}, {2.0, {}}, {1.0, {}}, LossWeights{});
  EXPECT_EQ(v.components.at("da"), 0.1);
  EXPECT_EQ(v.components.at("ce_source"), 2.0);
  EXPECT_EQ(v.components.at("ce_target"), 1.0);
}

TEST(TotalObjective, RatioMapping) {
  const LossWeights w = weights_from_ratios(0.25, 0.4);
  EXPECT_DOUBLE_EQ(w.da_weight, 0.25);
  EXPECT_DOUBLE_EQ(w.beta, 0.75 * 0.4);
  EXPECT_DOUBLE_EQ(w.gamma, 0.75 * 0.6);
  EXPECT_DOUBLE_EQ(w.da_weight + w.beta + w.gamma, 1.0);
  EXPECT_THROW(weights_from_ratios(1.5, 0.5), ConfigError);
}

TEST(LossWeights, Validation) {
  LossWeights w;
  EXPECT_NO_THROW(w.validate());
  w.epsilon = 0.0;
  EXPECT_THROW(w.validate(), ConfigError);
  w = {};
  w.margin = -1.0;
  EXPECT_THROW(w.validate(), ConfigError);
  w = {};
  w.beta = -0.1;
  EXPECT_THROW(w.validate(), ConfigError);
}
