#include "dage/error.hpp"
#include "dage/graph.hpp"
#include "test_helpers.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace dage;
using namespace dage::graph;
using dage::test::Rng;

namespace {

constexpr auto S = DomainTag::Source;
constexpr auto T = DomainTag::Target;

BatchMeta meta(std::vector<int> labels, std::vector<DomainTag> domains) {
  return {std::move(labels), std::move(domains)};
}

// The 3-sample batch used throughout: labels [0,0,1], domains [S,T,T].
BatchMeta small_meta() { return meta({0, 0, 1}, {S, T, T}); }

}  // namespace

TEST(Graph, IntrinsicSmallBatch) {
  const Matrix w = build_intrinsic_lda(small_meta());
  Matrix expected = Matrix::Zero(3, 3);
  expected(0, 1) = expected(1, 0) = 1.0;
  EXPECT_EQ(w, expected);
}

TEST(Graph, IntrinsicSameDomainIsEmpty) {
  EXPECT_EQ(build_intrinsic_lda(meta({0, 1}, {S, S})), Matrix::Zero(2, 2));
  EXPECT_EQ(build_intrinsic_lda(meta({0, 0}, {S, S})), Matrix::Zero(2, 2));
}

TEST(Graph, IntrinsicAllSameClassEnumeratesCrossDomainPairs) {
  const Matrix w = build_intrinsic_lda(meta({0, 0, 0, 0}, {S, S, T, T}));
  Matrix expected = Matrix::Zero(4, 4);
  for (auto [i, j] : {std::pair{0, 2}, {0, 3}, {1, 2}, {1, 3}}) expected(i, j) = expected(j, i) = 1;
  EXPECT_EQ(w, expected);
}

TEST(Graph, WithinDomainEdgesOption) {
  const Matrix w = build_intrinsic_lda(meta({0, 0, 0, 0}, {S, S, T, T}), {true});
  Matrix expected = Matrix::Ones(4, 4);
  expected.diagonal().setZero();
  EXPECT_EQ(w, expected);
}

TEST(Graph, PenaltySmallBatch) {
  const Matrix wp = build_penalty_lda(small_meta());
  Matrix expected = Matrix::Zero(3, 3);
  expected(0, 2) = expected(2, 0) = 1.0;
  EXPECT_EQ(wp, expected);
  EXPECT_EQ(build_penalty_lda(meta({0, 0}, {S, T})), Matrix::Zero(2, 2));
}

TEST(Graph, DegreeExamples) {
  const Matrix d = degree(build_intrinsic_lda(small_meta()));
  EXPECT_EQ(d, Vector((Vector(3) << 1, 1, 0).finished()).asDiagonal().toDenseMatrix());
  EXPECT_EQ(degree(Matrix::Zero(3, 3)), Matrix::Zero(3, 3));
  Matrix complete = Matrix::Ones(3, 3);
  complete.diagonal().setZero();
  EXPECT_EQ(degree(complete), (2.0 * Matrix::Identity(3, 3)).eval());
}

TEST(Graph, LaplacianExamples) {
  Matrix edge = Matrix::Zero(2, 2);
  edge(0, 1) = edge(1, 0) = 1;
  EXPECT_EQ(laplacian(edge), (Matrix(2, 2) << 1, -1, -1, 1).finished());
  EXPECT_EQ(laplacian(Matrix::Zero(4, 4)), Matrix::Zero(4, 4));
  EXPECT_EQ(laplacian(build_intrinsic_lda(small_meta())),
            (Matrix(3, 3) << 1, -1, 0, -1, 1, 0, 0, 0, 0).finished());
}

TEST(Graph, PairwiseQuadraticExamples) {
  const Matrix phi = (Matrix(1, 3) << 0, 1, 3).finished();
  const Matrix w = build_intrinsic_lda(small_meta());
  EXPECT_DOUBLE_EQ(pairwise_quadratic(phi, w), 2.0);
  EXPECT_DOUBLE_EQ(pairwise_quadratic(phi, Matrix::Zero(3, 3)), 0.0);
  const Matrix constant = Matrix::Constant(4, 3, 2.5);
  Rng rng(1);
  EXPECT_DOUBLE_EQ(pairwise_quadratic(constant, test::random_weights(3, rng)), 0.0);
}

TEST(Graph, PairwiseQuadraticRejectsMismatch) {
  EXPECT_THROW(pairwise_quadratic(Matrix::Zero(2, 3), Matrix::Zero(4, 4)), DimensionError);
}

TEST(Graph, MetaValidation) {
  EXPECT_THROW(build_intrinsic_lda(meta({0}, {S})), Error);
  EXPECT_THROW(build_intrinsic_lda(meta({0, 1}, {S})), DimensionError);
  EXPECT_THROW(build_penalty_lda(meta({0, -1}, {S, T})), ConfigError);
  EXPECT_THROW(meta({0, 3}, {S, T}).validate(3), ConfigError);
  EXPECT_NO_THROW(meta({0, 2}, {S, T}).validate(3));
}

TEST(Graph, ConcatLayout) {
  const std::vector<int> ys{2, 0};
  const std::vector<int> yt{1};
  const BatchMeta m = BatchMeta::concat(ys, yt);
  EXPECT_EQ(m.labels, (std::vector<int>{2, 0, 1}));
  EXPECT_EQ(m.domains, (std::vector<DomainTag>{S, S, T}));
}

// Structural invariants over random batches.
TEST(GraphProperty, SymmetricZeroDiagonalDisjoint) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const BatchMeta m = test::random_meta(test::uniform_int(rng, 2, 20), 4, rng);
    const Matrix w = build_intrinsic_lda(m);
    const Matrix wp = build_penalty_lda(m);
    ASSERT_TRUE(is_valid_weight_matrix(w));
    ASSERT_TRUE(is_valid_weight_matrix(wp));
    ASSERT_EQ(w.cwiseProduct(wp).cwiseAbs().sum(), 0.0);
    // Every cross-domain pair is in exactly one of the two graphs.
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = 0; j < m.size(); ++j) {
        const bool cross = m.domains[i] != m.domains[j];
        ASSERT_EQ(w(i, j) + wp(i, j), cross ? 1.0 : 0.0);
      }
    }
  }
}

TEST(GraphProperty, LaplacianRowSumsAndPsd) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = test::uniform_int(rng, 2, 20);
    const Matrix w = trial % 2 ? test::random_weights(n, rng)
                               : build_penalty_lda(test::random_meta(n, 3, rng));
    const Matrix l = laplacian(w);
    ASSERT_EQ(l, l.transpose());
    ASSERT_LE(l.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(l);
    ASSERT_GE(es.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(GraphProperty, QuadraticEqualsTwiceTrace) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = test::uniform_int(rng, 2, 20);
    const Matrix w = test::random_weights(n, rng);
    const Matrix phi = test::random_matrix(test::uniform_int(rng, 1, 8), n, rng);
    const double direct = pairwise_quadratic(phi, w);
    const double trace = (phi * laplacian(w) * phi.transpose()).trace();
    ASSERT_LE(test::rel_diff(direct, 2.0 * trace), 1e-9);
    ASSERT_LE(test::rel_diff(trace_form(phi, laplacian(w)), trace), 1e-12);
  }
}

TEST(GraphProperty, PermutationInvariance) {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = test::uniform_int(rng, 2, 15);
    const BatchMeta m = test::random_meta(n, 3, rng);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    BatchMeta pm;
    for (int p : perm) {
      pm.labels.push_back(m.labels[static_cast<std::size_t>(p)]);
      pm.domains.push_back(m.domains[static_cast<std::size_t>(p)]);
    }
    const Matrix phi = test::random_matrix(3, n, rng);
    Matrix pphi(3, n);
    for (int i = 0; i < n; ++i) pphi.col(i) = phi.col(perm[static_cast<std::size_t>(i)]);
    for (bool intrinsic : {true, false}) {
      const Matrix w = intrinsic ? build_intrinsic_lda(m) : build_penalty_lda(m);
      const Matrix pw = intrinsic ? build_intrinsic_lda(pm) : build_penalty_lda(pm);
      ASSERT_LE(test::rel_diff(pairwise_quadratic(phi, w), pairwise_quadratic(pphi, pw)), 1e-12);
    }
  }
}

TEST(Graph, WeightMatrixValidation) {
  Matrix w = Matrix::Zero(3, 3);
  EXPECT_TRUE(is_valid_weight_matrix(w));
  w(0, 1) = 1;
  EXPECT_FALSE(is_valid_weight_matrix(w));  // asymmetric
  w(1, 0) = 1;
  EXPECT_TRUE(is_valid_weight_matrix(w));
  w(2, 2) = 1;
  EXPECT_FALSE(is_valid_weight_matrix(w));  // diagonal
  w(2, 2) = 0;
  w(0, 2) = w(2, 0) = -0.5;
  EXPECT_FALSE(is_valid_weight_matrix(w));  // negative
  EXPECT_FALSE(is_valid_weight_matrix(Matrix::Zero(2, 3)));
}
