#pragma once

// Intrinsic and penalty graphs over a two-domain batch, and the Laplacian
// quantities derived from them. Matrices are dense N x N; N is a mini-batch
// size.

#include "dage/types.hpp"

namespace dage::graph {

struct GraphOptions {
  /// Also connect same-class samples that come from the same domain in the
  /// intrinsic graph. Off by default; kept for ablations.
  bool within_domain_edges = false;
};

/// W(i,j) = 1 iff y_i == y_j and the samples come from different domains.
Matrix build_intrinsic_lda(const BatchMeta& meta, const GraphOptions& options = {});

/// W_p(i,j) = 1 iff y_i != y_j and the samples come from different domains.
Matrix build_penalty_lda(const BatchMeta& meta);

/// Diagonal degree matrix, D(i,i) = sum_{j != i} W(i,j).
Matrix degree(const Matrix& weights);

/// L = D - W.
Matrix laplacian(const Matrix& weights);

/// sum_i sum_j ||phi_i - phi_j||^2 W(i,j) evaluated directly from the
/// columns of phi. Equals 2 Tr(phi L phi^T) for symmetric W.
double pairwise_quadratic(const Matrix& phi, const Matrix& weights);

/// Tr(phi M phi^T) without forming the d x d product.
double trace_form(const Matrix& phi, const Matrix& m);

/// Checks the WeightMatrix invariants: square, symmetric, zero diagonal,
/// nonnegative. `tol` bounds the asymmetry.
bool is_valid_weight_matrix(const Matrix& weights, double tol = 0.0);

}  // namespace dage::graph
