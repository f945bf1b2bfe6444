#pragma once

// Linear graph embedding solved in closed form: the smallest generalized
// eigenpair of (X L X^T, X B X^T + eps I) minimises the one-dimensional
// trace ratio and serves as the optimum that gradient training must reach.

#include "dage/eigen_solver.hpp"
#include "dage/types.hpp"

namespace dage::spectral {

struct ScatterPair {
  Matrix a;  // X L X^T
  Matrix c;  // X B X^T + eps I
};

ScatterPair scatter_matrices(const Matrix& x, const Matrix& L, const Matrix& B, double epsilon);

struct Eigenpair {
  double lambda = 0.0;
  Vector v;  // unit Euclidean norm
};

Eigenpair smallest_generalized_eigenpair(const ScatterPair& pair);

struct TraceRatioResult {
  Matrix projection;            // D x dim, orthonormal columns
  double ratio = 0.0;           // Tr(V^T A V) / Tr(V^T C V)
  std::vector<double> history;  // ratio after every iteration
  int iterations = 0;
};

/// dim == 1 returns the generalized eigenvector. dim > 1 runs the
/// trace-difference iteration: V <- smallest eigenvectors of (A - rho C),
/// rho <- Tr(V^T A V) / Tr(V^T C V), until |delta rho| < tol.
/// Throws NumericalError after max_iter iterations.
TraceRatioResult trace_ratio_linear(const Matrix& x, const Matrix& L, const Matrix& B,
                                    double epsilon, int dim, double tol = 1e-10,
                                    int max_iter = 500);

/// Same iteration on a precomputed pencil, optionally from a given start.
TraceRatioResult trace_ratio(const ScatterPair& pair, int dim, const Matrix& start = {},
                             double tol = 1e-10, int max_iter = 500);

/// Tr(V^T A V) / Tr(V^T C V).
double ratio_of(const ScatterPair& pair, const Matrix& v);

}  // namespace dage::spectral
