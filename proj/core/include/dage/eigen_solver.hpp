#pragma once

// Dense symmetric and symmetric-definite eigensolvers (Cholesky reduction
// plus cyclic Jacobi rotations). Sized for D <= 64.

#include "dage/types.hpp"

namespace dage::spectral {

/// Lower-triangular G with C = G G^T. Throws NumericalError if C is not
/// positive definite.
Matrix cholesky(const Matrix& c);

struct EigenDecomposition {
  Vector values;   // ascending
  Matrix vectors;  // columns, orthonormal
  int sweeps = 0;
};

/// Cyclic Jacobi on a symmetric matrix. Stops when the off-diagonal
/// Frobenius norm drops below tol * ||A||_F.
EigenDecomposition jacobi_eigen(const Matrix& a, double tol = 1e-15, int max_sweeps = 100);

/// All eigenpairs of A v = lambda C v, ascending, vectors C-orthonormal.
EigenDecomposition generalized_eigen(const Matrix& a, const Matrix& c);

}  // namespace dage::spectral
