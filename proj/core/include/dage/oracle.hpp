#pragma once

// Gradient-trained linear embedding versus the spectral optimum.

#include "dage/losses.hpp"
#include "dage/network.hpp"
#include "dage/types.hpp"

#include <cstdint>

namespace dage::experiment {

struct DescentOptions {
  int max_iterations = 20000;
  double tolerance = 1e-13;  // stop when the relative loss change falls below
  double initial_step = 1.0;
  std::uint64_t seed = 3;
};

struct DescentResult {
  double loss = 0.0;
  int iterations = 0;
  nn::NetworkState state;
};

/// Gradient descent with backtracking on the DAGE loss of a single dense
/// layer with one output and no activation, phi(x) = a^T x + b. Gradients
/// come from the network's backward pass.
DescentResult linear_dage_descent(const Matrix& x, const Matrix& L, const Matrix& B,
                                  double epsilon, const DescentOptions& options = {});

struct OracleReport {
  double spectral_ratio = 0.0;
  double descent_loss = 0.0;
  double relative_gap = 0.0;
  int iterations = 0;
};

/// Both routes on the same (X, L, B, epsilon).
OracleReport compare_with_spectral(const Matrix& x, const Matrix& L, const Matrix& B,
                                   double epsilon, const DescentOptions& options = {});

}  // namespace dage::experiment
