#pragma once

// Central finite-difference checks of the analytic gradients.

#include "dage/losses.hpp"
#include "dage/network.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dage::experiment {

/// ||a - n||_F / max(||a||_F, ||n||_F), 0 when both vanish.
double relative_error(const Matrix& analytic, const Matrix& numeric);

/// Central differences of a scalar function of a matrix, step h.
Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                        double h = 1e-6);

using DageGradFn =
    std::function<Matrix(const Matrix& phi, const Matrix& L, const Matrix& B, double eps)>;

struct ComponentReport {
  std::string name;
  int instances = 0;
  double max_relative_error = 0.0;
  double tolerance = 0.0;

  bool passed() const noexcept { return max_relative_error <= tolerance; }
};

struct GradcheckOptions {
  int loss_instances = 100;
  int max_dim = 8;
  int max_batch = 16;
  double loss_tolerance = 1e-5;
  int network_instances = 5;
  int sampled_params = 10;
  double network_tolerance = 1e-4;
  std::uint64_t seed = 7;
  /// Replaces the analytic DAGE gradient (negative-control fixtures).
  DageGradFn dage_grad = nullptr;
};

/// DAGE trace-ratio gradient on random (phi, L, B) instances.
ComponentReport check_dage_gradient(const GradcheckOptions& options);
/// CSA and d-SNE embedding gradients.
ComponentReport check_csa_gradient(const GradcheckOptions& options);
ComponentReport check_dsne_gradient(const GradcheckOptions& options);
/// Full joint objective (DAGE + beta CE_s + gamma CE_t) through a Siamese
/// network; `conv` selects a two-conv-layer net instead of two dense layers.
ComponentReport check_network_gradient(const GradcheckOptions& options, bool conv);

std::vector<ComponentReport> run_gradcheck(const GradcheckOptions& options);

}  // namespace dage::experiment
