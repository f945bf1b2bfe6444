#pragma once

#include "dage/types.hpp"

#include <random>
#include <vector>

namespace dage::test {

using Rng = std::mt19937_64;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  }
  return m;
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline std::vector<int> random_labels(std::size_t n, int k, Rng& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = uniform_int(rng, 0, k - 1);
  return y;
}

/// Random two-domain batch, both domains non-empty.
inline BatchMeta random_meta(int n, int k, Rng& rng) {
  BatchMeta m;
  m.labels = random_labels(static_cast<std::size_t>(n), k, rng);
  m.domains.resize(static_cast<std::size_t>(n));
  for (auto& d : m.domains) d = uniform_int(rng, 0, 1) ? DomainTag::Target : DomainTag::Source;
  m.domains[0] = DomainTag::Source;
  m.domains[1] = DomainTag::Target;
  return m;
}

/// Symmetric nonnegative weights with zero diagonal.
inline Matrix random_weights(int n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) w(i, j) = w(j, i) = u(rng) < 0.4 ? 0.0 : u(rng);
  }
  return w;
}

inline double rel_diff(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

inline Matrix permutation_matrix(const std::vector<int>& perm) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) p(perm[static_cast<std::size_t>(i)], i) = 1.0;
  return p;
}

}  // namespace dage::test
