#include "dage/eigen_solver.hpp"

#include "dage/error.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace dage::spectral {

namespace {

void require_symmetric_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) throw DimensionError(std::string(what) + ": matrix is not square");
  if (!a.allFinite()) throw NonFiniteError(std::string(what) + ": non-finite entries");
}

}  // namespace

Matrix cholesky(const Matrix& c) {
  require_symmetric_square(c, "cholesky");
  const auto n = c.rows();
  Matrix g = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = c(j, j) - g.row(j).head(j).squaredNorm();
    if (!(diag > 0.0)) {
      throw NumericalError("cholesky: matrix is not positive definite (pivot " + std::to_string(j) +
                           " = " + std::to_string(diag) + ")");
    }
    const double gjj = std::sqrt(diag);
    g(j, j) = gjj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      g(i, j) = (c(i, j) - g.row(i).head(j).dot(g.row(j).head(j))) / gjj;
    }
  }
  return g;
}

EigenDecomposition jacobi_eigen(const Matrix& input, double tol, int max_sweeps) {
  require_symmetric_square(input, "jacobi_eigen");
  const auto n = input.rows();
  Matrix a = 0.5 * (input + input.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double norm = a.norm();
  constexpr double eps = std::numeric_limits<double>::epsilon();

  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) s += 2.0 * a(p, q) * a(p, q);
    }
    return std::sqrt(s);
  };

  int sweep = 0;
  for (; sweep < max_sweeps && norm > 0.0; ++sweep) {
    if (off_norm() <= tol * norm) break;
    bool rotated = false;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Entries below roundoff relative to the pivots are dropped outright.
        if (std::abs(apq) <= eps * std::sqrt(std::abs(a(p, p) * a(q, q))) * 0.5 ||
            std::abs(apq) <= eps * eps * norm) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
        rotated = true;
      }
    }
    if (!rotated) {
      ++sweep;
      break;
    }
  }
  if (sweep >= max_sweeps && off_norm() > tol * norm) {
    throw NumericalError("jacobi_eigen: no convergence after " + std::to_string(max_sweeps) +
                         " sweeps");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  out.sweeps = sweep;
  return out;
}

EigenDecomposition generalized_eigen(const Matrix& a, const Matrix& c) {
  require_symmetric_square(a, "generalized_eigen");
  if (c.rows() != a.rows() || c.cols() != a.cols()) {
    throw DimensionError("generalized_eigen: pencil matrices differ in size");
  }
  const Matrix g = cholesky(c);
  const auto lower = g.triangularView<Eigen::Lower>();
  // M = G^-1 A G^-T
  Matrix tmp = lower.solve(a);
  Matrix m = lower.solve(tmp.transpose());
  m = 0.5 * (m + m.transpose());
  EigenDecomposition eig = jacobi_eigen(m);
  eig.vectors = g.transpose().triangularView<Eigen::Upper>().solve(eig.vectors);
  return eig;
}

}  // namespace dage::spectral
