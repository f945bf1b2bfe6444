#include "dage/spectral.hpp"

#include "dage/error.hpp"

#include <cmath>
#include <string>

namespace dage::spectral {

ScatterPair scatter_matrices(const Matrix& x, const Matrix& L, const Matrix& B, double epsilon) {
  const auto n = x.cols();
  if (L.rows() != n || L.cols() != n || B.rows() != n || B.cols() != n) {
    throw DimensionError("scatter_matrices: data has " + std::to_string(n) +
                         " samples, Laplacians do not match");
  }
  if (!(epsilon > 0.0)) throw ConfigError("scatter_matrices: epsilon must be > 0");
  ScatterPair out;
  out.a = x * L * x.transpose();
  out.a = 0.5 * (out.a + out.a.transpose());
  out.c = x * B * x.transpose();
  out.c = 0.5 * (out.c + out.c.transpose());
  out.c.diagonal().array() += epsilon;
  return out;
}

Eigenpair smallest_generalized_eigenpair(const ScatterPair& pair) {
  const EigenDecomposition eig = generalized_eigen(pair.a, pair.c);
  Eigenpair out;
  out.lambda = eig.values(0);
  out.v = eig.vectors.col(0).normalized();
  Eigen::Index k = 0;
  out.v.cwiseAbs().maxCoeff(&k);
  if (out.v(k) < 0.0) out.v = -out.v;
  return out;
}

double ratio_of(const ScatterPair& pair, const Matrix& v) {
  return (v.transpose() * pair.a * v).trace() / (v.transpose() * pair.c * v).trace();
}

TraceRatioResult trace_ratio(const ScatterPair& pair, int dim, const Matrix& start, double tol,
                             int max_iter) {
  const auto d = pair.a.rows();
  if (dim < 1 || dim > d) {
    throw ConfigError("trace_ratio: dim must lie in [1, " + std::to_string(d) + "]");
  }
  TraceRatioResult out;
  if (dim == 1 && start.size() == 0) {
    const Eigenpair e = smallest_generalized_eigenpair(pair);
    out.projection = e.v;
    out.ratio = ratio_of(pair, e.v);
    out.history = {out.ratio};
    return out;
  }

  Matrix v;
  if (start.size() != 0) {
    if (start.rows() != d || start.cols() != dim) {
      throw DimensionError("trace_ratio: start basis has the wrong shape");
    }
    v = start.householderQr().householderQ() * Matrix::Identity(d, dim);
  } else {
    v = Matrix::Identity(d, dim);
  }
  double rho = ratio_of(pair, v);
  out.history.push_back(rho);
  for (int it = 1; it <= max_iter; ++it) {
    const EigenDecomposition eig = jacobi_eigen(pair.a - rho * pair.c);
    v = eig.vectors.leftCols(dim);
    const double next = ratio_of(pair, v);
    out.history.push_back(next);
    out.iterations = it;
    const double delta = std::abs(next - rho);
    rho = next;
    if (delta < tol) {
      out.projection = v;
      out.ratio = rho;
      return out;
    }
  }
  throw NumericalError("trace_ratio: no convergence after " + std::to_string(max_iter) +
                       " iterations");
}

TraceRatioResult trace_ratio_linear(const Matrix& x, const Matrix& L, const Matrix& B,
                                    double epsilon, int dim, double tol, int max_iter) {
  return trace_ratio(scatter_matrices(x, L, B, epsilon), dim, {}, tol, max_iter);
}

}  // namespace dage::spectral
