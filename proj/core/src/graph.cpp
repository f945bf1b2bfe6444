#include "dage/graph.hpp"

#include "dage/error.hpp"

#include <string>

namespace dage {

void BatchMeta::validate(int num_classes) const {
  if (labels.size() != domains.size()) {
    throw DimensionError("batch meta: " + std::to_string(labels.size()) + " labels but " +
                         std::to_string(domains.size()) + " domain tags");
  }
  if (labels.size() < 2) throw ConfigError("batch meta: need at least two samples");
  for (int y : labels) {
    if (y < 0 || (num_classes > 0 && y >= num_classes)) {
      throw ConfigError("batch meta: label " + std::to_string(y) + " out of range");
    }
  }
}

BatchMeta BatchMeta::concat(std::span<const int> source_labels,
                            std::span<const int> target_labels) {
  BatchMeta meta;
  meta.labels.reserve(source_labels.size() + target_labels.size());
  meta.labels.insert(meta.labels.end(), source_labels.begin(), source_labels.end());
  meta.labels.insert(meta.labels.end(), target_labels.begin(), target_labels.end());
  meta.domains.assign(source_labels.size(), DomainTag::Source);
  meta.domains.insert(meta.domains.end(), target_labels.size(), DomainTag::Target);
  return meta;
}

}  // namespace dage

namespace dage::graph {

namespace {

template <typename Rule>
Matrix build(const BatchMeta& meta, Rule rule) {
  meta.validate();
  const auto n = static_cast<Eigen::Index>(meta.size());
  Matrix w = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (rule(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
        w(i, j) = 1.0;
        w(j, i) = 1.0;
      }
    }
  }
  return w;
}

void require_square(const Matrix& w, const char* what) {
  if (w.rows() != w.cols()) {
    throw DimensionError(std::string(what) + ": weight matrix is " + std::to_string(w.rows()) +
                         "x" + std::to_string(w.cols()));
  }
}

}  // namespace

Matrix build_intrinsic_lda(const BatchMeta& meta, const GraphOptions& options) {
  return build(meta, [&](std::size_t i, std::size_t j) {
    if (meta.labels[i] != meta.labels[j]) return false;
    return options.within_domain_edges || meta.domains[i] != meta.domains[j];
  });
}

Matrix build_penalty_lda(const BatchMeta& meta) {
  return build(meta, [&](std::size_t i, std::size_t j) {
    return meta.labels[i] != meta.labels[j] && meta.domains[i] != meta.domains[j];
  });
}

Matrix degree(const Matrix& weights) {
  require_square(weights, "degree");
  Vector d = weights.rowwise().sum() - weights.diagonal();
  return d.asDiagonal();
}

Matrix laplacian(const Matrix& weights) {
  Matrix l = -weights;
  // Row sums exclude the diagonal, so any self-loop cancels out exactly.
  l.diagonal() = weights.rowwise().sum() - weights.diagonal();
  return l;
}

double pairwise_quadratic(const Matrix& phi, const Matrix& weights) {
  require_square(weights, "pairwise_quadratic");
  if (phi.cols() != weights.rows()) {
    throw DimensionError("pairwise_quadratic: embedding has " + std::to_string(phi.cols()) +
                         " columns, graph has " + std::to_string(weights.rows()) + " vertices");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < phi.cols(); ++i) {
    for (Eigen::Index j = 0; j < phi.cols(); ++j) {
      const double w = weights(i, j);
      if (w != 0.0) total += w * (phi.col(i) - phi.col(j)).squaredNorm();
    }
  }
  return total;
}

double trace_form(const Matrix& phi, const Matrix& m) {
  if (m.rows() != m.cols() || phi.cols() != m.rows()) {
    throw DimensionError("trace_form: embedding has " + std::to_string(phi.cols()) +
                         " columns, matrix is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
  // Tr(phi M phi^T) = sum of elementwise (phi M) .* phi
  return (phi * m).cwiseProduct(phi).sum();
}

bool is_valid_weight_matrix(const Matrix& weights, double tol) {
  if (weights.rows() != weights.cols()) return false;
  if (weights.size() == 0) return true;
  if (!weights.allFinite()) return false;
  if ((weights.array() < 0.0).any()) return false;
  if (weights.diagonal().cwiseAbs().maxCoeff() != 0.0) return false;
  return (weights - weights.transpose()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace dage::graph
