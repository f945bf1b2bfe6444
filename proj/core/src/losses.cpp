#include "dage/losses.hpp"

#include "dage/error.hpp"
#include "dage/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dage::loss {

namespace {

void check_trace_inputs(const Matrix& phi, const Matrix& L, const Matrix& B, double epsilon) {
  const auto n = phi.cols();
  if (L.rows() != n || L.cols() != n || B.rows() != n || B.cols() != n) {
    throw DimensionError("dage_loss: embedding has " + std::to_string(n) +
                         " columns, Laplacians are " + std::to_string(L.rows()) + "x" +
                         std::to_string(L.cols()) + " and " + std::to_string(B.rows()) + "x" +
                         std::to_string(B.cols()));
  }
  if (!phi.allFinite() || !L.allFinite() || !B.allFinite()) {
    throw NonFiniteError("dage_loss: non-finite input");
  }
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw ConfigError("dage_loss: epsilon must be a finite value >= 0");
  }
}

void check_pair_inputs(const Matrix& phi_s, const Matrix& phi_t, std::span<const int> labels_s,
                       std::span<const int> labels_t, const char* what) {
  if (phi_s.cols() == 0 || phi_t.cols() == 0) {
    throw DimensionError(std::string(what) + ": empty batch");
  }
  if (phi_s.rows() != phi_t.rows()) {
    throw DimensionError(std::string(what) + ": source and target embeddings differ in dimension");
  }
  if (static_cast<std::size_t>(phi_s.cols()) != labels_s.size() ||
      static_cast<std::size_t>(phi_t.cols()) != labels_t.size()) {
    throw DimensionError(std::string(what) + ": label count does not match embedding columns");
  }
  if (!phi_s.allFinite() || !phi_t.allFinite()) {
    throw NonFiniteError(std::string(what) + ": non-finite embedding");
  }
}

double distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, Distance kind) {
  const double sq = (a - b).squaredNorm();
  return kind == Distance::Euclidean ? std::sqrt(sq) : sq;
}

// Gradient of distance(a, b) with respect to a.
Vector distance_grad(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                     Distance kind) {
  const Vector u = a - b;
  if (kind == Distance::SquaredEuclidean) return 2.0 * u;
  const double d = u.norm();
  if (d == 0.0) return Vector::Zero(u.size());
  return u / d;
}

}  // namespace

void LossWeights::validate() const {
  if (!(beta >= 0.0) || !(gamma >= 0.0) || !(da_weight >= 0.0)) {
    throw ConfigError("loss weights: beta, gamma and da_weight must be >= 0");
  }
  if (!(epsilon > 0.0)) throw ConfigError("loss weights: epsilon must be > 0");
  if (!(margin > 0.0)) throw ConfigError("loss weights: margin must be > 0");
}

LossValue dage_loss(const Matrix& phi, const Matrix& L, const Matrix& B, double epsilon) {
  check_trace_inputs(phi, L, B, epsilon);
  const double num = graph::trace_form(phi, L);
  const double den = graph::trace_form(phi, B) + epsilon;
  if (den == 0.0) throw NumericalError("dage_loss: zero denominator (use epsilon > 0)");
  LossValue out;
  out.value = num / den;
  out.components["intrinsic"] = num;
  out.components["penalty"] = den - epsilon;
  return out;
}

Matrix dage_loss_grad(const Matrix& phi, const Matrix& L, const Matrix& B, double epsilon) {
  check_trace_inputs(phi, L, B, epsilon);
  const Matrix phi_l = phi * (L + L.transpose());
  const Matrix phi_b = phi * (B + B.transpose());
  // Tr(phi M phi^T) = 1/2 <phi (M + M^T), phi>
  const double num = 0.5 * phi_l.cwiseProduct(phi).sum();
  const double den = 0.5 * phi_b.cwiseProduct(phi).sum() + epsilon;
  if (den == 0.0) throw NumericalError("dage_loss_grad: zero denominator (use epsilon > 0)");
  return (phi_l * den - num * phi_b) / (den * den);
}

LossValue csa_loss(const Matrix& phi_s, const Matrix& phi_t, std::span<const int> labels_s,
                   std::span<const int> labels_t, const CsaOptions& options) {
  check_pair_inputs(phi_s, phi_t, labels_s, labels_t, "csa_loss");
  if (!(options.margin > 0.0)) throw ConfigError("csa_loss: margin must be > 0");
  double pull = 0.0;
  double push = 0.0;
  for (Eigen::Index i = 0; i < phi_s.cols(); ++i) {
    for (Eigen::Index j = 0; j < phi_t.cols(); ++j) {
      const double d = distance(phi_s.col(i), phi_t.col(j), options.distance);
      if (labels_s[i] == labels_t[j]) {
        pull += 0.5 * d * d;
      } else {
        const double h = std::max(0.0, options.margin - d);
        push += 0.5 * h * h;
      }
    }
  }
  LossValue out;
  out.value = pull + push;
  out.components["same_class"] = pull;
  out.components["different_class"] = push;
  return out;
}

EmbeddingGrad csa_loss_grad(const Matrix& phi_s, const Matrix& phi_t,
                            std::span<const int> labels_s, std::span<const int> labels_t,
                            const CsaOptions& options) {
  check_pair_inputs(phi_s, phi_t, labels_s, labels_t, "csa_loss_grad");
  EmbeddingGrad g{Matrix::Zero(phi_s.rows(), phi_s.cols()),
                  Matrix::Zero(phi_t.rows(), phi_t.cols())};
  for (Eigen::Index i = 0; i < phi_s.cols(); ++i) {
    for (Eigen::Index j = 0; j < phi_t.cols(); ++j) {
      const double d = distance(phi_s.col(i), phi_t.col(j), options.distance);
      double coef = 0.0;  // dLoss/dd
      if (labels_s[i] == labels_t[j]) {
        coef = d;
      } else if (d < options.margin) {
        coef = -(options.margin - d);
      }
      if (coef == 0.0) continue;
      const Vector dd = distance_grad(phi_s.col(i), phi_t.col(j), options.distance);
      g.source.col(i) += coef * dd;
      g.target.col(j) -= coef * dd;
    }
  }
  return g;
}

double CsaGraphForm::evaluate(const Matrix& phi) const {
  return graph::pairwise_quadratic(phi, intrinsic) + graph::pairwise_quadratic(phi, penalty) +
         offset;
}

CsaGraphForm csa_as_graph(const Matrix& phi_s, const Matrix& phi_t, std::span<const int> labels_s,
                          std::span<const int> labels_t, double margin) {
  check_pair_inputs(phi_s, phi_t, labels_s, labels_t, "csa_as_graph");
  if (!(margin > 0.0)) throw ConfigError("csa_as_graph: margin must be > 0");
  const auto ns = phi_s.cols();
  const auto n = ns + phi_t.cols();
  CsaGraphForm form{Matrix::Zero(n, n), Matrix::Zero(n, n), 0.0};
  for (Eigen::Index i = 0; i < ns; ++i) {
    for (Eigen::Index j = 0; j < phi_t.cols(); ++j) {
      const Eigen::Index tj = ns + j;
      if (labels_s[i] == labels_t[j]) {
        form.intrinsic(i, tj) = form.intrinsic(tj, i) = 0.25;
        continue;
      }
      const double d = (phi_s.col(i) - phi_t.col(j)).norm();
      if (d < margin) {
        form.penalty(i, tj) = form.penalty(tj, i) = 0.25;
        form.offset += 0.5 * margin * margin - margin * d;
      }
    }
  }
  return form;
}

LossValue dsne_loss(const Matrix& phi_s, const Matrix& phi_t, std::span<const int> labels_s,
                    std::span<const int> labels_t, const DsneOptions& options) {
  check_pair_inputs(phi_s, phi_t, labels_s, labels_t, "dsne_loss");
  double total = 0.0;
  double sup_sum = 0.0;
  double inf_sum = 0.0;
  int skipped = 0;
  for (Eigen::Index j = 0; j < phi_t.cols(); ++j) {
    double sup = -std::numeric_limits<double>::infinity();
    double inf = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < phi_s.cols(); ++i) {
      const double d = distance(phi_s.col(i), phi_t.col(j), options.distance);
      if (labels_s[i] == labels_t[j]) {
        sup = std::max(sup, d);
      } else {
        inf = std::min(inf, d);
      }
    }
    if (!std::isfinite(sup) || !std::isfinite(inf)) {
      ++skipped;
      continue;
    }
    sup_sum += sup;
    inf_sum += inf;
    total += sup - inf;
  }
  LossValue out;
  out.value = total;
  out.components["max_same_class"] = sup_sum;
  out.components["min_different_class"] = inf_sum;
  out.components["skipped"] = skipped;
  return out;
}

EmbeddingGrad dsne_loss_grad(const Matrix& phi_s, const Matrix& phi_t,
                             std::span<const int> labels_s, std::span<const int> labels_t,
                             const DsneOptions& options) {
  check_pair_inputs(phi_s, phi_t, labels_s, labels_t, "dsne_loss_grad");
  EmbeddingGrad g{Matrix::Zero(phi_s.rows(), phi_s.cols()),
                  Matrix::Zero(phi_t.rows(), phi_t.cols())};
  for (Eigen::Index j = 0; j < phi_t.cols(); ++j) {
    double sup = -std::numeric_limits<double>::infinity();
    double inf = std::numeric_limits<double>::infinity();
    Eigen::Index arg_sup = -1;
    Eigen::Index arg_inf = -1;
    for (Eigen::Index i = 0; i < phi_s.cols(); ++i) {
      const double d = distance(phi_s.col(i), phi_t.col(j), options.distance);
      if (labels_s[i] == labels_t[j]) {
        if (d > sup) sup = d, arg_sup = i;
      } else if (d < inf) {
        inf = d, arg_inf = i;
      }
    }
    if (arg_sup < 0 || arg_inf < 0) continue;
    const Vector g_sup = distance_grad(phi_s.col(arg_sup), phi_t.col(j), options.distance);
    const Vector g_inf = distance_grad(phi_s.col(arg_inf), phi_t.col(j), options.distance);
    g.source.col(arg_sup) += g_sup;
    g.target.col(j) -= g_sup;
    g.source.col(arg_inf) -= g_inf;
    g.target.col(j) += g_inf;
  }
  return g;
}

LossValue cross_entropy(const Matrix& y_true, const Matrix& y_pred) {
  if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols()) {
    throw DimensionError("cross_entropy: labels are " + std::to_string(y_true.rows()) + "x" +
                         std::to_string(y_true.cols()) + ", predictions " +
                         std::to_string(y_pred.rows()) + "x" + std::to_string(y_pred.cols()));
  }
  const Matrix clamped = y_pred.cwiseMax(kProbabilityFloor).cwiseMin(1.0);
  LossValue out;
  out.value = -(y_true.array() * clamped.array().log()).sum();
  return out;
}

Matrix cross_entropy_grad(const Matrix& y_true, const Matrix& y_pred) {
  if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols()) {
    throw DimensionError("cross_entropy_grad: shape mismatch");
  }
  return -(y_true.array() / y_pred.array().max(kProbabilityFloor)).matrix();
}

Matrix one_hot(std::span<const int> labels, int num_classes) {
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw ConfigError("one_hot: label " + std::to_string(labels[i]) + " out of range");
    }
    y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return y;
}

LossValue total_objective(const LossValue& da, const LossValue& ce_s, const LossValue& ce_t,
                          const LossWeights& weights) {
  LossValue out;
  out.value = weights.da_weight * da.value + weights.beta * ce_s.value + weights.gamma * ce_t.value;
  out.components["da"] = da.value;
  out.components["ce_source"] = ce_s.value;
  out.components["ce_target"] = ce_t.value;
  return out;
}

LossWeights weights_from_ratios(double da_ce_ratio, double source_target_ratio, double epsilon,
                                double margin) {
  if (!(da_ce_ratio >= 0.0 && da_ce_ratio <= 1.0) ||
      !(source_target_ratio >= 0.0 && source_target_ratio <= 1.0)) {
    throw ConfigError("loss ratios must lie in [0, 1]");
  }
  LossWeights w;
  w.da_weight = da_ce_ratio;
  w.beta = (1.0 - da_ce_ratio) * source_target_ratio;
  w.gamma = (1.0 - da_ce_ratio) * (1.0 - source_target_ratio);
  w.epsilon = epsilon;
  w.margin = margin;
  return w;
}

}  // namespace dage::loss
