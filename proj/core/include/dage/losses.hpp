#pragma once

// Domain-adaptation losses over Siamese embeddings. Every loss is a sum
// (not a mean) over the pairs or samples it ranges over.

#include "dage/types.hpp"

#include <map>
#include <span>
#include <string>

namespace dage::loss {

inline constexpr double kDefaultEpsilon = 1e-6;
inline constexpr double kDefaultMargin = 1.0;
inline constexpr double kProbabilityFloor = 1e-12;

struct LossValue {
  double value = 0.0;
  std::map<std::string, double> components;
};

/// Weights of the joint objective
///   da_weight * L_DA + beta * CE_source + gamma * CE_target.
struct LossWeights {
  double beta = 1.0;
  double gamma = 1.0;
  double da_weight = 1.0;
  double epsilon = kDefaultEpsilon;
  double margin = kDefaultMargin;

  void validate() const;
};

/// Distance used inside the CSA and d-SNE losses.
enum class Distance { Euclidean, SquaredEuclidean };

// --- trace ratio -----------------------------------------------------------

/// Tr(phi L phi^T) / (Tr(phi B phi^T) + epsilon). phi is d x N with source
/// columns first. epsilon may be 0 when the caller guarantees a nonzero
/// denominator.
LossValue dage_loss(const Matrix& phi, const Matrix& L, const Matrix& B, double epsilon);

/// d x N gradient of dage_loss with respect to phi:
///   [phi (L + L^T) den - num phi (B + B^T)] / den^2.
Matrix dage_loss_grad(const Matrix& phi, const Matrix& L, const Matrix& B, double epsilon);

// --- contrastive semantic alignment ---------------------------------------

struct CsaOptions {
  double margin = kDefaultMargin;
  Distance distance = Distance::Euclidean;
};

/// Sum over every (source, target) column pair of
///   alpha/2 d^2 + (1 - alpha)/2 max(0, m - d)^2,  alpha = [y_s == y_t].
LossValue csa_loss(const Matrix& phi_s, const Matrix& phi_t, std::span<const int> labels_s,
                   std::span<const int> labels_t, const CsaOptions& options = {});

struct EmbeddingGrad {
  Matrix source;
  Matrix target;
};

EmbeddingGrad csa_loss_grad(const Matrix& phi_s, const Matrix& phi_t,
                            std::span<const int> labels_s, std::span<const int> labels_t,
                            const CsaOptions& options = {});

/// CSA written as a pair of graphs over the concatenated batch plus an
/// embedding-dependent offset that carries the non-quadratic part of the
/// hinge:
///   csa = pairwise_quadratic(phi, W) + pairwise_quadratic(phi, W_p) + offset
/// with W(i,j) = 1/4 on cross-domain same-class pairs and
/// W_p(i,j) = 1/4 [d(i,j) < m] on cross-domain different-class pairs.
struct CsaGraphForm {
  Matrix intrinsic;
  Matrix penalty;
  double offset = 0.0;

  /// Recombines the graph form into a loss value for the same embeddings.
  double evaluate(const Matrix& phi) const;
};

/// Only the Euclidean distance admits this form.
CsaGraphForm csa_as_graph(const Matrix& phi_s, const Matrix& phi_t, std::span<const int> labels_s,
                          std::span<const int> labels_t, double margin = kDefaultMargin);

// --- d-SNE ------------------------------------------------------------------

struct DsneOptions {
  Distance distance = Distance::SquaredEuclidean;
};

/// Sum over target samples j of
///   max_{same-class source} d(x, x_t^j) - min_{other-class source} d(x, x_t^j).
/// Target samples without both a same-class and an other-class source
/// sample are skipped; their count is in components["skipped"].
LossValue dsne_loss(const Matrix& phi_s, const Matrix& phi_t, std::span<const int> labels_s,
                    std::span<const int> labels_t, const DsneOptions& options = {});

/// Subgradient of dsne_loss (the arg-max / arg-min pairs receive the gradient).
EmbeddingGrad dsne_loss_grad(const Matrix& phi_s, const Matrix& phi_t,
                             std::span<const int> labels_s, std::span<const int> labels_t,
                             const DsneOptions& options = {});

// --- classification ---------------------------------------------------------

/// -sum_i sum_k y_ik ln(yhat_ik) with yhat clamped to [kProbabilityFloor, 1].
/// Both matrices are M x K (rows are samples).
LossValue cross_entropy(const Matrix& y_true, const Matrix& y_pred);

/// Gradient of cross_entropy with respect to y_pred.
Matrix cross_entropy_grad(const Matrix& y_true, const Matrix& y_pred);

/// M x K one-hot encoding.
Matrix one_hot(std::span<const int> labels, int num_classes);

/// da_weight * da + beta * ce_s + gamma * ce_t.
LossValue total_objective(const LossValue& da, const LossValue& ce_s, const LossValue& ce_t,
                          const LossWeights& weights);

/// Maps the two ratios of the hyper-parameter search (DA-vs-CE ratio r and
/// source-vs-target CE ratio s) onto objective weights:
/// da_weight = r, beta = (1 - r) s, gamma = (1 - r)(1 - s).
LossWeights weights_from_ratios(double da_ce_ratio, double source_target_ratio,
                                double epsilon = kDefaultEpsilon,
                                double margin = kDefaultMargin);

}  // namespace dage::loss
