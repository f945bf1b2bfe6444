#include "dage/oracle.hpp"

#include "dage/error.hpp"
#include "dage/spectral.hpp"

#include <cmath>

namespace dage::experiment {

namespace {

nn::NetworkSpec linear_spec(int dim) {
  nn::NetworkSpec spec;
  spec.input = {dim, 1, 1};
  spec.features = {nn::Dense{1}};
  spec.classifier = {nn::Dense{2}};
  spec.num_classes = 2;
  return spec;
}

struct Evaluation {
  double loss = 0.0;
  nn::Gradients grads;
};

Evaluation evaluate(const nn::NetworkState& state, const Matrix& x, const Matrix& L,
                    const Matrix& B, double epsilon) {
  const nn::FeaturePass f = nn::forward_features(state, x);
  Evaluation out;
  out.loss = loss::dage_loss(f.embedding, L, B, epsilon).value;
  const nn::StreamGrad stream{&f, nullptr, loss::dage_loss_grad(f.embedding, L, B, epsilon), {}};
  out.grads = nn::backward(state, std::span(&stream, 1));
  return out;
}

}  // namespace

DescentResult linear_dage_descent(const Matrix& x, const Matrix& L, const Matrix& B,
                                  double epsilon, const DescentOptions& options) {
  DescentResult result;
  result.state = nn::init(linear_spec(static_cast<int>(x.rows())), options.seed);
  Evaluation cur = evaluate(result.state, x, L, B, epsilon);
  double step = options.initial_step;
  nn::OptimizerConfig plain;
  plain.momentum = 0.0;
  int quiet = 0;
  for (int it = 0; it < options.max_iterations; ++it) {
    result.iterations = it + 1;
    const double g2 = cur.grads.squared_norm();
    if (g2 == 0.0) break;
    // Backtracking (Armijo) on a plain gradient step.
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      nn::NetworkState trial = result.state;
      plain.learning_rate = step;
      nn::sgd_step(trial, cur.grads, plain);
      Evaluation next = evaluate(trial, x, L, B, epsilon);
      if (std::isfinite(next.loss) && next.loss <= cur.loss - 1e-4 * step * g2) {
        const double change = (cur.loss - next.loss) / std::max(std::abs(cur.loss), 1e-300);
        result.state = std::move(trial);
        cur = std::move(next);
        step *= 2.0;
        accepted = true;
        quiet = change < options.tolerance ? quiet + 1 : 0;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || quiet >= 5) break;
  }
  result.loss = cur.loss;
  return result;
}

OracleReport compare_with_spectral(const Matrix& x, const Matrix& L, const Matrix& B,
                                   double epsilon, const DescentOptions& options) {
  const spectral::ScatterPair pair = spectral::scatter_matrices(x, L, B, epsilon);
  OracleReport report;
  report.spectral_ratio = spectral::smallest_generalized_eigenpair(pair).lambda;
  const DescentResult descent = linear_dage_descent(x, L, B, epsilon, options);
  report.descent_loss = descent.loss;
  report.iterations = descent.iterations;
  report.relative_gap = std::abs(descent.loss - report.spectral_ratio) /
                        std::max(std::abs(report.spectral_ratio), 1e-300);
  return report;
}

}  // namespace dage::experiment
