#pragma once

// A small feature extractor phi followed by a classifier h, with explicit
// forward and backward passes. One NetworkState is shared by both Siamese
// streams: forward passes only read it and sgd_step is the only writer.

#include "dage/types.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace dage::nn {

using Rng = std::mt19937_64;

struct Shape {
  int channels = 1;
  int height = 1;
  int width = 1;

  int size() const noexcept { return channels * height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct Conv {
  int kernel_h = 5;
  int kernel_w = 5;
  int out_channels = 1;
  int stride = 1;
};
struct MaxPool {
  int window = 2;
};
struct Dense {
  int out_dim = 1;
};
struct Relu {};
struct Dropout {
  double keep_prob = 1.0;
};

using LayerSpec = std::variant<Conv, MaxPool, Dense, Relu, Dropout>;

/// Layer stacks for phi (features) and h (classifier). The embedding is the
/// output of the last feature layer; the classifier must end in a Dense
/// layer with num_classes outputs and is followed by an implicit softmax.
struct NetworkSpec {
  Shape input;
  std::vector<LayerSpec> features;
  std::vector<LayerSpec> classifier;
  int num_classes = 2;

  /// Output shape of every layer (features then classifier). Throws
  /// ConfigError if the stacks do not chain.
  std::vector<Shape> layer_shapes() const;
  int embedding_dim() const;
  void validate() const;
  /// Canonical one-line text form; the checkpoint hash is computed over it.
  std::string to_string() const;
  static NetworkSpec parse(const std::string& text);
};

/// conv5x5(6) relu pool2 conv5x5(16) relu pool2 fc120 relu drop fc84 relu drop
/// | fc(K). 84-dimensional embedding on 28x28 grayscale input.
NetworkSpec lenet_spec(int num_classes, double keep_prob = 1.0);

/// Fully connected feature stack with ReLU between layers (none after the
/// last one unless `final_relu`), then a linear classifier.
NetworkSpec mlp_spec(int input_dim, const std::vector<int>& hidden, int num_classes,
                     double keep_prob = 1.0, bool final_relu = true);

/// Sets the keep probability of every Dropout layer.
void set_keep_prob(NetworkSpec& spec, double keep_prob);

struct Parameters {
  Matrix weight;  // out x in (Dense) or out_channels x (in_channels*kh*kw) (Conv)
  Vector bias;

  bool empty() const noexcept { return weight.size() == 0; }
};

struct NetworkState {
  NetworkSpec spec;
  std::vector<Parameters> params;    // one entry per layer, features then classifier
  std::vector<Parameters> velocity;  // momentum buffers, same shapes
  std::int64_t step = 0;
  /// Bumped on every update; forward caches remember the value they saw.
  std::uint64_t version = 0;

  std::size_t feature_layer_count() const noexcept { return spec.features.size(); }
  std::size_t parameter_count() const;
};

/// Glorot-uniform weights, zero biases, zero momentum. Deterministic in seed.
NetworkState init(const NetworkSpec& spec, std::uint64_t seed);

struct LayerCache {
  Matrix input;
  Matrix mask;              // ReLU / dropout multipliers
  std::vector<int> argmax;  // max-pool winners, one per output element
};

/// Activations recorded by a forward pass, tied to the state version.
struct StreamCache {
  const NetworkState* owner = nullptr;
  std::uint64_t version = 0;
  std::size_t first_layer = 0;
  std::vector<LayerCache> layers;
};

struct FeaturePass {
  Matrix embedding;  // d x N
  StreamCache cache;
};

struct ClassifierPass {
  Matrix logits;         // K x N
  Matrix probabilities;  // N x K, rows sum to one
  StreamCache cache;
};

/// inputs: input.size() x N, one flattened sample (channel-major, row-major)
/// per column. Dropout masks are drawn from rng only when training is set.
FeaturePass forward_features(const NetworkState& state, const Matrix& inputs, bool training,
                             Rng& rng);
FeaturePass forward_features(const NetworkState& state, const Matrix& inputs);

ClassifierPass forward_classifier(const NetworkState& state, const Matrix& phi, bool training,
                                  Rng& rng);
ClassifierPass forward_classifier(const NetworkState& state, const Matrix& phi);

/// Row-wise softmax of a K x N logit block, returned as N x K.
Matrix softmax_rows(const Matrix& logits);

struct Gradients {
  std::vector<Parameters> params;

  static Gradients zeros_like(const NetworkState& state);
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double s);
  bool all_finite() const;
  double squared_norm() const;
};

/// One Siamese stream: the passes plus upstream gradients with respect to
/// the embedding (d x N) and the predicted probabilities (N x K). Empty
/// gradient matrices count as zero; a stream with an empty classifier pass
/// back-propagates through the feature stack only.
struct StreamGrad {
  const FeaturePass* features = nullptr;
  const ClassifierPass* classifier = nullptr;
  Matrix grad_phi;
  Matrix grad_pred;
};

/// Parameter gradients summed over every stream. Throws Error when a cache
/// is missing or was produced by a different state or version.
Gradients backward(const NetworkState& state, std::span<const StreamGrad> streams);

Gradients backward(const NetworkState& state, const FeaturePass& source_features,
                   const ClassifierPass& source_classifier, const FeaturePass& target_features,
                   const ClassifierPass& target_classifier, const Matrix& grad_phi_s,
                   const Matrix& grad_phi_t, const Matrix& grad_pred_s, const Matrix& grad_pred_t);

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double lr_decay = 0.0;
  double momentum = 0.9;
  double l2 = 0.0;
  double keep_prob = 1.0;

  void validate() const;
  double rate_at(std::int64_t step) const noexcept {
    return learning_rate / (1.0 + lr_decay * static_cast<double>(step));
  }
};

/// v <- mu v - eta_t (g + l2 theta); theta <- theta + v; step += 1.
/// Throws NonFiniteError and leaves the state untouched if grads are not finite.
void sgd_step(NetworkState& state, const Gradients& grads, const OptimizerConfig& opt);

/// Inference-mode class probabilities, N x K.
Matrix predict(const NetworkState& state, const Matrix& inputs);

/// Argmax of each row.
std::vector<int> argmax_rows(const Matrix& probabilities);

}  // namespace dage::nn
