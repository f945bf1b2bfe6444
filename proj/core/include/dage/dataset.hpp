#pragma once

#include "dage/network.hpp"
#include "dage/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dage::data {

struct LabeledSample {
  Vector features;
  int label = 0;
  DomainTag domain = DomainTag::Source;
};

/// Samples stored column-wise: features is shape.size() x n.
struct Dataset {
  std::string name;
  int num_classes = 0;
  nn::Shape shape;
  DomainTag domain = DomainTag::Source;
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  LabeledSample sample(std::size_t i) const;

  /// Columns picked by index, in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;
  Matrix gather(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;

  /// Per-class counts, length num_classes.
  std::vector<std::size_t> class_counts() const;

  /// Throws ConfigError if labels fall outside [0, num_classes) or the
  /// feature matrix does not match shape and label count.
  void validate() const;
};

/// Domain shift applied to the source blobs to produce the target domain:
/// x_t = R(rotation) (mu + noise_scale * z) + translation, where R rotates
/// the first two coordinates.
struct ShiftConfig {
  double rotation = 0.0;  // radians
  std::vector<double> translation;  // empty = zero; otherwise length D
  double noise_scale = 1.0;
  double class_radius = 3.0;  // class means sit on a circle of this radius
  double noise_std = 1.0;

  bool is_identity() const;
};

struct DomainPair {
  Dataset source;
  Dataset target;
};

/// K Gaussian blobs in D dimensions, n_per_class samples per class in each
/// domain. Deterministic in seed.
DomainPair synth_shift(int n_per_class, int num_classes, int dim, const ShiftConfig& shift,
                       std::uint64_t seed);

/// Class means of the source blobs (D x K); target means are the shifted
/// images of these.
Matrix blob_means(int num_classes, int dim, double radius);

}  // namespace dage::data
