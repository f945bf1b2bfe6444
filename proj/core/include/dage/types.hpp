#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace dage {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class DomainTag : std::uint8_t { Source = 0, Target = 1 };

constexpr std::string_view to_string(DomainTag d) noexcept {
  return d == DomainTag::Source ? "source" : "target";
}

/// Labels and domain membership for the N columns of a batch.
struct BatchMeta {
  std::vector<int> labels;
  std::vector<DomainTag> domains;

  std::size_t size() const noexcept { return labels.size(); }

  /// Throws DimensionError / ConfigError when lengths differ, N < 2 or a
  /// label falls outside [0, num_classes). num_classes <= 0 skips the range
  /// upper bound.
  void validate(int num_classes = 0) const;

  /// Source block followed by target block, the layout used for Siamese batches.
  static BatchMeta concat(std::span<const int> source_labels,
                          std::span<const int> target_labels);
};

/// True iff every coefficient is finite.
inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace dage
