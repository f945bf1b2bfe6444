#pragma once

// Random hyper-parameter search over the log-uniform / uniform /
// inverse-log-uniform ranges used for the domain adaptation methods.

#include "dage/config.hpp"

#include <random>
#include <string>
#include <vector>

namespace dage::experiment {

enum class Prior { LogUniform, Uniform, InverseLogUniform };

std::string_view to_string(Prior p) noexcept;

struct SearchDimension {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  Prior prior = Prior::Uniform;
  /// Dimensions that are recorded but not applied to the run.
  bool applied = true;

  void validate() const;
  double sample(std::mt19937_64& rng) const;
};

struct SearchSpace {
  std::vector<SearchDimension> dimensions;

  /// learning_rate, lr_decay, momentum, dropout, l2, da_ce_ratio,
  /// source_target_ce_ratio, unfrozen_base_layers (not applied).
  static SearchSpace defaults();
  /// defaults() plus margin in [0.1, 10], log-uniform, used by ccsa only.
  static SearchSpace for_method(Method m);

  const SearchDimension* find(std::string_view name) const;
};

/// One sampled point: dimension name -> value, in space order.
using SearchPoint = std::vector<std::pair<std::string, double>>;

SearchPoint sample_point(const SearchSpace& space, std::mt19937_64& rng);

/// Writes a sampled point into a copy of base.
ExperimentConfig apply_point(const ExperimentConfig& base, const SearchPoint& point);

}  // namespace dage::experiment
