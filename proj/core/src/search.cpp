#include "dage/search.hpp"

#include "dage/error.hpp"

#include <cmath>

namespace dage::experiment {

std::string_view to_string(Prior p) noexcept {
  switch (p) {
    case Prior::LogUniform: return "log-uniform";
    case Prior::Uniform: return "uniform";
    case Prior::InverseLogUniform: return "inverse-log-uniform";
  }
  return "unknown";
}

void SearchDimension::validate() const {
  if (!(lower < upper)) throw ConfigError("search dimension " + name + ": lower must be < upper");
  if (prior == Prior::LogUniform && !(lower > 0.0)) {
    throw ConfigError("search dimension " + name + ": log-uniform needs a positive lower bound");
  }
  if (prior == Prior::InverseLogUniform && !(upper < 1.0)) {
    throw ConfigError("search dimension " + name + ": inverse-log-uniform needs upper < 1");
  }
}

double SearchDimension::sample(std::mt19937_64& rng) const {
  switch (prior) {
    case Prior::Uniform:
      return std::uniform_real_distribution<double>(lower, upper)(rng);
    case Prior::LogUniform: {
      std::uniform_real_distribution<double> u(std::log(lower), std::log(upper));
      return std::exp(u(rng));
    }
    case Prior::InverseLogUniform: {
      std::uniform_real_distribution<double> u(std::log(1.0 - upper), std::log(1.0 - lower));
      return 1.0 - std::exp(u(rng));
    }
  }
  return lower;
}

SearchSpace SearchSpace::defaults() {
  return {{
      {"learning_rate", 1e-8, 1e-3, Prior::LogUniform},
      {"lr_decay", 1e-7, 1e-2, Prior::LogUniform},
      {"momentum", 0.5, 0.99, Prior::InverseLogUniform},
      {"dropout", 0.1, 0.8, Prior::Uniform},
      {"l2", 1e-7, 1e-3, Prior::LogUniform},
      {"da_ce_ratio", 0.1, 0.99, Prior::Uniform},
      {"source_target_ce_ratio", 0.0, 1.0, Prior::Uniform},
      {"unfrozen_base_layers", 0.0, 16.0, Prior::Uniform, false},
  }};
}

SearchSpace SearchSpace::for_method(Method m) {
  SearchSpace space = defaults();
  if (m == Method::Ccsa) space.dimensions.push_back({"margin", 0.1, 10.0, Prior::LogUniform});
  return space;
}

const SearchDimension* SearchSpace::find(std::string_view name) const {
  for (const auto& d : dimensions) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

SearchPoint sample_point(const SearchSpace& space, std::mt19937_64& rng) {
  SearchPoint point;
  for (const auto& d : space.dimensions) {
    d.validate();
    point.emplace_back(d.name, d.sample(rng));
  }
  return point;
}

ExperimentConfig apply_point(const ExperimentConfig& base, const SearchPoint& point) {
  ExperimentConfig c = base;
  double da_ratio = -1.0;
  double st_ratio = -1.0;
  for (const auto& [name, value] : point) {
    if (name == "learning_rate") {
      c.optimizer.learning_rate = value;
    } else if (name == "lr_decay") {
      c.optimizer.lr_decay = value;
    } else if (name == "momentum") {
      c.optimizer.momentum = value;
    } else if (name == "dropout") {
      c.optimizer.keep_prob = 1.0 - value;
    } else if (name == "l2") {
      c.optimizer.l2 = value;
    } else if (name == "da_ce_ratio") {
      da_ratio = value;
    } else if (name == "source_target_ce_ratio") {
      st_ratio = value;
    } else if (name == "margin") {
      c.weights.margin = value;
    } else if (name == "unfrozen_base_layers") {
      // No pretrained backbone to unfreeze; recorded in the leaderboard only.
    } else {
      throw ConfigError("search: unknown dimension '" + name + "'");
    }
  }
  if (da_ratio >= 0.0 || st_ratio >= 0.0) {
    c.weights = loss::weights_from_ratios(da_ratio >= 0.0 ? da_ratio : c.weights.da_weight,
                                          st_ratio >= 0.0 ? st_ratio : 0.5, c.weights.epsilon,
                                          c.weights.margin);
  }
  return c;
}

}  // namespace dage::experiment
