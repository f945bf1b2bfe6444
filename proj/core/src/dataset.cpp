#include "dage/dataset.hpp"

#include "dage/error.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace dage::data {

LabeledSample Dataset::sample(std::size_t i) const {
  if (i >= size()) throw DimensionError("dataset: sample index out of range");
  return {features.col(static_cast<Eigen::Index>(i)), labels[i], domain};
}

Matrix Dataset::gather(std::span<const std::size_t> indices) const {
  Matrix out(features.rows(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size()) throw DimensionError("dataset: sample index out of range");
    out.col(static_cast<Eigen::Index>(k)) = features.col(static_cast<Eigen::Index>(indices[k]));
  }
  return out;
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw DimensionError("dataset: sample index out of range");
    out.push_back(labels[i]);
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.name = name;
  out.num_classes = num_classes;
  out.shape = shape;
  out.domain = domain;
  out.features = gather(indices);
  out.labels = gather_labels(indices);
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
  for (int y : labels) {
    if (y >= 0 && y < num_classes) ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

void Dataset::validate() const {
  if (features.cols() != static_cast<Eigen::Index>(labels.size())) {
    throw DimensionError("dataset " + name + ": " + std::to_string(features.cols()) +
                         " feature columns for " + std::to_string(labels.size()) + " labels");
  }
  if (!labels.empty() && features.rows() != shape.size()) {
    throw DimensionError("dataset " + name + ": feature rows do not match the sample shape");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw ConfigError("dataset " + name + ": label " + std::to_string(y) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
  }
}

bool ShiftConfig::is_identity() const {
  for (double t : translation) {
    if (t != 0.0) return false;
  }
  return rotation == 0.0 && noise_scale == 1.0;
}

Matrix blob_means(int num_classes, int dim, double radius) {
  Matrix means = Matrix::Zero(dim, num_classes);
  for (int k = 0; k < num_classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / num_classes;
    means(0, k) = radius * std::cos(angle);
    if (dim > 1) means(1, k) = radius * std::sin(angle);
  }
  return means;
}

DomainPair synth_shift(int n_per_class, int num_classes, int dim, const ShiftConfig& shift,
                       std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("synth_shift: need at least two classes");
  if (dim < 1 || n_per_class < 1) throw ConfigError("synth_shift: dim and n_per_class must be >= 1");
  if (!shift.translation.empty() && static_cast<int>(shift.translation.size()) != dim) {
    throw ConfigError("synth_shift: translation length must equal dim");
  }
  const Matrix means = blob_means(num_classes, dim, shift.class_radius);
  Vector translation = Vector::Zero(dim);
  for (int i = 0; i < static_cast<int>(shift.translation.size()); ++i) {
    translation(i) = shift.translation[static_cast<std::size_t>(i)];
  }

  auto make = [&](DomainTag domain, std::uint64_t stream) {
    Dataset ds;
    ds.name = domain == DomainTag::Source ? "synthetic-source" : "synthetic-target";
    ds.num_classes = num_classes;
    ds.shape = {dim, 1, 1};
    ds.domain = domain;
    ds.features.resize(dim, static_cast<Eigen::Index>(n_per_class) * num_classes);
    ds.labels.reserve(static_cast<std::size_t>(n_per_class * num_classes));
    nn::Rng rng(seed * 2 + stream);
    std::normal_distribution<double> normal(0.0, 1.0);
    const bool shifted = domain == DomainTag::Target;
    const double scale = shift.noise_std * (shifted ? shift.noise_scale : 1.0);
    const double c = std::cos(shifted ? shift.rotation : 0.0);
    const double s = std::sin(shifted ? shift.rotation : 0.0);
    Eigen::Index col = 0;
    for (int i = 0; i < n_per_class; ++i) {
      for (int k = 0; k < num_classes; ++k) {
        Vector x = means.col(k);
        for (int j = 0; j < dim; ++j) x(j) += scale * normal(rng);
        if (shifted) {
          if (dim > 1) {
            const double x0 = x(0);
            const double x1 = x(1);
            x(0) = c * x0 - s * x1;
            x(1) = s * x0 + c * x1;
          }
          x += translation;
        }
        ds.features.col(col++) = x;
        ds.labels.push_back(k);
      }
    }
    return ds;
  };

  return {make(DomainTag::Source, 0), make(DomainTag::Target, 1)};
}

}  // namespace dage::data
