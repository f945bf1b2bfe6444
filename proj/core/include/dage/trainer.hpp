#pragma once

// One training run of a Siamese network for a given method.

#include "dage/config.hpp"
#include "dage/dataset.hpp"
#include "dage/network.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dage::experiment {

/// Training inputs of a run. The target test split is deliberately absent.
struct RunData {
  data::Dataset source;
  data::Dataset target_train;
  data::Dataset target_validation;
};

struct EpochRecord {
  std::string phase;  // "pretrain" or "train"
  int epoch = 0;
  std::int64_t step = 0;
  std::map<std::string, double> losses;  // per-batch means
  std::optional<double> validation_accuracy;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct RunResult {
  nn::NetworkState state;
  double best_validation_accuracy = 0.0;
  int epochs_run = 0;
  std::vector<EpochRecord> history;
  bool failed = false;
  std::string failure;
};

/// Pretrains on the source set when the method needs it, then trains with
/// the method's objective. With patience > 0, stops once the target
/// validation accuracy has not improved for that many epochs and restores
/// the best parameters.
RunResult train_run(const ExperimentConfig& config, const RunData& data, std::uint64_t seed,
                    const EpochCallback& on_epoch = nullptr);

double accuracy(const nn::NetworkState& state, const data::Dataset& ds);

/// K x K counts, rows are true classes, columns predictions.
std::vector<std::vector<std::size_t>> confusion_matrix(const nn::NetworkState& state,
                                                       const data::Dataset& ds);

/// Loss of the method's objective on a single Siamese batch, with analytic
/// parameter gradients. Exposed for tests.
struct BatchObjective {
  loss::LossValue value;
  nn::Gradients grads;
};

BatchObjective siamese_objective(const ExperimentConfig& config, const nn::NetworkState& state,
                                 const Matrix& x_s, std::span<const int> y_s, const Matrix& x_t,
                                 std::span<const int> y_t, bool training, nn::Rng& rng);

}  // namespace dage::experiment
