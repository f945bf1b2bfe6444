#pragma once

// Command implementations behind the dage CLI. Each cmd_* returns a process
// exit code: kExitOk, kExitValidation (a check failed) or kExitConfig.

#include "dage/config.hpp"
#include "dage/gradcheck.hpp"
#include "dage/oracle.hpp"
#include "dage/search.hpp"
#include "dage/trainer.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dage::experiment {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitConfig = 2;

/// Datasets for one repeat: the source set, the full target set and the
/// target split plan (test indices are materialised only after training).
struct ExperimentData {
  data::Dataset source;
  data::Dataset target;
  std::optional<data::SplitPlan> plan;
};

ExperimentData load_experiment_data(const ExperimentConfig& config, std::uint64_t seed);

/// Seed of repeat r.
std::uint64_t repeat_seed(const ExperimentConfig& config, int repeat) noexcept;

struct RepeatOutcome {
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  double best_validation_accuracy = 0.0;
  int epochs_run = 0;
  bool failed = false;
  std::string failure;
};

struct TrainSummary {
  std::vector<RepeatOutcome> repeats;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // population std over successful repeats
  int failures = 0;
};

struct TrainOptions {
  std::ostream* metrics = nullptr;  // JSONL sink
  std::optional<std::filesystem::path> checkpoint;
  bool include_wall_clock = true;
};

TrainSummary run_train(const ExperimentConfig& config, const TrainOptions& options = {});

struct EvalReport {
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;
};

/// Throws ConfigError when the checkpoint's network does not fit the data.
EvalReport evaluate_checkpoint(const nn::NetworkState& state, const data::Dataset& ds);

struct LeaderboardEntry {
  int trial = 0;
  SearchPoint point;
  double validation_accuracy = 0.0;
  double test_accuracy = 0.0;
  bool failed = false;
};

struct SearchResult {
  std::vector<LeaderboardEntry> leaderboard;  // sorted by validation accuracy, descending
  ExperimentConfig best;
};

SearchResult run_search(const SearchSpace& space, int budget, const ExperimentConfig& base,
                        std::ostream* leaderboard_jsonl = nullptr);

struct OracleOptions {
  int dim = 5;
  int samples = 20;  // total over both domains
  int num_classes = 2;
  double epsilon = loss::kDefaultEpsilon;
  double tolerance = 1e-3;
  std::uint64_t seed = 11;
  data::ShiftConfig shift;
};

int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out);
int cmd_oracle(const OracleOptions& options, std::ostream& out);
int cmd_train(const ExperimentConfig& config, const TrainOptions& options, std::ostream& out);
int cmd_eval(const std::filesystem::path& checkpoint, const data::Dataset& ds, std::ostream& out);
int cmd_search(const SearchSpace& space, int budget, const ExperimentConfig& base,
               std::ostream* leaderboard_jsonl, std::ostream& out);

}  // namespace dage::experiment
