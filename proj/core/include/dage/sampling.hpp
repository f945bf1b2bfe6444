#pragma once

// Few-shot split protocol and source/target pair construction.

#include "dage/dataset.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace dage::data {

struct SplitSpec {
  int per_class = 3;
  std::uint64_t seed = 0;
};

/// Indices chosen for training; the test complement is only materialised on
/// request so a runner can defer it until training is over.
class SplitPlan {
 public:
  SplitPlan(const Dataset& ds, const SplitSpec& spec);

  const std::vector<std::size_t>& train_indices() const noexcept { return train_; }
  std::vector<std::size_t> test_indices() const;

  Dataset train(const Dataset& ds) const;
  Dataset test(const Dataset& ds) const;

 private:
  std::vector<std::size_t> train_;
  std::size_t total_ = 0;
};

struct Split {
  Dataset train;
  Dataset test;
};

/// Exactly spec.per_class samples of every class, without replacement, go to
/// train; everything else to test. Throws ConfigError if a class has fewer
/// than per_class samples, or exactly per_class when require_test is set.
Split sample_protocol(const Dataset& ds, const SplitSpec& spec, bool require_test = true);

/// Holds out ceil(fraction * n) per class (at least min_per_class) as a
/// validation split; classes with a single sample stay in train.
Split validation_split(const Dataset& ds, double fraction, int min_per_class, std::uint64_t seed);

struct PairBatch {
  std::vector<std::size_t> source;
  std::vector<std::size_t> target;
  std::vector<std::uint8_t> positive;  // alpha = [y_s == y_t]

  std::size_t size() const noexcept { return source.size(); }
  std::size_t positive_count() const;
  std::size_t negative_count() const { return size() - positive_count(); }
};

/// Cartesian product of source and target, negatives subsampled uniformly
/// without replacement to at most floor(ratio * #positives). A ratio <= 0
/// keeps every negative.
PairBatch make_pairs(const Dataset& source, const Dataset& target, double ratio,
                     std::uint64_t seed);

/// Reshuffles the pair set every epoch and deals it out in batches of
/// batch_size pairs. Every batch holds at least two distinct target classes;
/// batches that would not are repaired by swapping with a later pair.
class StratifiedBatches {
 public:
  StratifiedBatches(PairBatch pairs, std::vector<int> target_labels, std::size_t batch_size,
                    std::uint64_t seed);

  /// Next batch of the current epoch, or nullopt when the epoch is done.
  std::optional<PairBatch> next();
  /// Starts a new epoch with a fresh shuffle.
  void reset();
  /// Every batch of one epoch.
  std::vector<PairBatch> epoch();

  std::size_t epoch_index() const noexcept { return epoch_; }

 private:
  void shuffle();

  PairBatch pairs_;
  std::vector<int> target_labels_;
  std::size_t batch_size_;
  nn::Rng rng_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> batch_starts_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

std::vector<PairBatch> stratified_batches(const PairBatch& pairs,
                                          const std::vector<int>& target_labels,
                                          std::size_t batch_size, std::uint64_t seed);

}  // namespace dage::data
