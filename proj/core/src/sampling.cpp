#include "dage/sampling.hpp"

#include "dage/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

namespace dage::data {

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class.at(static_cast<std::size_t>(ds.labels[i])).push_back(i);
  }
  return by_class;
}

std::vector<std::size_t> complement(const std::vector<std::size_t>& chosen, std::size_t total) {
  std::vector<char> taken(total, 0);
  for (std::size_t i : chosen) taken[i] = 1;
  std::vector<std::size_t> out;
  out.reserve(total - chosen.size());
  for (std::size_t i = 0; i < total; ++i) {
    if (!taken[i]) out.push_back(i);
  }
  return out;
}

}  // namespace

SplitPlan::SplitPlan(const Dataset& ds, const SplitSpec& spec) : total_(ds.size()) {
  if (spec.per_class < 1) throw ConfigError("split: per-class count must be >= 1");
  ds.validate();
  nn::Rng rng(spec.seed);
  auto by_class = indices_by_class(ds);
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    auto& idx = by_class[k];
    if (idx.size() < static_cast<std::size_t>(spec.per_class)) {
      throw ConfigError("split: class " + std::to_string(k) + " of " + ds.name + " has " +
                        std::to_string(idx.size()) + " samples, " +
                        std::to_string(spec.per_class) + " requested");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    train_.insert(train_.end(), idx.begin(), idx.begin() + spec.per_class);
  }
}

std::vector<std::size_t> SplitPlan::test_indices() const { return complement(train_, total_); }

Dataset SplitPlan::train(const Dataset& ds) const { return ds.subset(train_); }

Dataset SplitPlan::test(const Dataset& ds) const {
  if (ds.size() != total_) throw DimensionError("split: plan was made for a different dataset");
  return ds.subset(test_indices());
}

Split sample_protocol(const Dataset& ds, const SplitSpec& spec, bool require_test) {
  if (require_test) {
    const auto counts = ds.class_counts();
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (counts[k] == static_cast<std::size_t>(spec.per_class)) {
        throw ConfigError("split: class " + std::to_string(k) +
                          " would leave no test samples (per-class count equals class size)");
      }
    }
  }
  const SplitPlan plan(ds, spec);
  return {plan.train(ds), plan.test(ds)};
}

Split validation_split(const Dataset& ds, double fraction, int min_per_class, std::uint64_t seed) {
  nn::Rng rng(seed);
  auto by_class = indices_by_class(ds);
  std::vector<std::size_t> val;
  for (auto& idx : by_class) {
    if (idx.size() < 2) continue;
    auto n_val = std::max<std::size_t>(static_cast<std::size_t>(min_per_class),
                                       static_cast<std::size_t>(std::ceil(fraction * idx.size())));
    n_val = std::min(n_val, idx.size() - 1);
    std::shuffle(idx.begin(), idx.end(), rng);
    val.insert(val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  }
  std::sort(val.begin(), val.end());
  return {ds.subset(complement(val, ds.size())), ds.subset(val)};
}

std::size_t PairBatch::positive_count() const {
  return static_cast<std::size_t>(std::count(positive.begin(), positive.end(), std::uint8_t{1}));
}

PairBatch make_pairs(const Dataset& source, const Dataset& target, double ratio,
                     std::uint64_t seed) {
  if (source.empty() || target.empty()) throw ConfigError("make_pairs: empty dataset");
  std::vector<std::pair<std::size_t, std::size_t>> pos;
  std::vector<std::pair<std::size_t, std::size_t>> neg;
  for (std::size_t s = 0; s < source.size(); ++s) {
    for (std::size_t t = 0; t < target.size(); ++t) {
      (source.labels[s] == target.labels[t] ? pos : neg).emplace_back(s, t);
    }
  }
  if (pos.empty()) {
    throw ConfigError("make_pairs: no positive pairs (source and target label sets are disjoint)");
  }
  if (ratio > 0.0) {
    const auto keep = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(pos.size())));
    if (neg.size() > keep) {
      nn::Rng rng(seed);
      std::vector<std::size_t> order(neg.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      order.resize(keep);
      std::sort(order.begin(), order.end());
      std::vector<std::pair<std::size_t, std::size_t>> kept;
      kept.reserve(keep);
      for (std::size_t i : order) kept.push_back(neg[i]);
      neg = std::move(kept);
    }
  }
  // Merge back into Cartesian enumeration order.
  std::vector<std::pair<std::size_t, std::size_t>> all(pos);
  all.insert(all.end(), neg.begin(), neg.end());
  std::sort(all.begin(), all.end());
  PairBatch out;
  for (const auto& [s, t] : all) {
    out.source.push_back(s);
    out.target.push_back(t);
    out.positive.push_back(source.labels[s] == target.labels[t] ? 1 : 0);
  }
  return out;
}

StratifiedBatches::StratifiedBatches(PairBatch pairs, std::vector<int> target_labels,
                                     std::size_t batch_size, std::uint64_t seed)
    : pairs_(std::move(pairs)),
      target_labels_(std::move(target_labels)),
      batch_size_(batch_size),
      rng_(seed) {
  if (batch_size_ < 2) throw ConfigError("stratified batches: batch size must be >= 2");
  std::set<int> classes;
  for (std::size_t t : pairs_.target) classes.insert(target_labels_.at(t));
  if (classes.size() < 2) {
    throw ConfigError("stratified batches: pair set spans a single target class");
  }
  shuffle();
}

void StratifiedBatches::shuffle() {
  const std::size_t n = pairs_.size();
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;

  auto label = [&](std::size_t pos) { return target_labels_[pairs_.target[order_[pos]]]; };
  // Batch boundaries; a trailing single pair joins the previous batch.
  std::vector<std::size_t> starts;
  for (std::size_t b = 0; b < n; b += batch_size_) starts.push_back(b);
  if (starts.size() > 1 && n - starts.back() < 2) starts.pop_back();
  auto end_of = [&](std::size_t k) { return k + 1 < starts.size() ? starts[k + 1] : n; };
  auto mixed = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin + 1; i < end; ++i) {
      if (label(i) != label(begin)) return true;
    }
    return false;
  };

  for (std::size_t k = 0; k < starts.size(); ++k) {
    const std::size_t begin = starts[k];
    const std::size_t end = end_of(k);
    if (mixed(begin, end)) continue;
    const int cls = label(begin);
    bool fixed = false;
    for (std::size_t j = end; j < n && !fixed; ++j) {
      if (label(j) != cls) {
        std::swap(order_[end - 1], order_[j]);
        fixed = true;
      }
    }
    // Borrow from an earlier batch that stays mixed after the swap.
    for (std::size_t e = 0; e < k && !fixed; ++e) {
      for (std::size_t j = starts[e]; j < end_of(e) && !fixed; ++j) {
        if (label(j) == cls) continue;
        std::swap(order_[end - 1], order_[j]);
        if (mixed(starts[e], end_of(e))) {
          fixed = true;
        } else {
          std::swap(order_[end - 1], order_[j]);
        }
      }
    }
  }
  batch_starts_ = std::move(starts);
}

std::optional<PairBatch> StratifiedBatches::next() {
  if (cursor_ >= batch_starts_.size()) return std::nullopt;
  const std::size_t begin = batch_starts_[cursor_];
  const std::size_t end = cursor_ + 1 < batch_starts_.size() ? batch_starts_[cursor_ + 1] : pairs_.size();
  ++cursor_;
  PairBatch out;
  for (std::size_t i = begin; i < end; ++i) {
    const std::size_t p = order_[i];
    out.source.push_back(pairs_.source[p]);
    out.target.push_back(pairs_.target[p]);
    out.positive.push_back(pairs_.positive[p]);
  }
  return out;
}

void StratifiedBatches::reset() {
  ++epoch_;
  shuffle();
}

std::vector<PairBatch> StratifiedBatches::epoch() {
  std::vector<PairBatch> out;
  while (auto b = next()) out.push_back(std::move(*b));
  reset();
  return out;
}

std::vector<PairBatch> stratified_batches(const PairBatch& pairs,
                                          const std::vector<int>& target_labels,
                                          std::size_t batch_size, std::uint64_t seed) {
  StratifiedBatches stream(pairs, target_labels, batch_size, seed);
  return stream.epoch();
}

}  // namespace dage::data
