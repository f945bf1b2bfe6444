#include "dage/trainer.hpp"

#include "dage/error.hpp"
#include "dage/graph.hpp"
#include "dage/losses.hpp"
#include "dage/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dage::experiment {

namespace {

struct LossAccumulator {
  std::map<std::string, double> sums;
  int batches = 0;

  void add(const loss::LossValue& v) {
    sums["total"] += v.value;
    for (const auto& [k, x] : v.components) sums[k] += x;
    ++batches;
  }

  std::map<std::string, double> means() const {
    std::map<std::string, double> out;
    for (const auto& [k, v] : sums) out[k] = batches ? v / batches : 0.0;
    return out;
  }
};

// Cross-entropy only, on one stream.
BatchObjective classification_objective(const nn::NetworkState& state, const Matrix& x,
                                        std::span<const int> y, double weight, bool training,
                                        nn::Rng& rng) {
  const nn::FeaturePass f = nn::forward_features(state, x, training, rng);
  const nn::ClassifierPass c = nn::forward_classifier(state, f.embedding, training, rng);
  const Matrix onehot = loss::one_hot(y, state.spec.num_classes);
  BatchObjective out;
  const loss::LossValue ce = loss::cross_entropy(onehot, c.probabilities);
  out.value.value = weight * ce.value;
  out.value.components["ce"] = ce.value;
  const nn::StreamGrad stream{&f, &c, {}, weight * loss::cross_entropy_grad(onehot, c.probabilities)};
  out.grads = nn::backward(state, std::span(&stream, 1));
  return out;
}

double validation_loss(const nn::NetworkState& state, const data::Dataset& ds) {
  if (ds.empty()) return 0.0;
  return loss::cross_entropy(loss::one_hot(ds.labels, state.spec.num_classes),
                             nn::predict(state, ds.features))
      .value;
}

class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // True if this epoch is the best so far.
  bool update(double acc, double loss, const nn::NetworkState& state) {
    const bool better = !best_ || acc > best_acc_ || (acc == best_acc_ && loss < best_loss_);
    if (better) {
      best_ = state;
      best_acc_ = acc;
      best_loss_ = loss;
      stale_ = 0;
    } else {
      ++stale_;
    }
    return better;
  }

  bool should_stop() const { return patience_ > 0 && stale_ >= patience_; }
  double best_accuracy() const { return best_acc_; }
  const std::optional<nn::NetworkState>& best() const { return best_; }

 private:
  int patience_;
  int stale_ = 0;
  double best_acc_ = -1.0;
  double best_loss_ = 0.0;
  std::optional<nn::NetworkState> best_;
};

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

BatchObjective siamese_objective(const ExperimentConfig& config, const nn::NetworkState& state,
                                 const Matrix& x_s, std::span<const int> y_s, const Matrix& x_t,
                                 std::span<const int> y_t, bool training, nn::Rng& rng) {
  const auto& w = config.weights;
  const int k = state.spec.num_classes;
  const nn::FeaturePass fs = nn::forward_features(state, x_s, training, rng);
  const nn::FeaturePass ft = nn::forward_features(state, x_t, training, rng);
  const nn::ClassifierPass cs = nn::forward_classifier(state, fs.embedding, training, rng);
  const nn::ClassifierPass ct = nn::forward_classifier(state, ft.embedding, training, rng);

  const Matrix ys = loss::one_hot(y_s, k);
  const Matrix yt = loss::one_hot(y_t, k);
  const loss::LossValue ce_s = loss::cross_entropy(ys, cs.probabilities);
  const loss::LossValue ce_t = loss::cross_entropy(yt, ct.probabilities);

  loss::LossValue da;
  Matrix g_s;
  Matrix g_t;
  switch (config.method) {
    case Method::DageLda: {
      Matrix phi(fs.embedding.rows(), fs.embedding.cols() + ft.embedding.cols());
      phi << fs.embedding, ft.embedding;
      const BatchMeta meta = BatchMeta::concat(y_s, y_t);
      const Matrix L = graph::laplacian(graph::build_intrinsic_lda(meta, config.graph));
      const Matrix B = graph::laplacian(graph::build_penalty_lda(meta));
      da = loss::dage_loss(phi, L, B, w.epsilon);
      const Matrix g = loss::dage_loss_grad(phi, L, B, w.epsilon);
      g_s = g.leftCols(fs.embedding.cols());
      g_t = g.rightCols(ft.embedding.cols());
      break;
    }
    case Method::Ccsa: {
      const loss::CsaOptions opt{w.margin, config.csa_distance};
      da = loss::csa_loss(fs.embedding, ft.embedding, y_s, y_t, opt);
      auto g = loss::csa_loss_grad(fs.embedding, ft.embedding, y_s, y_t, opt);
      g_s = std::move(g.source);
      g_t = std::move(g.target);
      break;
    }
    case Method::Dsne: {
      const loss::DsneOptions opt{config.dsne_distance};
      da = loss::dsne_loss(fs.embedding, ft.embedding, y_s, y_t, opt);
      auto g = loss::dsne_loss_grad(fs.embedding, ft.embedding, y_s, y_t, opt);
      g_s = std::move(g.source);
      g_t = std::move(g.target);
      break;
    }
    case Method::FtTarget:
    case Method::SourceOnly:
      break;
  }

  BatchObjective out;
  out.value = loss::total_objective(da, ce_s, ce_t, w);
  if (g_s.size() != 0) {
    g_s *= w.da_weight;
    g_t *= w.da_weight;
  }
  const nn::StreamGrad streams[] = {
      {&fs, &cs, g_s, w.beta * loss::cross_entropy_grad(ys, cs.probabilities)},
      {&ft, &ct, g_t, w.gamma * loss::cross_entropy_grad(yt, ct.probabilities)},
  };
  out.grads = nn::backward(state, streams);
  return out;
}

double accuracy(const nn::NetworkState& state, const data::Dataset& ds) {
  if (ds.empty()) return 0.0;
  const auto pred = nn::argmax_rows(nn::predict(state, ds.features));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == ds.labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::vector<std::vector<std::size_t>> confusion_matrix(const nn::NetworkState& state,
                                                       const data::Dataset& ds) {
  const auto k = static_cast<std::size_t>(state.spec.num_classes);
  std::vector<std::vector<std::size_t>> m(k, std::vector<std::size_t>(k, 0));
  if (ds.empty()) return m;
  const auto pred = nn::argmax_rows(nn::predict(state, ds.features));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++m.at(static_cast<std::size_t>(ds.labels[i])).at(static_cast<std::size_t>(pred[i]));
  }
  return m;
}

RunResult train_run(const ExperimentConfig& config, const RunData& data, std::uint64_t seed,
                    const EpochCallback& on_epoch) {
  config.validate();
  if (data.source.empty()) throw ConfigError("train: empty source set");
  if (data.source.shape != data.target_train.shape && !data.target_train.empty()) {
    throw DimensionError("train: source and target samples differ in shape");
  }
  const int k = std::max(data.source.num_classes, data.target_train.num_classes);
  RunResult result;
  result.state = nn::init(build_network_spec(config, data.source.shape, k), seed);
  nn::NetworkState& state = result.state;
  nn::Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const bool has_validation = !data.target_validation.empty();

  auto emit = [&](EpochRecord rec) {
    if (on_epoch) on_epoch(rec);
    result.history.push_back(std::move(rec));
  };

  auto guarded_step = [&](const BatchObjective& obj) {
    if (!std::isfinite(obj.value.value)) throw NonFiniteError("non-finite loss");
    nn::sgd_step(state, obj.grads, config.optimizer);
  };

  // An epoch ends early once it has taken max_batches_per_epoch batches.
  auto capped = [&](std::size_t taken) {
    return config.max_batches_per_epoch > 0 &&
           taken >= static_cast<std::size_t>(config.max_batches_per_epoch);
  };

  // Plain cross-entropy epochs over one dataset.
  auto ce_epoch = [&](const data::Dataset& ds, LossAccumulator& acc) {
    auto order = iota_indices(ds.size());
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t taken = 0;
    for (std::size_t b = 0; b < order.size() && !capped(taken++); b += batch) {
      const std::span<const std::size_t> idx(order.data() + b, std::min(batch, order.size() - b));
      const auto labels = ds.gather_labels(idx);
      const BatchObjective obj =
          classification_objective(state, ds.gather(idx), labels, 1.0, true, rng);
      guarded_step(obj);
      acc.add(obj.value);
    }
  };

  auto epoch_record = [&](const char* phase, int epoch, const LossAccumulator& acc) {
    EpochRecord rec;
    rec.phase = phase;
    rec.epoch = epoch;
    rec.step = state.step;
    rec.losses = acc.means();
    if (has_validation) rec.validation_accuracy = accuracy(state, data.target_validation);
    return rec;
  };

  try {
    const bool pretrain = config.method != Method::SourceOnly;
    const int source_epochs = pretrain ? config.pretrain_epochs : config.epochs;
    for (int e = 0; e < source_epochs; ++e) {
      LossAccumulator acc;
      ce_epoch(data.source, acc);
      emit(epoch_record(pretrain ? "pretrain" : "train", e, acc));
      ++result.epochs_run;
    }
    if (config.method == Method::SourceOnly) {
      if (has_validation) result.best_validation_accuracy = accuracy(state, data.target_validation);
      return result;
    }
    if (data.target_train.empty()) throw ConfigError("train: empty target training set");

    EarlyStopping stopper(config.patience);
    if (has_validation) {
      stopper.update(accuracy(state, data.target_validation),
                     validation_loss(state, data.target_validation), state);
    }

    std::optional<data::StratifiedBatches> stream;
    if (is_domain_adaptation(config.method)) {
      data::PairBatch pairs = data::make_pairs(data.source, data.target_train, config.pair_ratio, seed);
      stream.emplace(std::move(pairs), data.target_train.labels, batch, seed + 1);
    }

    for (int e = 0; e < config.epochs; ++e) {
      LossAccumulator acc;
      if (stream) {
        std::size_t taken = 0;
        while (!capped(taken++)) {
          const auto pb = stream->next();
          if (!pb) break;
          const auto ys = data.source.gather_labels(pb->source);
          const auto yt = data.target_train.gather_labels(pb->target);
          const BatchObjective obj =
              siamese_objective(config, state, data.source.gather(pb->source), ys,
                                data.target_train.gather(pb->target), yt, true, rng);
          guarded_step(obj);
          acc.add(obj.value);
        }
        stream->reset();
      } else {
        ce_epoch(data.target_train, acc);
      }
      EpochRecord rec = epoch_record("train", e, acc);
      ++result.epochs_run;
      if (has_validation) {
        stopper.update(*rec.validation_accuracy, validation_loss(state, data.target_validation), state);
      }
      emit(std::move(rec));
      if (stopper.should_stop()) break;
    }
    if (stopper.best()) {
      state = *stopper.best();
      result.best_validation_accuracy = stopper.best_accuracy();
    }
  } catch (const NonFiniteError& e) {
    result.failed = true;
    result.failure = e.what();
  }
  return result;
}

}  // namespace dage::experiment
