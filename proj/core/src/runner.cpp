#include "dage/runner.hpp"

#include "dage/checkpoint.hpp"
#include "dage/error.hpp"
#include "dage/graph.hpp"
#include "dage/metrics.hpp"
#include "dage/spectral.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

namespace dage::experiment {

namespace {

std::filesystem::path resolve(const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : data_root() / path;
}

data::Dataset load_idx_domain(const IdxDatasetConfig& cfg, const std::string& manifest,
                              DomainTag domain, int num_classes) {
  const auto path = resolve(manifest);
  if (!std::filesystem::exists(path)) {
    throw ConfigError("dataset manifest not found: " + path.string() + " (set " +
                      std::string(kDataRootEnv) + ")");
  }
  data::IdxOptions opts;
  opts.target_side = cfg.image_side;
  opts.resize = cfg.resize;
  opts.domain = domain;
  opts.num_classes = num_classes;
  return data::load_manifest(path, opts);
}

std::vector<std::size_t> random_subset(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  nn::Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

void write_line(std::ostream* os, const std::string& line) {
  if (os != nullptr) *os << line << '\n';
}

std::filesystem::path checkpoint_path(const std::filesystem::path& base, int repeat, int repeats) {
  if (repeats == 1) return base;
  auto p = base;
  p += ".r" + std::to_string(repeat);
  return p;
}

template <typename Fn>
int guarded(std::ostream& out, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    out << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    out << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    out << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace

std::uint64_t repeat_seed(const ExperimentConfig& config, int repeat) noexcept {
  return config.seed + static_cast<std::uint64_t>(repeat);
}

ExperimentData load_experiment_data(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  ExperimentData out;
  if (config.dataset.kind == DatasetConfig::Kind::Synthetic) {
    const auto& s = config.dataset.synthetic;
    auto pair = data::synth_shift(s.n_per_class, s.num_classes, s.dim, s.shift, seed);
    out.source = std::move(pair.source);
    out.target = std::move(pair.target);
  } else {
    const auto& c = config.dataset.idx;
    out.source = load_idx_domain(c, c.source_manifest, DomainTag::Source, 10);
    out.target = load_idx_domain(c, c.target_manifest, DomainTag::Target, 10);
    if (c.source_samples > 0 && static_cast<std::size_t>(c.source_samples) < out.source.size()) {
      out.source = out.source.subset(
          random_subset(out.source.size(), static_cast<std::size_t>(c.source_samples), seed));
    }
  }
  if (config.source_per_class > 0) {
    out.source = data::sample_protocol(out.source, {config.source_per_class, seed + 3}, false).train;
  }
  out.plan.emplace(out.target, data::SplitSpec{config.split.per_class, seed});
  return out;
}

TrainSummary run_train(const ExperimentConfig& config, const TrainOptions& options) {
  config.validate();
  TrainSummary summary;
  const std::string method(to_string(config.method));
  for (int r = 0; r < config.repeats; ++r) {
    const std::uint64_t seed = repeat_seed(config, r);
    const std::string run_id = method + "-s" + std::to_string(seed);
    ExperimentData ed = load_experiment_data(config, seed);

    RunData rd;
    rd.source = std::move(ed.source);
    data::Dataset target_train = ed.plan->train(ed.target);
    if (config.validation_fraction > 0.0) {
      auto vs = data::validation_split(target_train, config.validation_fraction, 1, seed + 2);
      rd.target_train = std::move(vs.train);
      rd.target_validation = std::move(vs.test);
    } else {
      rd.target_train = std::move(target_train);
    }

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      if (!options.include_wall_clock) return 0.0;
      return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();
    };
    auto on_epoch = [&](const EpochRecord& rec) {
      MetricsRecord m;
      m.run_id = run_id;
      m.phase = rec.phase;
      m.step = rec.step;
      m.epoch = rec.epoch;
      m.losses = rec.losses;
      m.validation_accuracy = rec.validation_accuracy;
      m.wall_ms = elapsed();
      write_line(options.metrics, m.to_json());
    };

    RunResult result = train_run(config, rd, seed, on_epoch);

    RepeatOutcome outcome;
    outcome.seed = seed;
    outcome.best_validation_accuracy = result.best_validation_accuracy;
    outcome.epochs_run = result.epochs_run;
    outcome.failed = result.failed;
    outcome.failure = result.failure;

    MetricsRecord fin;
    fin.type = "final";
    fin.run_id = run_id;
    fin.phase = "test";
    fin.step = result.state.step;
    fin.epoch = result.epochs_run;
    if (!result.failed) {
      // The test split only comes into existence here, after training.
      const data::Dataset test = ed.plan->test(ed.target);
      outcome.test_accuracy = accuracy(result.state, test);
      fin.test_accuracy = outcome.test_accuracy;
      if (options.checkpoint) {
        nn::save_checkpoint(checkpoint_path(*options.checkpoint, r, config.repeats), result.state);
      }
    } else {
      ++summary.failures;
    }
    if (!rd.target_validation.empty()) fin.validation_accuracy = result.best_validation_accuracy;
    fin.wall_ms = elapsed();
    write_line(options.metrics, fin.to_json());
    summary.repeats.push_back(std::move(outcome));
  }

  std::vector<double> accs;
  for (const auto& o : summary.repeats) {
    if (!o.failed) accs.push_back(o.test_accuracy);
  }
  if (!accs.empty()) {
    const double n = static_cast<double>(accs.size());
    summary.mean_accuracy = std::accumulate(accs.begin(), accs.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : accs) ss += (a - summary.mean_accuracy) * (a - summary.mean_accuracy);
    summary.std_accuracy = std::sqrt(ss / n);
  }

  nlohmann::ordered_json j;
  j["type"] = "summary";
  j["method"] = method;
  j["repeats"] = config.repeats;
  j["failures"] = summary.failures;
  j["mean_test_accuracy"] = summary.mean_accuracy;
  j["std_test_accuracy"] = summary.std_accuracy;
  write_line(options.metrics, j.dump());
  return summary;
}

EvalReport evaluate_checkpoint(const nn::NetworkState& state, const data::Dataset& ds) {
  ds.validate();
  if (state.spec.input != ds.shape) {
    throw ConfigError("checkpoint expects input " + std::to_string(state.spec.input.channels) +
                      "x" + std::to_string(state.spec.input.height) + "x" +
                      std::to_string(state.spec.input.width) + ", dataset " + ds.name + " has " +
                      std::to_string(ds.shape.channels) + "x" + std::to_string(ds.shape.height) +
                      "x" + std::to_string(ds.shape.width));
  }
  if (ds.num_classes > state.spec.num_classes) {
    throw ConfigError("checkpoint has " + std::to_string(state.spec.num_classes) +
                      " classes, dataset " + std::to_string(ds.num_classes));
  }
  return {accuracy(state, ds), confusion_matrix(state, ds)};
}

SearchResult run_search(const SearchSpace& space, int budget, const ExperimentConfig& base,
                        std::ostream* leaderboard_jsonl) {
  if (budget < 1) throw ConfigError("search: budget must be >= 1");
  for (const auto& d : space.dimensions) d.validate();
  std::mt19937_64 rng(base.seed);
  std::vector<ExperimentConfig> configs;
  SearchResult out;
  for (int t = 0; t < budget; ++t) {
    LeaderboardEntry entry;
    entry.trial = t;
    entry.point = sample_point(space, rng);
    ExperimentConfig cfg = apply_point(base, entry.point);
    cfg.repeats = 1;
    const TrainSummary s = run_train(cfg, {nullptr, std::nullopt, false});
    const RepeatOutcome& o = s.repeats.front();
    entry.failed = o.failed;
    entry.validation_accuracy = o.best_validation_accuracy;
    entry.test_accuracy = o.test_accuracy;
    out.leaderboard.push_back(std::move(entry));
    configs.push_back(std::move(cfg));
  }
  std::stable_sort(out.leaderboard.begin(), out.leaderboard.end(),
                   [](const LeaderboardEntry& a, const LeaderboardEntry& b) {
                     if (a.failed != b.failed) return !a.failed;
                     return a.validation_accuracy > b.validation_accuracy;
                   });
  if (out.leaderboard.front().failed) throw NumericalError("search: every trial failed");
  out.best = configs[static_cast<std::size_t>(out.leaderboard.front().trial)];

  for (std::size_t rank = 0; rank < out.leaderboard.size(); ++rank) {
    const auto& e = out.leaderboard[rank];
    nlohmann::ordered_json j;
    j["rank"] = rank + 1;
    j["trial"] = e.trial;
    j["failed"] = e.failed;
    j["validation_accuracy"] = e.validation_accuracy;
    j["test_accuracy"] = e.test_accuracy;
    nlohmann::ordered_json p = nlohmann::ordered_json::object();
    for (const auto& [name, value] : e.point) p[name] = value;
    j["point"] = p;
    write_line(leaderboard_jsonl, j.dump());
  }
  return out;
}

int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out) {
  return guarded(out, [&] {
    bool ok = true;
    for (const auto& r : run_gradcheck(options)) {
      out << std::left << std::setw(18) << r.name << " instances=" << r.instances
          << " max_rel_err=" << sci(r.max_relative_error) << " tol=" << sci(r.tolerance) << ' '
          << (r.passed() ? "PASS" : "FAIL") << '\n';
      ok = ok && r.passed();
    }
    return ok ? kExitOk : kExitValidation;
  });
}

int cmd_oracle(const OracleOptions& options, std::ostream& out) {
  return guarded(out, [&] {
    if (options.num_classes < 2) throw ConfigError("oracle: need at least two classes");
    const int per_class = options.samples / (2 * options.num_classes);
    if (per_class < 1) throw ConfigError("oracle: too few samples for the class count");
    const auto pair =
        data::synth_shift(per_class, options.num_classes, options.dim, options.shift, options.seed);
    Matrix x(pair.source.features.rows(), pair.source.size() + pair.target.size());
    x << pair.source.features, pair.target.features;
    const BatchMeta meta = BatchMeta::concat(pair.source.labels, pair.target.labels);
    const Matrix L = graph::laplacian(graph::build_intrinsic_lda(meta));
    const Matrix B = graph::laplacian(graph::build_penalty_lda(meta));
    DescentOptions d;
    d.seed = options.seed;
    const OracleReport r = compare_with_spectral(x, L, B, options.epsilon, d);
    const bool ok = r.relative_gap < options.tolerance;
    out << "spectral_rho=" << sci(r.spectral_ratio) << " descent_loss=" << sci(r.descent_loss)
        << " relative_gap=" << sci(r.relative_gap) << " iterations=" << r.iterations << ' '
        << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? kExitOk : kExitValidation;
  });
}

int cmd_train(const ExperimentConfig& config, const TrainOptions& options, std::ostream& out) {
  return guarded(out, [&] {
    const TrainSummary s = run_train(config, options);
    for (const auto& r : s.repeats) {
      out << "seed=" << r.seed << " epochs=" << r.epochs_run;
      if (r.failed) {
        out << " FAILED: " << r.failure << '\n';
      } else {
        out << " val_acc="
            << (config.validation_fraction > 0.0 ? fmt(r.best_validation_accuracy) : "n/a")
            << " test_acc=" << fmt(r.test_accuracy) << '\n';
      }
    }
    out << to_string(config.method) << " test accuracy " << fmt(100.0 * s.mean_accuracy, 2)
        << " +- " << fmt(100.0 * s.std_accuracy, 2) << " % over "
        << (config.repeats - s.failures) << " run(s)";
    if (s.failures > 0) out << ", " << s.failures << " failed";
    out << '\n';
    return s.failures == config.repeats ? kExitValidation : kExitOk;
  });
}

int cmd_eval(const std::filesystem::path& checkpoint, const data::Dataset& ds, std::ostream& out) {
  return guarded(out, [&] {
    const nn::NetworkState state = nn::load_checkpoint(checkpoint);
    const EvalReport r = evaluate_checkpoint(state, ds);
    out << "accuracy=" << fmt(r.accuracy) << " samples=" << ds.size() << '\n';
    out << "confusion (rows: true class, columns: predicted)\n";
    for (std::size_t k = 0; k < r.confusion.size(); ++k) {
      out << std::setw(3) << k << ':';
      for (auto c : r.confusion[k]) out << ' ' << std::setw(5) << c;
      out << '\n';
    }
    return kExitOk;
  });
}

int cmd_search(const SearchSpace& space, int budget, const ExperimentConfig& base,
               std::ostream* leaderboard_jsonl, std::ostream& out) {
  return guarded(out, [&] {
    const SearchResult r = run_search(space, budget, base, leaderboard_jsonl);
    const auto& top = r.leaderboard.front();
    out << "best trial " << top.trial << " val_acc=" << fmt(top.validation_accuracy)
        << " test_acc=" << fmt(top.test_accuracy) << '\n';
    for (const auto& [name, value] : top.point) out << "  " << name << " = " << value << '\n';
    out << to_json(r.best) << '\n';
    return kExitOk;
  });
}

}  // namespace dage::experiment
