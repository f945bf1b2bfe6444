// dage: gradient checks, spectral oracle, training, evaluation and random
// search from the command line. Exit codes: 0 ok, 1 check failed, 2 bad
// configuration.

#include "dage/checkpoint.hpp"
#include "dage/error.hpp"
#include "dage/idx.hpp"
#include "dage/runner.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>

namespace ex = dage::experiment;

namespace {

std::unique_ptr<std::ofstream> open_out(const std::string& path) {
  if (path.empty()) return nullptr;
  auto os = std::make_unique<std::ofstream>(path, std::ios::trunc);
  if (!*os) throw dage::ConfigError("cannot open " + path + " for writing");
  return os;
}

// Picks the target samples an eval run looks at.
dage::data::Dataset eval_split(const ex::ExperimentConfig& cfg, int repeat, const std::string& split,
                               const std::string& domain) {
  ex::ExperimentData d = ex::load_experiment_data(cfg, ex::repeat_seed(cfg, repeat));
  if (domain == "source") return d.source;
  if (split == "train") return d.plan->train(d.target);
  if (split == "test") return d.plan->test(d.target);
  return d.target;
}

void export_dataset(const dage::data::Dataset& ds, const std::filesystem::path& dir,
                    const std::string& stem) {
  const auto images = dir / (stem + "-images.idx");
  const auto labels = dir / (stem + "-labels.idx");
  dage::data::save_idx(ds, images, labels);
  dage::data::Manifest m;
  m.entries["name"] = stem;
  m.entries["images"] = images.filename().string();
  m.entries["labels"] = labels.filename().string();
  m.entries["classes"] = std::to_string(ds.num_classes);
  m.entries["checksum"] = dage::data::file_checksum(images);
  dage::data::write_manifest(dir / (stem + ".manifest"), m);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain adaptation with graph embedding"};
  app.require_subcommand(1);

  // gradcheck
  ex::GradcheckOptions gopt;
  bool corrupt = false;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every analytic gradient");
  grad->add_option("--seed", gopt.seed, "random seed");
  grad->add_option("--instances", gopt.loss_instances, "random instances per loss");
  grad->add_option("--network-instances", gopt.network_instances, "random networks per check");
  grad->add_flag("--corrupt", corrupt, "perturb the DAGE gradient (negative control)")
      ->group("");

  // oracle
  ex::OracleOptions oopt;
  auto* oracle = app.add_subcommand("oracle", "gradient descent vs the generalized eigenproblem");
  oracle->add_option("--dim", oopt.dim, "input dimension")->check(CLI::Range(2, 10));
  oracle->add_option("--samples", oopt.samples, "samples over both domains")->check(CLI::Range(4, 30));
  oracle->add_option("--classes", oopt.num_classes, "number of classes")->check(CLI::Range(2, 10));
  oracle->add_option("--epsilon", oopt.epsilon, "denominator shift");
  oracle->add_option("--tolerance", oopt.tolerance, "relative gap allowed");
  oracle->add_option("--rotation", oopt.shift.rotation, "target rotation, radians");
  oracle->add_option("--seed", oopt.seed, "random seed");

  // train / eval / search / export share --config
  std::string config_path;
  std::string out_path;
  std::string checkpoint;
  bool no_wall_clock = false;
  auto* train = app.add_subcommand("train", "train with early stopping, report test accuracy");
  train->add_option("--config", config_path, "experiment JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out_path, "metrics JSONL");
  train->add_option("--checkpoint", checkpoint, "final checkpoint (.rK suffix per repeat)");
  train->add_flag("--no-wall-clock", no_wall_clock, "write wall_ms as 0");

  int repeat = 0;
  std::string split = "test";
  std::string domain = "target";
  auto* eval = app.add_subcommand("eval", "accuracy and confusion matrix of a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--config", config_path, "experiment JSON naming the data")->required()->check(CLI::ExistingFile);
  eval->add_option("--repeat", repeat, "repeat whose split to rebuild")->check(CLI::NonNegativeNumber);
  eval->add_option("--split", split, "target split")->check(CLI::IsMember({"train", "test", "all"}));
  eval->add_option("--domain", domain, "domain")->check(CLI::IsMember({"source", "target"}));

  int budget = 20;
  auto* search = app.add_subcommand("search", "random hyper-parameter search");
  search->add_option("--config", config_path, "base experiment JSON")->required()->check(CLI::ExistingFile);
  search->add_option("--budget", budget, "number of trials")->check(CLI::PositiveNumber);
  search->add_option("--out", out_path, "leaderboard JSONL");

  auto* exp = app.add_subcommand("export", "write the configured datasets as IDX plus manifests");
  exp->add_option("--config", config_path, "experiment JSON")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ex::kExitOk : ex::kExitConfig;
  }

  try {
    if (*grad) {
      if (corrupt) {
        gopt.dage_grad = [](const dage::Matrix& phi, const dage::Matrix& L, const dage::Matrix& B,
                            double eps) -> dage::Matrix {
          return 1.01 * dage::loss::dage_loss_grad(phi, L, B, eps);
        };
      }
      return ex::cmd_gradcheck(gopt, std::cout);
    }
    if (*oracle) return ex::cmd_oracle(oopt, std::cout);

    const ex::ExperimentConfig cfg = ex::load_config(config_path);
    if (*train) {
      auto os = open_out(out_path);
      ex::TrainOptions opts;
      opts.metrics = os.get();
      if (!checkpoint.empty()) opts.checkpoint = checkpoint;
      opts.include_wall_clock = !no_wall_clock;
      return ex::cmd_train(cfg, opts, std::cout);
    }
    if (*eval) return ex::cmd_eval(checkpoint, eval_split(cfg, repeat, split, domain), std::cout);
    if (*search) {
      auto os = open_out(out_path);
      return ex::cmd_search(ex::SearchSpace::for_method(cfg.method), budget, cfg, os.get(),
                            std::cout);
    }
    if (*exp) {
      const ex::ExperimentData d = ex::load_experiment_data(cfg, cfg.seed);
      std::filesystem::create_directories(out_path);
      export_dataset(d.source, out_path, "source");
      export_dataset(d.target, out_path, "target");
      std::cout << "wrote " << d.source.size() << " source and " << d.target.size()
                << " target samples to " << out_path << '\n';
      return ex::kExitOk;
    }
  } catch (const dage::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ex::kExitConfig;
  } catch (const dage::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ex::kExitConfig;
  } catch (const dage::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ex::kExitValidation;
  }
  return ex::kExitOk;
}
