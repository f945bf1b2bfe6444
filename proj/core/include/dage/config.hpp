#pragma once

// Experiment configuration and its JSON form. The schema is documented in
// docs/config.md.

#include "dage/dataset.hpp"
#include "dage/graph.hpp"
#include "dage/idx.hpp"
#include "dage/losses.hpp"
#include "dage/network.hpp"
#include "dage/sampling.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace dage::experiment {

enum class Method { DageLda, Ccsa, Dsne, FtTarget, SourceOnly };

std::string_view to_string(Method m) noexcept;
Method parse_method(std::string_view name);
bool is_domain_adaptation(Method m) noexcept;

struct SyntheticConfig {
  int n_per_class = 50;  // per domain, before the target split
  int num_classes = 3;
  int dim = 2;
  data::ShiftConfig shift;
};

struct IdxDatasetConfig {
  std::string source_manifest;  // relative paths resolve against the data root
  std::string target_manifest;
  int source_samples = 2000;  // random subset of the source set; 0 keeps all
  int image_side = 28;
  data::Resize resize = data::Resize::Bilinear;
};

struct DatasetConfig {
  enum class Kind { Synthetic, Idx } kind = Kind::Synthetic;
  SyntheticConfig synthetic;
  IdxDatasetConfig idx;
};

struct NetworkConfig {
  enum class Kind { Mlp, LeNet } kind = Kind::Mlp;
  std::vector<int> hidden = {32, 16};
  bool final_relu = true;
};

struct ExperimentConfig {
  Method method = Method::DageLda;
  DatasetConfig dataset;
  data::SplitSpec split;         // target samples per class; seed is overridden per run
  int source_per_class = 0;      // 0 keeps the whole (sub-sampled) source set
  NetworkConfig network;
  nn::OptimizerConfig optimizer;
  loss::LossWeights weights;
  graph::GraphOptions graph;
  loss::Distance csa_distance = loss::Distance::Euclidean;
  loss::Distance dsne_distance = loss::Distance::SquaredEuclidean;
  double pair_ratio = 3.0;  // negatives per positive; <= 0 disables filtering
  int epochs = 30;
  int pretrain_epochs = 30;  // source-only epochs before adaptation / fine-tuning
  int batch_size = 16;
  int max_batches_per_epoch = 0;  // 0 runs every batch of the epoch
  int patience = 10;  // epochs without validation improvement; 0 disables
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
  int repeats = 1;

  void validate() const;
};

ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_json(const ExperimentConfig& config);

/// Directory used to resolve dataset manifests: $DAGE_DATA_ROOT, else "data".
std::filesystem::path data_root();
inline constexpr const char* kDataRootEnv = "DAGE_DATA_ROOT";

nn::NetworkSpec build_network_spec(const ExperimentConfig& config, const nn::Shape& input,
                                   int num_classes);

}  // namespace dage::experiment
