#include "dage/config.hpp"

#include "dage/error.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace dage::experiment {

using json = nlohmann::ordered_json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const char* where) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!keys.contains(key)) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (const auto it = obj.find(key); it != obj.end()) {
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  }
}

loss::Distance parse_distance(const std::string& s) {
  if (s == "euclidean") return loss::Distance::Euclidean;
  if (s == "squared_euclidean") return loss::Distance::SquaredEuclidean;
  throw ConfigError("unknown distance '" + s + "'");
}

std::string distance_name(loss::Distance d) {
  return d == loss::Distance::Euclidean ? "euclidean" : "squared_euclidean";
}

data::Resize parse_resize(const std::string& s) {
  if (s == "bilinear") return data::Resize::Bilinear;
  if (s == "pad") return data::Resize::Pad;
  if (s == "none") return data::Resize::None;
  throw ConfigError("unknown resize mode '" + s + "'");
}

std::string resize_name(data::Resize r) {
  switch (r) {
    case data::Resize::Bilinear: return "bilinear";
    case data::Resize::Pad: return "pad";
    case data::Resize::None: return "none";
  }
  return "none";
}

}  // namespace

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::DageLda: return "dage-lda";
    case Method::Ccsa: return "ccsa";
    case Method::Dsne: return "dsne";
    case Method::FtTarget: return "ft-target";
    case Method::SourceOnly: return "source-only";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::DageLda, Method::Ccsa, Method::Dsne, Method::FtTarget, Method::SourceOnly}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected dage-lda, ccsa, dsne, ft-target or source-only)");
}

bool is_domain_adaptation(Method m) noexcept {
  return m == Method::DageLda || m == Method::Ccsa || m == Method::Dsne;
}

void ExperimentConfig::validate() const {
  optimizer.validate();
  weights.validate();
  if (repeats < 1) throw ConfigError("config: repeats must be >= 1");
  if (epochs < 0 || pretrain_epochs < 0) throw ConfigError("config: epochs must be >= 0");
  if (batch_size < 2) throw ConfigError("config: batch_size must be >= 2");
  if (max_batches_per_epoch < 0) throw ConfigError("config: max_batches_per_epoch must be >= 0");
  if (patience < 0) throw ConfigError("config: patience must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("config: validation_fraction must lie in [0, 1)");
  }
  if (split.per_class < 1) throw ConfigError("config: target_per_class must be >= 1");
  if (source_per_class < 0) throw ConfigError("config: source_per_class must be >= 0");
  if (dataset.kind == DatasetConfig::Kind::Synthetic) {
    const auto& s = dataset.synthetic;
    if (s.num_classes < 2 || s.dim < 1 || s.n_per_class < 1) {
      throw ConfigError("config: synthetic dataset needs num_classes >= 2, dim >= 1, n_per_class >= 1");
    }
    if (s.n_per_class <= split.per_class) {
      throw ConfigError("config: synthetic n_per_class must exceed target_per_class");
    }
    if (network.kind == NetworkConfig::Kind::LeNet) {
      throw ConfigError("config: the lenet network needs 28x28 image data");
    }
  } else {
    if (dataset.idx.source_manifest.empty() || dataset.idx.target_manifest.empty()) {
      throw ConfigError("config: idx dataset needs source_manifest and target_manifest");
    }
    if (dataset.idx.source_samples < 0) throw ConfigError("config: source_samples must be >= 0");
  }
  if (network.kind == NetworkConfig::Kind::Mlp && network.hidden.empty()) {
    throw ConfigError("config: mlp network needs at least one hidden layer");
  }
}

ExperimentConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  reject_unknown(root, {"method", "dataset", "split", "network", "optimizer", "loss", "pairs",
                        "training", "seed", "repeats"},
                 "config");
  ExperimentConfig c;
  if (root.contains("method")) c.method = parse_method(root.at("method").get<std::string>());

  if (const auto it = root.find("dataset"); it != root.end()) {
    const json& d = *it;
    reject_unknown(d, {"kind", "n_per_class", "num_classes", "dim", "shift", "source_manifest",
                       "target_manifest", "source_samples", "image_side", "resize"},
                   "dataset");
    std::string kind = "synthetic";
    read(d, "kind", kind);
    if (kind == "synthetic") {
      c.dataset.kind = DatasetConfig::Kind::Synthetic;
      auto& s = c.dataset.synthetic;
      read(d, "n_per_class", s.n_per_class);
      read(d, "num_classes", s.num_classes);
      read(d, "dim", s.dim);
      if (const auto sh = d.find("shift"); sh != d.end()) {
        reject_unknown(*sh, {"rotation", "translation", "noise_scale", "class_radius", "noise_std"},
                       "dataset.shift");
        read(*sh, "rotation", s.shift.rotation);
        read(*sh, "translation", s.shift.translation);
        read(*sh, "noise_scale", s.shift.noise_scale);
        read(*sh, "class_radius", s.shift.class_radius);
        read(*sh, "noise_std", s.shift.noise_std);
      }
    } else if (kind == "idx") {
      c.dataset.kind = DatasetConfig::Kind::Idx;
      auto& x = c.dataset.idx;
      read(d, "source_manifest", x.source_manifest);
      read(d, "target_manifest", x.target_manifest);
      read(d, "source_samples", x.source_samples);
      read(d, "image_side", x.image_side);
      std::string resize = resize_name(x.resize);
      read(d, "resize", resize);
      x.resize = parse_resize(resize);
    } else {
      throw ConfigError("dataset: unknown kind '" + kind + "'");
    }
  }

  if (const auto it = root.find("split"); it != root.end()) {
    reject_unknown(*it, {"target_per_class", "source_per_class"}, "split");
    read(*it, "target_per_class", c.split.per_class);
    read(*it, "source_per_class", c.source_per_class);
  }

  if (const auto it = root.find("network"); it != root.end()) {
    reject_unknown(*it, {"kind", "hidden", "final_relu"}, "network");
    std::string kind = "mlp";
    read(*it, "kind", kind);
    if (kind == "mlp") {
      c.network.kind = NetworkConfig::Kind::Mlp;
    } else if (kind == "lenet") {
      c.network.kind = NetworkConfig::Kind::LeNet;
    } else {
      throw ConfigError("network: unknown kind '" + kind + "'");
    }
    read(*it, "hidden", c.network.hidden);
    read(*it, "final_relu", c.network.final_relu);
  }

  if (const auto it = root.find("optimizer"); it != root.end()) {
    reject_unknown(*it, {"learning_rate", "lr_decay", "momentum", "l2", "keep_prob"}, "optimizer");
    read(*it, "learning_rate", c.optimizer.learning_rate);
    read(*it, "lr_decay", c.optimizer.lr_decay);
    read(*it, "momentum", c.optimizer.momentum);
    read(*it, "l2", c.optimizer.l2);
    read(*it, "keep_prob", c.optimizer.keep_prob);
  }

  if (const auto it = root.find("loss"); it != root.end()) {
    const json& l = *it;
    reject_unknown(l, {"beta", "gamma", "da_weight", "epsilon", "margin", "da_ce_ratio",
                       "source_target_ce_ratio", "csa_distance", "dsne_distance",
                       "within_domain_edges"},
                   "loss");
    read(l, "epsilon", c.weights.epsilon);
    read(l, "margin", c.weights.margin);
    const bool ratios = l.contains("da_ce_ratio") || l.contains("source_target_ce_ratio");
    const bool direct = l.contains("beta") || l.contains("gamma") || l.contains("da_weight");
    if (ratios && direct) {
      throw ConfigError("loss: give either beta/gamma/da_weight or the two ratios, not both");
    }
    if (ratios) {
      double r = 0.5;
      double s = 0.5;
      read(l, "da_ce_ratio", r);
      read(l, "source_target_ce_ratio", s);
      c.weights = loss::weights_from_ratios(r, s, c.weights.epsilon, c.weights.margin);
    } else {
      read(l, "beta", c.weights.beta);
      read(l, "gamma", c.weights.gamma);
      read(l, "da_weight", c.weights.da_weight);
    }
    std::string dist = distance_name(c.csa_distance);
    read(l, "csa_distance", dist);
    c.csa_distance = parse_distance(dist);
    dist = distance_name(c.dsne_distance);
    read(l, "dsne_distance", dist);
    c.dsne_distance = parse_distance(dist);
    read(l, "within_domain_edges", c.graph.within_domain_edges);
  }

  if (const auto it = root.find("pairs"); it != root.end()) {
    reject_unknown(*it, {"ratio"}, "pairs");
    read(*it, "ratio", c.pair_ratio);
  }

  if (const auto it = root.find("training"); it != root.end()) {
    reject_unknown(*it, {"epochs", "pretrain_epochs", "batch_size", "max_batches_per_epoch",
                         "patience", "validation_fraction"},
                   "training");
    read(*it, "epochs", c.epochs);
    read(*it, "pretrain_epochs", c.pretrain_epochs);
    read(*it, "batch_size", c.batch_size);
    read(*it, "max_batches_per_epoch", c.max_batches_per_epoch);
    read(*it, "patience", c.patience);
    read(*it, "validation_fraction", c.validation_fraction);
  }
  read(root, "seed", c.seed);
  read(root, "repeats", c.repeats);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const ExperimentConfig& c) {
  json root;
  root["method"] = std::string(to_string(c.method));
  json d;
  if (c.dataset.kind == DatasetConfig::Kind::Synthetic) {
    const auto& s = c.dataset.synthetic;
    d["kind"] = "synthetic";
    d["n_per_class"] = s.n_per_class;
    d["num_classes"] = s.num_classes;
    d["dim"] = s.dim;
    d["shift"] = {{"rotation", s.shift.rotation},
                  {"translation", s.shift.translation},
                  {"noise_scale", s.shift.noise_scale},
                  {"class_radius", s.shift.class_radius},
                  {"noise_std", s.shift.noise_std}};
  } else {
    const auto& x = c.dataset.idx;
    d["kind"] = "idx";
    d["source_manifest"] = x.source_manifest;
    d["target_manifest"] = x.target_manifest;
    d["source_samples"] = x.source_samples;
    d["image_side"] = x.image_side;
    d["resize"] = resize_name(x.resize);
  }
  root["dataset"] = d;
  root["split"] = {{"target_per_class", c.split.per_class}, {"source_per_class", c.source_per_class}};
  root["network"] = {{"kind", c.network.kind == NetworkConfig::Kind::Mlp ? "mlp" : "lenet"},
                     {"hidden", c.network.hidden},
                     {"final_relu", c.network.final_relu}};
  root["optimizer"] = {{"learning_rate", c.optimizer.learning_rate},
                       {"lr_decay", c.optimizer.lr_decay},
                       {"momentum", c.optimizer.momentum},
                       {"l2", c.optimizer.l2},
                       {"keep_prob", c.optimizer.keep_prob}};
  root["loss"] = {{"beta", c.weights.beta},
                  {"gamma", c.weights.gamma},
                  {"da_weight", c.weights.da_weight},
                  {"epsilon", c.weights.epsilon},
                  {"margin", c.weights.margin},
                  {"csa_distance", distance_name(c.csa_distance)},
                  {"dsne_distance", distance_name(c.dsne_distance)},
                  {"within_domain_edges", c.graph.within_domain_edges}};
  root["pairs"] = {{"ratio", c.pair_ratio}};
  root["training"] = {{"epochs", c.epochs},
                      {"pretrain_epochs", c.pretrain_epochs},
                      {"batch_size", c.batch_size},
                      {"max_batches_per_epoch", c.max_batches_per_epoch},
                      {"patience", c.patience},
                      {"validation_fraction", c.validation_fraction}};
  root["seed"] = c.seed;
  root["repeats"] = c.repeats;
  return root.dump(2);
}

std::filesystem::path data_root() {
  if (const char* env = std::getenv(kDataRootEnv); env != nullptr && *env != '\0') return env;
  return "data";
}

nn::NetworkSpec build_network_spec(const ExperimentConfig& config, const nn::Shape& input,
                                   int num_classes) {
  nn::NetworkSpec spec;
  if (config.network.kind == NetworkConfig::Kind::LeNet) {
    if (input != nn::Shape{1, 28, 28}) {
      throw ConfigError("lenet network expects 1x28x28 input, data is " +
                        std::to_string(input.channels) + "x" + std::to_string(input.height) + "x" +
                        std::to_string(input.width));
    }
    spec = nn::lenet_spec(num_classes, config.optimizer.keep_prob);
  } else {
    spec = nn::mlp_spec(input.size(), config.network.hidden, num_classes,
                        config.optimizer.keep_prob, config.network.final_relu);
    spec.input = input;
  }
  spec.validate();
  return spec;
}

}  // namespace dage::experiment
