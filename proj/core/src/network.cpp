#include "dage/network.hpp"

#include "dage/error.hpp"
#include "layers.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

namespace dage::nn {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string layer_to_string(const LayerSpec& layer) {
  if (const auto* c = std::get_if<Conv>(&layer)) {
    return "conv" + std::to_string(c->kernel_h) + "x" + std::to_string(c->kernel_w) + "x" +
           std::to_string(c->out_channels) + "s" + std::to_string(c->stride);
  }
  if (const auto* p = std::get_if<MaxPool>(&layer)) return "pool" + std::to_string(p->window);
  if (const auto* d = std::get_if<Dense>(&layer)) return "dense" + std::to_string(d->out_dim);
  if (std::holds_alternative<Relu>(layer)) return "relu";
  return "drop" + format_double(std::get<Dropout>(layer).keep_prob);
}

int parse_int(std::string_view s, const std::string& context) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("network spec: bad integer '" + std::string(s) + "' in " + context);
  }
  return v;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(sep, start);
    const auto end = pos == std::string_view::npos ? s.size() : pos;
    out.emplace_back(s.substr(start, end - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

LayerSpec parse_layer(const std::string& tok) {
  auto starts = [&](std::string_view prefix) { return tok.rfind(prefix, 0) == 0; };
  if (tok == "relu") return Relu{};
  if (starts("conv")) {
    // conv<kh>x<kw>x<out>s<stride>
    const auto s_pos = tok.find('s', 4);
    if (s_pos == std::string::npos) throw ParseError("network spec: bad conv layer " + tok);
    const auto dims = split(std::string_view(tok).substr(4, s_pos - 4), 'x');
    if (dims.size() != 3) throw ParseError("network spec: bad conv layer " + tok);
    return Conv{parse_int(dims[0], tok), parse_int(dims[1], tok), parse_int(dims[2], tok),
                parse_int(std::string_view(tok).substr(s_pos + 1), tok)};
  }
  if (starts("pool")) return MaxPool{parse_int(std::string_view(tok).substr(4), tok)};
  if (starts("dense")) return Dense{parse_int(std::string_view(tok).substr(5), tok)};
  if (starts("drop")) {
    try {
      return Dropout{std::stod(tok.substr(4))};
    } catch (const std::exception&) {
      throw ParseError("network spec: bad dropout layer " + tok);
    }
  }
  throw ParseError("network spec: unknown layer '" + tok + "'");
}

void check_cache(const NetworkState& state, const StreamCache& cache, const char* what) {
  if (cache.owner == nullptr) throw Error(std::string("backward: missing ") + what + " cache");
  if (cache.owner != &state || cache.version != state.version) {
    throw Error(std::string("backward: stale ") + what +
                " cache (produced by another state or before an update)");
  }
}

Matrix run_layers(const NetworkState& state, std::size_t first, std::size_t last,
                  const Matrix& inputs, bool training, Rng* rng, StreamCache& cache) {
  const auto shapes = state.spec.layer_shapes();
  cache.owner = &state;
  cache.version = state.version;
  cache.first_layer = first;
  cache.layers.assign(last - first, {});
  Matrix x = inputs;
  for (std::size_t l = first; l < last; ++l) {
    const Shape& in = l == 0 ? state.spec.input : shapes[l - 1];
    x = detail::forward(l < state.spec.features.size() ? state.spec.features[l]
                                                       : state.spec.classifier[l - state.spec.features.size()],
                        state.params[l], in, shapes[l], x, cache.layers[l - first], training, rng);
  }
  return x;
}

const LayerSpec& layer_at(const NetworkSpec& spec, std::size_t l) {
  return l < spec.features.size() ? spec.features[l] : spec.classifier[l - spec.features.size()];
}

Matrix back_layers(const NetworkState& state, const StreamCache& cache, const Matrix& dy,
                   Gradients& grads) {
  const auto shapes = state.spec.layer_shapes();
  Matrix d = dy;
  for (std::size_t k = cache.layers.size(); k-- > 0;) {
    const std::size_t l = cache.first_layer + k;
    const Shape& in = l == 0 ? state.spec.input : shapes[l - 1];
    d = detail::backward(layer_at(state.spec, l), state.params[l], in, shapes[l],
                         cache.layers[k], d, grads.params[l]);
  }
  return d;
}

}  // namespace

std::vector<Shape> NetworkSpec::layer_shapes() const {
  if (input.size() <= 0) throw ConfigError("network spec: empty input shape");
  std::vector<Shape> shapes;
  shapes.reserve(features.size() + classifier.size());
  Shape cur = input;
  for (const auto& layer : features) {
    cur = detail::output_shape(layer, cur);
    shapes.push_back(cur);
  }
  // The classifier sees the embedding as a flat vector.
  cur = {cur.size(), 1, 1};
  for (const auto& layer : classifier) {
    if (std::holds_alternative<Conv>(layer) || std::holds_alternative<MaxPool>(layer)) {
      throw ConfigError("network spec: classifier may only hold dense, relu and dropout layers");
    }
    cur = detail::output_shape(layer, cur);
    shapes.push_back(cur);
  }
  return shapes;
}

int NetworkSpec::embedding_dim() const {
  if (features.empty()) return input.size();
  return layer_shapes()[features.size() - 1].size();
}

void NetworkSpec::validate() const {
  if (num_classes < 2) throw ConfigError("network spec: need at least two classes");
  if (features.empty()) throw ConfigError("network spec: feature stack is empty");
  if (classifier.empty() || !std::holds_alternative<Dense>(classifier.back()) ||
      std::get<Dense>(classifier.back()).out_dim != num_classes) {
    throw ConfigError("network spec: classifier must end in dense(" +
                      std::to_string(num_classes) + ")");
  }
  layer_shapes();
}

std::string NetworkSpec::to_string() const {
  std::string s = "input=" + std::to_string(input.channels) + "x" + std::to_string(input.height) +
                  "x" + std::to_string(input.width) + ";features=";
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (i) s += ',';
    s += layer_to_string(features[i]);
  }
  s += ";classifier=";
  for (std::size_t i = 0; i < classifier.size(); ++i) {
    if (i) s += ',';
    s += layer_to_string(classifier[i]);
  }
  s += ";classes=" + std::to_string(num_classes);
  return s;
}

NetworkSpec NetworkSpec::parse(const std::string& text) {
  NetworkSpec spec;
  bool seen_input = false;
  for (const auto& field : split(text, ';')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ParseError("network spec: field without '=': " + field);
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "input") {
      const auto dims = split(value, 'x');
      if (dims.size() != 3) throw ParseError("network spec: bad input shape " + value);
      spec.input = {parse_int(dims[0], key), parse_int(dims[1], key), parse_int(dims[2], key)};
      seen_input = true;
    } else if (key == "features" || key == "classifier") {
      auto& stack = key == "features" ? spec.features : spec.classifier;
      if (!value.empty()) {
        for (const auto& tok : split(value, ',')) stack.push_back(parse_layer(tok));
      }
    } else if (key == "classes") {
      spec.num_classes = parse_int(value, key);
    } else {
      throw ParseError("network spec: unknown field " + key);
    }
  }
  if (!seen_input) throw ParseError("network spec: missing input shape");
  spec.validate();
  return spec;
}

NetworkSpec lenet_spec(int num_classes, double keep_prob) {
  NetworkSpec spec;
  spec.input = {1, 28, 28};
  spec.features = {Conv{5, 5, 6, 1}, Relu{},       MaxPool{2},         Conv{5, 5, 16, 1},
                   Relu{},           MaxPool{2},   Dense{120},         Relu{},
                   Dropout{keep_prob}, Dense{84},  Relu{},             Dropout{keep_prob}};
  spec.classifier = {Dense{num_classes}};
  spec.num_classes = num_classes;
  return spec;
}

NetworkSpec mlp_spec(int input_dim, const std::vector<int>& hidden, int num_classes,
                     double keep_prob, bool final_relu) {
  if (hidden.empty()) throw ConfigError("mlp spec: need at least one hidden layer");
  NetworkSpec spec;
  spec.input = {input_dim, 1, 1};
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    spec.features.push_back(Dense{hidden[i]});
    const bool last = i + 1 == hidden.size();
    if (!last || final_relu) spec.features.push_back(Relu{});
    if (!last && keep_prob < 1.0) spec.features.push_back(Dropout{keep_prob});
  }
  spec.classifier = {Dense{num_classes}};
  spec.num_classes = num_classes;
  return spec;
}

void set_keep_prob(NetworkSpec& spec, double keep_prob) {
  for (auto* stack : {&spec.features, &spec.classifier}) {
    for (auto& layer : *stack) {
      if (auto* d = std::get_if<Dropout>(&layer)) d->keep_prob = keep_prob;
    }
  }
}

std::size_t NetworkState::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.weight.size() + p.bias.size());
  return n;
}

NetworkState init(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetworkState state;
  state.spec = spec;
  const auto shapes = spec.layer_shapes();
  Rng rng(seed);
  const std::size_t count = spec.features.size() + spec.classifier.size();
  state.params.resize(count);
  state.velocity.resize(count);
  for (std::size_t l = 0; l < count; ++l) {
    const LayerSpec& layer = layer_at(spec, l);
    if (!detail::has_parameters(layer)) continue;
    const Shape in = l == 0 ? spec.input : shapes[l - 1];
    const Shape& out = shapes[l];
    const auto [fan_in, fan_out] = detail::fans(layer, in, out);
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    int rows = 0;
    int cols = 0;
    if (const auto* c = std::get_if<Conv>(&layer)) {
      rows = c->out_channels;
      cols = in.channels * c->kernel_h * c->kernel_w;
    } else {
      rows = out.size();
      cols = in.size();
    }
    Parameters& p = state.params[l];
    p.weight.resize(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) p.weight(i, j) = dist(rng);
    }
    p.bias = Vector::Zero(rows);
    state.velocity[l] = {Matrix::Zero(rows, cols), Vector::Zero(rows)};
  }
  return state;
}

FeaturePass forward_features(const NetworkState& state, const Matrix& inputs, bool training,
                             Rng& rng) {
  if (inputs.rows() != state.spec.input.size()) {
    throw DimensionError("forward_features: inputs have " + std::to_string(inputs.rows()) +
                         " rows, network expects " + std::to_string(state.spec.input.size()));
  }
  FeaturePass pass;
  pass.embedding =
      run_layers(state, 0, state.feature_layer_count(), inputs, training, &rng, pass.cache);
  return pass;
}

FeaturePass forward_features(const NetworkState& state, const Matrix& inputs) {
  Rng unused(0);
  return forward_features(state, inputs, false, unused);
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.cols(), logits.rows());
  for (Eigen::Index n = 0; n < logits.cols(); ++n) {
    const double m = logits.col(n).maxCoeff();
    const Vector e = (logits.col(n).array() - m).exp().matrix();
    p.row(n) = (e / e.sum()).transpose();
  }
  return p;
}

ClassifierPass forward_classifier(const NetworkState& state, const Matrix& phi, bool training,
                                  Rng& rng) {
  if (phi.rows() != state.spec.embedding_dim()) {
    throw DimensionError("forward_classifier: embedding has " + std::to_string(phi.rows()) +
                         " rows, classifier expects " +
                         std::to_string(state.spec.embedding_dim()));
  }
  ClassifierPass pass;
  pass.logits = run_layers(state, state.feature_layer_count(), state.params.size(), phi, training,
                           &rng, pass.cache);
  pass.probabilities = softmax_rows(pass.logits);
  return pass;
}

ClassifierPass forward_classifier(const NetworkState& state, const Matrix& phi) {
  Rng unused(0);
  return forward_classifier(state, phi, false, unused);
}

Gradients Gradients::zeros_like(const NetworkState& state) {
  Gradients g;
  g.params.reserve(state.params.size());
  for (const auto& p : state.params) {
    g.params.push_back({Matrix::Zero(p.weight.rows(), p.weight.cols()), Vector::Zero(p.bias.size())});
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.params.size() != params.size()) throw DimensionError("gradients: layer count mismatch");
  for (std::size_t l = 0; l < params.size(); ++l) {
    params[l].weight += other.params[l].weight;
    params[l].bias += other.params[l].bias;
  }
  return *this;
}

Gradients& Gradients::operator*=(double s) {
  for (auto& p : params) {
    p.weight *= s;
    p.bias *= s;
  }
  return *this;
}

bool Gradients::all_finite() const {
  for (const auto& p : params) {
    if (!p.weight.allFinite() || !p.bias.allFinite()) return false;
  }
  return true;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& p : params) s += p.weight.squaredNorm() + p.bias.squaredNorm();
  return s;
}

Gradients backward(const NetworkState& state, std::span<const StreamGrad> streams) {
  Gradients grads = Gradients::zeros_like(state);
  for (const auto& stream : streams) {
    if (stream.features == nullptr) throw Error("backward: missing feature cache");
    // Each stream is reduced on its own and then added, so the sum over
    // streams does not depend on how the layers accumulate internally.
    Gradients local = Gradients::zeros_like(state);
    check_cache(state, stream.features->cache, "feature");
    const auto n = stream.features->embedding.cols();
    Matrix d_phi = Matrix::Zero(stream.features->embedding.rows(), n);
    if (stream.grad_phi.size() != 0) {
      if (stream.grad_phi.rows() != d_phi.rows() || stream.grad_phi.cols() != n) {
        throw DimensionError("backward: embedding gradient has the wrong shape");
      }
      d_phi += stream.grad_phi;
    }
    if (stream.grad_pred.size() != 0) {
      if (stream.classifier == nullptr) throw Error("backward: missing classifier cache");
      check_cache(state, stream.classifier->cache, "classifier");
      const Matrix& p = stream.classifier->probabilities;
      if (stream.grad_pred.rows() != p.rows() || stream.grad_pred.cols() != p.cols()) {
        throw DimensionError("backward: prediction gradient has the wrong shape");
      }
      // Softmax Jacobian-vector product, row by row.
      const Vector inner = stream.grad_pred.cwiseProduct(p).rowwise().sum();
      const Matrix d_logits =
          (p.array() * (stream.grad_pred.colwise() - inner).array()).matrix().transpose();
      d_phi += back_layers(state, stream.classifier->cache, d_logits, local);
    }
    back_layers(state, stream.features->cache, d_phi, local);
    grads += local;
  }
  return grads;
}

Gradients backward(const NetworkState& state, const FeaturePass& source_features,
                   const ClassifierPass& source_classifier, const FeaturePass& target_features,
                   const ClassifierPass& target_classifier, const Matrix& grad_phi_s,
                   const Matrix& grad_phi_t, const Matrix& grad_pred_s, const Matrix& grad_pred_t) {
  const StreamGrad streams[] = {
      {&source_features, &source_classifier, grad_phi_s, grad_pred_s},
      {&target_features, &target_classifier, grad_phi_t, grad_pred_t},
  };
  return backward(state, streams);
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("optimizer: learning rate must be > 0");
  if (!(lr_decay >= 0.0)) throw ConfigError("optimizer: learning-rate decay must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer: momentum must lie in [0, 1)");
  if (!(l2 >= 0.0)) throw ConfigError("optimizer: l2 must be >= 0");
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw ConfigError("optimizer: dropout keep probability must lie in (0, 1]");
  }
}

void sgd_step(NetworkState& state, const Gradients& grads, const OptimizerConfig& opt) {
  opt.validate();
  if (grads.params.size() != state.params.size()) {
    throw DimensionError("sgd_step: gradient layer count does not match the network");
  }
  for (std::size_t l = 0; l < grads.params.size(); ++l) {
    if (grads.params[l].weight.rows() != state.params[l].weight.rows() ||
        grads.params[l].weight.cols() != state.params[l].weight.cols() ||
        grads.params[l].bias.size() != state.params[l].bias.size()) {
      throw DimensionError("sgd_step: gradient shape mismatch at layer " + std::to_string(l));
    }
  }
  if (!grads.all_finite()) throw NonFiniteError("sgd_step: non-finite gradient, step rejected");
  const double eta = opt.rate_at(state.step);
  for (std::size_t l = 0; l < state.params.size(); ++l) {
    Parameters& p = state.params[l];
    if (p.empty()) continue;
    Parameters& v = state.velocity[l];
    v.weight = opt.momentum * v.weight - eta * (grads.params[l].weight + opt.l2 * p.weight);
    v.bias = opt.momentum * v.bias - eta * (grads.params[l].bias + opt.l2 * p.bias);
    p.weight += v.weight;
    p.bias += v.bias;
  }
  ++state.step;
  ++state.version;
}

Matrix predict(const NetworkState& state, const Matrix& inputs) {
  constexpr Eigen::Index kChunk = 512;
  Matrix out(inputs.cols(), state.spec.num_classes);
  for (Eigen::Index start = 0; start < inputs.cols(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, inputs.cols() - start);
    const FeaturePass f = forward_features(state, inputs.middleCols(start, len));
    out.middleRows(start, len) = forward_classifier(state, f.embedding).probabilities;
  }
  return out;
}

std::vector<int> argmax_rows(const Matrix& probabilities) {
  std::vector<int> out(static_cast<std::size_t>(probabilities.rows()));
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
    Eigen::Index k = 0;
    probabilities.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return out;
}

}  // namespace dage::nn
