#include "dage/gradcheck.hpp"

#include "dage/config.hpp"
#include "dage/error.hpp"
#include "dage/graph.hpp"
#include "dage/trainer.hpp"

#include <algorithm>
#include <random>

namespace dage::experiment {

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  }
  return m;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Labels for a two-domain batch with at least one penalty edge.
BatchMeta random_meta(int n, std::mt19937_64& rng) {
  while (true) {
    const int ns = uniform_int(rng, 1, n - 1);
    const int k = uniform_int(rng, 2, 3);
    std::vector<int> ys(static_cast<std::size_t>(ns));
    std::vector<int> yt(static_cast<std::size_t>(n - ns));
    for (auto& y : ys) y = uniform_int(rng, 0, k - 1);
    for (auto& y : yt) y = uniform_int(rng, 0, k - 1);
    BatchMeta meta = BatchMeta::concat(ys, yt);
    if (graph::build_penalty_lda(meta).sum() > 0.0) return meta;
  }
}

std::vector<int> random_labels(int n, int k, std::mt19937_64& rng) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = uniform_int(rng, 0, k - 1);
  return y;
}

// Pairwise check over the two blocks of a split embedding gradient.
template <typename LossFn, typename GradFn>
double embedding_pair_error(const Matrix& phi_s, const Matrix& phi_t, LossFn loss, GradFn grad) {
  const auto g = grad(phi_s, phi_t);
  const Matrix ns = numeric_gradient([&](const Matrix& p) { return loss(p, phi_t); }, phi_s);
  const Matrix nt = numeric_gradient([&](const Matrix& p) { return loss(phi_s, p); }, phi_t);
  Matrix a(phi_s.rows(), phi_s.cols() + phi_t.cols());
  Matrix n(a.rows(), a.cols());
  a << g.source, g.target;
  n << ns, nt;
  return relative_error(a, n);
}

}  // namespace

double relative_error(const Matrix& analytic, const Matrix& numeric) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    throw DimensionError("relative_error: shape mismatch");
  }
  const double scale = std::max(analytic.norm(), numeric.norm());
  if (scale == 0.0) return 0.0;
  return (analytic - numeric).norm() / scale;
}

Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x, double h) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double up = f(probe);
      probe(i, j) = orig - h;
      const double down = f(probe);
      probe(i, j) = orig;
      g(i, j) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

ComponentReport check_dage_gradient(const GradcheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  const DageGradFn grad = options.dage_grad ? options.dage_grad : DageGradFn(loss::dage_loss_grad);
  ComponentReport report{"dage_trace_ratio", options.loss_instances, 0.0, options.loss_tolerance};
  for (int i = 0; i < options.loss_instances; ++i) {
    const int d = uniform_int(rng, 1, options.max_dim);
    const int n = uniform_int(rng, 2, options.max_batch);
    const BatchMeta meta = random_meta(n, rng);
    const Matrix L = graph::laplacian(graph::build_intrinsic_lda(meta));
    const Matrix B = graph::laplacian(graph::build_penalty_lda(meta));
    const Matrix phi = random_matrix(d, n, rng);
    const double eps = loss::kDefaultEpsilon;
    const Matrix numeric = numeric_gradient(
        [&](const Matrix& p) { return loss::dage_loss(p, L, B, eps).value; }, phi);
    report.max_relative_error =
        std::max(report.max_relative_error, relative_error(grad(phi, L, B, eps), numeric));
  }
  return report;
}

ComponentReport check_csa_gradient(const GradcheckOptions& options) {
  std::mt19937_64 rng(options.seed + 1);
  ComponentReport report{"csa_contrastive", options.loss_instances, 0.0, options.loss_tolerance};
  for (int i = 0; i < options.loss_instances; ++i) {
    const int d = uniform_int(rng, 1, options.max_dim);
    const int ns = uniform_int(rng, 1, options.max_batch / 2);
    const int nt = uniform_int(rng, 1, options.max_batch / 2);
    const auto ys = random_labels(ns, 3, rng);
    const auto yt = random_labels(nt, 3, rng);
    const loss::CsaOptions opt{2.0, loss::Distance::Euclidean};
    const double err = embedding_pair_error(
        random_matrix(d, ns, rng), random_matrix(d, nt, rng),
        [&](const Matrix& a, const Matrix& b) { return loss::csa_loss(a, b, ys, yt, opt).value; },
        [&](const Matrix& a, const Matrix& b) { return loss::csa_loss_grad(a, b, ys, yt, opt); });
    report.max_relative_error = std::max(report.max_relative_error, err);
  }
  return report;
}

ComponentReport check_dsne_gradient(const GradcheckOptions& options) {
  std::mt19937_64 rng(options.seed + 2);
  ComponentReport report{"dsne", options.loss_instances, 0.0, options.loss_tolerance};
  for (int i = 0; i < options.loss_instances; ++i) {
    const int d = uniform_int(rng, 1, options.max_dim);
    const int ns = uniform_int(rng, 2, options.max_batch / 2);
    const int nt = uniform_int(rng, 1, options.max_batch / 2);
    const auto ys = random_labels(ns, 2, rng);
    const auto yt = random_labels(nt, 2, rng);
    const double err = embedding_pair_error(
        random_matrix(d, ns, rng), random_matrix(d, nt, rng),
        [&](const Matrix& a, const Matrix& b) { return loss::dsne_loss(a, b, ys, yt).value; },
        [&](const Matrix& a, const Matrix& b) { return loss::dsne_loss_grad(a, b, ys, yt); });
    report.max_relative_error = std::max(report.max_relative_error, err);
  }
  return report;
}

ComponentReport check_network_gradient(const GradcheckOptions& options, bool conv) {
  std::mt19937_64 rng(options.seed + (conv ? 4 : 3));
  ComponentReport report{conv ? "network_conv" : "network_dense", options.network_instances, 0.0,
                         options.network_tolerance};
  ExperimentConfig config;
  config.method = Method::DageLda;
  config.weights.beta = 0.7;
  config.weights.gamma = 0.3;
  constexpr int kClasses = 3;

  for (int inst = 0; inst < options.network_instances; ++inst) {
    nn::NetworkSpec spec;
    if (conv) {
      spec.input = {1, 6, 6};
      spec.features = {nn::Conv{3, 3, 2, 1}, nn::Relu{}, nn::Conv{3, 3, 2, 1}};
    } else {
      spec.input = {4, 1, 1};
      spec.features = {nn::Dense{5}, nn::Relu{}, nn::Dense{3}};
    }
    spec.classifier = {nn::Dense{kClasses}};
    spec.num_classes = kClasses;
    nn::NetworkState state = nn::init(spec, options.seed + static_cast<std::uint64_t>(inst));
    // Nonzero biases so every parameter is exercised.
    for (auto& p : state.params) {
      if (!p.empty()) p.bias = 0.1 * random_matrix(p.bias.size(), 1, rng);
    }

    const int ns = uniform_int(rng, 2, 4);
    const int nt = uniform_int(rng, 2, 4);
    const Matrix xs = random_matrix(spec.input.size(), ns, rng);
    const Matrix xt = random_matrix(spec.input.size(), nt, rng);
    std::vector<int> ys = random_labels(ns, kClasses, rng);
    std::vector<int> yt = random_labels(nt, kClasses, rng);
    ys[0] = 0;
    yt[0] = 0;
    yt[1] = 1;  // at least one intrinsic and one penalty edge

    nn::Rng unused(0);
    const nn::Gradients analytic =
        siamese_objective(config, state, xs, ys, xt, yt, false, unused).grads;

    struct Slot {
      std::size_t layer;
      bool bias;
      Eigen::Index row;
      Eigen::Index col;
    };
    std::vector<Slot> slots;
    for (std::size_t l = 0; l < state.params.size(); ++l) {
      const auto& p = state.params[l];
      for (Eigen::Index j = 0; j < p.weight.cols(); ++j) {
        for (Eigen::Index i = 0; i < p.weight.rows(); ++i) slots.push_back({l, false, i, j});
      }
      for (Eigen::Index i = 0; i < p.bias.size(); ++i) slots.push_back({l, true, i, 0});
    }
    std::shuffle(slots.begin(), slots.end(), rng);
    slots.resize(std::min<std::size_t>(slots.size(), static_cast<std::size_t>(options.sampled_params)));

    Matrix a(static_cast<Eigen::Index>(slots.size()), 1);
    Matrix n(a.rows(), 1);
    const double h = 1e-6;
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const Slot& slot = slots[s];
      auto& p = state.params[slot.layer];
      double& value = slot.bias ? p.bias(slot.row) : p.weight(slot.row, slot.col);
      const double orig = value;
      auto objective = [&] {
        return siamese_objective(config, state, xs, ys, xt, yt, false, unused).value.value;
      };
      value = orig + h;
      const double up = objective();
      value = orig - h;
      const double down = objective();
      value = orig;
      n(static_cast<Eigen::Index>(s), 0) = (up - down) / (2.0 * h);
      const auto& g = analytic.params[slot.layer];
      a(static_cast<Eigen::Index>(s), 0) = slot.bias ? g.bias(slot.row) : g.weight(slot.row, slot.col);
    }
    report.max_relative_error = std::max(report.max_relative_error, relative_error(a, n));
  }
  return report;
}

std::vector<ComponentReport> run_gradcheck(const GradcheckOptions& options) {
  return {check_dage_gradient(options), check_csa_gradient(options), check_dsne_gradient(options),
          check_network_gradient(options, false), check_network_gradient(options, true)};
}

}  // namespace dage::experiment
