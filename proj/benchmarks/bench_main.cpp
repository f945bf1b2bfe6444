// Micro-benchmarks of the hot paths: trace-ratio loss and gradient, LeNet
// forward/backward, the symmetric eigensolvers.

#include "dage/eigen_solver.hpp"
#include "dage/graph.hpp"
#include "dage/losses.hpp"
#include "dage/network.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using dage::Matrix;

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

dage::BatchMeta half_and_half(int n, int k) {
  dage::BatchMeta m;
  for (int i = 0; i < n; ++i) {
    m.labels.push_back(i % k);
    m.domains.push_back(i < n / 2 ? dage::DomainTag::Source : dage::DomainTag::Target);
  }
  return m;
}

void BM_DageLossAndGrad(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto meta = half_and_half(n, 10);
  const Matrix L = dage::graph::laplacian(dage::graph::build_intrinsic_lda(meta));
  const Matrix B = dage::graph::laplacian(dage::graph::build_penalty_lda(meta));
  const Matrix phi = gaussian(84, n, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dage::loss::dage_loss(phi, L, B, 1e-6).value);
    benchmark::DoNotOptimize(dage::loss::dage_loss_grad(phi, L, B, 1e-6).data());
  }
}
BENCHMARK(BM_DageLossAndGrad)->Arg(32)->Arg(64)->Arg(128);

void BM_CsaLoss(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Matrix s = gaussian(84, n, 2);
  const Matrix t = gaussian(84, n, 3);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = i % 10;
  for (auto _ : state) benchmark::DoNotOptimize(dage::loss::csa_loss_grad(s, t, y, y).source.data());
}
BENCHMARK(BM_CsaLoss)->Arg(16)->Arg(64);

void BM_LenetForwardBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto net = dage::nn::init(dage::nn::lenet_spec(10), 1);
  const Matrix x = gaussian(784, n, 4);
  for (auto _ : state) {
    const auto f = dage::nn::forward_features(net, x);
    const auto c = dage::nn::forward_classifier(net, f.embedding);
    const std::vector<dage::nn::StreamGrad> s{{&f, &c, Matrix::Ones(84, n), Matrix()}};
    benchmark::DoNotOptimize(dage::nn::backward(net, s).squared_norm());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_LenetForwardBackward)->Arg(16)->Arg(32);

void BM_GeneralizedEigen(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  const Matrix g = gaussian(d, d, 5);
  const Matrix h = gaussian(d, d, 6);
  const Matrix a = g + g.transpose();
  const Matrix c = h * h.transpose() + Matrix::Identity(d, d);
  for (auto _ : state) benchmark::DoNotOptimize(dage::spectral::generalized_eigen(a, c).values.data());
}
BENCHMARK(BM_GeneralizedEigen)->Arg(8)->Arg(32)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
