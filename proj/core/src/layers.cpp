#include "layers.hpp"

#include "dage/error.hpp"

#include <limits>
#include <string>

namespace dage::nn::detail {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Patch matrix of one sample: row p = output position, column =
// c * kh * kw + ki * kw + kj.
Matrix im2col(const Eigen::Ref<const Vector>& x, const Shape& in, const Conv& conv,
              const Shape& out) {
  const int patch = in.channels * conv.kernel_h * conv.kernel_w;
  Matrix cols(out.height * out.width, patch);
  for (int oy = 0; oy < out.height; ++oy) {
    for (int ox = 0; ox < out.width; ++ox) {
      const int p = oy * out.width + ox;
      int k = 0;
      for (int c = 0; c < in.channels; ++c) {
        for (int ki = 0; ki < conv.kernel_h; ++ki) {
          const int row = oy * conv.stride + ki;
          const double* src = x.data() + (c * in.height + row) * in.width + ox * conv.stride;
          for (int kj = 0; kj < conv.kernel_w; ++kj) cols(p, k++) = src[kj];
        }
      }
    }
  }
  return cols;
}

void col2im_add(const Matrix& cols, const Shape& in, const Conv& conv, const Shape& out,
                Eigen::Ref<Vector> dx) {
  for (int oy = 0; oy < out.height; ++oy) {
    for (int ox = 0; ox < out.width; ++ox) {
      const int p = oy * out.width + ox;
      int k = 0;
      for (int c = 0; c < in.channels; ++c) {
        for (int ki = 0; ki < conv.kernel_h; ++ki) {
          const int row = oy * conv.stride + ki;
          double* dst = dx.data() + (c * in.height + row) * in.width + ox * conv.stride;
          for (int kj = 0; kj < conv.kernel_w; ++kj) dst[kj] += cols(p, k++);
        }
      }
    }
  }
}

}  // namespace

bool has_parameters(const LayerSpec& layer) noexcept {
  return std::holds_alternative<Conv>(layer) || std::holds_alternative<Dense>(layer);
}

Shape output_shape(const LayerSpec& layer, const Shape& in) {
  return std::visit(
      overloaded{
          [&](const Conv& c) -> Shape {
            if (c.kernel_h < 1 || c.kernel_w < 1 || c.out_channels < 1 || c.stride < 1) {
              throw ConfigError("conv: kernel, channels and stride must be positive");
            }
            if (in.height < c.kernel_h || in.width < c.kernel_w) {
              throw ConfigError("conv: kernel " + std::to_string(c.kernel_h) + "x" +
                                std::to_string(c.kernel_w) + " larger than input " +
                                std::to_string(in.height) + "x" + std::to_string(in.width));
            }
            return {c.out_channels, (in.height - c.kernel_h) / c.stride + 1,
                    (in.width - c.kernel_w) / c.stride + 1};
          },
          [&](const MaxPool& p) -> Shape {
            if (p.window < 1) throw ConfigError("max-pool: window must be positive");
            if (in.height < p.window || in.width < p.window) {
              throw ConfigError("max-pool: window larger than input");
            }
            return {in.channels, in.height / p.window, in.width / p.window};
          },
          [&](const Dense& d) -> Shape {
            if (d.out_dim < 1) throw ConfigError("dense: output dimension must be positive");
            return {d.out_dim, 1, 1};
          },
          [&](const Relu&) -> Shape { return in; },
          [&](const Dropout& d) -> Shape {
            if (!(d.keep_prob > 0.0 && d.keep_prob <= 1.0)) {
              throw ConfigError("dropout: keep probability must lie in (0, 1]");
            }
            return in;
          },
      },
      layer);
}

std::pair<int, int> fans(const LayerSpec& layer, const Shape& in, const Shape& out) {
  if (const auto* c = std::get_if<Conv>(&layer)) {
    const int field = c->kernel_h * c->kernel_w;
    return {in.channels * field, c->out_channels * field};
  }
  return {in.size(), out.size()};
}

Matrix forward(const LayerSpec& layer, const Parameters& params, const Shape& in,
               const Shape& out, const Matrix& x, LayerCache& cache, bool training, Rng* rng) {
  const auto batch = x.cols();
  return std::visit(
      overloaded{
          [&](const Conv& c) -> Matrix {
            cache.input = x;
            Matrix y(out.size(), batch);
            const int positions = out.height * out.width;
            for (Eigen::Index n = 0; n < batch; ++n) {
              const Matrix cols = im2col(x.col(n), in, c, out);
              Matrix yn = cols * params.weight.transpose();
              yn.rowwise() += params.bias.transpose();
              y.col(n) = Eigen::Map<const Vector>(yn.data(), positions * c.out_channels);
            }
            return y;
          },
          [&](const MaxPool& p) -> Matrix {
            Matrix y(out.size(), batch);
            cache.argmax.assign(static_cast<std::size_t>(out.size() * batch), 0);
            for (Eigen::Index n = 0; n < batch; ++n) {
              for (int ch = 0; ch < out.channels; ++ch) {
                for (int oy = 0; oy < out.height; ++oy) {
                  for (int ox = 0; ox < out.width; ++ox) {
                    double best = -std::numeric_limits<double>::infinity();
                    int best_idx = 0;
                    for (int wy = 0; wy < p.window; ++wy) {
                      for (int wx = 0; wx < p.window; ++wx) {
                        const int idx = (ch * in.height + oy * p.window + wy) * in.width +
                                        ox * p.window + wx;
                        if (x(idx, n) > best) best = x(idx, n), best_idx = idx;
                      }
                    }
                    const int o = (ch * out.height + oy) * out.width + ox;
                    y(o, n) = best;
                    cache.argmax[static_cast<std::size_t>(n * out.size() + o)] = best_idx;
                  }
                }
              }
            }
            return y;
          },
          [&](const Dense&) -> Matrix {
            cache.input = x;
            Matrix y = params.weight * x;
            y.colwise() += params.bias;
            return y;
          },
          [&](const Relu&) -> Matrix {
            cache.mask = (x.array() > 0.0).cast<double>().matrix();
            return x.cwiseMax(0.0);
          },
          [&](const Dropout& d) -> Matrix {
            if (!training || d.keep_prob >= 1.0) {
              cache.mask.resize(0, 0);
              return x;
            }
            if (rng == nullptr) throw Error("dropout: training pass needs a random generator");
            std::bernoulli_distribution keep(d.keep_prob);
            cache.mask.resize(x.rows(), x.cols());
            const double scale = 1.0 / d.keep_prob;
            for (Eigen::Index j = 0; j < x.cols(); ++j) {
              for (Eigen::Index i = 0; i < x.rows(); ++i) {
                cache.mask(i, j) = keep(*rng) ? scale : 0.0;
              }
            }
            return x.cwiseProduct(cache.mask);
          },
      },
      layer);
}

Matrix backward(const LayerSpec& layer, const Parameters& params, const Shape& in,
                const Shape& out, const LayerCache& cache, const Matrix& dy, Parameters& grad) {
  const auto batch = dy.cols();
  return std::visit(
      overloaded{
          [&](const Conv& c) -> Matrix {
            Matrix dx = Matrix::Zero(in.size(), batch);
            const int positions = out.height * out.width;
            for (Eigen::Index n = 0; n < batch; ++n) {
              const Matrix cols = im2col(cache.input.col(n), in, c, out);
              const Eigen::Map<const Matrix> dyn(dy.col(n).data(), positions, c.out_channels);
              grad.weight.noalias() += dyn.transpose() * cols;
              grad.bias += dyn.colwise().sum().transpose();
              const Matrix dcols = dyn * params.weight;
              col2im_add(dcols, in, c, out, dx.col(n));
            }
            return dx;
          },
          [&](const MaxPool&) -> Matrix {
            Matrix dx = Matrix::Zero(in.size(), batch);
            for (Eigen::Index n = 0; n < batch; ++n) {
              for (int o = 0; o < out.size(); ++o) {
                dx(cache.argmax[static_cast<std::size_t>(n * out.size() + o)], n) += dy(o, n);
              }
            }
            return dx;
          },
          [&](const Dense&) -> Matrix {
            grad.weight.noalias() += dy * cache.input.transpose();
            grad.bias += dy.rowwise().sum();
            return params.weight.transpose() * dy;
          },
          [&](const Relu&) -> Matrix { return dy.cwiseProduct(cache.mask); },
          [&](const Dropout&) -> Matrix {
            if (cache.mask.size() == 0) return dy;
            return dy.cwiseProduct(cache.mask);
          },
      },
      layer);
}

}  // namespace dage::nn::detail
