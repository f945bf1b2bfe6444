#pragma once

// Per-layer kernels. Activations are (channels*height*width) x batch with
// one sample per column, channel-major and row-major inside a channel.

#include "dage/network.hpp"

namespace dage::nn::detail {

/// Glorot fan-in / fan-out of a parameterised layer (Keras convention for
/// convolutions: receptive field times channels).
std::pair<int, int> fans(const LayerSpec& layer, const Shape& in, const Shape& out);

Shape output_shape(const LayerSpec& layer, const Shape& in);

bool has_parameters(const LayerSpec& layer) noexcept;

Matrix forward(const LayerSpec& layer, const Parameters& params, const Shape& in,
               const Shape& out, const Matrix& x, LayerCache& cache, bool training, Rng* rng);

/// Returns dLoss/dx and accumulates parameter gradients into grad.
Matrix backward(const LayerSpec& layer, const Parameters& params, const Shape& in,
                const Shape& out, const LayerCache& cache, const Matrix& dy, Parameters& grad);

}  // namespace dage::nn::detail
