#pragma once

#include <cstddef>
#include <vector>

#include "drunet/autodiff.hpp"
#include "drunet/tensor.hpp"

namespace drunet {

enum class Mode { train, infer };

struct BatchNormOptions {
  double eps = 1e-5;
  /// running = momentum * running + (1 - momentum) * batch
  double momentum = 0.9;
};

/// Non-trainable running statistics of one batch-norm layer.
template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;

  BatchNormState() = default;
  explicit BatchNormState(int channels)
      : running_mean(Shape{channels}, T(0)), running_var(Shape{channels}, T(1)) {}
};

// ---------------------------------------------------------------------------
// Plain kernels. Convolutions are stride 1 with zero "same" padding of
// dilation * (k - 1) / 2 per side, so H and W are preserved. Weights are
// [out, in, k, k] with odd k.

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                         int dilation);

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out,
                             int dilation, bool need_input_grad);

template <typename T>
struct PoolResult {
  Tensor<T> output;
  /// Flat input index that produced each output element.
  std::vector<std::size_t> argmax;
};

/// 2x2 stride-2 max pool. Ties resolve to the first element in row-major
/// window order.
template <typename T>
PoolResult<T> maxpool2x2_forward(const Tensor<T>& x);

// ---------------------------------------------------------------------------
// Differentiable ops.

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, int dilation);

/// Per-pixel linear map across channels; weight is [out, in, 1, 1].
template <typename T>
Var<T> conv1x1(Var<T> x, Var<T> weight, Var<T> bias);

/// Per-channel normalization over (N, H, W). Train mode uses batch statistics
/// and updates `state` (running variance uses the unbiased estimate); infer
/// mode uses `state` only and leaves it untouched.
template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, BatchNormState<T>& state, Mode mode,
                  const BatchNormOptions& options = {});

/// ELU with alpha = 1.
template <typename T>
Var<T> elu(Var<T> x);

template <typename T>
Var<T> maxpool2x2(Var<T> x);

/// Nearest-neighbour 2x upsampling: each pixel fills a 2x2 block.
template <typename T>
Var<T> upsample2x2(Var<T> x);

template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b);

/// Softmax over the channel axis at every (n, h, w), max-shifted.
template <typename T>
Var<T> softmax_channels(Var<T> x);

}  // namespace drunet
