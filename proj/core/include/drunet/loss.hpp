#pragma once

#include "drunet/autodiff.hpp"

namespace drunet {

inline constexpr double kJaccardEps = 1e-6;

/// Mean per-class soft Jaccard loss
///
///   L = 1 - (1/C) sum_c (I_c + eps) / (U_c + eps)
///   I_c = sum p_c * y_c,  U_c = sum (p_c + y_c - p_c * y_c)
///
/// with sums over batch and pixels and C the channel count of `probs`.
/// `truth` is a one-hot tensor of the same shape. Returns a {1} tensor.
template <typename T>
Var<T> jaccard_loss(Var<T> probs, const Tensor<T>& truth, double eps = kJaccardEps);

}  // namespace drunet
