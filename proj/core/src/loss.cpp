#include "drunet/loss.hpp"

#include <string>
#include <vector>

namespace drunet {

template <typename T>
Var<T> jaccard_loss(Var<T> probs, const Tensor<T>& truth, double eps) {
  const auto [n, c, h, w] = nchw(probs.value(), "jaccard_loss");
  if (truth.shape() != probs.shape()) {
    throw ShapeError("jaccard_loss: truth shape " + shape_str(truth.shape()) +
                     " does not match probabilities " + shape_str(probs.shape()));
  }
  if (!truth.all_finite()) throw NonFiniteError("jaccard_loss: non-finite ground truth");

  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const auto cs = static_cast<std::size_t>(c);
  std::vector<double> inter(cs, 0.0), uni(cs, 0.0);
  const T* p = probs.value().data();
  const T* y = truth.data();
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * plane;
      double i_sum = 0, u_sum = 0;
      for (std::size_t i = 0; i < plane; ++i) {
        const double pi = p[off + i], yi = y[off + i];
        i_sum += pi * yi;
        u_sum += pi + yi - pi * yi;
      }
      inter[static_cast<std::size_t>(ch)] += i_sum;
      uni[static_cast<std::size_t>(ch)] += u_sum;
    }
  }
  double mean_ratio = 0;
  for (std::size_t ch = 0; ch < cs; ++ch) mean_ratio += (inter[ch] + eps) / (uni[ch] + eps);
  mean_ratio /= static_cast<double>(c);

  const NodeId ip = probs.id();
  Tensor<T> truth_copy = truth;
  return probs.tape()->record(
      "jaccard_loss", Tensor<T>::scalar(static_cast<T>(1.0 - mean_ratio)), {probs},
      [ip, n, c, plane, eps, inter = std::move(inter), uni = std::move(uni),
       truth = std::move(truth_copy)](Tape<T>& tape, const Tensor<T>& g) {
        const double scale = -static_cast<double>(g[0]) / static_cast<double>(c);
        Tensor<T> dp(truth.shape());
        for (int ch = 0; ch < c; ++ch) {
          const double den = uni[static_cast<std::size_t>(ch)] + eps;
          const double a = 1.0 / den;
          const double b = (inter[static_cast<std::size_t>(ch)] + eps) / (den * den);
          for (int bt = 0; bt < n; ++bt) {
            const std::size_t off = (static_cast<std::size_t>(bt) * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const double yi = truth[off + i];
              dp[off + i] = static_cast<T>(scale * (yi * a - (1.0 - yi) * b));
            }
          }
        }
        tape.accumulate(ip, dp);
      });
}

template Var<float> jaccard_loss<float>(Var<float>, const Tensor<float>&, double);
template Var<double> jaccard_loss<double>(Var<double>, const Tensor<double>&, double);

}  // namespace drunet
