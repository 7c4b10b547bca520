#pragma once

// Independent reference implementations used only by tests. Nothing here
// calls into the library's kernels; each oracle is the textbook definition
// written as plainly as possible.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace oracle {

/// out[n][o][y][x] = b[o] + sum_{i,ky,kx} w[o][i][ky][kx] * in[n][i][y + d(ky - r)][x + d(kx - r)]
/// with zero padding outside the image; r = (k - 1) / 2.
inline std::vector<double> conv2d(const std::vector<double>& in, int N, int C, int H, int W,
                                  const std::vector<double>& w, int O, int K, const std::vector<double>& b, int d) {
  std::vector<double> out(static_cast<std::size_t>(N) * O * H * W, 0.0);
  const int r = (K - 1) / 2;
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          long double acc = b[o];
          for (int i = 0; i < C; ++i)
            for (int ky = 0; ky < K; ++ky)
              for (int kx = 0; kx < K; ++kx) {
                const int sy = y + d * (ky - r), sx = x + d * (kx - r);
                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                acc += static_cast<long double>(w[((o * C + i) * K + ky) * K + kx]) *
                       in[((static_cast<std::size_t>(n) * C + i) * H + sy) * W + sx];
              }
          out[((static_cast<std::size_t>(n) * O + o) * H + y) * W + x] = static_cast<double>(acc);
        }
  return out;
}

struct Counts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts confusion(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth, int cls) {
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == cls, t = truth[i] == cls;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

// Each returns -1 where the denominator is zero.
inline double dice(const Counts& c) { return (2 * c.tp + c.fp + c.fn) == 0 ? -1.0 : 2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn); }
inline double specificity(const Counts& c) { return (c.tn + c.fp) == 0 ? -1.0 : static_cast<double>(c.tn) / (c.tn + c.fp); }
inline double sensitivity(const Counts& c) { return (c.tp + c.fn) == 0 ? -1.0 : static_cast<double>(c.tp) / (c.tp + c.fn); }

/// Mean over classes of soft IoU, one minus; probs and onehot are [N][C][P].
inline double jaccard_loss(const std::vector<double>& p, const std::vector<double>& y, int N, int C, int P, double eps) {
  long double mean = 0;
  for (int c = 0; c < C; ++c) {
    long double inter = 0, uni = 0;
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < P; ++i) {
        const std::size_t k = (static_cast<std::size_t>(n) * C + c) * P + i;
        inter += static_cast<long double>(p[k]) * y[k];
        uni += static_cast<long double>(p[k]) + y[k] - static_cast<long double>(p[k]) * y[k];
      }
    mean += (inter + eps) / (uni + eps);
  }
  return static_cast<double>(1.0L - mean / C);
}

/// Trainable parameter count of the network, enumerated from its wiring:
/// k x k conv: k*k*in*out + out; batch norm: 2*channels.
inline long drunet_parameter_count(int in_ch, int filters, int classes) {
  auto conv = [](int k, int i, int o) { return static_cast<long>(k) * k * i * o + o; };
  auto bn = [](int c) { return 2L * c; };
  auto standard = [&](int i, int o) { return conv(3, i, o) + bn(o) + conv(3, o, o) + bn(o); };
  auto residual = [&](int i, int o) { return standard(i, o) + conv(1, i, o) + bn(o); };
  long total = 0;
  total += standard(in_ch, filters);          // down0
  total += residual(filters, filters) * 2;    // down1, down2
  total += residual(filters, filters);        // bridge
  total += residual(2 * filters, filters) * 2;  // up0, up1 (upsampled + skip)
  total += standard(2 * filters, filters);    // up2
  total += conv(1, filters, classes);         // head
  return total;
}

/// Scalar Nesterov trajectory on f(t) = t^2 (g = 2t).
inline double nesterov_quadratic(double theta, double lr, double mu, int steps) {
  double v = 0.0;
  for (int s = 0; s < steps; ++s) {
    const double g = 2.0 * theta;
    v = mu * v - lr * g;
    theta = theta + mu * v - lr * g;
  }
  return theta;
}

}  // namespace oracle
