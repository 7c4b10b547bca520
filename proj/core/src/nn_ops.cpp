#include "drunet/nn_ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace drunet {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using StridedMap = Eigen::Map<MatRM<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const MatRM<T>, 0, Eigen::OuterStride<>>;

struct ConvGeometry {
  int n, cin, h, w, cout, k, dilation, pad, hp, wp;
  std::size_t plane() const { return static_cast<std::size_t>(hp) * wp; }
  // Reads for the last tap run up to 2 * pad elements past the final plane.
  std::size_t padded_size() const { return plane() * cin + 2 * pad + 1; }
  std::size_t out_cols() const { return static_cast<std::size_t>(h) * wp; }
  std::ptrdiff_t tap_offset(int i, int j) const {
    return static_cast<std::ptrdiff_t>(i) * dilation * wp + static_cast<std::ptrdiff_t>(j) * dilation;
  }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& x, const Tensor<T>& weight, int dilation, const char* op) {
  const auto [n, cin, h, w] = nchw(x, op);
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3) || weight.dim(2) % 2 == 0) {
    throw ShapeError(std::string(op) + ": weight must be [out, in, k, k] with odd k, got " +
                     shape_str(weight.shape()));
  }
  if (weight.dim(1) != cin) {
    throw ShapeError(std::string(op) + ": channel mismatch, input has " + std::to_string(cin) +
                     " channels but weight expects " + std::to_string(weight.dim(1)));
  }
  if (dilation <= 0) {
    throw std::invalid_argument(std::string(op) + ": dilation must be positive, got " +
                                std::to_string(dilation));
  }
  const int k = weight.dim(2);
  const int pad = dilation * (k - 1) / 2;
  return ConvGeometry{n, cin, h, w, weight.dim(0), k, dilation, pad, h + 2 * pad, w + 2 * pad};
}

// Copies sample `n` of x into a zero-padded [cin, hp, wp] buffer.
template <typename T>
void pad_sample(const Tensor<T>& x, int n, const ConvGeometry& g, std::vector<T>& buf) {
  buf.assign(g.padded_size(), T(0));
  const T* src = x.data() + static_cast<std::size_t>(n) * g.cin * g.h * g.w;
  for (int c = 0; c < g.cin; ++c) {
    for (int y = 0; y < g.h; ++y) {
      const T* row = src + (static_cast<std::size_t>(c) * g.h + y) * g.w;
      T* dst = buf.data() + c * g.plane() + static_cast<std::size_t>(y + g.pad) * g.wp + g.pad;
      std::copy(row, row + g.w, dst);
    }
  }
}

// Weight slice for one kernel tap as a dense [cout, cin] matrix.
template <typename T>
MatRM<T> tap_weights(const Tensor<T>& weight, const ConvGeometry& g, int i, int j) {
  MatRM<T> m(g.cout, g.cin);
  for (int o = 0; o < g.cout; ++o) {
    for (int c = 0; c < g.cin; ++c) {
      m(o, c) = weight[((static_cast<std::size_t>(o) * g.cin + c) * g.k + i) * g.k + j];
    }
  }
  return m;
}

}  // namespace

// The output is computed on a [cout, h, wp] grid whose rows share the padded
// input's row pitch. For tap (i, j) the input window is then the padded
// buffer shifted by a constant offset, so each tap is one GEMM against a
// strided view; the extra (wp - w) columns per row are discarded.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                         int dilation) {
  const ConvGeometry g = conv_geometry(x, weight, dilation, "conv2d");
  if (bias.numel() != static_cast<std::size_t>(g.cout)) {
    throw ShapeError("conv2d: bias length " + std::to_string(bias.numel()) + " != out channels " +
                     std::to_string(g.cout));
  }
  Tensor<T> out(Shape{g.n, g.cout, g.h, g.w});
  std::vector<MatRM<T>> taps;
  for (int i = 0; i < g.k; ++i)
    for (int j = 0; j < g.k; ++j) taps.push_back(tap_weights(weight, g, i, j));

  std::vector<T> padded;
  MatRM<T> acc(g.cout, static_cast<Eigen::Index>(g.out_cols()));
  for (int n = 0; n < g.n; ++n) {
    pad_sample(x, n, g, padded);
    for (int o = 0; o < g.cout; ++o) acc.row(o).setConstant(bias[static_cast<std::size_t>(o)]);
    for (int i = 0; i < g.k; ++i) {
      for (int j = 0; j < g.k; ++j) {
        ConstStridedMap<T> window(padded.data() + g.tap_offset(i, j), g.cin,
                                  static_cast<Eigen::Index>(g.out_cols()),
                                  Eigen::OuterStride<>(static_cast<Eigen::Index>(g.plane())));
        acc.noalias() += taps[static_cast<std::size_t>(i * g.k + j)] * window;
      }
    }
    T* dst = out.data() + static_cast<std::size_t>(n) * g.cout * g.h * g.w;
    for (int o = 0; o < g.cout; ++o) {
      for (int y = 0; y < g.h; ++y) {
        const T* row = acc.data() + static_cast<std::size_t>(o) * g.out_cols() + static_cast<std::size_t>(y) * g.wp;
        std::copy(row, row + g.w, dst + (static_cast<std::size_t>(o) * g.h + y) * g.w);
      }
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out,
                             int dilation, bool need_input_grad) {
  const ConvGeometry g = conv_geometry(x, weight, dilation, "conv2d");
  ConvGrads<T> grads{need_input_grad ? Tensor<T>(x.shape()) : Tensor<T>{}, Tensor<T>(weight.shape()),
                     Tensor<T>(Shape{g.cout})};
  std::vector<MatRM<T>> taps;
  if (need_input_grad) {
    for (int i = 0; i < g.k; ++i)
      for (int j = 0; j < g.k; ++j) taps.push_back(tap_weights(weight, g, i, j));
  }
  std::vector<MatRM<T>> tap_grads(static_cast<std::size_t>(g.k * g.k), MatRM<T>::Zero(g.cout, g.cin));

  std::vector<T> padded;
  std::vector<T> dpadded;
  MatRM<T> gp(g.cout, static_cast<Eigen::Index>(g.out_cols()));
  for (int n = 0; n < g.n; ++n) {
    pad_sample(x, n, g, padded);
    gp.setZero();
    const T* src = grad_out.data() + static_cast<std::size_t>(n) * g.cout * g.h * g.w;
    for (int o = 0; o < g.cout; ++o) {
      T bsum = 0;
      for (int y = 0; y < g.h; ++y) {
        const T* row = src + (static_cast<std::size_t>(o) * g.h + y) * g.w;
        T* dst = gp.data() + static_cast<std::size_t>(o) * g.out_cols() + static_cast<std::size_t>(y) * g.wp;
        for (int xx = 0; xx < g.w; ++xx) {
          dst[xx] = row[xx];
          bsum += row[xx];
        }
      }
      grads.bias[static_cast<std::size_t>(o)] += bsum;
    }
    if (need_input_grad) dpadded.assign(g.padded_size(), T(0));
    for (int i = 0; i < g.k; ++i) {
      for (int j = 0; j < g.k; ++j) {
        const auto t = static_cast<std::size_t>(i * g.k + j);
        const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(g.plane()));
        ConstStridedMap<T> window(padded.data() + g.tap_offset(i, j), g.cin,
                                  static_cast<Eigen::Index>(g.out_cols()), stride);
        tap_grads[t].noalias() += gp * window.transpose();
        if (need_input_grad) {
          StridedMap<T> dwindow(dpadded.data() + g.tap_offset(i, j), g.cin,
                                static_cast<Eigen::Index>(g.out_cols()), stride);
          dwindow.noalias() += taps[t].transpose() * gp;
        }
      }
    }
    if (need_input_grad) {
      T* dst = grads.input.data() + static_cast<std::size_t>(n) * g.cin * g.h * g.w;
      for (int c = 0; c < g.cin; ++c) {
        for (int y = 0; y < g.h; ++y) {
          const T* row = dpadded.data() + c * g.plane() + static_cast<std::size_t>(y + g.pad) * g.wp + g.pad;
          std::copy(row, row + g.w, dst + (static_cast<std::size_t>(c) * g.h + y) * g.w);
        }
      }
    }
  }
  for (int i = 0; i < g.k; ++i) {
    for (int j = 0; j < g.k; ++j) {
      const MatRM<T>& tg = tap_grads[static_cast<std::size_t>(i * g.k + j)];
      for (int o = 0; o < g.cout; ++o)
        for (int c = 0; c < g.cin; ++c)
          grads.weight[((static_cast<std::size_t>(o) * g.cin + c) * g.k + i) * g.k + j] = tg(o, c);
    }
  }
  return grads;
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, int dilation) {
  Tensor<T> out = conv2d_forward(x.value(), weight.value(), bias.value(), dilation);
  const NodeId ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape()->record("conv2d", std::move(out), {x, weight, bias},
                          [ix, iw, ib, dilation](Tape<T>& tape, const Tensor<T>& g) {
                            ConvGrads<T> grads = conv2d_backward(tape.value(ix), tape.value(iw), g,
                                                                 dilation, tape.requires_grad(ix));
                            if (tape.requires_grad(ix)) tape.accumulate(ix, grads.input);
                            tape.accumulate(iw, grads.weight);
                            tape.accumulate(ib, grads.bias.reshaped(tape.value(ib).shape()));
                          });
}

template <typename T>
Var<T> conv1x1(Var<T> x, Var<T> weight, Var<T> bias) {
  if (weight.value().rank() != 4 || weight.value().dim(2) != 1 || weight.value().dim(3) != 1) {
    throw ShapeError("conv1x1: weight must be [out, in, 1, 1], got " + shape_str(weight.shape()));
  }
  return conv2d(x, weight, bias, 1);
}

template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, BatchNormState<T>& state, Mode mode,
                  const BatchNormOptions& options) {
  const auto [n, c, h, w] = nchw(x.value(), "batch_norm");
  const auto cs = static_cast<std::size_t>(c);
  if (gamma.value().numel() != cs || beta.value().numel() != cs ||
      state.running_mean.numel() != cs || state.running_var.numel() != cs) {
    throw ShapeError("batch_norm: parameters do not match " + std::to_string(c) + " channels");
  }
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t count = static_cast<std::size_t>(n) * plane;
  const T eps = static_cast<T>(options.eps);
  const Tensor<T>& xv = x.value();
  const T* gm = gamma.value().data();
  const T* bt = beta.value().data();

  // Per-channel centre and inverse scale: batch statistics in train mode,
  // running statistics in infer mode.
  std::vector<T> centre(cs), inv_std(cs);
  for (int ch = 0; ch < c; ++ch) {
    if (mode == Mode::train) {
      double s = 0;
      for (int b = 0; b < n; ++b) {
        const T* p = xv.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double mean = s / static_cast<double>(count);
      double ss = 0;
      for (int b = 0; b < n; ++b) {
        const T* p = xv.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - mean;
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(count);
      centre[static_cast<std::size_t>(ch)] = static_cast<T>(mean);
      inv_std[static_cast<std::size_t>(ch)] = static_cast<T>(1.0 / std::sqrt(var + options.eps));
      const double unbiased = count > 1 ? ss / static_cast<double>(count - 1) : var;
      const double m = options.momentum;
      auto& rm = state.running_mean[static_cast<std::size_t>(ch)];
      auto& rv = state.running_var[static_cast<std::size_t>(ch)];
      rm = static_cast<T>(m * rm + (1.0 - m) * mean);
      rv = static_cast<T>(m * rv + (1.0 - m) * unbiased);
    } else {
      centre[static_cast<std::size_t>(ch)] = state.running_mean[static_cast<std::size_t>(ch)];
      inv_std[static_cast<std::size_t>(ch)] =
          T(1) / std::sqrt(state.running_var[static_cast<std::size_t>(ch)] + eps);
    }
  }

  Tensor<T> out(xv.shape());
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * plane;
      const T mu = centre[static_cast<std::size_t>(ch)];
      const T is = inv_std[static_cast<std::size_t>(ch)];
      const T gg = gm[ch], bb = bt[ch];
      const T* p = xv.data() + off;
      T* o = out.data() + off;
      for (std::size_t i = 0; i < plane; ++i) o[i] = gg * ((p[i] - mu) * is) + bb;
    }
  }

  const NodeId ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape()->record(
      "batch_norm", std::move(out), {x, gamma, beta},
      [ix, ig, ib, n, c, plane, count, mode, centre = std::move(centre),
       inv_std = std::move(inv_std)](Tape<T>& tape, const Tensor<T>& g) {
        const Tensor<T>& xv = tape.value(ix);
        const T* gm = tape.value(ig).data();
        Tensor<T> dgamma(tape.value(ig).shape()), dbeta(tape.value(ib).shape());
        Tensor<T> dx = tape.requires_grad(ix) ? Tensor<T>(xv.shape()) : Tensor<T>{};
        for (int ch = 0; ch < c; ++ch) {
          const T mu = centre[static_cast<std::size_t>(ch)];
          const T is = inv_std[static_cast<std::size_t>(ch)];
          double sum_g = 0, sum_gx = 0;
          for (int b = 0; b < n; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const double xhat = (xv[off + i] - mu) * is;
              sum_g += g[off + i];
              sum_gx += g[off + i] * xhat;
            }
          }
          dgamma[static_cast<std::size_t>(ch)] = static_cast<T>(sum_gx);
          dbeta[static_cast<std::size_t>(ch)] = static_cast<T>(sum_g);
          if (dx.empty()) continue;
          for (int b = 0; b < n; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * plane;
            if (mode == Mode::train) {
              const double cnt = static_cast<double>(count);
              const double k = gm[ch] * is / cnt;
              for (std::size_t i = 0; i < plane; ++i) {
                const double xhat = (xv[off + i] - mu) * is;
                dx[off + i] = static_cast<T>(k * (cnt * g[off + i] - sum_g - xhat * sum_gx));
              }
            } else {
              const T k = gm[ch] * is;
              for (std::size_t i = 0; i < plane; ++i) dx[off + i] = k * g[off + i];
            }
          }
        }
        if (!dx.empty()) tape.accumulate(ix, dx);
        tape.accumulate(ig, dgamma);
        tape.accumulate(ib, dbeta);
      });
}

template <typename T>
Var<T> elu(Var<T> x) {
  Tensor<T> out = x.value();
  for (auto& v : out.values()) {
    if (v <= T(0)) v = std::expm1(v);
  }
  Tape<T>* tape = x.tape();
  const NodeId ix = x.id();
  const NodeId iy = tape->next_id();
  return tape->record("elu", std::move(out), {x}, [ix, iy](Tape<T>& tape, const Tensor<T>& g) {
    const Tensor<T>& y = tape.value(iy);
    Tensor<T> dx(y.shape());
    for (std::size_t i = 0, n = y.numel(); i < n; ++i) dx[i] = y[i] > T(0) ? g[i] : g[i] * (y[i] + T(1));
    tape.accumulate(ix, dx);
  });
}

template <typename T>
PoolResult<T> maxpool2x2_forward(const Tensor<T>& x) {
  const auto [n, c, h, w] = nchw(x, "maxpool2x2");
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2x2: spatial dims must be even, got " + shape_str(x.shape()));
  }
  const int ho = h / 2, wo = w / 2;
  PoolResult<T> r{Tensor<T>(Shape{n, c, ho, wo}), std::vector<std::size_t>()};
  r.argmax.resize(r.output.numel());
  std::size_t k = 0;
  for (int p = 0; p < n * c; ++p) {
    const std::size_t base = static_cast<std::size_t>(p) * h * w;
    for (int y = 0; y < ho; ++y) {
      for (int xx = 0; xx < wo; ++xx, ++k) {
        const std::size_t i0 = base + static_cast<std::size_t>(2 * y) * w + 2 * xx;
        const std::size_t cand[4] = {i0, i0 + 1, i0 + static_cast<std::size_t>(w), i0 + static_cast<std::size_t>(w) + 1};
        std::size_t best = cand[0];
        for (int q = 1; q < 4; ++q) {
          if (x[cand[q]] > x[best]) best = cand[q];
        }
        r.output[k] = x[best];
        r.argmax[k] = best;
      }
    }
  }
  return r;
}

template <typename T>
Var<T> maxpool2x2(Var<T> x) {
  PoolResult<T> r = maxpool2x2_forward(x.value());
  auto argmax = std::make_shared<std::vector<std::size_t>>(std::move(r.argmax));
  const NodeId ix = x.id();
  return x.tape()->record("maxpool2x2", std::move(r.output), {x},
                          [ix, argmax](Tape<T>& tape, const Tensor<T>& g) {
                            Tensor<T> dx(tape.value(ix).shape());
                            for (std::size_t k = 0; k < argmax->size(); ++k) dx[(*argmax)[k]] += g[k];
                            tape.accumulate(ix, dx);
                          });
}

template <typename T>
Var<T> upsample2x2(Var<T> x) {
  const auto [n, c, h, w] = nchw(x.value(), "upsample2x2");
  const Tensor<T>& xv = x.value();
  Tensor<T> out(Shape{n, c, 2 * h, 2 * w});
  const int wo = 2 * w;
  for (int p = 0; p < n * c; ++p) {
    const T* src = xv.data() + static_cast<std::size_t>(p) * h * w;
    T* dst = out.data() + static_cast<std::size_t>(p) * 4 * h * w;
    for (int y = 0; y < h; ++y) {
      T* r0 = dst + static_cast<std::size_t>(2 * y) * wo;
      T* r1 = r0 + wo;
      for (int xx = 0; xx < w; ++xx) {
        const T v = src[static_cast<std::size_t>(y) * w + xx];
        r0[2 * xx] = r0[2 * xx + 1] = r1[2 * xx] = r1[2 * xx + 1] = v;
      }
    }
  }
  const NodeId ix = x.id();
  return x.tape()->record("upsample2x2", std::move(out), {x},
                          [ix, n, c, h, w](Tape<T>& tape, const Tensor<T>& g) {
                            Tensor<T> dx(Shape{n, c, h, w});
                            const int wo = 2 * w;
                            for (int p = 0; p < n * c; ++p) {
                              const T* src = g.data() + static_cast<std::size_t>(p) * 4 * h * w;
                              T* dst = dx.data() + static_cast<std::size_t>(p) * h * w;
                              for (int y = 0; y < h; ++y) {
                                const T* r0 = src + static_cast<std::size_t>(2 * y) * wo;
                                const T* r1 = r0 + wo;
                                for (int xx = 0; xx < w; ++xx) {
                                  dst[static_cast<std::size_t>(y) * w + xx] =
                                      r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1];
                                }
                              }
                            }
                            tape.accumulate(ix, dx);
                          });
}

template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
  const auto [na, ca, ha, wa] = nchw(a.value(), "concat_channels");
  const auto [nb, cb, hb, wb] = nchw(b.value(), "concat_channels");
  if (na != nb || ha != hb || wa != wb) {
    throw ShapeError("concat_channels: spatial mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const std::size_t sa = static_cast<std::size_t>(ca) * ha * wa;
  const std::size_t sb = static_cast<std::size_t>(cb) * ha * wa;
  Tensor<T> out(Shape{na, ca + cb, ha, wa});
  for (int n = 0; n < na; ++n) {
    const T* pa = a.value().data() + n * sa;
    const T* pb = b.value().data() + n * sb;
    T* o = out.data() + n * (sa + sb);
    std::copy(pa, pa + sa, o);
    std::copy(pb, pb + sb, o + sa);
  }
  const NodeId ia = a.id(), ib = b.id();
  const Shape shape_a = a.shape(), shape_b = b.shape();
  const int batch = na;
  return a.tape()->record("concat_channels", std::move(out), {a, b},
                          [ia, ib, sa, sb, batch, shape_a, shape_b](Tape<T>& tape, const Tensor<T>& g) {
                            Tensor<T> ga(shape_a), gb(shape_b);
                            for (int n = 0; n < batch; ++n) {
                              const T* src = g.data() + n * (sa + sb);
                              std::copy(src, src + sa, ga.data() + n * sa);
                              std::copy(src + sa, src + sa + sb, gb.data() + n * sb);
                            }
                            tape.accumulate(ia, ga);
                            tape.accumulate(ib, gb);
                          });
}

template <typename T>
Var<T> softmax_channels(Var<T> x) {
  const auto [n, c, h, w] = nchw(x.value(), "softmax_channels");
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  std::vector<T> mx(plane), sum(plane);
  for (int b = 0; b < n; ++b) {
    const std::size_t base = static_cast<std::size_t>(b) * c * plane;
    for (int ch = 0; ch < c; ++ch) {
      const T* p = xv.data() + base + ch * plane;
      if (ch == 0) std::copy(p, p + plane, mx.begin());
      for (std::size_t i = 0; i < plane; ++i) mx[i] = std::max(mx[i], p[i]);
    }
    std::fill(sum.begin(), sum.end(), T(0));
    for (int ch = 0; ch < c; ++ch) {
      const T* p = xv.data() + base + ch * plane;
      T* o = out.data() + base + ch * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        o[i] = std::exp(p[i] - mx[i]);
        sum[i] += o[i];
      }
    }
    for (int ch = 0; ch < c; ++ch) {
      T* o = out.data() + base + ch * plane;
      for (std::size_t i = 0; i < plane; ++i) o[i] /= sum[i];
    }
  }
  Tape<T>* tape = x.tape();
  const NodeId ix = x.id();
  const NodeId iy = tape->next_id();
  return tape->record("softmax_channels", std::move(out), {x},
                      [ix, iy, n, c, plane](Tape<T>& tape, const Tensor<T>& g) {
                        const Tensor<T>& y = tape.value(iy);
                        Tensor<T> dx(y.shape());
                        std::vector<T> dot(plane);
                        for (int b = 0; b < n; ++b) {
                          const std::size_t base = static_cast<std::size_t>(b) * c * plane;
                          std::fill(dot.begin(), dot.end(), T(0));
                          for (int ch = 0; ch < c; ++ch) {
                            const std::size_t off = base + ch * plane;
                            for (std::size_t i = 0; i < plane; ++i) dot[i] += g[off + i] * y[off + i];
                          }
                          for (int ch = 0; ch < c; ++ch) {
                            const std::size_t off = base + ch * plane;
                            for (std::size_t i = 0; i < plane; ++i) dx[off + i] = y[off + i] * (g[off + i] - dot[i]);
                          }
                        }
                        tape.accumulate(ix, dx);
                      });
}

#define DRUNET_INSTANTIATE(T)                                                                     \
  template Tensor<T> conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int); \
  template ConvGrads<T> conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                           int, bool);                                            \
  template PoolResult<T> maxpool2x2_forward<T>(const Tensor<T>&);                                 \
  template Var<T> conv2d<T>(Var<T>, Var<T>, Var<T>, int);                                         \
  template Var<T> conv1x1<T>(Var<T>, Var<T>, Var<T>);                                             \
  template Var<T> batch_norm<T>(Var<T>, Var<T>, Var<T>, BatchNormState<T>&, Mode,                 \
                                const BatchNormOptions&);                                         \
  template Var<T> elu<T>(Var<T>);                                                                 \
  template Var<T> maxpool2x2<T>(Var<T>);                                                          \
  template Var<T> upsample2x2<T>(Var<T>);                                                         \
  template Var<T> concat_channels<T>(Var<T>, Var<T>);                                             \
  template Var<T> softmax_channels<T>(Var<T>);

DRUNET_INSTANTIATE(float)
DRUNET_INSTANTIATE(double)

#undef DRUNET_INSTANTIATE

}  // namespace drunet
