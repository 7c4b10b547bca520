#include "drunet/autodiff.hpp"

#include <algorithm>
#include <memory>

namespace drunet {

namespace {

enum class BinaryKind { add, sub, mul, div };

const char* binary_name(BinaryKind k) {
  switch (k) {
    case BinaryKind::add: return "add";
    case BinaryKind::sub: return "sub";
    case BinaryKind::mul: return "mul";
    case BinaryKind::div: return "div";
  }
  return "?";
}

template <typename T>
Var<T> binary(BinaryKind kind, Var<T> a, Var<T> b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const bool broadcast = bv.numel() == 1 && av.numel() != 1;
  if (!broadcast && av.shape() != bv.shape()) {
    throw ShapeError(std::string(binary_name(kind)) + ": shape mismatch " + shape_str(av.shape()) +
                     " vs " + shape_str(bv.shape()));
  }
  const std::size_t n = av.numel();
  Tensor<T> out(av.shape());
  const T* x = av.data();
  const T* y = bv.data();
  T* o = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    const T yi = broadcast ? y[0] : y[i];
    switch (kind) {
      case BinaryKind::add: o[i] = x[i] + yi; break;
      case BinaryKind::sub: o[i] = x[i] - yi; break;
      case BinaryKind::mul: o[i] = x[i] * yi; break;
      case BinaryKind::div: o[i] = x[i] / yi; break;
    }
  }
  const NodeId ia = a.id(), ib = b.id();
  return a.tape()->record(
      binary_name(kind), std::move(out), {a, b},
      [kind, ia, ib, broadcast, n](Tape<T>& tape, const Tensor<T>& g) {
        const Tensor<T>& av = tape.value(ia);
        const Tensor<T>& bv = tape.value(ib);
        const T* x = av.data();
        const T* y = bv.data();
        const T* gd = g.data();
        if (tape.requires_grad(ia)) {
          Tensor<T> ga(av.shape());
          T* d = ga.data();
          for (std::size_t i = 0; i < n; ++i) {
            const T yi = broadcast ? y[0] : y[i];
            switch (kind) {
              case BinaryKind::add:
              case BinaryKind::sub: d[i] = gd[i]; break;
              case BinaryKind::mul: d[i] = gd[i] * yi; break;
              case BinaryKind::div: d[i] = gd[i] / yi; break;
            }
          }
          tape.accumulate(ia, ga);
        }
        if (tape.requires_grad(ib)) {
          Tensor<T> gb(bv.shape());
          T* d = gb.data();
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = broadcast ? 0 : i;
            T v = 0;
            switch (kind) {
              case BinaryKind::add: v = gd[i]; break;
              case BinaryKind::sub: v = -gd[i]; break;
              case BinaryKind::mul: v = gd[i] * x[i]; break;
              case BinaryKind::div: v = -gd[i] * x[i] / (y[j] * y[j]); break;
            }
            d[j] += v;
          }
          tape.accumulate(ib, gb);
        }
      });
}

}  // namespace

template <typename T> Var<T> add(Var<T> a, Var<T> b) { return binary(BinaryKind::add, a, b); }
template <typename T> Var<T> sub(Var<T> a, Var<T> b) { return binary(BinaryKind::sub, a, b); }
template <typename T> Var<T> mul(Var<T> a, Var<T> b) { return binary(BinaryKind::mul, a, b); }
template <typename T> Var<T> div(Var<T> a, Var<T> b) { return binary(BinaryKind::div, a, b); }

template <typename T>
Var<T> add_scalar(Var<T> a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v += s;
  const NodeId ia = a.id();
  return a.tape()->record("add_scalar", std::move(out), {a},
                          [ia](Tape<T>& tape, const Tensor<T>& g) { tape.accumulate(ia, g); });
}

template <typename T>
Var<T> mul_scalar(Var<T> a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= s;
  const NodeId ia = a.id();
  return a.tape()->record("mul_scalar", std::move(out), {a},
                          [ia, s](Tape<T>& tape, const Tensor<T>& g) {
                            Tensor<T> ga = g;
                            for (auto& v : ga.values()) v *= s;
                            tape.accumulate(ia, ga);
                          });
}

template <typename T>
Var<T> reduce_sum(Var<T> a, std::vector<int> axes) {
  const Shape in_shape = a.shape();
  const int rank = static_cast<int>(in_shape.size());
  std::vector<bool> reduced(in_shape.size(), axes.empty());
  for (int ax : axes) {
    if (ax < 0 || ax >= rank) {
      throw ShapeError("reduce_sum: axis " + std::to_string(ax) + " invalid for shape " +
                       shape_str(in_shape));
    }
    reduced[static_cast<std::size_t>(ax)] = true;
  }
  Shape out_shape;
  for (int i = 0; i < rank; ++i) {
    if (!reduced[static_cast<std::size_t>(i)]) out_shape.push_back(in_shape[static_cast<std::size_t>(i)]);
  }
  if (out_shape.empty()) out_shape = {1};

  // Map each input index to its output index via per-axis strides.
  std::vector<std::size_t> out_stride(in_shape.size(), 0);
  {
    std::size_t s = 1;
    for (int i = rank - 1; i >= 0; --i) {
      if (!reduced[static_cast<std::size_t>(i)]) {
        out_stride[static_cast<std::size_t>(i)] = s;
        s *= static_cast<std::size_t>(in_shape[static_cast<std::size_t>(i)]);
      }
    }
  }
  auto out_index = std::make_shared<std::vector<std::size_t>>(a.value().numel());
  {
    std::vector<int> idx(in_shape.size(), 0);
    for (std::size_t flat = 0; flat < out_index->size(); ++flat) {
      std::size_t o = 0;
      for (std::size_t d = 0; d < idx.size(); ++d) o += out_stride[d] * static_cast<std::size_t>(idx[d]);
      (*out_index)[flat] = o;
      for (int d = rank - 1; d >= 0; --d) {
        if (++idx[static_cast<std::size_t>(d)] < in_shape[static_cast<std::size_t>(d)]) break;
        idx[static_cast<std::size_t>(d)] = 0;
      }
    }
  }

  Tensor<T> out(out_shape);
  const T* x = a.value().data();
  for (std::size_t i = 0; i < out_index->size(); ++i) out[(*out_index)[i]] += x[i];

  const NodeId ia = a.id();
  return a.tape()->record("reduce_sum", std::move(out), {a},
                          [ia, in_shape, out_index](Tape<T>& tape, const Tensor<T>& g) {
                            Tensor<T> ga(in_shape);
                            for (std::size_t i = 0; i < out_index->size(); ++i) ga[i] = g[(*out_index)[i]];
                            tape.accumulate(ia, ga);
                          });
}

#define DRUNET_INSTANTIATE(T)                                  \
  template class Tape<T>;                                      \
  template Var<T> add<T>(Var<T>, Var<T>);                      \
  template Var<T> sub<T>(Var<T>, Var<T>);                      \
  template Var<T> mul<T>(Var<T>, Var<T>);                      \
  template Var<T> div<T>(Var<T>, Var<T>);                      \
  template Var<T> add_scalar<T>(Var<T>, T);                    \
  template Var<T> mul_scalar<T>(Var<T>, T);                    \
  template Var<T> reduce_sum<T>(Var<T>, std::vector<int>);

DRUNET_INSTANTIATE(float)
DRUNET_INSTANTIATE(double)

#undef DRUNET_INSTANTIATE

}  // namespace drunet
