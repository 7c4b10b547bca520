#include "drunet/gradient_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

#include "drunet/gradcheck.hpp"
#include "drunet/loss.hpp"
#include "drunet/model.hpp"
#include "drunet/nn_ops.hpp"
#include "drunet/rng.hpp"

namespace drunet {

namespace {

using T = double;

struct Ctx {
  CounterRng rng;
  const GradSuiteOptions& opt;
  bool faulty;

  Tensor<T> normal(Shape s, double sd = 1.0) {
    Tensor<T> t(std::move(s));
    std::normal_distribution<double> d(0.0, sd);
    for (auto& v : t.values()) v = d(rng);
    return t;
  }
  Tensor<T> uniform(Shape s, double lo, double hi) {
    Tensor<T> t(std::move(s));
    std::uniform_real_distribution<double> d(lo, hi);
    for (auto& v : t.values()) v = d(rng);
    return t;
  }
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

  /// Identity forward; backward passes fault_scale * g when this entry is
  /// the injected fault.
  Var<T> tap(Var<T> y) {
    if (!faulty) return y;
    const NodeId id = y.id();
    const double k = opt.fault_scale;
    return y.tape()->record("fault", y.value(), {y}, [id, k](Tape<T>& tape, const Tensor<T>& g) {
      Tensor<T> scaled = g;
      for (auto& v : scaled.values()) v *= k;
      tape.accumulate(id, scaled);
    });
  }

  /// sum(y * R) with a fixed random R, so every output element gets a
  /// distinct upstream gradient.
  Var<T> project(Var<T> y, const Tensor<T>& r) { return sum(mul(tap(y), y.tape()->constant(r))); }
};

struct Accum {
  GradSuiteResult r;
  void add(const GradCheckReport& rep, std::uint64_t seed) {
    if (rep.checked == 0) return;
    if (r.checked == 0 || rep.max_rel_error > r.max_rel_error) {
      r.max_rel_error = rep.max_rel_error;
      r.worst_seed = seed;
    }
    r.checked += rep.checked;
  }
};

using Builder = std::function<void(Ctx&, Accum&, std::uint64_t seed)>;

/// Checks d/dx of f(x) = sum(op(x, ...) * R) for each listed input in turn.
void check_inputs(Ctx& c, Accum& acc, std::uint64_t seed, std::vector<Tensor<T>> inputs,
                  const std::function<Var<T>(Tape<T>&, std::vector<Var<T>>&)>& op) {
  Tensor<T> r;
  {
    Tape<T> probe;
    std::vector<Var<T>> vs;
    for (auto& t : inputs) vs.push_back(probe.constant(t));
    r = c.normal(op(probe, vs).shape());
    const double norm = std::sqrt(static_cast<double>(r.numel()));
    for (auto& v : r.values()) v /= norm;
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    ScalarFn f = [&, k](Tape<T>& tape, Var<T> x) {
      std::vector<Var<T>> vs;
      for (std::size_t j = 0; j < inputs.size(); ++j) vs.push_back(j == k ? x : tape.constant(inputs[j]));
      return c.project(op(tape, vs), r);
    };
    acc.add(finite_difference_check(f, inputs[k], c.opt.step, c.opt.tolerance, {}, c.opt.floor), seed);
  }
}

Var<T> std_block(Var<T> x, Var<T> w1, Var<T> b1, Var<T> g1, Var<T> be1, BatchNormState<T>& s1, int d) {
  return elu(batch_norm(conv2d(x, w1, b1, d), g1, be1, s1, Mode::train));
}

std::vector<std::pair<std::string, Builder>> entries() {
  std::vector<std::pair<std::string, Builder>> e;
  auto binary = [](auto fn, bool safe_denominator) {
    return [fn, safe_denominator](Ctx& c, Accum& acc, std::uint64_t seed) {
      const Shape s{2, 3, 4};
      Tensor<T> b = c.normal(s);
      if (safe_denominator) {
        b = c.uniform(s, 0.5, 2.0);
        for (std::size_t i = 0; i < b.numel(); i += 2) b[i] = -b[i];
      }
      if (seed % 4 == 3) b = safe_denominator ? Tensor<T>::scalar(-1.7) : c.normal({1});  // broadcast case
      check_inputs(c, acc, seed, {c.normal(s), b}, [fn](Tape<T>&, std::vector<Var<T>>& v) { return fn(v[0], v[1]); });
    };
  };
  e.emplace_back("add", binary([](Var<T> a, Var<T> b) { return add(a, b); }, false));
  e.emplace_back("sub", binary([](Var<T> a, Var<T> b) { return sub(a, b); }, false));
  e.emplace_back("mul", binary([](Var<T> a, Var<T> b) { return mul(a, b); }, false));
  e.emplace_back("div", binary([](Var<T> a, Var<T> b) { return div(a, b); }, true));
  e.emplace_back("add_scalar", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    const double k = c.normal({1})[0];
    check_inputs(c, acc, seed, {c.normal({3, 5})}, [k](Tape<T>&, auto& v) { return add_scalar(v[0], k); });
  });
  e.emplace_back("mul_scalar", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    const double k = c.normal({1})[0];
    check_inputs(c, acc, seed, {c.normal({3, 5})}, [k](Tape<T>&, auto& v) { return mul_scalar(v[0], k); });
  });
  e.emplace_back("reduce_sum", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    std::vector<int> axes;
    for (int a = 0; a < 4; ++a)
      if (c.pick(0, 1)) axes.push_back(a);
    check_inputs(c, acc, seed, {c.normal({2, 3, 2, 4})}, [axes](Tape<T>&, auto& v) { return reduce_sum(v[0], axes); });
  });
  e.emplace_back("conv2d", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    static constexpr int kDil[] = {1, 2, 4, 8};
    const int d = kDil[seed % 4];
    const int cin = c.pick(1, 3), cout = c.pick(1, 3);
    const int h = c.pick(3, 10), w = c.pick(3, 10);
    check_inputs(c, acc, seed, {c.normal({2, cin, h, w}), c.normal({cout, cin, 3, 3}, 0.5), c.normal({cout})},
                 [d](Tape<T>&, auto& v) { return conv2d(v[0], v[1], v[2], d); });
  });
  e.emplace_back("conv1x1", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    const int cin = c.pick(1, 4), cout = c.pick(1, 8);
    check_inputs(c, acc, seed, {c.normal({2, cin, 3, 5}), c.normal({cout, cin, 1, 1}), c.normal({cout})},
                 [](Tape<T>&, auto& v) { return conv1x1(v[0], v[1], v[2]); });
  });
  e.emplace_back("batch_norm_train", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    const int ch = c.pick(1, 4);
    check_inputs(c, acc, seed, {c.normal({2, ch, 3, 4}, 2.0), c.normal({ch}), c.normal({ch})},
                 [ch](Tape<T>&, auto& v) {
                   BatchNormState<T> st(ch);
                   return batch_norm(v[0], v[1], v[2], st, Mode::train);
                 });
  });
  e.emplace_back("batch_norm_infer", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    const int ch = c.pick(1, 4);
    BatchNormState<T> base(ch);
    base.running_mean = c.normal({ch});
    base.running_var = c.uniform({ch}, 0.3, 3.0);
    check_inputs(c, acc, seed, {c.normal({2, ch, 3, 4}), c.normal({ch}), c.normal({ch})},
                 [base](Tape<T>&, auto& v) {
                   BatchNormState<T> st = base;
                   return batch_norm(v[0], v[1], v[2], st, Mode::infer);
                 });
  });
  e.emplace_back("elu", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    check_inputs(c, acc, seed, {c.normal({2, 3, 4, 4}, 2.0)}, [](Tape<T>&, auto& v) { return elu(v[0]); });
  });
  e.emplace_back("maxpool2x2", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    check_inputs(c, acc, seed, {c.normal({2, 2, 4, 6})}, [](Tape<T>&, auto& v) { return maxpool2x2(v[0]); });
  });
  e.emplace_back("upsample2x2", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    check_inputs(c, acc, seed, {c.normal({2, 2, 3, 2})}, [](Tape<T>&, auto& v) { return upsample2x2(v[0]); });
  });
  e.emplace_back("concat_channels", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    const int ca = c.pick(1, 3), cb = c.pick(1, 3);
    check_inputs(c, acc, seed, {c.normal({2, ca, 3, 4}), c.normal({2, cb, 3, 4})},
                 [](Tape<T>&, auto& v) { return concat_channels(v[0], v[1]); });
  });
  e.emplace_back("softmax_channels", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    check_inputs(c, acc, seed, {c.normal({2, 8, 3, 3}, 2.0)}, [](Tape<T>&, auto& v) { return softmax_channels(v[0]); });
  });
  e.emplace_back("jaccard_loss", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    Tensor<T> truth({2, 8, 4, 4});
    for (int n = 0; n < 2; ++n)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) truth.at(n, c.pick(0, 7), y, x) = 1.0;
    ScalarFn f = [&c, truth](Tape<T>&, Var<T> p) { return c.tap(jaccard_loss(p, truth)); };
    acc.add(finite_difference_check(f, c.uniform({2, 8, 4, 4}, 0.05, 0.95), c.opt.step, c.opt.tolerance, {}, c.opt.floor), seed);
  });
  e.emplace_back("conv_bn_elu", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    const int d = 1 << (seed % 4);
    check_inputs(c, acc, seed,
                 {c.normal({2, 2, 6, 6}), c.normal({3, 2, 3, 3}, 0.5), c.normal({3}), c.normal({3}), c.normal({3})},
                 [d](Tape<T>&, auto& v) {
                   BatchNormState<T> st(3);
                   return std_block(v[0], v[1], v[2], v[3], v[4], st, d);
                 });
  });
  e.emplace_back("residual_block", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    const int d = 1 << (seed % 4);
    std::vector<Tensor<T>> in{c.normal({1, 2, 6, 6}),
                              c.normal({3, 2, 3, 3}, 0.5), c.normal({3}), c.normal({3}), c.normal({3}),
                              c.normal({3, 3, 3, 3}, 0.5), c.normal({3}), c.normal({3}), c.normal({3}),
                              c.normal({3, 2, 1, 1}), c.normal({3}), c.normal({3}), c.normal({3})};
    check_inputs(c, acc, seed, std::move(in), [d](Tape<T>&, auto& v) {
      BatchNormState<T> s1(3), s2(3), s3(3);
      auto main = std_block(v[0], v[1], v[2], v[3], v[4], s1, d);
      main = std_block(main, v[5], v[6], v[7], v[8], s2, d);
      auto proj = elu(batch_norm(conv1x1(v[0], v[9], v[10]), v[11], v[12], s3, Mode::train));
      return add(main, proj);
    });
  });
  e.emplace_back("drunet_16x16", [](Ctx& c, Accum& acc, std::uint64_t seed) {
    Drunet<T> model({}, seed);
    Tensor<T> image = c.uniform({1, 1, 16, 16}, 0.0, 1.0);
    Tensor<T> truth({1, 8, 16, 16});
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) truth.at(0, std::min(7, y / 2), y, x) = 1.0;
    auto loss_of = [&](Tape<T>& tape, Var<T> img, bool track) {
      return c.tap(jaccard_loss(model.forward(tape, img, Mode::train, track), truth));
    };

    // Input gradient, every pixel.
    ScalarFn f = [&](Tape<T>& tape, Var<T> x) { return loss_of(tape, x, false); };
    acc.add(finite_difference_check(f, image, c.opt.step, c.opt.tolerance, {}, c.opt.floor), seed);

    // Parameter gradients: two elements of every tensor plus a random sample.
    auto& store = model.parameters();
    store.zero_grads();
    {
      Tape<T> tape;
      tape.backward(loss_of(tape, tape.constant(image), true));
    }
    std::vector<double*> slots;
    std::vector<double> analytic;
    auto take = [&](std::size_t p, std::size_t k) {
      slots.push_back(&store.at(p).value[k]);
      analytic.push_back(store.at(p).grad[k]);
    };
    for (std::size_t p = 0; p < store.size(); ++p) {
      const int n = static_cast<int>(store.at(p).value.numel());
      for (int k = 0; k < std::min(2, n); ++k) take(p, static_cast<std::size_t>(c.pick(0, n - 1)));
    }
    for (int k = 0; k < 120; ++k) {
      const std::size_t p = static_cast<std::size_t>(c.pick(0, static_cast<int>(store.size()) - 1));
      take(p, static_cast<std::size_t>(c.pick(0, static_cast<int>(store.at(p).value.numel()) - 1)));
    }
    auto eval = [&] {
      Tape<T> tape;
      return loss_of(tape, tape.constant(image), false).value().item();
    };
    acc.add(finite_difference_check_slots(eval, slots, analytic, c.opt.step, c.opt.tolerance, c.opt.floor), seed);
  });
  return e;
}

}  // namespace

std::vector<std::string> gradient_suite_entries() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : entries()) names.push_back(name);
  return names;
}

std::vector<GradSuiteResult> run_gradient_suite(const GradSuiteOptions& opt) {
  if (opt.seeds < 1) throw std::invalid_argument("gradient suite needs at least one seed");
  if (!(opt.step > 0.0)) throw std::invalid_argument("gradient suite step must be positive");
  const auto all = entries();
  auto known = [&](const std::string& n) {
    return std::any_of(all.begin(), all.end(), [&](const auto& e) { return e.first == n; });
  };
  for (const auto& n : opt.only)
    if (!known(n)) throw std::invalid_argument("unknown gradient suite entry '" + n + "'");
  if (opt.inject_fault && !known(*opt.inject_fault)) {
    throw std::invalid_argument("unknown gradient suite entry '" + *opt.inject_fault + "'");
  }

  std::vector<GradSuiteResult> out;
  for (const auto& [name, build] : all) {
    if (!opt.only.empty() && std::find(opt.only.begin(), opt.only.end(), name) == opt.only.end()) continue;
    Accum acc;
    acc.r.name = name;
    for (int s = 0; s < opt.seeds; ++s) {
      const std::uint64_t seed = opt.base_seed + static_cast<std::uint64_t>(s);
      Ctx ctx{CounterRng(RngKey::of(seed, name, 0)), opt, opt.inject_fault && *opt.inject_fault == name};
      build(ctx, acc, seed);
    }
    acc.r.seeds = opt.seeds;
    acc.r.passed = acc.r.max_rel_error <= opt.tolerance;
    out.push_back(acc.r);
  }
  return out;
}

}  // namespace drunet
