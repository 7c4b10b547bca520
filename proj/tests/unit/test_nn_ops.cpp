#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "drunet/gradcheck.hpp"
#include "drunet/labels.hpp"
#include "drunet/loss.hpp"
#include "drunet/nn_ops.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace drunet;

namespace {

std::vector<double> to_vec(const Tensor<double>& t) { return {t.values().begin(), t.values().end()}; }

double max_rel(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-6) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), floor));
  return m;
}

}  // namespace

TEST_CASE("conv2d matches direct summation, double") {
  std::mt19937_64 rng(42);
  for (int k = 0; k < 50; ++k) {
    const int d = 1 << (k % 4);
    std::uniform_int_distribution<int> ch(1, 4), sz(1, 12);
    const int N = 1 + k % 2, C = ch(rng), O = ch(rng), H = sz(rng), W = sz(rng);
    const int K = k % 5 == 0 ? 1 : 3;
    auto x = testing::random_tensor({N, C, H, W}, rng);
    auto w = testing::random_tensor({O, C, K, K}, rng);
    auto b = testing::random_tensor({O}, rng);
    const auto got = to_vec(conv2d_forward(x, w, b, d));
    const auto want = oracle::conv2d(to_vec(x), N, C, H, W, to_vec(w), O, K, to_vec(b), d);
    CHECK_MESSAGE(max_rel(got, want) < 1e-9, "case " << k);
  }
}

TEST_CASE("conv2d in float stays within accumulated rounding of the oracle") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 20; ++k) {
    const int d = 1 << (k % 4);
    auto x = testing::random_tensor({1, 3, 9, 11}, rng);
    auto w = testing::random_tensor({4, 3, 3, 3}, rng);
    auto b = testing::random_tensor({4}, rng);
    const auto got = conv2d_forward(x.cast<float>(), w.cast<float>(), b.cast<float>(), d);
    const auto want = oracle::conv2d(to_vec(x), 1, 3, 9, 11, to_vec(w), 4, 3, to_vec(b), d);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-4);
  }
}

TEST_CASE("conv2d backward matches brute-force adjoints") {
  std::mt19937_64 rng(3);
  for (int d : {1, 2, 4, 8}) {
    const int N = 2, C = 2, O = 3, H = 6, W = 7, K = 3, r = 1;
    auto x = testing::random_tensor({N, C, H, W}, rng);
    auto w = testing::random_tensor({O, C, K, K}, rng);
    auto g = testing::random_tensor({N, O, H, W}, rng);
    const auto grads = conv2d_backward(x, w, g, d, true);
    std::vector<double> dw(w.numel(), 0.0), dx(x.numel(), 0.0), db(O, 0.0);
    for (int n = 0; n < N; ++n)
      for (int o = 0; o < O; ++o)
        for (int y = 0; y < H; ++y)
          for (int xx = 0; xx < W; ++xx) {
            const double go = g.at(n, o, y, xx);
            db[o] += go;
            for (int i = 0; i < C; ++i)
              for (int ky = 0; ky < K; ++ky)
                for (int kx = 0; kx < K; ++kx) {
                  const int sy = y + d * (ky - r), sx = xx + d * (kx - r);
                  if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                  dw[((o * C + i) * K + ky) * K + kx] += go * x.at(n, i, sy, sx);
                  dx[((n * C + i) * H + sy) * W + sx] += go * w.at(o, i, ky, kx);
                }
          }
    CHECK(max_rel(to_vec(grads.weight), dw) < 1e-9);
    CHECK(max_rel(to_vec(grads.input), dx) < 1e-9);
    CHECK(max_rel(to_vec(grads.bias), db) < 1e-9);
  }
}

TEST_CASE("conv2d argument validation") {
  Tape<double> tape;
  auto x = tape.constant(Tensor<double>({1, 2, 4, 4}));
  auto b = tape.constant(Tensor<double>({3}));
  CHECK_THROWS_AS(conv2d(x, tape.constant(Tensor<double>({3, 1, 3, 3})), b, 1), ShapeError);
  CHECK_THROWS_AS(conv2d(x, tape.constant(Tensor<double>({3, 2, 2, 2})), b, 1), ShapeError);
  CHECK_THROWS(conv2d(x, tape.constant(Tensor<double>({3, 2, 3, 3})), b, 0));
  CHECK_THROWS_AS(conv1x1(x, tape.constant(Tensor<double>({3, 2, 3, 3})), b), ShapeError);
  CHECK(conv2d(x, tape.constant(Tensor<double>({3, 2, 3, 3})), b, 8).shape() == Shape{1, 3, 4, 4});
}

TEST_CASE("batch norm train mode normalizes and updates running statistics") {
  std::mt19937_64 rng(1);
  Tensor<double> x = testing::random_tensor({2, 3, 4, 5}, rng, 3.0);
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] += 5.0;
  Tape<double> tape;
  BatchNormState<double> st(3);
  auto y = batch_norm(tape.constant(x), tape.constant(Tensor<double>({3}, 1.0)), tape.constant(Tensor<double>({3}, 0.0)),
                      st, Mode::train);
  const int per = 2 * 4 * 5;
  for (int c = 0; c < 3; ++c) {
    double mx = 0, my = 0, vy = 0, vx = 0;
    for (int n = 0; n < 2; ++n)
      for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 5; ++w) {
          mx += x.at(n, c, h, w);
          my += y.value().at(n, c, h, w);
        }
    mx /= per;
    my /= per;
    for (int n = 0; n < 2; ++n)
      for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 5; ++w) {
          vx += std::pow(x.at(n, c, h, w) - mx, 2);
          vy += std::pow(y.value().at(n, c, h, w) - my, 2);
        }
    CHECK(my == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(vy / per == doctest::Approx((vx / per) / (vx / per + 1e-5)));
    CHECK(st.running_mean[c] == doctest::Approx(0.1 * mx));
    CHECK(st.running_var[c] == doctest::Approx(0.9 + 0.1 * vx / (per - 1)));
  }
}

TEST_CASE("batch norm infer mode uses running statistics and leaves them alone") {
  BatchNormState<double> st(2);
  st.running_mean = Tensor<double>({2}, {1.0, -2.0});
  st.running_var = Tensor<double>({2}, {4.0, 0.25});
  const auto before = st.running_mean;
  Tensor<double> x({1, 2, 1, 2}, {3.0, 5.0, -2.0, 0.0});
  Tape<double> tape;
  auto y = batch_norm(tape.constant(x), tape.constant(Tensor<double>({2}, {2.0, 1.0})),
                      tape.constant(Tensor<double>({2}, {0.5, 0.0})), st, Mode::infer);
  CHECK(y.value()[0] == doctest::Approx(2.0 * (3.0 - 1.0) / std::sqrt(4.0 + 1e-5) + 0.5));
  CHECK(y.value()[1] == doctest::Approx(2.0 * (5.0 - 1.0) / std::sqrt(4.0 + 1e-5) + 0.5));
  CHECK(y.value()[2] == doctest::Approx(0.0));
  CHECK(y.value()[3] == doctest::Approx(2.0 / std::sqrt(0.25 + 1e-5)));
  CHECK(st.running_mean == before);
}

TEST_CASE("elu values") {
  Tape<double> tape;
  auto y = elu(tape.constant(Tensor<double>({4}, {-2.0, -0.5, 0.0, 1.5})));
  CHECK(y.value()[0] == doctest::Approx(std::exp(-2.0) - 1.0));
  CHECK(y.value()[1] == doctest::Approx(std::exp(-0.5) - 1.0));
  CHECK(y.value()[2] == 0.0);
  CHECK(y.value()[3] == 1.5);
}

TEST_CASE("maxpool picks window maxima, first on ties, and routes gradient there") {
  Tensor<double> x({1, 1, 2, 4}, {1, 5, 2, 2, 3, 5, 2, 2});
  const auto r = maxpool2x2_forward(x);
  CHECK(r.output == Tensor<double>({1, 1, 1, 2}, {5, 2}));
  CHECK(r.argmax[0] == 1);
  CHECK(r.argmax[1] == 2);
  Tape<double> tape;
  auto v = tape.variable(x);
  tape.backward(sum(maxpool2x2(v)));
  CHECK(v.grad() == Tensor<double>({1, 1, 2, 4}, {0, 1, 1, 0, 0, 0, 0, 0}));
  Tape<double> t2;
  CHECK_THROWS_AS(maxpool2x2(t2.constant(Tensor<double>({1, 1, 3, 4}))), ShapeError);
}

TEST_CASE("upsample repeats pixels and sums gradients over each block") {
  Tape<double> tape;
  auto v = tape.variable(Tensor<double>({1, 1, 1, 2}, {1.0, 2.0}));
  auto u = upsample2x2(v);
  CHECK(u.value() == Tensor<double>({1, 1, 2, 4}, {1, 1, 2, 2, 1, 1, 2, 2}));
  tape.backward(sum(mul(u, tape.constant(Tensor<double>({1, 1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8})))));
  CHECK(v.grad() == Tensor<double>({1, 1, 1, 2}, {1 + 2 + 5 + 6, 3 + 4 + 7 + 8}));
}

TEST_CASE("concat stacks channels in order") {
  Tape<double> tape;
  auto a = tape.constant(Tensor<double>({2, 1, 1, 1}, {1, 2}));
  auto b = tape.constant(Tensor<double>({2, 2, 1, 1}, {3, 4, 5, 6}));
  CHECK(concat_channels(a, b).value() == Tensor<double>({2, 3, 1, 1}, {1, 3, 4, 2, 5, 6}));
  CHECK_THROWS_AS(concat_channels(a, tape.constant(Tensor<double>({2, 1, 2, 1}))), ShapeError);
}

TEST_CASE("softmax sums to one, is shift invariant and stable for large logits") {
  std::mt19937_64 rng(5);
  auto x = testing::random_tensor({2, 8, 3, 3}, rng, 3.0);
  Tape<double> tape;
  auto p = softmax_channels(tape.constant(x)).value();
  Tensor<double> shifted = x;
  for (auto& v : shifted.values()) v += 1000.0;
  auto q = softmax_channels(tape.constant(shifted)).value();
  for (int n = 0; n < 2; ++n)
    for (int h = 0; h < 3; ++h)
      for (int w = 0; w < 3; ++w) {
        double s = 0;
        for (int c = 0; c < 8; ++c) {
          s += p.at(n, c, h, w);
          CHECK(q.at(n, c, h, w) == doctest::Approx(p.at(n, c, h, w)).epsilon(1e-9));
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      }
}

TEST_CASE("conv2d small hand cases") {
  Tape<double> tape;
  Tensor<double> delta({1, 1, 3, 3});
  delta.at(0, 0, 1, 1) = 1.0;
  std::mt19937_64 rng(11);
  auto x = testing::random_tensor({1, 1, 5, 6}, rng);
  CHECK(conv2d_forward(x, delta, Tensor<double>({1}), 1) == x);

  Tensor<double> ones5({1, 1, 5, 5}, 1.0), ones3({1, 1, 3, 3}, 1.0);
  CHECK(conv2d_forward(ones5, ones3, Tensor<double>({1}), 2).at(0, 0, 2, 2) == 9.0);

  Tensor<double> impulse({1, 1, 9, 9});
  impulse.at(0, 0, 4, 4) = 1.0;
  for (int d : {1, 2}) {
    const auto y = conv2d_forward(impulse, ones3, Tensor<double>({1}), d);
    for (int r = 0; r < 9; ++r)
      for (int c = 0; c < 9; ++c) {
        const bool hit = (r - 4) % d == 0 && (c - 4) % d == 0 && std::abs(r - 4) <= d && std::abs(c - 4) <= d;
        CHECK(y.at(0, 0, r, c) == (hit ? 1.0 : 0.0));
      }
  }
}

TEST_CASE("conv1x1 identity, bias-only and per-pixel matvec") {
  std::mt19937_64 rng(12);
  auto x = testing::random_tensor({2, 3, 4, 5}, rng);
  Tape<double> tape;
  Tensor<double> eye({3, 3, 1, 1});
  for (int i = 0; i < 3; ++i) eye.at(i, i, 0, 0) = 1.0;
  CHECK(conv1x1(tape.constant(x), tape.constant(eye), tape.constant(Tensor<double>({3}))).value() == x);

  auto y = conv1x1(tape.constant(x), tape.constant(Tensor<double>({2, 3, 1, 1})),
                   tape.constant(Tensor<double>({2}, {0.5, -1.5})))
               .value();
  for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y[i] == (i / 20 % 2 == 0 ? 0.5 : -1.5));

  auto w = testing::random_tensor({4, 3, 1, 1}, rng);
  auto b = testing::random_tensor({4}, rng);
  auto z = conv1x1(tape.constant(x), tape.constant(w), tape.constant(b)).value();
  for (int n = 0; n < 2; ++n)
    for (int h = 0; h < 4; ++h)
      for (int ww = 0; ww < 5; ++ww)
        for (int o = 0; o < 4; ++o) {
          double s = b[o];
          for (int i = 0; i < 3; ++i) s += w.at(o, i, 0, 0) * x.at(n, i, h, ww);
          CHECK(z.at(n, o, h, ww) == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("batch norm on a constant channel gives beta") {
  Tape<double> tape;
  BatchNormState<double> st(1);
  auto y = batch_norm(tape.constant(Tensor<double>({2, 1, 3, 3}, 4.2)), tape.constant(Tensor<double>({1}, 3.0)),
                      tape.constant(Tensor<double>({1}, 0.7)), st, Mode::train);
  for (double v : y.value().values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("elu scalar cases") {
  Tape<double> tape;
  auto y = elu(tape.constant(Tensor<double>({3}, {0.0, 2.0, -1.0}))).value();
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 2.0);
  CHECK(y[2] == doctest::Approx(-0.6321).epsilon(1e-4));
}

TEST_CASE("maxpool hand cases and brute force") {
  Tape<double> tape;
  CHECK(maxpool2x2(tape.constant(Tensor<double>({1, 1, 2, 2}, {1, 2, 3, 4}))).value().item() == 4.0);

  auto c = tape.variable(Tensor<double>({1, 1, 2, 2}, 3.0));
  auto pooled = maxpool2x2(c);
  CHECK(pooled.value().item() == 3.0);
  tape.backward(sum(pooled));
  CHECK(c.grad() == Tensor<double>({1, 1, 2, 2}, {1, 0, 0, 0}));

  std::mt19937_64 rng(13);
  auto x = testing::random_tensor({1, 2, 8, 8}, rng);
  const auto y = maxpool2x2_forward(x).output;
  for (int ch = 0; ch < 2; ++ch)
    for (int r = 0; r < 4; ++r)
      for (int q = 0; q < 4; ++q) {
        const double m = std::max({x.at(0, ch, 2 * r, 2 * q), x.at(0, ch, 2 * r, 2 * q + 1),
                                   x.at(0, ch, 2 * r + 1, 2 * q), x.at(0, ch, 2 * r + 1, 2 * q + 1)});
        CHECK(y.at(0, ch, r, q) == m);
      }
}

TEST_CASE("upsample hand cases") {
  Tape<double> tape;
  CHECK(upsample2x2(tape.constant(Tensor<double>({1, 1, 1, 1}, 5.0))).value() == Tensor<double>({1, 1, 2, 2}, 5.0));
  Tensor<double> k({1, 2, 4, 6}, -1.25);
  CHECK(upsample2x2(maxpool2x2(tape.constant(k))).value() == k);

  Tape<double> t2;
  auto x = t2.variable(Tensor<double>({1, 2, 3, 2}, 0.3));
  t2.backward(sum(upsample2x2(x)));
  CHECK(x.grad() == Tensor<double>({1, 2, 3, 2}, 4.0));
}

TEST_CASE("concat then selecting 1x1 conv recovers the first input") {
  std::mt19937_64 rng(14);
  auto x = testing::random_tensor({1, 2, 3, 3}, rng);
  Tape<double> tape;
  auto cat = concat_channels(tape.constant(x), tape.constant(Tensor<double>({1, 2, 3, 3})));
  Tensor<double> sel({2, 4, 1, 1});
  sel.at(0, 0, 0, 0) = 1.0;
  sel.at(1, 1, 0, 0) = 1.0;
  CHECK(conv1x1(cat, tape.constant(sel), tape.constant(Tensor<double>({2}))).value() == x);

  Tensor<double> one({1, 1, 1, 1}, 1.0);
  auto planes = concat_channels(tape.constant(one), tape.constant(Tensor<double>({1, 1, 1, 1}, 2.0))).value();
  CHECK(planes == Tensor<double>({1, 2, 1, 1}, {1.0, 2.0}));
}

TEST_CASE("softmax scalar cases") {
  Tape<double> tape;
  for (double v : softmax_channels(tape.constant(Tensor<double>({1, 8, 2, 2}))).value().values()) CHECK(v == 0.125);
  auto p = softmax_channels(tape.constant(Tensor<double>({1, 3, 1, 1}, {1.0, 2.0, 3.0}))).value();
  CHECK(p[0] == doctest::Approx(0.0900).epsilon(1e-3));
  CHECK(p[1] == doctest::Approx(0.2447).epsilon(1e-3));
  CHECK(p[2] == doctest::Approx(0.6652).epsilon(1e-3));
}

TEST_CASE("finite-difference harness cases") {
  std::mt19937_64 rng(15);
  const auto x = testing::random_tensor({2, 3, 4}, rng);
  // linear, so a wide step adds no truncation error and keeps rounding small
  const auto lin = finite_difference_check([](Tape<double>&, Var<double> v) { return sum(v); }, x, 1e-3, 1e-10);
  CHECK(lin.passed);
  CHECK(lin.max_rel_error < 1e-10);

  LabelMap lm(1, 4, 4);
  for (auto& v : lm.data) v = static_cast<std::uint8_t>(rng() % 2);
  Tensor<double> truth({1, 2, 4, 4});
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 4; ++xx) truth.at(0, lm.at(0, y, xx), y, xx) = 1.0;
  const auto logits = testing::random_tensor({1, 2, 4, 4}, rng);
  const auto jac = finite_difference_check(
      [&](Tape<double>&, Var<double> v) { return jaccard_loss(softmax_channels(v), truth); }, logits, 1e-6, 1e-4);
  CHECK(jac.passed);

  const auto w = testing::random_tensor({2, 1, 3, 3}, rng), b = testing::random_tensor({2}, rng);
  const auto r = testing::random_tensor({1, 2, 8, 8}, rng);
  const auto img = testing::random_tensor({1, 1, 8, 8}, rng);
  const auto stack = finite_difference_check(
      [&](Tape<double>& t, Var<double> v) {
        BatchNormState<double> st(2);
        auto h = conv2d(v, t.constant(w), t.constant(b), 2);
        h = batch_norm(h, t.constant(Tensor<double>({2}, 1.0)), t.constant(Tensor<double>({2}, 0.0)), st, Mode::train);
        return sum(mul(elu(h), t.constant(r)));
      },
      img, 1e-6, 1e-4);
  CHECK(stack.passed);
}

TEST_CASE("mul gradient at a=2, b=3") {
  Tape<double> tape;
  auto a = tape.variable(Tensor<double>({1}, 2.0));
  auto b = tape.variable(Tensor<double>({1}, 3.0));
  tape.backward(mul(a, b));
  CHECK(a.grad().item() == 3.0);
  CHECK(b.grad().item() == 2.0);
}
