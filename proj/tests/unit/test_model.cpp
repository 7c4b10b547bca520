#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "drunet/model.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace drunet;

TEST_CASE("default model has 39848 trainable parameters, matching enumeration") {
  Drunet<float> m;
  CHECK(m.trainable_parameter_count() == 39848);
  CHECK(oracle::drunet_parameter_count(1, 16, 8) == 39848);
  CHECK(m.trainable_parameter_count() >= 38000);
  CHECK(m.trainable_parameter_count() <= 42000);
  CHECK(m.parameters().size() == 78);
  CHECK(m.parameters().norm_count() == 19);
}

TEST_CASE("parameter count tracks the enumeration for other widths") {
  for (int f : {4, 8, 24, 32})
    for (int in : {1, 3}) {
      ModelConfig cfg;
      cfg.base_filters = f;
      cfg.input_channels = in;
      CHECK(Drunet<float>(cfg).trainable_parameter_count() == static_cast<std::size_t>(oracle::drunet_parameter_count(in, f, 8)));
    }
}

TEST_CASE("layer table sums to the parameter count and follows the tower") {
  Drunet<float> m;
  const auto rows = m.layer_table();
  REQUIRE(rows.size() == 8);
  std::size_t total = 0;
  for (const auto& r : rows) total += r.parameters;
  CHECK(total == m.trainable_parameter_count());
  const std::vector<std::string> names{"down0", "down1", "down2", "bridge", "up0", "up1", "up2", "head"};
  const std::vector<int> dil{1, 2, 4, 8, 4, 2, 1, 1};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].name == names[i]);
    CHECK(rows[i].dilation == dil[i]);
  }
  CHECK(rows[0].kind == "standard");
  CHECK(rows[3].kind == "residual");
  CHECK(rows[6].kind == "standard");
  CHECK(rows[4].in_channels == 32);
}

TEST_CASE("parameter names are unique") {
  Drunet<float> m;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < m.parameters().size(); ++i) CHECK(seen.insert(m.parameters().name(i)).second);
  for (std::size_t i = 0; i < m.parameters().norm_count(); ++i) CHECK(seen.insert(m.parameters().norm_name(i)).second);
}

TEST_CASE("forward shapes and probability simplex") {
  Drunet<float> m(ModelConfig{}, 3);
  std::mt19937_64 rng(1);
  auto x = testing::random_tensor<float>({1, 1, 64, 64}, rng, 0.3);
  for (auto& v : x.values()) v = std::clamp(v + 0.5f, 0.0f, 1.0f);
  const auto p = m.infer(x);
  CHECK(p.shape() == Shape{1, 8, 64, 64});
  for (int h = 0; h < 64; ++h)
    for (int w = 0; w < 64; ++w) {
      double s = 0;
      for (int c = 0; c < 8; ++c) s += p.at(0, c, h, w);
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  CHECK(m.infer(x) == p);
}

TEST_CASE("full-resolution input keeps its size; bridge is one eighth") {
  Drunet<float> m;
  Tape<float> tape;
  auto t = m.forward_trace(tape, tape.constant(Tensor<float>({1, 1, 496, 768}, 0.5f)), Mode::infer, false);
  CHECK(t.probs.shape() == Shape{1, 8, 496, 768});
  CHECK(t.bridge.shape() == Shape{1, 16, 62, 96});
}

TEST_CASE("input not divisible by 8 is rejected") {
  Drunet<float> m;
  CHECK_THROWS_AS(m.infer(Tensor<float>({1, 1, 60, 64})), std::invalid_argument);
  CHECK_THROWS_AS(m.infer(Tensor<float>({1, 1, 64, 36})), std::invalid_argument);
  CHECK_THROWS_AS(m.infer(Tensor<float>({1, 2, 64, 64})), ShapeError);
}

TEST_CASE("invalid configs are rejected") {
  ModelConfig c;
  c.n_classes = 5;
  CHECK_THROWS_AS(Drunet<float>{c}, std::invalid_argument);
  c = {};
  c.bridge_dilation = 0;
  CHECK_THROWS_AS(Drunet<float>{c}, std::invalid_argument);
}

TEST_CASE("initialization is seeded") {
  Drunet<float> a(ModelConfig{}, 9), b(ModelConfig{}, 9), c(ModelConfig{}, 10);
  bool differs = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    CHECK(a.parameters().at(i).value == b.parameters().at(i).value);
    differs = differs || !(a.parameters().at(i).value == c.parameters().at(i).value);
  }
  CHECK(differs);
}

TEST_CASE("train mode updates running statistics, infer mode does not") {
  Drunet<float> m(ModelConfig{}, 1);
  const auto before = m.parameters().norm(0).running_mean;
  m.infer(Tensor<float>({1, 1, 16, 16}, 0.4f));
  CHECK(m.parameters().norm(0).running_mean == before);
  Tape<float> tape;
  std::mt19937_64 rng(2);
  m.forward(tape, tape.constant(testing::random_tensor<float>({1, 1, 16, 16}, rng)), Mode::train);
  CHECK_FALSE(m.parameters().norm(0).running_mean == before);
}

namespace {

// Rows (or columns) of bridge features that can depend on input index p:
// each 3x3 conv of dilation d widens the interval by d per side, each pool
// halves it. The 1x1 residual path adds nothing.
std::pair<int, int> bridge_reach(int p, int size, const ModelConfig& c) {
  int lo = p, hi = p;
  const int dil[4] = {c.down_dilations[0], c.down_dilations[1], c.down_dilations[2], c.bridge_dilation};
  for (int level = 0; level < 4; ++level) {
    lo = std::max(0, lo - 2 * dil[level]);
    hi = std::min(size - 1, hi + 2 * dil[level]);
    if (level < 3) {
      lo /= 2;
      hi /= 2;
      size /= 2;
    }
  }
  return {lo, hi};
}

}  // namespace

TEST_CASE("bridge receptive field matches the analytic radius") {
  ModelConfig cfg;
  Drunet<double> m(cfg, 4);
  const int H = 256, W = 256;
  std::mt19937_64 rng(5);
  auto x = testing::random_tensor<double>({1, 1, H, W}, rng, 0.2);
  for (const auto& [py, px] : std::vector<std::pair<int, int>>{{128, 128}, {3, 250}, {200, 17}}) {
    Tensor<double> y = x;
    y.at(0, 0, py, px) += 1.0;
    Tape<double> t1, t2;
    const auto a = m.forward_trace(t1, t1.constant(x), Mode::infer, false).bridge.value();
    const auto b = m.forward_trace(t2, t2.constant(y), Mode::infer, false).bridge.value();
    const auto [rlo, rhi] = bridge_reach(py, H, cfg);
    const auto [clo, chi] = bridge_reach(px, W, cfg);
    int changed = 0, outside = 0;
    for (int c = 0; c < 16; ++c)
      for (int r = 0; r < H / 8; ++r)
        for (int q = 0; q < W / 8; ++q) {
          if (a.at(0, c, r, q) == b.at(0, c, r, q)) continue;
          ++changed;
          if (r < rlo || r > rhi || q < clo || q > chi) ++outside;
        }
    CHECK(changed > 0);
    CHECK(outside == 0);
  }
}

TEST_CASE("predict_classes argmax") {
  Tensor<float> uniform({1, 8, 2, 2}, 0.125f);
  CHECK(predict_classes(uniform).data == std::vector<std::uint8_t>(4, 0));
  LabelMap lm(1, 3, 3);
  for (std::size_t i = 0; i < 9; ++i) lm.data[i] = static_cast<std::uint8_t>(i % 8);
  CHECK(predict_classes(one_hot<float>(lm)) == lm);
  std::mt19937_64 rng(6);
  auto r = testing::random_tensor<double>({2, 8, 4, 5}, rng);
  const auto got = predict_classes(r);
  for (int n = 0; n < 2; ++n)
    for (int h = 0; h < 4; ++h)
      for (int w = 0; w < 5; ++w) {
        int best = 0;
        for (int c = 1; c < 8; ++c)
          if (r.at(n, c, h, w) > r.at(n, best, h, w)) best = c;
        CHECK(got.at(n, h, w) == best);
      }
}
