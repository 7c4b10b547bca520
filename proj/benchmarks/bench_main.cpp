#include <benchmark/benchmark.h>

#include <random>

#include "drunet/augment.hpp"
#include "drunet/loss.hpp"
#include "drunet/model.hpp"
#include "drunet/phantom.hpp"
#include "drunet/trainer.hpp"

using namespace drunet;

namespace {

Tensor<float> noise(Shape s, std::uint64_t seed) {
  Tensor<float> t(std::move(s));
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

void BM_Conv3x3Forward(benchmark::State& st) {
  const int hw = static_cast<int>(st.range(0)), dil = static_cast<int>(st.range(1));
  const auto x = noise({1, 16, hw, hw}, 1), w = noise({16, 16, 3, 3}, 2), b = noise({16}, 3);
  for (auto _ : st) benchmark::DoNotOptimize(conv2d_forward(x, w, b, dil));
  st.SetItemsProcessed(st.iterations() * hw * hw);
}
BENCHMARK(BM_Conv3x3Forward)->Args({64, 1})->Args({64, 8})->Args({248, 1})->Unit(benchmark::kMillisecond);

void BM_Conv3x3Backward(benchmark::State& st) {
  const int hw = static_cast<int>(st.range(0));
  const auto x = noise({1, 16, hw, hw}, 1), w = noise({16, 16, 3, 3}, 2), g = noise({1, 16, hw, hw}, 3);
  for (auto _ : st) benchmark::DoNotOptimize(conv2d_backward(x, w, g, 2, true));
}
BENCHMARK(BM_Conv3x3Backward)->Arg(64)->Arg(248)->Unit(benchmark::kMillisecond);

void BM_ModelInfer(benchmark::State& st) {
  Drunet<float> m(ModelConfig{}, 1);
  const auto x = noise({1, 1, static_cast<int>(st.range(0)), static_cast<int>(st.range(1))}, 4);
  for (auto _ : st) benchmark::DoNotOptimize(m.infer(x));
}
BENCHMARK(BM_ModelInfer)->Args({248, 384})->Args({496, 768})->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& st) {
  Drunet<float> m(ModelConfig{}, 1);
  const auto ph = generate_phantom(PhantomConfig{}, 5);
  const Sample* one[] = {&ph.sample};
  const auto x = batch_images(one);
  const auto y = one_hot<float>(batch_labels(one));
  std::vector<Tensor<float>> v;
  for (auto _ : st) {
    Tape<float> tape;
    auto loss = jaccard_loss(m.forward(tape, tape.constant(x), Mode::train), y);
    tape.backward(loss);
    sgd_nesterov_step(m.parameters(), v, 0.01, 0.9);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_AugmentPipeline(benchmark::State& st) {
  const auto ph = generate_phantom(PhantomConfig{}, 6);
  std::uint64_t e = 0;
  for (auto _ : st) benchmark::DoNotOptimize(augment_sample(ph.sample, AugmentConfig{}, RngKey::of(1, "b", e++)));
}
BENCHMARK(BM_AugmentPipeline)->Unit(benchmark::kMillisecond);

void BM_PhantomGenerate(benchmark::State& st) {
  std::uint64_t s = 0;
  for (auto _ : st) benchmark::DoNotOptimize(generate_phantom(PhantomConfig{}, s++));
}
BENCHMARK(BM_PhantomGenerate)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
