#include "drunet/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace drunet {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("model config: " + what); };
  if (input_channels <= 0) fail("input_channels must be positive");
  if (n_classes != kNumClasses) fail("n_classes must be " + std::to_string(kNumClasses));
  if (base_filters <= 0) fail("base_filters must be positive");
  for (int d : down_dilations)
    if (d <= 0) fail("down dilations must be positive");
  for (int d : up_dilations)
    if (d <= 0) fail("up dilations must be positive");
  if (bridge_dilation <= 0) fail("bridge dilation must be positive");
}

std::vector<BlockSpec> block_layout(const ModelConfig& c) {
  c.validate();
  const int f = c.base_filters;
  return {
      {"down0", BlockKind::standard, c.down_dilations[0], c.input_channels, f},
      {"down1", BlockKind::residual, c.down_dilations[1], f, f},
      {"down2", BlockKind::residual, c.down_dilations[2], f, f},
      {"bridge", BlockKind::residual, c.bridge_dilation, f, f},
      {"up0", BlockKind::residual, c.up_dilations[0], 2 * f, f},
      {"up1", BlockKind::residual, c.up_dilations[1], 2 * f, f},
      {"up2", BlockKind::standard, c.up_dilations[2], 2 * f, f},
  };
}

template <typename T>
std::size_t ParameterStore<T>::add(std::string name, Tensor<T> init) {
  for (const auto& n : names_)
    if (n == name) throw std::logic_error("duplicate parameter name " + name);
  names_.push_back(std::move(name));
  params_.emplace_back(std::move(init));
  return params_.size() - 1;
}

template <typename T>
std::size_t ParameterStore<T>::add_norm(std::string name, int channels) {
  norm_names_.push_back(std::move(name));
  norms_.emplace_back(channels);
  return norms_.size() - 1;
}

template <typename T>
Parameter<T>* ParameterStore<T>::find(std::string_view name) {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return &params_[i];
  return nullptr;
}

template <typename T>
std::size_t ParameterStore<T>::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

template <typename T>
void ParameterStore<T>::zero_grads() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
Drunet<T>::Drunet(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  for (const BlockSpec& spec : block_layout(config_)) {
    Block b;
    b.spec = spec;
    b.conv1 = make_conv(spec.name + ".conv1", spec.in_channels, spec.out_channels, 3, spec.dilation, rng);
    b.bn1 = make_norm(spec.name + ".bn1", spec.out_channels);
    b.conv2 = make_conv(spec.name + ".conv2", spec.out_channels, spec.out_channels, 3, spec.dilation, rng);
    b.bn2 = make_norm(spec.name + ".bn2", spec.out_channels);
    if (spec.kind == BlockKind::residual) {
      b.proj = make_conv(spec.name + ".proj", spec.in_channels, spec.out_channels, 1, 1, rng);
      b.proj_bn = make_norm(spec.name + ".proj_bn", spec.out_channels);
    }
    blocks_.push_back(std::move(b));
  }
  head_ = make_conv("head", config_.base_filters, config_.n_classes, 1, 1, rng);
}

// He-normal weights (sd = sqrt(2 / fan_in)), zero bias.
template <typename T>
typename Drunet<T>::Conv Drunet<T>::make_conv(const std::string& name, int in, int out, int k,
                                              int dilation, std::mt19937_64& rng) {
  Tensor<T> w(Shape{out, in, k, k});
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (in * k * k)));
  for (auto& v : w.values()) v = static_cast<T>(normal(rng));
  Conv c;
  c.weight = store_.add(name + ".weight", std::move(w));
  c.bias = store_.add(name + ".bias", Tensor<T>(Shape{out}));
  c.dilation = dilation;
  return c;
}

template <typename T>
typename Drunet<T>::Norm Drunet<T>::make_norm(const std::string& name, int channels) {
  Norm n;
  n.gamma = store_.add(name + ".gamma", Tensor<T>(Shape{channels}, T(1)));
  n.beta = store_.add(name + ".beta", Tensor<T>(Shape{channels}));
  n.state = store_.add_norm(name, channels);
  return n;
}

template <typename T>
Var<T> Drunet<T>::bind(Tape<T>& tape, std::size_t index, bool track) {
  Parameter<T>& p = store_.at(index);
  return track ? tape.parameter(p) : tape.constant(p.value);
}

template <typename T>
Var<T> Drunet<T>::run_block(Tape<T>& tape, const Block& b, Var<T> x, Mode mode, bool track) {
  auto conv_bn_elu = [&](Var<T> in, const Conv& c, const Norm& n) {
    Var<T> y = conv2d(in, bind(tape, c.weight, track), bind(tape, c.bias, track), c.dilation);
    y = batch_norm(y, bind(tape, n.gamma, track), bind(tape, n.beta, track), store_.norm(n.state), mode,
                   bn_options_);
    return elu(y);
  };
  Var<T> h = conv_bn_elu(x, b.conv1, b.bn1);
  h = conv_bn_elu(h, b.conv2, b.bn2);
  if (b.spec.kind == BlockKind::residual) {
    Var<T> s = conv_bn_elu(x, *b.proj, *b.proj_bn);
    h = add(h, s);
  }
  return h;
}

template <typename T>
ForwardTrace<T> Drunet<T>::forward_trace(Tape<T>& tape, Var<T> image, Mode mode, bool track) {
  const auto [n, c, h, w] = nchw(image.value(), "drunet forward");
  if (c != config_.input_channels) {
    throw ShapeError("drunet forward: expected " + std::to_string(config_.input_channels) +
                     " input channels, got " + std::to_string(c));
  }
  if (h % 8 != 0 || w % 8 != 0) {
    throw std::invalid_argument("drunet forward: input " + std::to_string(h) + "x" + std::to_string(w) +
                                " is not divisible by 8 in both dimensions");
  }
  (void)n;
  ForwardTrace<T> t;
  Var<T> x = image;
  for (int i = 0; i < 3; ++i) {
    t.skips[static_cast<std::size_t>(i)] = run_block(tape, blocks_[static_cast<std::size_t>(i)], x, mode, track);
    x = maxpool2x2(t.skips[static_cast<std::size_t>(i)]);
  }
  t.bridge = run_block(tape, blocks_[3], x, mode, track);
  x = t.bridge;
  for (int i = 0; i < 3; ++i) {
    x = concat_channels(upsample2x2(x), t.skips[static_cast<std::size_t>(2 - i)]);
    x = run_block(tape, blocks_[static_cast<std::size_t>(4 + i)], x, mode, track);
  }
  t.logits = conv1x1(x, bind(tape, head_.weight, track), bind(tape, head_.bias, track));
  t.probs = softmax_channels(t.logits);
  return t;
}

template <typename T>
Var<T> Drunet<T>::forward(Tape<T>& tape, Var<T> image, Mode mode, bool track_grads) {
  return forward_trace(tape, image, mode, track_grads).probs;
}

template <typename T>
Tensor<T> Drunet<T>::infer(const Tensor<T>& image) {
  Tape<T> tape;
  return forward(tape, tape.constant(image), Mode::infer, false).value();
}

template <typename T>
std::vector<LayerInfo> Drunet<T>::layer_table() const {
  std::vector<LayerInfo> rows;
  auto conv_params = [&](const Conv& c) { return store_.at(c.weight).value.numel() + store_.at(c.bias).value.numel(); };
  auto norm_params = [&](const Norm& n) { return store_.at(n.gamma).value.numel() + store_.at(n.beta).value.numel(); };
  for (const Block& b : blocks_) {
    const std::string kind = b.spec.kind == BlockKind::residual ? "residual" : "standard";
    std::size_t p = conv_params(b.conv1) + conv_params(b.conv2) + norm_params(b.bn1) + norm_params(b.bn2);
    if (b.proj) p += conv_params(*b.proj) + norm_params(*b.proj_bn);
    rows.push_back({b.spec.name, kind, b.spec.dilation, b.spec.in_channels, b.spec.out_channels, p});
  }
  rows.push_back({"head", "conv1x1+softmax", 1, config_.base_filters, config_.n_classes, conv_params(head_)});
  return rows;
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class Drunet<float>;
template class Drunet<double>;

}  // namespace drunet
