#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "drunet/autodiff.hpp"
#include "drunet/labels.hpp"
#include "drunet/nn_ops.hpp"

namespace drunet {

/// Architecture of the dilated-residual U-Net. The tower shape is fixed
/// (3 down blocks, a bridge, 3 up blocks); only widths and dilations vary.
struct ModelConfig {
  int input_channels = 1;
  int n_classes = kNumClasses;
  int base_filters = 16;
  std::array<int, 3> down_dilations{1, 2, 4};
  int bridge_dilation = 8;
  std::array<int, 3> up_dilations{4, 2, 1};

  /// Throws std::invalid_argument on a config the network cannot be built from.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class BlockKind { standard, residual };

/// Two 3x3 dilated convs, each followed by batch norm + ELU. A residual block
/// adds a 1x1 projection of its input, itself batch-normalized and ELU'd.
struct BlockSpec {
  std::string name;
  BlockKind kind = BlockKind::standard;
  int dilation = 1;
  int in_channels = 0;
  int out_channels = 0;
};

/// down0 (standard) -> down1, down2 (residual) -> bridge (residual) ->
/// up0, up1 (residual) -> up2 (standard). Up blocks see the upsampled
/// previous output concatenated with the matching down-block output.
std::vector<BlockSpec> block_layout(const ModelConfig& config);

/// Ordered name -> tensor store. Iteration order is insertion order, which
/// follows the forward pass; optimizer state relies on it.
template <typename T>
class ParameterStore {
 public:
  std::size_t add(std::string name, Tensor<T> init);
  std::size_t add_norm(std::string name, int channels);

  std::size_t size() const noexcept { return params_.size(); }
  Parameter<T>& at(std::size_t i) { return params_.at(i); }
  const Parameter<T>& at(std::size_t i) const { return params_.at(i); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Parameter<T>* find(std::string_view name);

  std::size_t norm_count() const noexcept { return norms_.size(); }
  BatchNormState<T>& norm(std::size_t i) { return norms_.at(i); }
  const BatchNormState<T>& norm(std::size_t i) const { return norms_.at(i); }
  const std::string& norm_name(std::size_t i) const { return norm_names_.at(i); }

  /// Number of trainable scalars.
  std::size_t trainable_count() const;
  void zero_grads();

 private:
  std::vector<std::string> names_;
  std::vector<Parameter<T>> params_;
  std::vector<std::string> norm_names_;
  std::vector<BatchNormState<T>> norms_;
};

struct LayerInfo {
  std::string name;
  std::string kind;
  int dilation = 1;
  int in_channels = 0;
  int out_channels = 0;
  std::size_t parameters = 0;
};

/// Intermediate outputs of one forward pass.
template <typename T>
struct ForwardTrace {
  std::array<Var<T>, 3> skips;  // down-block outputs before pooling
  Var<T> bridge;
  Var<T> logits;
  Var<T> probs;
};

template <typename T>
class Drunet {
 public:
  explicit Drunet(ModelConfig config = {}, std::uint64_t seed = 0);

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore<T>& parameters() noexcept { return store_; }
  const ParameterStore<T>& parameters() const noexcept { return store_; }
  std::size_t trainable_parameter_count() const { return store_.trainable_count(); }

  /// [N, input_channels, H, W] -> per-pixel class probabilities
  /// [N, n_classes, H, W]. H and W must be multiples of 8. With
  /// `track_grads`, parameters enter the tape as gradient-accumulating leaves.
  Var<T> forward(Tape<T>& tape, Var<T> image, Mode mode, bool track_grads = true);
  ForwardTrace<T> forward_trace(Tape<T>& tape, Var<T> image, Mode mode, bool track_grads = true);

  /// Inference-mode probabilities without gradient bookkeeping.
  Tensor<T> infer(const Tensor<T>& image);

  std::vector<LayerInfo> layer_table() const;

 private:
  struct Conv {
    std::size_t weight = 0, bias = 0;
    int dilation = 1;
  };
  struct Norm {
    std::size_t gamma = 0, beta = 0, state = 0;
  };
  struct Block {
    BlockSpec spec;
    Conv conv1, conv2;
    Norm bn1, bn2;
    std::optional<Conv> proj;
    std::optional<Norm> proj_bn;
  };

  Conv make_conv(const std::string& name, int in, int out, int k, int dilation, std::mt19937_64& rng);
  Norm make_norm(const std::string& name, int channels);
  Var<T> run_block(Tape<T>& tape, const Block& b, Var<T> x, Mode mode, bool track);
  Var<T> bind(Tape<T>& tape, std::size_t index, bool track);

  ModelConfig config_;
  ParameterStore<T> store_;
  std::vector<Block> blocks_;
  Conv head_;
  BatchNormOptions bn_options_;
};

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;
extern template class Drunet<float>;
extern template class Drunet<double>;

}  // namespace drunet
