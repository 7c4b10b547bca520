#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "drunet/augment.hpp"
#include "drunet/dataset.hpp"
#include "drunet/metrics.hpp"
#include "drunet/model.hpp"

namespace drunet {

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double lr0 = 0.1;
  double momentum = 0.9;
  int plateau_patience = 2;
  double lr_halving_factor = 0.5;
  double improvement_delta = 1e-6;
  /// Training stops once the learning rate drops below this.
  double lr_floor = 1e-4;
  int epochs = 100;
  int batch_size = 1;
  /// Stop after this many optimizer steps; 0 means no cap.
  int max_steps = 0;
  std::uint64_t seed = 0;
  bool augment = true;
  AugmentConfig augmentation;
  /// Receives best.ckpt and history.tsv; empty disables file output.
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

struct LrSchedule {
  double lr = 0.1;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int streak = 0;
  int halvings = 0;
};

/// Feeds one epoch's validation loss. Returns true when it counts as an
/// improvement (val < best - delta). `patience` consecutive non-improving
/// epochs multiply the rate by `factor` and reset the streak.
bool lr_schedule_step(LrSchedule& s, double val_loss, int epoch, const TrainConfig& config);

/// Nesterov momentum, velocity form:
///   v <- mu v - lr g;  theta <- theta + mu v - lr g
/// then zeroes the gradients. Throws NonFiniteError on a non-finite gradient
/// before touching any parameter.
void sgd_nesterov_step(ParameterStore<float>& params, std::vector<Tensor<float>>& velocity, double lr, double momentum);

struct TrainState {
  std::vector<Tensor<float>> velocity;
  LrSchedule schedule;
  int epoch = 0;
  long step = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool checkpointed = false;
};

/// "epoch<TAB>lr<TAB>train_loss<TAB>val_loss<TAB>checkpoint(0|1)"
std::string format_history_line(const EpochRecord& r);

struct TrainResult {
  std::vector<EpochRecord> history;
  std::filesystem::path best_checkpoint;
  std::filesystem::path history_path;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  long steps = 0;
  double last_step_loss = 0.0;
  bool stopped_at_lr_floor = false;
  bool stopped_at_max_steps = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(Drunet<float>& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Mean per-image loss in inference mode.
double evaluate_loss(Drunet<float>& model, const std::vector<Sample>& samples);

/// Predicted class map for one sample (inference mode).
LabelMap predict(Drunet<float>& model, const Sample& sample);

/// Per-image metrics and loss for every sample, grouped by group tag.
MetricsReport evaluate_model(Drunet<float>& model, const std::vector<Sample>& samples,
                             std::span<const int> classes = kQuantifiedClasses);
/// Same, for precomputed predictions parallel to `samples`.
MetricsReport evaluate_predictions(const std::vector<LabelMap>& predictions, const std::vector<Sample>& samples,
                                   std::span<const int> classes = kQuantifiedClasses);

}  // namespace drunet
