#include "drunet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "drunet/checkpoint.hpp"
#include "drunet/loss.hpp"
#include "drunet/rng.hpp"

namespace drunet {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw std::invalid_argument("lr0 must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (plateau_patience < 1) throw std::invalid_argument("plateau_patience must be at least 1");
  if (!(lr_halving_factor > 0.0 && lr_halving_factor < 1.0)) {
    throw std::invalid_argument("lr_halving_factor must be in (0, 1)");
  }
  if (!(improvement_delta >= 0.0)) throw std::invalid_argument("improvement_delta must be non-negative");
  if (!(lr_floor >= 0.0)) throw std::invalid_argument("lr_floor must be non-negative");
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (max_steps < 0) throw std::invalid_argument("max_steps must be non-negative");
  augmentation.validate();
}

bool lr_schedule_step(LrSchedule& s, double val_loss, int epoch, const TrainConfig& c) {
  if (val_loss < s.best - c.improvement_delta) {
    s.best = val_loss;
    s.best_epoch = epoch;
    s.streak = 0;
    return true;
  }
  if (++s.streak >= c.plateau_patience) {
    s.lr *= c.lr_halving_factor;
    ++s.halvings;
    s.streak = 0;
  }
  return false;
}

void sgd_nesterov_step(ParameterStore<float>& params, std::vector<Tensor<float>>& velocity, double lr,
                       double momentum) {
  if (velocity.size() != params.size()) {
    velocity.clear();
    for (std::size_t i = 0; i < params.size(); ++i) velocity.emplace_back(params.at(i).value.shape());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params.at(i).grad.all_finite()) {
      throw NonFiniteError("non-finite gradient in " + params.name(i));
    }
    if (velocity[i].shape() != params.at(i).value.shape()) {
      throw ShapeError("velocity for " + params.name(i) + " has the wrong shape");
    }
  }
  const float mu = static_cast<float>(momentum), a = static_cast<float>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.at(i);
    float* th = p.value.data();
    float* v = velocity[i].data();
    const float* g = p.grad.data();
    for (std::size_t k = 0, n = p.value.numel(); k < n; ++k) {
      v[k] = mu * v[k] - a * g[k];
      th[k] += mu * v[k] - a * g[k];
    }
    p.zero_grad();
  }
}

std::string format_history_line(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d\t%.9g\t%.9g\t%.9g\t%d", r.epoch, r.lr, r.train_loss, r.val_loss,
                r.checkpointed ? 1 : 0);
  return buf;
}

namespace {

double sample_loss(Drunet<float>& model, const Sample& s) {
  const Sample* one[] = {&s};
  Tape<float> tape;
  auto probs = model.forward(tape, tape.constant(batch_images(one)), Mode::infer, false);
  return jaccard_loss(probs, one_hot<float>(batch_labels(one))).value().item();
}

}  // namespace

double evaluate_loss(Drunet<float>& model, const std::vector<Sample>& samples) {
  if (samples.empty()) throw TrainError("evaluate_loss: empty sample set");
  double total = 0.0;
  for (const auto& s : samples) total += sample_loss(model, s);
  return total / static_cast<double>(samples.size());
}

LabelMap predict(Drunet<float>& model, const Sample& sample) {
  const Sample* one[] = {&sample};
  return predict_classes(model.infer(batch_images(one)));
}

MetricsReport evaluate_predictions(const std::vector<LabelMap>& predictions, const std::vector<Sample>& samples,
                                   std::span<const int> classes) {
  if (predictions.size() != samples.size()) throw std::invalid_argument("one prediction per sample is required");
  std::vector<ImageMetrics> images;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    images.push_back(evaluate_image(predictions[i], samples[i].labels, classes, samples[i].id,
                                    std::string(group_name(samples[i].group))));
  }
  return build_report({classes.begin(), classes.end()}, std::move(images));
}

MetricsReport evaluate_model(Drunet<float>& model, const std::vector<Sample>& samples, std::span<const int> classes) {
  std::vector<ImageMetrics> images;
  for (const auto& s : samples) {
    const Sample* one[] = {&s};
    Tensor<float> probs = model.infer(batch_images(one));
    Tape<float> tape;
    const double loss = jaccard_loss(tape.constant(probs), one_hot<float>(s.labels)).value().item();
    auto m = evaluate_image(predict_classes(probs), s.labels, classes, s.id, std::string(group_name(s.group)));
    m.loss = loss;
    images.push_back(std::move(m));
  }
  return build_report({classes.begin(), classes.end()}, std::move(images));
}

TrainResult train(Drunet<float>& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw TrainError("training set is empty");
  if (val_set.empty()) throw TrainError("validation set is empty");
  for (const auto& s : train_set) validate_sample(s);
  for (const auto& s : val_set) validate_sample(s);

  TrainResult result;
  TrainState st;
  st.schedule.lr = config.lr0;
  std::ofstream history;
  if (!config.checkpoint_dir.empty()) {
    std::filesystem::create_directories(config.checkpoint_dir);
    result.best_checkpoint = config.checkpoint_dir / "best.ckpt";
    result.history_path = config.checkpoint_dir / "history.tsv";
    history.open(result.history_path, std::ios::trunc);
    if (!history) throw TrainError("cannot open " + result.history_path.string());
  }

  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    st.epoch = epoch;
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng shuffle_rng(RngKey{config.seed, 0x5EEDull, static_cast<std::uint64_t>(epoch)}, 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    const double lr = st.schedule.lr;
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::vector<Sample> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + bs); ++k) {
        const Sample& s = train_set[order[k]];
        if (config.augment) {
          batch.push_back(augment_sample(s, config.augmentation,
                                         RngKey::of(config.seed, s.id, static_cast<std::uint64_t>(epoch))));
        } else {
          batch.push_back(s);
        }
      }
      std::vector<const Sample*> ptrs;
      for (const auto& s : batch) ptrs.push_back(&s);

      Tape<float> tape;
      auto probs = model.forward(tape, tape.constant(batch_images(ptrs)), Mode::train);
      auto loss = jaccard_loss(probs, one_hot<float>(batch_labels(ptrs)));
      const double lv = loss.value().item();
      if (!std::isfinite(lv)) throw TrainError("non-finite training loss at epoch " + std::to_string(epoch));
      tape.backward(loss);
      try {
        sgd_nesterov_step(model.parameters(), st.velocity, lr, config.momentum);
      } catch (const NonFiniteError& e) {
        throw TrainError("aborting epoch " + std::to_string(epoch) + ": " + e.what());
      }
      loss_sum += lv;
      ++batches;
      ++st.step;
      result.last_step_loss = lv;
      if (config.max_steps > 0 && st.step >= config.max_steps) break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / batches;
    rec.val_loss = evaluate_loss(model, val_set);
    rec.checkpointed = lr_schedule_step(st.schedule, rec.val_loss, epoch, config);
    if (rec.checkpointed) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      if (!result.best_checkpoint.empty()) save_checkpoint(model, result.best_checkpoint);
    }
    result.history.push_back(rec);
    if (history.is_open()) {
      history << format_history_line(rec) << '\n';
      history.flush();
    }
    if (on_epoch) on_epoch(rec);

    if (config.max_steps > 0 && st.step >= config.max_steps) {
      result.stopped_at_max_steps = true;
      break;
    }
    if (st.schedule.lr < config.lr_floor) {
      result.stopped_at_lr_floor = true;
      break;
    }
  }
  result.steps = st.step;
  return result;
}

}  // namespace drunet
