#pragma once

// Per-sequence training loop: adjust features, forward with dropout,
// condition and project, Huber loss, backward, Adam step.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "gruface/adam.hpp"
#include "gruface/backward.hpp"
#include "gruface/loss.hpp"
#include "gruface/model.hpp"

namespace gruface {

struct DatasetItem {
  std::string name;
  FeatureSequence features;
  int subject = 0;
  int emotion = 0;
  TemplateFace face;
  MeshSequence target;
};

struct Dataset {
  std::vector<DatasetItem> items;
  std::vector<std::string> subject_labels;
  std::vector<std::string> emotion_labels;
};

struct TrainConfig {
  int epochs = 100;
  AdamConfig adam;
  double huber_delta = 1.0;
  double dropout = 0.3;
  std::uint64_t seed = 0;
  double train_fraction = 0.90;
  double val_fraction = 0.05;
  double test_fraction = 0.05;
  CellKind cell = CellKind::gru;
  int hidden_size = 256;
  int num_layers = 2;

  void validate() const {
    require(epochs >= 0, ErrorCode::invalid_config, "epochs must be non-negative");
    require(adam.learning_rate > 0.0 && adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 &&
                adam.beta2 < 1.0 && adam.epsilon > 0.0,
            ErrorCode::invalid_config, "invalid Adam hyperparameters");
    require(huber_delta > 0.0, ErrorCode::invalid_config, "Huber delta must be positive");
    require(train_fraction >= 0.0 && val_fraction >= 0.0 && test_fraction >= 0.0 &&
                std::abs(train_fraction + val_fraction + test_fraction - 1.0) < 1e-9,
            ErrorCode::invalid_config, "split fractions must be non-negative and sum to 1");
  }
};

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> seeded_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  return order;
}

/// Seeded shuffle, then contiguous train/val/test blocks. Validation and
/// test sizes are rounded from their fractions; training takes the rest.
inline DatasetSplit split_dataset(std::size_t count, double train_fraction, double val_fraction,
                                  double test_fraction, std::uint64_t seed) {
  require(count > 0, ErrorCode::empty_dataset, "cannot split an empty dataset");
  require(train_fraction >= 0.0 && val_fraction >= 0.0 && test_fraction >= 0.0 &&
              std::abs(train_fraction + val_fraction + test_fraction - 1.0) < 1e-9,
          ErrorCode::invalid_config, "split fractions must be non-negative and sum to 1");
  Rng rng(seed);
  const auto order = seeded_permutation(count, rng);
  const auto n = static_cast<double>(count);
  auto n_val = static_cast<std::size_t>(std::llround(n * val_fraction));
  auto n_test = static_cast<std::size_t>(std::llround(n * test_fraction));
  n_val = std::min(n_val, count);
  n_test = std::min(n_test, count - n_val);
  const std::size_t n_train = count - n_val - n_test;
  DatasetSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                   order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return split;
}

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  ModelParams final_params;
  ModelParams best_params;
  int best_epoch = 0;
  DatasetSplit split;
  std::vector<EpochLog> log;
};

/// Model shape implied by a dataset and training configuration.
inline ModelConfig model_config_for(const Dataset& data, const TrainConfig& config) {
  require(!data.items.empty(), ErrorCode::empty_dataset, "dataset has no items");
  const DatasetItem& first = data.items.front();
  const FrameRatio ratio = frame_ratio(first.features.fps, first.target.fps);
  ModelConfig mc;
  mc.cell = config.cell;
  mc.hidden_size = config.hidden_size;
  mc.num_layers = config.num_layers;
  mc.input_width = ratio.k_ceil * static_cast<int>(first.features.width());
  mc.num_vertices = static_cast<int>(first.face.num_vertices());
  mc.num_subjects = static_cast<int>(data.subject_labels.size());
  mc.num_emotions = static_cast<int>(data.emotion_labels.size());
  mc.dropout_rate = config.dropout;
  mc.validate();
  return mc;
}

/// Adjusted features for every item, checked against the model shape.
inline std::vector<AdjustedFeatures> adjust_dataset(const Dataset& data, const ModelConfig& mc) {
  std::vector<AdjustedFeatures> adjusted;
  adjusted.reserve(data.items.size());
  for (const auto& item : data.items) {
    validate(item.features);
    validate(item.target);
    validate(item.face);
    require(item.target.num_vertices() == mc.num_vertices && item.face.num_vertices() == mc.num_vertices,
            ErrorCode::shape_mismatch, item.name + ": vertex count differs from the dataset topology");
    require(item.subject >= 0 && item.subject < mc.num_subjects && item.emotion >= 0 &&
                item.emotion < mc.num_emotions,
            ErrorCode::unknown_label, item.name + ": label index outside the vocabulary");
    adjusted.push_back(input_representation_adjustment(item.features, item.target.fps, item.target.num_frames()));
    require(adjusted.back().width() == mc.input_width, ErrorCode::shape_mismatch,
            item.name + ": adjusted feature width " + std::to_string(adjusted.back().width()) +
                " differs from model input width " + std::to_string(mc.input_width));
  }
  return adjusted;
}

inline double evaluation_loss(const ModelParams& params, const Dataset& data,
                              const std::vector<AdjustedFeatures>& adjusted, const std::vector<std::size_t>& indices,
                              double delta) {
  if (indices.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (std::size_t i : indices) {
    const auto& item = data.items[i];
    const auto tape = forward(params, adjusted[i], item.subject, item.emotion, item.face, item.target.fps, false, nullptr);
    total += huber_loss(tape.prediction, item.target, delta).value;
  }
  return total / static_cast<double>(indices.size());
}

/// One Adam update on a single sequence; returns the training loss.
inline double train_step(ModelParams& params, AdamState& adam, const DatasetItem& item,
                         const AdjustedFeatures& features, double delta, Rng& rng) {
  const auto tape = forward(params, features, item.subject, item.emotion, item.face, item.target.fps, true, &rng);
  const auto loss = huber_loss(tape.prediction, item.target, delta);
  if (!std::isfinite(loss.value)) {
    fail(ErrorCode::divergence, item.name + ": training loss became non-finite at optimizer step " +
                                    std::to_string(adam.step + 1));
  }
  adam_step(adam, params, backward(params, tape, loss.gradient));
  return loss.value;
}

struct TrainCallbacks {
  std::function<void(const EpochLog&)> on_epoch;
};

/// Trains from `init_params(model_config_for(data, config), seed)`. The
/// training order is reshuffled every epoch; everything random derives from
/// `config.seed`.
inline TrainResult train(const Dataset& data, const TrainConfig& config, const TrainCallbacks& callbacks = {}) {
  config.validate();
  const ModelConfig mc = model_config_for(data, config);
  const auto adjusted = adjust_dataset(data, mc);

  Rng seeds(config.seed);
  const std::uint64_t init_seed = seeds();
  const std::uint64_t split_seed = seeds();
  Rng rng(seeds());

  TrainResult result;
  result.split = split_dataset(data.items.size(), config.train_fraction, config.val_fraction, config.test_fraction,
                               split_seed);
  require(!result.split.train.empty(), ErrorCode::empty_dataset, "training split is empty");
  result.final_params = init_params(mc, init_seed);
  result.best_params = result.final_params;

  AdamState adam = AdamState::fresh(result.final_params, config.adam);
  double best_val = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = seeded_permutation(result.split.train.size(), rng);
    double total = 0.0;
    for (std::size_t pos : order) {
      const std::size_t i = result.split.train[pos];
      total += train_step(result.final_params, adam, data.items[i], adjusted[i], config.huber_delta, rng);
    }
    EpochLog entry{epoch, total / static_cast<double>(order.size()),
                   evaluation_loss(result.final_params, data, adjusted, result.split.val, config.huber_delta)};
    // Without a validation split the latest parameters count as best.
    const double score = std::isnan(entry.val_loss) ? -static_cast<double>(epoch) : entry.val_loss;
    if (score < best_val) {
      best_val = score;
      result.best_params = result.final_params;
      result.best_epoch = epoch;
    }
    result.log.push_back(entry);
    if (callbacks.on_epoch) callbacks.on_epoch(entry);
  }
  return result;
}

inline std::string loss_log_csv(const std::vector<EpochLog>& log) {
  std::string csv = "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const auto& e : log) {
    if (std::isnan(e.val_loss)) {
      std::snprintf(buf, sizeof buf, "%d,%.9e,\n", e.epoch, e.train_loss);
    } else {
      std::snprintf(buf, sizeof buf, "%d,%.9e,%.9e\n", e.epoch, e.train_loss, e.val_loss);
    }
    csv += buf;
  }
  return csv;
}

}  // namespace gruface
