#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "knitpat/model/optimizer.hpp"

namespace knitpat {

struct EarlyStoppingConfig {
  std::string monitor = "val_loss";  // the only supported monitor
  std::size_t patience = 10;
  double min_delta = 0.001;
  bool restore_best = true;

  friend bool operator==(const EarlyStoppingConfig&, const EarlyStoppingConfig&) = default;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_epochs = 25;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 0.001;
  bool use_class_weights = true;
  EarlyStoppingConfig early_stopping;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  /// Settings of the backbone comparison runs: lr 1e-5, 2 epochs, unweighted.
  static TrainConfig comparison_preset();

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

}  // namespace knitpat
