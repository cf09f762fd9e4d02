#include "knitpat/train/config.hpp"

#include <cmath>
#include <stdexcept>

namespace knitpat {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("train.max_epochs must be >= 1");
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
    throw std::invalid_argument("train.learning_rate must be finite and >= 0");
  }
  if (early_stopping.monitor != "val_loss") {
    throw std::invalid_argument("train.monitor must be val_loss, got '" +
                                early_stopping.monitor + "'");
  }
  if (!std::isfinite(early_stopping.min_delta) || early_stopping.min_delta < 0.0) {
    throw std::invalid_argument("train.min_delta must be finite and >= 0");
  }
}

TrainConfig TrainConfig::comparison_preset() {
  TrainConfig cfg;
  cfg.learning_rate = 1e-5;
  cfg.max_epochs = 2;
  cfg.use_class_weights = false;
  return cfg;
}

}  // namespace knitpat
