#include "knitpat/train/early_stopping.hpp"

#include <algorithm>
#include <stdexcept>

namespace knitpat {

EarlyStopping::EarlyStopping(std::size_t patience, double min_delta)
    : patience_(patience), min_delta_(min_delta) {
  if (!(min_delta >= 0.0)) throw std::invalid_argument("min_delta must be >= 0");
}

EarlyStopping::Step EarlyStopping::observe(double value) {
  if (stopped_) throw std::logic_error("EarlyStopping::observe after stop");
  Step step;
  ++epochs_;
  if (value < best_value_) {
    best_value_ = value;
    best_epoch_ = epochs_;
    step.new_best = true;
  }
  if (value < reference_ - min_delta_) {
    reference_ = value;
    wait_ = 0;
    step.improved = true;
  } else {
    ++wait_;
    if (wait_ >= patience_) {
      stopped_ = true;
      step.stop = true;
    }
  }
  return step;
}

StoppingOutcome simulate_early_stopping(std::span<const double> values, std::size_t patience,
                                        double min_delta, std::size_t max_epochs) {
  EarlyStopping es(patience, min_delta);
  StoppingOutcome out;
  const std::size_t n = std::min(values.size(), max_epochs);
  for (std::size_t i = 0; i < n; ++i) {
    if (es.observe(values[i]).stop) {
      out.stopped_early = i + 1 < max_epochs;
      break;
    }
  }
  out.epochs_run = es.epochs_seen();
  out.best_epoch = es.best_epoch();
  return out;
}

}  // namespace knitpat
