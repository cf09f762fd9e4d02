#pragma once

#include <cstddef>
#include <limits>
#include <span>

namespace knitpat {

/// Patience counter over a monitored value that should decrease.
///
/// An epoch improves when its value is below the last improving value by
/// more than min_delta; otherwise the wait counter grows and training stops
/// once it reaches patience. Independently, the best epoch is the first
/// epoch holding the minimum value seen so far. Epochs are 1-based.
class EarlyStopping {
 public:
  struct Step {
    bool improved = false;  // reset the patience counter
    bool new_best = false;  // strictly below every earlier value
    bool stop = false;
  };

  EarlyStopping(std::size_t patience, double min_delta);

  Step observe(double value);

  std::size_t epochs_seen() const { return epochs_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_value() const { return best_value_; }
  std::size_t wait() const { return wait_; }
  bool stopped() const { return stopped_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double reference_ = std::numeric_limits<double>::infinity();
  double best_value_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t epochs_ = 0;
  std::size_t wait_ = 0;
  bool stopped_ = false;
};

struct StoppingOutcome {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

/// Feeds `values` (one per epoch, at most max_epochs used) through EarlyStopping.
StoppingOutcome simulate_early_stopping(std::span<const double> values, std::size_t patience,
                                        double min_delta, std::size_t max_epochs);

}  // namespace knitpat
