#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "knitpat/model/classifier.hpp"

namespace knitpat {

enum class OptimizerKind : std::uint8_t { kAdam, kSgd, kRmsprop, kNadam };

std::string_view to_string(OptimizerKind kind);
std::optional<OptimizerKind> parse_optimizer(std::string_view text);

/// First-order optimizers with Keras default hyperparameters
/// (beta1 0.9, beta2 0.999, rho 0.9, epsilon 1e-7, no SGD momentum).
/// Frozen parameters are never written.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate);

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return learning_rate_; }
  std::uint64_t iterations() const { return iterations_; }

  void step(const std::vector<ParameterView>& params, const Gradients& grads);

 private:
  OptimizerKind kind_;
  double learning_rate_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double rho_ = 0.9;
  double epsilon_ = 1e-7;
  std::uint64_t iterations_ = 0;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
};

}  // namespace knitpat
