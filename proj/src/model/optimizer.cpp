#include "knitpat/model/optimizer.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace knitpat {

namespace {
constexpr std::array<std::string_view, 4> kNames = {"adam", "sgd", "rmsprop", "nadam"};
}

std::string_view to_string(OptimizerKind kind) { return kNames[static_cast<std::size_t>(kind)]; }

std::optional<OptimizerKind> parse_optimizer(std::string_view text) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == text) return static_cast<OptimizerKind>(i);
  }
  return std::nullopt;
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate)
    : kind_(kind), learning_rate_(learning_rate) {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning rate must be finite and >= 0");
  }
}

void Optimizer::step(const std::vector<ParameterView>& params, const Gradients& grads) {
  if (grads.size() != params.size()) {
    throw ModelError("optimizer received " + std::to_string(grads.size()) +
                     " gradients for " + std::to_string(params.size()) + " parameters");
  }
  if (first_moment_.empty()) {
    first_moment_.resize(params.size());
    second_moment_.resize(params.size());
  }
  ++iterations_;
  const double t = static_cast<double>(iterations_);
  const double bias1 = 1.0 - std::pow(beta1_, t);
  const double bias2 = 1.0 - std::pow(beta2_, t);
  const double bias1_next = 1.0 - std::pow(beta1_, t + 1.0);

  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].trainable || grads[p].empty()) continue;
    const auto values = params[p].values;
    const auto& g = grads[p];
    if (g.size() != values.size()) {
      throw ModelError("gradient size mismatch for " + params[p].name);
    }
    auto& m = first_moment_[p];
    auto& v = second_moment_[p];
    if (m.empty()) {
      m.assign(values.size(), 0.0);
      v.assign(values.size(), 0.0);
    }
    switch (kind_) {
      case OptimizerKind::kSgd:
        for (std::size_t i = 0; i < values.size(); ++i) values[i] -= learning_rate_ * g[i];
        break;
      case OptimizerKind::kRmsprop:
        for (std::size_t i = 0; i < values.size(); ++i) {
          v[i] = rho_ * v[i] + (1.0 - rho_) * g[i] * g[i];
          values[i] -= learning_rate_ * g[i] / (std::sqrt(v[i]) + epsilon_);
        }
        break;
      case OptimizerKind::kAdam: {
        const double step = learning_rate_ * std::sqrt(bias2) / bias1;
        for (std::size_t i = 0; i < values.size(); ++i) {
          m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
          v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
          values[i] -= step * m[i] / (std::sqrt(v[i]) + epsilon_);
        }
        break;
      }
      case OptimizerKind::kNadam:
        for (std::size_t i = 0; i < values.size(); ++i) {
          m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
          v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
          const double m_hat = beta1_ * m[i] / bias1_next + (1.0 - beta1_) * g[i] / bias1;
          const double v_hat = v[i] / bias2;
          values[i] -= learning_rate_ * m_hat / (std::sqrt(v_hat) + epsilon_);
        }
        break;
    }
  }
}

}  // namespace knitpat
