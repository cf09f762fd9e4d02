#pragma once

// Model helpers shared by the unit and acceptance tests. The loss here is
// written out independently of the trainer's.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "knitpat/model/classifier.hpp"

namespace knitpat::fixtures {

inline std::vector<ImageTensor> random_batch(std::size_t n, std::uint64_t seed,
                                             std::size_t size = 224) {
  RandomStream rng(seed);
  std::vector<ImageTensor> batch;
  for (std::size_t i = 0; i < n; ++i) {
    ImageTensor img(size, size, 3);
    for (float& v : img.values()) v = static_cast<float>(rng.next_unit());
    batch.push_back(std::move(img));
  }
  return batch;
}

inline ClassifierSpec stub_spec(std::size_t feature_dim, std::vector<std::size_t> widths,
                                std::size_t classes, FreezePolicy freeze) {
  ClassifierSpec spec;
  spec.backbone = stub_backbone_spec(feature_dim);
  spec.head.widths = std::move(widths);
  spec.head.num_classes = classes;
  spec.freeze = freeze;
  return spec;
}

// Independent weighted cross-entropy on probabilities.
inline double cross_entropy(const Matrix& probs, const std::vector<std::size_t>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total -= std::log(probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])));
  }
  return total / static_cast<double>(labels.size());
}

inline Matrix cross_entropy_grad(const Matrix& probs, const std::vector<std::size_t>& labels) {
  Matrix d = probs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) -= 1.0;
  }
  return d / static_cast<double>(labels.size());
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Central differences over every element of the parameters whose name starts
// with `prefix`. Relative error uses max(|a|, |n|, 1e-6) as the denominator.
inline GradCheckResult grad_check(ClassifierModel& model, const std::vector<ImageTensor>& batch,
                                   const std::vector<std::size_t>& labels, Mode mode,
                                   const std::string& prefix) {
  ForwardPass pass;
  const Matrix probs = model.forward(batch, mode, nullptr, &pass);
  const Gradients grads = model.backward(pass, cross_entropy_grad(probs, labels));
  auto params = model.parameters();
  GradCheckResult result;
  const double h = 1e-5;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].name.rfind(prefix, 0) != 0) continue;
    for (std::size_t i = 0; i < params[p].values.size(); ++i) {
      double& x = params[p].values[i];
      const double saved = x;
      x = saved + h;
      const double up = cross_entropy(model.forward(batch, mode, nullptr, nullptr), labels);
      x = saved - h;
      const double down = cross_entropy(model.forward(batch, mode, nullptr, nullptr), labels);
      x = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads[p][i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(numeric - analytic) / denom);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace knitpat::fixtures
