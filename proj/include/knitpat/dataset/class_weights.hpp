#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "knitpat/dataset/manifest.hpp"

namespace knitpat {

/// Per-class loss multipliers indexed by class index.
class ClassWeights {
 public:
  ClassWeights() = default;
  explicit ClassWeights(std::vector<double> weights);

  static ClassWeights uniform(std::size_t num_classes);

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t c) const { return weights_[c]; }
  const std::vector<double>& values() const { return weights_; }

 private:
  std::vector<double> weights_;
};

/// Balanced inverse frequency: w_c = N / (K * n_c).
/// Throws DatasetError if counts is empty or any count is zero.
ClassWeights balanced_class_weights(std::span<const std::size_t> counts);

/// Balanced weights over the training split of a 7-class manifest.
ClassWeights compute_class_weights(const DatasetManifest& manifest);

}  // namespace knitpat
