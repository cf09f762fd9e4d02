#include "knitpat/dataset/class_weights.hpp"

#include <numeric>
#include <string>

namespace knitpat {

ClassWeights::ClassWeights(std::vector<double> weights) : weights_(std::move(weights)) {
  for (double w : weights_) {
    if (!(w > 0.0)) throw DatasetError("class weights must be positive");
  }
}

ClassWeights ClassWeights::uniform(std::size_t num_classes) {
  return ClassWeights(std::vector<double>(num_classes, 1.0));
}

ClassWeights balanced_class_weights(std::span<const std::size_t> counts) {
  if (counts.empty()) throw DatasetError("class weights need at least one class");
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  const auto k = static_cast<double>(counts.size());
  std::vector<double> weights(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw DatasetError("class index " + std::to_string(c) +
                         " has no training samples; cannot weight it");
    }
    weights[c] = static_cast<double>(total) / (k * static_cast<double>(counts[c]));
  }
  return ClassWeights(std::move(weights));
}

ClassWeights compute_class_weights(const DatasetManifest& manifest) {
  const ClassCounts counts = manifest.class_counts_in(Split::kTrain);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (counts[c] == 0) {
      throw DatasetError("class " + std::string(kClassNames[c]) +
                         " is empty in the training split");
    }
  }
  return balanced_class_weights(counts);
}

}  // namespace knitpat
