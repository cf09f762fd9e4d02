#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "knitpat/model/backbone.hpp"
#include "knitpat/model/head.hpp"

namespace knitpat {

enum class FreezePolicy : std::uint8_t {
  kFreezeAllBackbone,
  kFreezeExceptLastBlock,
  kTrainAll,
};

std::string_view to_string(FreezePolicy policy);
std::optional<FreezePolicy> parse_freeze_policy(std::string_view text);

struct ClassifierSpec {
  BackboneSpec backbone;
  HeadSpec head;
  FreezePolicy freeze = FreezePolicy::kFreezeExceptLastBlock;

  void validate() const;
  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

/// Mutable window onto one parameter tensor's storage.
struct ParameterView {
  std::string name;
  std::span<double> values;
  bool trainable = true;
};

struct ParameterCounts {
  std::size_t trainable = 0;
  std::size_t frozen = 0;
};

/// Per-parameter gradients aligned with ClassifierModel::parameters();
/// entries for frozen parameters are empty.
using Gradients = std::vector<std::vector<double>>;

struct ForwardPass {
  BackboneCache backbone;
  HeadCache head;
  Matrix probabilities;
  bool backbone_cached = false;
};

class WeightsRegistry;

/// Backbone + global average pooling + head + softmax.
class ClassifierModel {
 public:
  ClassifierModel(ClassifierSpec spec, ConvBackbone backbone, Head head);

  const ClassifierSpec& spec() const { return spec_; }
  std::size_t num_classes() const { return spec_.head.num_classes; }
  const ConvBackbone& backbone() const { return backbone_; }
  ConvBackbone& backbone() { return backbone_; }
  const Head& head() const { return head_; }
  Head& head() { return head_; }

  /// B x num_classes probabilities with dropout off and moving statistics.
  /// Throws ModelError when an image is not input_size x input_size x 3.
  Matrix predict_proba(std::span<const ImageTensor> batch) const;

  /// Probabilities for `batch`; fills `pass` for backward().
  Matrix forward(std::span<const ImageTensor> batch, Mode mode, RandomStream* rng,
                 ForwardPass* pass) const;

  /// Gradients of the loss given dLoss/dLogits.
  Gradients backward(const ForwardPass& pass, const Matrix& d_logits) const;

  /// Folds a training pass's batch-norm statistics into the moving averages.
  void commit_statistics(const ForwardPass& pass) { head_.update_moving_statistics(pass.head); }

  std::vector<ParameterView> parameters();
  ParameterCounts count_parameters() const;

  /// Index of the first backbone layer that trains under the freeze policy,
  /// or the layer count when the whole backbone is frozen.
  std::size_t first_trainable_backbone_layer() const;

 private:
  void check_input(std::span<const ImageTensor> batch) const;

  ClassifierSpec spec_;
  ConvBackbone backbone_;
  Head head_;
};

/// Resolves the backbone (builtin stub, or through `registry`) and
/// initializes a fresh head from `init_seed`.
ClassifierModel build_classifier(const ClassifierSpec& spec, const WeightsRegistry* registry,
                                 std::uint64_t init_seed = 0);

inline ParameterCounts count_parameters(const ClassifierModel& model) {
  return model.count_parameters();
}

inline Matrix predict_proba(const ClassifierModel& model, std::span<const ImageTensor> batch) {
  return model.predict_proba(batch);
}

}  // namespace knitpat
