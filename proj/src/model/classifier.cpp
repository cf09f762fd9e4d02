#include "knitpat/model/classifier.hpp"

#include <array>

#include "knitpat/model/weights_registry.hpp"

namespace knitpat {

namespace {

constexpr std::array<std::string_view, 3> kFreezeNames = {
    "freeze_all_backbone", "freeze_except_last_block", "train_all"};

template <typename Derived>
std::span<double> storage(Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

template <typename Derived>
std::vector<double> flatten(const Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), m.data() + m.size()};
}

}  // namespace

std::string_view to_string(FreezePolicy policy) {
  return kFreezeNames[static_cast<std::size_t>(policy)];
}

std::optional<FreezePolicy> parse_freeze_policy(std::string_view text) {
  for (std::size_t i = 0; i < kFreezeNames.size(); ++i) {
    if (kFreezeNames[i] == text) return static_cast<FreezePolicy>(i);
  }
  return std::nullopt;
}

void ClassifierSpec::validate() const {
  backbone.validate();
  head.validate();
}

ClassifierModel::ClassifierModel(ClassifierSpec spec, ConvBackbone backbone, Head head)
    : spec_(std::move(spec)), backbone_(std::move(backbone)), head_(std::move(head)) {
  spec_.validate();
  if (backbone_.feature_dim() != spec_.backbone.feature_dim) {
    throw ModelError("backbone " + std::string(backbone_info(spec_.backbone.name).id) +
                     " reports feature_dim " + std::to_string(backbone_.feature_dim()) +
                     " but the spec expects " + std::to_string(spec_.backbone.feature_dim));
  }
  if (head_.input_dim() != backbone_.feature_dim()) {
    throw ModelError("head input dimension does not match pooled backbone features");
  }
  if (head_.spec() != spec_.head) throw ModelError("head layout does not match the spec");
}

std::size_t ClassifierModel::first_trainable_backbone_layer() const {
  const auto& layers = backbone_.layers();
  switch (spec_.freeze) {
    case FreezePolicy::kTrainAll:
      return 0;
    case FreezePolicy::kFreezeAllBackbone:
      return layers.size();
    case FreezePolicy::kFreezeExceptLastBlock: {
      const std::size_t last = layers.back().block;
      std::size_t i = layers.size();
      while (i > 0 && layers[i - 1].block == last) --i;
      return i;
    }
  }
  return layers.size();
}

void ClassifierModel::check_input(std::span<const ImageTensor> batch) const {
  const std::size_t s = backbone_.input_size();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& img = batch[i];
    if (img.height() != s || img.width() != s || img.channels() != 3) {
      throw ModelError("input " + std::to_string(i) + ": expected shape " + std::to_string(s) +
                       "x" + std::to_string(s) + "x3, received " + img.shape_string());
    }
  }
}

Matrix ClassifierModel::predict_proba(std::span<const ImageTensor> batch) const {
  return forward(batch, Mode::kInference, nullptr, nullptr);
}

Matrix ClassifierModel::forward(std::span<const ImageTensor> batch, Mode mode, RandomStream* rng,
                                ForwardPass* pass) const {
  check_input(batch);
  if (batch.empty()) return Matrix(0, static_cast<Eigen::Index>(num_classes()));
  const bool cache_backbone =
      pass != nullptr && first_trainable_backbone_layer() < backbone_.layers().size();
  const Matrix features = backbone_.forward(batch, cache_backbone ? &pass->backbone : nullptr);
  const Matrix logits = head_.forward(features, mode, rng, pass ? &pass->head : nullptr);
  Matrix probs = softmax(logits);
  if (pass) {
    pass->backbone_cached = cache_backbone;
    pass->probabilities = probs;
  }
  return probs;
}

std::vector<ParameterView> ClassifierModel::parameters() {
  std::vector<ParameterView> params;
  const std::size_t first = first_trainable_backbone_layer();
  auto& layers = backbone_.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string prefix = "backbone/conv" + std::to_string(i);
    params.push_back({prefix + "/kernel", storage(layers[i].weight), i >= first});
    params.push_back({prefix + "/bias", storage(layers[i].bias), i >= first});
  }
  auto& blocks = head_.blocks();
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const std::string idx = std::to_string(j);
    params.push_back({"head/dense" + idx + "/kernel", storage(blocks[j].dense.weight), true});
    params.push_back({"head/dense" + idx + "/bias", storage(blocks[j].dense.bias), true});
    if (blocks[j].norm) {
      params.push_back({"head/bn" + idx + "/gamma", storage(blocks[j].norm->gamma), true});
      params.push_back({"head/bn" + idx + "/beta", storage(blocks[j].norm->beta), true});
    }
  }
  params.push_back({"head/logits/kernel", storage(head_.output().weight), true});
  params.push_back({"head/logits/bias", storage(head_.output().bias), true});
  return params;
}

Gradients ClassifierModel::backward(const ForwardPass& pass, const Matrix& d_logits) const {
  const HeadGradients hg = head_.backward(pass.head, d_logits);
  const std::size_t first = first_trainable_backbone_layer();
  const auto& layers = backbone_.layers();

  std::vector<std::vector<double>> conv_w, conv_b;
  if (first < layers.size()) {
    if (!pass.backbone_cached) throw ModelError("forward pass did not cache backbone activations");
    backbone_.backward(pass.backbone, hg.d_input, first, conv_w, conv_b);
  }

  Gradients grads;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    grads.push_back(i >= first ? std::move(conv_w[i]) : std::vector<double>{});
    grads.push_back(i >= first ? std::move(conv_b[i]) : std::vector<double>{});
  }
  for (std::size_t j = 0; j < hg.blocks.size(); ++j) {
    grads.push_back(flatten(hg.blocks[j].weight));
    grads.push_back(flatten(hg.blocks[j].bias));
    if (head_.blocks()[j].norm) {
      grads.push_back(flatten(hg.blocks[j].gamma));
      grads.push_back(flatten(hg.blocks[j].beta));
    }
  }
  grads.push_back(flatten(hg.out_weight));
  grads.push_back(flatten(hg.out_bias));
  return grads;
}

ParameterCounts ClassifierModel::count_parameters() const {
  ParameterCounts counts;
  const std::size_t first = first_trainable_backbone_layer();
  const auto& layers = backbone_.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    (i >= first ? counts.trainable : counts.frozen) += layers[i].parameter_count();
  }
  counts.trainable += head_.parameter_count();
  return counts;
}

ClassifierModel build_classifier(const ClassifierSpec& spec, const WeightsRegistry* registry,
                                 std::uint64_t init_seed) {
  spec.validate();
  ConvBackbone backbone;
  if (spec.backbone.name == BackboneName::kStub) {
    backbone = ConvBackbone::stub(spec.backbone.feature_dim);
  } else {
    if (registry == nullptr) {
      throw ModelError("backbone " + std::string(backbone_info(spec.backbone.name).id) +
                       " needs a weights registry (weights.lock)");
    }
    backbone = registry->resolve(spec.backbone.name);
  }
  RandomStream rng = RandomStream(init_seed).substream(0x48454144ULL);
  Head head(spec.head, backbone.feature_dim(), rng);
  return ClassifierModel(spec, std::move(backbone), std::move(head));
}

}  // namespace knitpat
