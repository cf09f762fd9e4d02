#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "knitpat/image/image_tensor.hpp"

namespace knitpat {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BackboneName : std::uint8_t {
  kInceptionResNetV2,
  kResNet50,
  kResNet101,
  kResNet152,
  kVgg19,
  kInceptionV3,
  kMobileNetV2,
  kStub,
};

/// Registry row for a backbone family.
struct BackboneInfo {
  BackboneName name;
  std::string_view id;            // config / weights.lock key
  std::string_view display_name;  // results-table label
  std::size_t feature_dim;        // channels after the last conv stage
  std::string_view last_block;    // Keras layer-name prefix of the final block group
};

const BackboneInfo& backbone_info(BackboneName name);
std::optional<BackboneName> parse_backbone_name(std::string_view id);
std::span<const BackboneInfo> backbone_registry();

struct BackboneSpec {
  BackboneName name = BackboneName::kInceptionResNetV2;
  std::string weights_source;  // "weights.lock" or "builtin:stub"
  std::size_t feature_dim = 1536;

  void validate() const;
  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

/// Registry defaults for a named backbone.
BackboneSpec backbone_spec(BackboneName name);
BackboneSpec stub_backbone_spec(std::size_t feature_dim = 16);

/// 'same'-padded convolution over HWC activations. Weight rows are output
/// channels; columns are ordered (ky, kx, input channel).
struct ConvLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  bool relu = true;
  std::size_t block = 0;  // block group index; the highest is the "last block"
  RowMatrix weight;       // out_channels x (kernel * kernel * in_channels)
  RowVector bias;         // out_channels

  std::size_t parameter_count() const {
    return static_cast<std::size_t>(weight.size() + bias.size());
  }
};

/// Per-image activations kept for backpropagation.
struct BackboneCache {
  struct LayerCache {
    std::size_t in_h = 0, in_w = 0, out_h = 0, out_w = 0;
    RowMatrix columns;  // im2col of the layer input
    RowMatrix output;   // post-activation
  };
  std::vector<std::vector<LayerCache>> per_image;  // [image][layer]
};

/// Feature extractor: a stack of conv layers followed by global average
/// pooling. Consumed as an opaque pretrained graph; only the layer list and
/// block boundaries are visible to the rest of the model.
class ConvBackbone {
 public:
  ConvBackbone() = default;
  ConvBackbone(std::string name, std::size_t input_size, std::vector<ConvLayer> layers);

  /// Deterministic fixed-weight backbone used by tests and smoke runs:
  /// conv 3x3/4 (3->8) in block 0, conv 3x3/2 (8->feature_dim) in block 1.
  static ConvBackbone stub(std::size_t feature_dim);

  const std::string& name() const { return name_; }
  std::size_t input_size() const { return input_size_; }
  std::size_t feature_dim() const { return layers_.back().out_channels; }
  std::size_t num_blocks() const { return layers_.empty() ? 0 : layers_.back().block + 1; }
  const std::vector<ConvLayer>& layers() const { return layers_; }
  std::vector<ConvLayer>& layers() { return layers_; }

  /// B x feature_dim pooled features. Fills `cache` when non-null.
  Matrix forward(std::span<const ImageTensor> images, BackboneCache* cache = nullptr) const;

  /// Accumulates parameter gradients for layers >= first_layer given
  /// dLoss/dFeatures. Gradient vectors are indexed like layers() and hold
  /// weight then bias, flattened row-major.
  void backward(const BackboneCache& cache, const Matrix& d_features, std::size_t first_layer,
                std::vector<std::vector<double>>& weight_grads,
                std::vector<std::vector<double>>& bias_grads) const;

 private:
  std::string name_;
  std::size_t input_size_ = 224;
  std::vector<ConvLayer> layers_;
};

}  // namespace knitpat
