#include "knitpat/model/backbone.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "knitpat/core/random_stream.hpp"

namespace knitpat {

namespace {

constexpr std::array<BackboneInfo, 8> kRegistry = {{
    {BackboneName::kInceptionResNetV2, "inception_resnet_v2", "Inception-Resnet-V2", 1536,
     "block8_10+conv_7b"},
    {BackboneName::kResNet50, "resnet50", "Resnet-50", 2048, "conv5_block3"},
    {BackboneName::kResNet101, "resnet101", "Resnet-101", 2048, "conv5_block3"},
    {BackboneName::kResNet152, "resnet152", "Resnet-152", 2048, "conv5_block3"},
    {BackboneName::kVgg19, "vgg19", "Vgg19", 512, "block5"},
    {BackboneName::kInceptionV3, "inception_v3", "InceptionV3", 2048, "mixed10"},
    {BackboneName::kMobileNetV2, "mobilenet_v2", "MobilenetV2", 1280, "block_16+Conv_1"},
    {BackboneName::kStub, "stub", "Stub", 16, "block 1"},
}};

constexpr std::uint64_t kStubSeed = 0x57AB5EEDULL;

ConvLayer make_layer(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                     std::size_t block, RandomStream& rng) {
  ConvLayer layer;
  layer.in_channels = in;
  layer.out_channels = out;
  layer.kernel = kernel;
  layer.stride = stride;
  layer.block = block;
  const std::size_t fan_in = kernel * kernel * in;
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  layer.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(fan_in));
  for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
    layer.weight.data()[i] = rng.uniform(-limit, limit);
  }
  layer.bias = RowVector::Zero(static_cast<Eigen::Index>(out));
  return layer;
}

std::size_t out_extent(std::size_t in, std::size_t kernel, std::size_t stride) {
  const std::size_t pad = kernel / 2;
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace

std::span<const BackboneInfo> backbone_registry() { return kRegistry; }

const BackboneInfo& backbone_info(BackboneName name) {
  return kRegistry[static_cast<std::size_t>(name)];
}

std::optional<BackboneName> parse_backbone_name(std::string_view id) {
  for (const auto& info : kRegistry) {
    if (info.id == id) return info.name;
  }
  return std::nullopt;
}

void BackboneSpec::validate() const {
  if (feature_dim == 0) throw std::invalid_argument("backbone feature_dim must be positive");
  if (static_cast<std::size_t>(name) >= kRegistry.size()) {
    throw std::invalid_argument("unknown backbone");
  }
}

BackboneSpec backbone_spec(BackboneName name) {
  if (name == BackboneName::kStub) return stub_backbone_spec();
  return {name, "weights.lock", backbone_info(name).feature_dim};
}

BackboneSpec stub_backbone_spec(std::size_t feature_dim) {
  return {BackboneName::kStub, "builtin:stub", feature_dim};
}

ConvBackbone::ConvBackbone(std::string name, std::size_t input_size, std::vector<ConvLayer> layers)
    : name_(std::move(name)), input_size_(input_size), layers_(std::move(layers)) {
  if (layers_.empty()) throw ModelError("backbone " + name_ + " has no layers");
  if (input_size_ == 0) throw ModelError("backbone " + name_ + " has zero input size");
  std::size_t channels = 3;
  std::size_t block = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const auto fan_in = static_cast<Eigen::Index>(l.kernel * l.kernel * l.in_channels);
    if (l.in_channels != channels || l.kernel == 0 || l.kernel % 2 == 0 || l.stride == 0 ||
        l.out_channels == 0 || l.weight.rows() != static_cast<Eigen::Index>(l.out_channels) ||
        l.weight.cols() != fan_in || l.bias.size() != static_cast<Eigen::Index>(l.out_channels)) {
      throw ModelError("backbone " + name_ + ": layer " + std::to_string(i) +
                       " has inconsistent shape");
    }
    if (l.block < block) {
      throw ModelError("backbone " + name_ + ": block indices must be nondecreasing");
    }
    block = l.block;
    channels = l.out_channels;
  }
}

ConvBackbone ConvBackbone::stub(std::size_t feature_dim) {
  if (feature_dim == 0) throw ModelError("stub backbone needs feature_dim > 0");
  RandomStream rng(kStubSeed);
  std::vector<ConvLayer> layers;
  layers.push_back(make_layer(3, 8, 3, 4, 0, rng));
  layers.push_back(make_layer(8, feature_dim, 3, 2, 1, rng));
  return ConvBackbone("stub", 224, std::move(layers));
}

Matrix ConvBackbone::forward(std::span<const ImageTensor> images, BackboneCache* cache) const {
  Matrix features(static_cast<Eigen::Index>(images.size()),
                  static_cast<Eigen::Index>(feature_dim()));
  if (cache) {
    cache->per_image.assign(images.size(), {});
  }
  for (std::size_t b = 0; b < images.size(); ++b) {
    const ImageTensor& img = images[b];
    std::size_t h = img.height(), w = img.width();
    RowMatrix act(static_cast<Eigen::Index>(h * w), static_cast<Eigen::Index>(img.channels()));
    for (std::size_t i = 0; i < img.size(); ++i) act.data()[i] = img.values()[i];

    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const ConvLayer& layer = layers_[li];
      const std::size_t k = layer.kernel, s = layer.stride, pad = k / 2, c = layer.in_channels;
      const std::size_t oh = out_extent(h, k, s), ow = out_extent(w, k, s);
      RowMatrix cols = RowMatrix::Zero(static_cast<Eigen::Index>(oh * ow),
                                       static_cast<Eigen::Index>(k * k * c));
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const auto row = static_cast<Eigen::Index>(oy * ow + ox);
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) -
                                      static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + kx) -
                                        static_cast<std::ptrdiff_t>(pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              cols.row(row)
                  .segment(static_cast<Eigen::Index>((ky * k + kx) * c),
                           static_cast<Eigen::Index>(c)) =
                  act.row(static_cast<Eigen::Index>(static_cast<std::size_t>(iy) * w +
                                                    static_cast<std::size_t>(ix)));
            }
          }
        }
      }
      RowMatrix out = cols * layer.weight.transpose();
      out.rowwise() += layer.bias;
      if (layer.relu) out = out.cwiseMax(0.0);
      if (cache) {
        cache->per_image[b].push_back({h, w, oh, ow, cols, out});
      }
      act = std::move(out);
      h = oh;
      w = ow;
    }
    features.row(static_cast<Eigen::Index>(b)) = act.colwise().mean();
  }
  return features;
}

void ConvBackbone::backward(const BackboneCache& cache, const Matrix& d_features,
                            std::size_t first_layer,
                            std::vector<std::vector<double>>& weight_grads,
                            std::vector<std::vector<double>>& bias_grads) const {
  weight_grads.resize(layers_.size());
  bias_grads.resize(layers_.size());
  for (std::size_t li = first_layer; li < layers_.size(); ++li) {
    weight_grads[li].assign(static_cast<std::size_t>(layers_[li].weight.size()), 0.0);
    bias_grads[li].assign(static_cast<std::size_t>(layers_[li].bias.size()), 0.0);
  }
  if (first_layer >= layers_.size()) return;

  for (std::size_t b = 0; b < cache.per_image.size(); ++b) {
    const auto& caches = cache.per_image[b];
    const auto& last = caches.back();
    const auto positions = static_cast<Eigen::Index>(last.out_h * last.out_w);
    RowMatrix d_out = d_features.row(static_cast<Eigen::Index>(b)).replicate(positions, 1) /
                      static_cast<double>(positions);

    for (std::size_t li = layers_.size(); li-- > first_layer;) {
      const ConvLayer& layer = layers_[li];
      const auto& lc = caches[li];
      if (layer.relu) d_out = (lc.output.array() > 0.0).select(d_out, 0.0);

      Eigen::Map<RowMatrix> dw(weight_grads[li].data(), layer.weight.rows(), layer.weight.cols());
      dw.noalias() += d_out.transpose() * lc.columns;
      Eigen::Map<RowVector> db(bias_grads[li].data(), layer.bias.size());
      db += d_out.colwise().sum();
      if (li == first_layer) break;

      const RowMatrix d_cols = d_out * layer.weight;
      const std::size_t k = layer.kernel, s = layer.stride, pad = k / 2, c = layer.in_channels;
      RowMatrix d_in = RowMatrix::Zero(static_cast<Eigen::Index>(lc.in_h * lc.in_w),
                                       static_cast<Eigen::Index>(c));
      for (std::size_t oy = 0; oy < lc.out_h; ++oy) {
        for (std::size_t ox = 0; ox < lc.out_w; ++ox) {
          const auto row = static_cast<Eigen::Index>(oy * lc.out_w + ox);
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) -
                                      static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(lc.in_h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + kx) -
                                        static_cast<std::ptrdiff_t>(pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(lc.in_w)) continue;
              d_in.row(static_cast<Eigen::Index>(static_cast<std::size_t>(iy) * lc.in_w +
                                                 static_cast<std::size_t>(ix))) +=
                  d_cols.row(row).segment(static_cast<Eigen::Index>((ky * k + kx) * c),
                                          static_cast<Eigen::Index>(c));
            }
          }
        }
      }
      d_out = std::move(d_in);
    }
  }
}

}  // namespace knitpat
