#pragma once

#include <cstddef>
#include <stdexcept>

#include "knitpat/core/random_stream.hpp"
#include "knitpat/image/image_tensor.hpp"

namespace knitpat {

inline constexpr std::size_t kModelInputSize = 224;

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FillMode { kNearest };
enum class Interpolation { kBilinear, kNearest };

/// Stochastic augmentation recipe. Defaults reproduce the training setup:
/// horizontal flips, +/-20 degree rotation, zoom in [0.8, 1.2], shear 0.2,
/// edge-replicating fill and 1/255 rescaling.
struct AugmentationConfig {
  bool horizontal_flip = true;
  double rotation_degrees = 20.0;
  double zoom_low = 0.8;
  double zoom_high = 1.2;
  double shear_range = 0.2;
  FillMode fill_mode = FillMode::kNearest;
  double rescale_factor = 1.0 / 255.0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  /// All ranges collapsed; random_affine becomes the identity.
  static AugmentationConfig identity();
};

/// One draw of the affine recipe.
struct AffineParams {
  bool flip = false;
  double rotation_degrees = 0.0;
  double shear = 0.0;  // radians
  double zoom = 1.0;

  bool is_identity() const {
    return !flip && rotation_degrees == 0.0 && shear == 0.0 && zoom == 1.0;
  }
};

ImageTensor rescale(const ImageTensor& raw, double factor = 1.0 / 255.0);

/// Rec. 601 luminance replicated into three channels. One-channel input is
/// replicated without conversion.
ImageTensor to_grayscale(const ImageTensor& img);

/// Bilinear resize with half-pixel centres. Same-size input is copied.
ImageTensor resize(const ImageTensor& img, std::size_t height, std::size_t width);

AffineParams sample_affine_params(const AugmentationConfig& cfg, RandomStream& rng);

/// Applies flip -> rotate -> shear -> zoom as one map about the image centre
/// and resamples once. Out-of-bounds coordinates take the nearest edge pixel.
ImageTensor apply_affine(const ImageTensor& img, const AffineParams& params,
                         Interpolation interp = Interpolation::kBilinear);

ImageTensor random_affine(const ImageTensor& img, const AugmentationConfig& cfg,
                          RandomStream& rng,
                          Interpolation interp = Interpolation::kBilinear);

/// rescale -> grayscale -> resize, the deterministic part shared by all splits.
ImageTensor preprocess(const ImageTensor& raw, const AugmentationConfig& cfg,
                       std::size_t size = kModelInputSize);

}  // namespace knitpat
