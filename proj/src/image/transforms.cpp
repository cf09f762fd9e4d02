#include "knitpat/image/transforms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace knitpat {

namespace {

using Mat2 = std::array<double, 4>;  // row-major 2x2

Mat2 multiply(const Mat2& a, const Mat2& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
          a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

Mat2 inverse(const Mat2& m) {
  const double det = m[0] * m[3] - m[1] * m[2];
  if (det == 0.0 || !std::isfinite(det)) throw ImageError("affine map is singular");
  return {m[3] / det, -m[1] / det, -m[2] / det, m[0] / det};
}

float lerp_clamped(float a, float b, double t) {
  const float v = static_cast<float>(a + (static_cast<double>(b) - a) * t);
  return std::clamp(v, std::min(a, b), std::max(a, b));
}

}  // namespace

void AugmentationConfig::validate() const {
  if (!(zoom_low > 0.0) || !(zoom_low <= 1.0) || !(zoom_high >= 1.0) ||
      !std::isfinite(zoom_high)) {
    throw std::invalid_argument("augmentation zoom range must satisfy 0 < low <= 1 <= high");
  }
  if (!(rotation_degrees >= 0.0) || !std::isfinite(rotation_degrees)) {
    throw std::invalid_argument("augmentation rotation_degrees must be >= 0");
  }
  if (!(shear_range >= 0.0) || !(shear_range < std::numbers::pi / 2)) {
    throw std::invalid_argument("augmentation shear_range must be in [0, pi/2)");
  }
  if (!(rescale_factor > 0.0) || !std::isfinite(rescale_factor)) {
    throw std::invalid_argument("augmentation rescale_factor must be positive");
  }
}

AugmentationConfig AugmentationConfig::identity() {
  AugmentationConfig cfg;
  cfg.horizontal_flip = false;
  cfg.rotation_degrees = 0.0;
  cfg.zoom_low = 1.0;
  cfg.zoom_high = 1.0;
  cfg.shear_range = 0.0;
  return cfg;
}

ImageTensor rescale(const ImageTensor& raw, double factor) {
  ImageTensor out = raw;
  for (float& v : out.values()) v = static_cast<float>(static_cast<double>(v) * factor);
  return out;
}

ImageTensor to_grayscale(const ImageTensor& img) {
  ImageTensor out(img.height(), img.width(), 3);
  const std::size_t pixels = img.height() * img.width();
  const auto& in = img.values();
  auto& dst = out.values();
  for (std::size_t p = 0; p < pixels; ++p) {
    float y;
    if (img.channels() == 1) {
      y = in[p];
    } else {
      const float r = in[3 * p], g = in[3 * p + 1], b = in[3 * p + 2];
      y = (r == g && g == b)
              ? r
              : static_cast<float>(0.299 * r + 0.587 * g + 0.114 * b);
    }
    dst[3 * p] = dst[3 * p + 1] = dst[3 * p + 2] = y;
  }
  return out;
}

ImageTensor resize(const ImageTensor& img, std::size_t height, std::size_t width) {
  if (img.height() == 0 || img.width() == 0) {
    throw ImageError("cannot resize an image with a zero dimension (" + img.shape_string() + ")");
  }
  if (height == 0 || width == 0) throw ImageError("resize target must be positive");
  if (img.height() == height && img.width() == width) return img;

  const std::size_t ch = img.channels();
  ImageTensor out(height, width, ch);
  const double sy = static_cast<double>(img.height()) / static_cast<double>(height);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(width);
  const double max_y = static_cast<double>(img.height() - 1);
  const double max_x = static_cast<double>(img.width() - 1);

  std::vector<std::size_t> x0(width), x1(width);
  std::vector<double> fx(width);
  for (std::size_t x = 0; x < width; ++x) {
    const double src = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
    x0[x] = static_cast<std::size_t>(src);
    x1[x] = std::min(x0[x] + 1, img.width() - 1);
    fx[x] = src - static_cast<double>(x0[x]);
  }
  for (std::size_t y = 0; y < height; ++y) {
    const double src_y = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(src_y);
    const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
    const double fy = src_y - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < ch; ++c) {
        const float top = lerp_clamped(img.at(y0, x0[x], c), img.at(y0, x1[x], c), fx[x]);
        const float bottom = lerp_clamped(img.at(y1, x0[x], c), img.at(y1, x1[x], c), fx[x]);
        out.at(y, x, c) = lerp_clamped(top, bottom, fy);
      }
    }
  }
  return out;
}

AffineParams sample_affine_params(const AugmentationConfig& cfg, RandomStream& rng) {
  AffineParams p;
  // Every component is drawn unconditionally so stream positions do not
  // depend on which transforms are enabled.
  const bool coin = rng.bernoulli(0.5);
  p.flip = cfg.horizontal_flip && coin;
  p.rotation_degrees = rng.uniform(-cfg.rotation_degrees, cfg.rotation_degrees);
  p.shear = rng.uniform(-cfg.shear_range, cfg.shear_range);
  p.zoom = rng.uniform(cfg.zoom_low, cfg.zoom_high);
  return p;
}

ImageTensor apply_affine(const ImageTensor& img, const AffineParams& params,
                         Interpolation interp) {
  if (params.is_identity()) return img;
  const std::size_t h = img.height(), w = img.width(), ch = img.channels();
  if (h == 0 || w == 0) return img;
  if (!(params.zoom > 0.0)) throw ImageError("zoom factor must be positive");

  ImageTensor out(h, w, ch);
  if (params.flip && params.rotation_degrees == 0.0 && params.shear == 0.0 &&
      params.zoom == 1.0) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t c = 0; c < ch; ++c) out.at(y, x, c) = img.at(y, w - 1 - x, c);
      }
    }
    return out;
  }

  const double theta = params.rotation_degrees * std::numbers::pi / 180.0;
  const Mat2 flip = {params.flip ? -1.0 : 1.0, 0.0, 0.0, 1.0};
  const Mat2 rotate = {std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta)};
  const Mat2 shear = {1.0, -std::sin(params.shear), 0.0, std::cos(params.shear)};
  const Mat2 zoom = {params.zoom, 0.0, 0.0, params.zoom};
  const Mat2 inv = inverse(multiply(zoom, multiply(shear, multiply(rotate, flip))));

  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double max_x = static_cast<double>(w - 1);
  const double max_y = static_cast<double>(h - 1);

  for (std::size_t y = 0; y < h; ++y) {
    const double dy = static_cast<double>(y) - cy;
    for (std::size_t x = 0; x < w; ++x) {
      const double dx = static_cast<double>(x) - cx;
      // Clamping to the border replicates edge pixels (nearest fill).
      const double sx = std::clamp(inv[0] * dx + inv[1] * dy + cx, 0.0, max_x);
      const double sy = std::clamp(inv[2] * dx + inv[3] * dy + cy, 0.0, max_y);
      if (interp == Interpolation::kNearest) {
        const auto nx = static_cast<std::size_t>(std::lround(sx));
        const auto ny = static_cast<std::size_t>(std::lround(sy));
        for (std::size_t c = 0; c < ch; ++c) out.at(y, x, c) = img.at(ny, nx, c);
        continue;
      }
      const auto x0 = static_cast<std::size_t>(sx);
      const auto y0 = static_cast<std::size_t>(sy);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const std::size_t y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - static_cast<double>(x0);
      const double fy = sy - static_cast<double>(y0);
      for (std::size_t c = 0; c < ch; ++c) {
        const float top = lerp_clamped(img.at(y0, x0, c), img.at(y0, x1, c), fx);
        const float bottom = lerp_clamped(img.at(y1, x0, c), img.at(y1, x1, c), fx);
        out.at(y, x, c) = lerp_clamped(top, bottom, fy);
      }
    }
  }
  return out;
}

ImageTensor random_affine(const ImageTensor& img, const AugmentationConfig& cfg,
                          RandomStream& rng, Interpolation interp) {
  return apply_affine(img, sample_affine_params(cfg, rng), interp);
}

ImageTensor preprocess(const ImageTensor& raw, const AugmentationConfig& cfg, std::size_t size) {
  return resize(to_grayscale(rescale(raw, cfg.rescale_factor)), size, size);
}

}  // namespace knitpat
