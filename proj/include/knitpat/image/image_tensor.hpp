#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace knitpat {

/// Height x width x channels image stored row-major with interleaved
/// channels. Raw decodes hold 0..255; everything after rescale holds [0,1].
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f)
      : height_(height), width_(width), channels_(channels),
        values_(height * width * channels, fill) {
    if (channels != 1 && channels != 3) {
      throw std::invalid_argument("ImageTensor supports 1 or 3 channels, got " +
                                  std::to_string(channels));
    }
  }
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
              std::vector<float> values)
      : ImageTensor(height, width, channels) {
    if (values.size() != values_.size()) {
      throw std::invalid_argument("ImageTensor value count does not match its shape");
    }
    values_ = std::move(values);
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return values_.size(); }

  float& at(std::size_t y, std::size_t x, std::size_t c) {
    return values_[(y * width_ + x) * channels_ + c];
  }
  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return values_[(y * width_ + x) * channels_ + c];
  }

  std::vector<float>& values() { return values_; }
  const std::vector<float>& values() const { return values_; }

  std::string shape_string() const {
    return std::to_string(height_) + "x" + std::to_string(width_) + "x" +
           std::to_string(channels_);
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 3;
  std::vector<float> values_;
};

}  // namespace knitpat
