#pragma once

#include <filesystem>

#include "knitpat/image/image_tensor.hpp"

namespace knitpat {

/// Decodes PNG or JPEG into an RGB tensor with values 0..255.
/// Throws ImageError if the file cannot be read or decoded.
ImageTensor decode_image(const std::filesystem::path& path);

/// Writes a [0,1] tensor as 8-bit PNG. Values are clamped then rounded.
void write_png(const ImageTensor& img, const std::filesystem::path& path);

}  // namespace knitpat
