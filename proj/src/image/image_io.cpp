#include "knitpat/image/image_io.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>

#include "knitpat/image/transforms.hpp"

namespace knitpat {

ImageTensor decode_image(const std::filesystem::path& path) {
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw ImageError("cannot decode image: " + path.string());
  ImageTensor out(static_cast<std::size_t>(bgr.rows), static_cast<std::size_t>(bgr.cols), 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      const auto yy = static_cast<std::size_t>(y), xx = static_cast<std::size_t>(x);
      out.at(yy, xx, 0) = row[x][2];
      out.at(yy, xx, 1) = row[x][1];
      out.at(yy, xx, 2) = row[x][0];
    }
  }
  return out;
}

void write_png(const ImageTensor& img, const std::filesystem::path& path) {
  const int rows = static_cast<int>(img.height()), cols = static_cast<int>(img.width());
  cv::Mat mat(rows, cols, img.channels() == 3 ? CV_8UC3 : CV_8UC1);
  auto to_byte = [](float v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  };
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      const auto yy = static_cast<std::size_t>(y), xx = static_cast<std::size_t>(x);
      if (img.channels() == 3) {
        mat.at<cv::Vec3b>(y, x) = {to_byte(img.at(yy, xx, 2)), to_byte(img.at(yy, xx, 1)),
                                   to_byte(img.at(yy, xx, 0))};
      } else {
        mat.at<unsigned char>(y, x) = to_byte(img.at(yy, xx, 0));
      }
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) throw ImageError("cannot write PNG: " + path.string());
}

}  // namespace knitpat
