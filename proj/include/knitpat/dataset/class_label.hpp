#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace knitpat {

/// The seven stitch-pattern classes. Enumerator values are the class indices.
enum class ClassLabel : std::uint8_t {
  kKnitPurl = 0,
  kCable = 1,
  kDiamond = 2,
  kMoss = 3,
  kMesh = 4,
  kMotif = 5,
  kTuck = 6,
};

inline constexpr std::size_t kNumClasses = 7;

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "knit_purl", "cable", "diamond", "moss", "mesh", "motif", "tuck"};

inline constexpr std::array<ClassLabel, kNumClasses> kAllClasses = {
    ClassLabel::kKnitPurl, ClassLabel::kCable, ClassLabel::kDiamond,
    ClassLabel::kMoss,     ClassLabel::kMesh,  ClassLabel::kMotif,
    ClassLabel::kTuck};

constexpr std::size_t class_index(ClassLabel label) {
  return static_cast<std::size_t>(label);
}

constexpr std::string_view class_name(ClassLabel label) {
  return kClassNames[class_index(label)];
}

/// Throws std::out_of_range for indices outside 0..6.
ClassLabel class_from_index(std::size_t index);

std::optional<ClassLabel> parse_class_label(std::string_view name);

}  // namespace knitpat
