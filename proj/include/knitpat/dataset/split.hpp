#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "knitpat/dataset/manifest.hpp"

namespace knitpat {

using SplitSizes = std::array<std::size_t, 3>;  // train, val, test

/// Floor-then-largest-remainder allocation of `n` items over the three
/// ratios. Remainder ties go to the earlier split (train, then val).
SplitSizes allocate_split(std::size_t n, const SplitRatios& ratios);

/// Stratified split: each class is shuffled with a seed-derived stream and
/// cut into train/val/test by allocate_split. Any previous assignment is
/// ignored, so the result depends only on the samples, ratios and seed.
///
/// Throws DatasetError if the ratios do not sum to 1 or any class present in
/// the manifest has fewer than 3 samples.
DatasetManifest stratified_split(const DatasetManifest& manifest,
                                 const SplitRatios& ratios,
                                 std::uint64_t seed);

}  // namespace knitpat
