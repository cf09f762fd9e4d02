#include "knitpat/dataset/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "knitpat/core/random_stream.hpp"

namespace knitpat {

SplitSizes allocate_split(std::size_t n, const SplitRatios& ratios) {
  const std::array<double, 3> r = {ratios.train, ratios.val, ratios.test};
  SplitSizes sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n) * r[i];
    // 1e-9 absorbs products like 10 * 0.7 landing just under an integer.
    const double whole = std::floor(exact + 1e-9);
    sizes[i] = static_cast<std::size_t>(whole);
    // Remainders are snapped to a 1e-9 grid so float noise cannot break ties.
    remainder[i] = std::round(std::max(0.0, exact - whole) * 1e9);
    assigned += sizes[i];
  }
  while (assigned > n) {
    const auto i = static_cast<std::size_t>(
        std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    --sizes[i];
    --assigned;
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b];
  });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % 3) {
    ++sizes[order[k]];
    ++assigned;
  }
  return sizes;
}

DatasetManifest stratified_split(const DatasetManifest& manifest,
                                 const SplitRatios& ratios, std::uint64_t seed) {
  for (double r : {ratios.train, ratios.val, ratios.test}) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw DatasetError("split ratios must be finite and nonnegative");
    }
  }
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw DatasetError("split ratios must sum to 1");
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::size_t n = manifest.class_counts()[c];
    if (n > 0 && n < 3) {
      throw DatasetError("class " + std::string(kClassNames[c]) + " has " +
                         std::to_string(n) + " samples; at least 3 are required to split");
    }
  }

  std::vector<ImageSample> samples = manifest.samples();
  const RandomStream root(seed);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (class_index(samples[i].label) == c) members.push_back(i);
    }
    if (members.empty()) continue;
    RandomStream rng = root.substream(c);
    rng.shuffle(std::span<std::size_t>(members));
    const SplitSizes sizes = allocate_split(members.size(), ratios);
    for (std::size_t k = 0; k < members.size(); ++k) {
      Split s = Split::kTest;
      if (k < sizes[0]) {
        s = Split::kTrain;
      } else if (k < sizes[0] + sizes[1]) {
        s = Split::kVal;
      }
      samples[members[k]].split = s;
    }
  }
  return DatasetManifest(std::move(samples), seed, manifest.base_dir(), ratios);
}

}  // namespace knitpat
