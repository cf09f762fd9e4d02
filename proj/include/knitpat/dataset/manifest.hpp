#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "knitpat/dataset/class_label.hpp"

namespace knitpat {

enum class SampleSource : std::uint8_t { kReal, kSynthetic, kScraped };
enum class Split : std::uint8_t { kTrain, kVal, kTest, kUnassigned };

std::string_view to_string(SampleSource source);
std::string_view to_string(Split split);
std::optional<SampleSource> parse_sample_source(std::string_view text);
std::optional<Split> parse_split(std::string_view text);

/// Raised for malformed corpora, manifests and split requests.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ImageSample {
  std::string path;  // relative to the manifest's base directory
  ClassLabel label = ClassLabel::kKnitPurl;
  SampleSource source = SampleSource::kReal;
  Split split = Split::kUnassigned;

  friend bool operator==(const ImageSample&, const ImageSample&) = default;
};

struct SplitRatios {
  double train = 0.70;
  double val = 0.20;
  double test = 0.10;

  friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

using ClassCounts = std::array<std::size_t, kNumClasses>;

/// Immutable labelled corpus. Paths are unique and relative to base_dir();
/// class_counts() is always the tally of samples().
class DatasetManifest {
 public:
  DatasetManifest() = default;
  explicit DatasetManifest(std::vector<ImageSample> samples,
                           std::uint64_t seed = 0,
                           std::filesystem::path base_dir = {},
                           std::optional<SplitRatios> ratios = std::nullopt);

  const std::vector<ImageSample>& samples() const { return samples_; }
  const ClassCounts& class_counts() const { return class_counts_; }
  std::uint64_t seed() const { return seed_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }
  /// Ratios used by the split that produced this manifest, if any.
  const std::optional<SplitRatios>& ratios() const { return ratios_; }

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  /// Positions into samples() belonging to `split`, in manifest order.
  std::vector<std::size_t> indices_in(Split split) const;
  ClassCounts class_counts_in(Split split) const;

  std::filesystem::path resolve(const ImageSample& sample) const {
    return base_dir_ / sample.path;
  }

  /// Same samples re-expressed relative to `new_base`.
  DatasetManifest rebased(const std::filesystem::path& new_base) const;

  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    return a.samples_ == b.samples_ && a.seed_ == b.seed_ &&
           a.ratios_ == b.ratios_;
  }

 private:
  std::vector<ImageSample> samples_;
  ClassCounts class_counts_{};
  std::uint64_t seed_ = 0;
  std::filesystem::path base_dir_;
  std::optional<SplitRatios> ratios_;
};

/// Walks `root/<class>/...`. Files directly inside a class directory are
/// `real`; files inside `root/<class>/{real,synthetic,scraped}/` take the
/// source from that directory. Samples are ordered lexicographically by path.
DatasetManifest scan_corpus(const std::filesystem::path& root);

/// Writes `path,label,source,split` CSV plus `<stem>.meta.json` next to it.
/// Sample paths are rewritten relative to the CSV's directory.
void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& csv_path);

DatasetManifest load_manifest(const std::filesystem::path& csv_path);

std::filesystem::path meta_path_for(const std::filesystem::path& csv_path);

}  // namespace knitpat
