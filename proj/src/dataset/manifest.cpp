#include "knitpat/dataset/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "knitpat/core/csv.hpp"

namespace knitpat {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 3> kSourceNames = {"real", "synthetic",
                                                          "scraped"};
constexpr std::array<std::string_view, 4> kSplitNames = {"train", "val", "test",
                                                         "unassigned"};
constexpr std::string_view kCsvHeader = "path,label,source,split";

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

bool is_hidden(const fs::path& p) {
  const auto name = p.filename().string();
  return !name.empty() && name.front() == '.';
}

}  // namespace

ClassLabel class_from_index(std::size_t index) {
  if (index >= kNumClasses) {
    throw std::out_of_range("class index " + std::to_string(index) +
                            " outside 0.." + std::to_string(kNumClasses - 1));
  }
  return static_cast<ClassLabel>(index);
}

std::optional<ClassLabel> parse_class_label(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kClassNames[i] == name) return static_cast<ClassLabel>(i);
  }
  return std::nullopt;
}

std::string_view to_string(SampleSource source) {
  return kSourceNames[static_cast<std::size_t>(source)];
}

std::string_view to_string(Split split) {
  return kSplitNames[static_cast<std::size_t>(split)];
}

std::optional<SampleSource> parse_sample_source(std::string_view text) {
  for (std::size_t i = 0; i < kSourceNames.size(); ++i) {
    if (kSourceNames[i] == text) return static_cast<SampleSource>(i);
  }
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view text) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i) {
    if (kSplitNames[i] == text) return static_cast<Split>(i);
  }
  return std::nullopt;
}

DatasetManifest::DatasetManifest(std::vector<ImageSample> samples,
                                 std::uint64_t seed, fs::path base_dir,
                                 std::optional<SplitRatios> ratios)
    : samples_(std::move(samples)),
      seed_(seed),
      base_dir_(std::move(base_dir)),
      ratios_(ratios) {
  std::unordered_set<std::string> seen;
  seen.reserve(samples_.size());
  for (const auto& s : samples_) {
    if (s.path.empty()) throw DatasetError("manifest sample with empty path");
    if (!seen.insert(s.path).second) {
      throw DatasetError("duplicate manifest path: " + s.path);
    }
    if (class_index(s.label) >= kNumClasses) {
      throw DatasetError("label outside the class set for " + s.path);
    }
    ++class_counts_[class_index(s.label)];
  }
}

std::vector<std::size_t> DatasetManifest::indices_in(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].split == split) out.push_back(i);
  }
  return out;
}

ClassCounts DatasetManifest::class_counts_in(Split split) const {
  ClassCounts counts{};
  for (const auto& s : samples_) {
    if (s.split == split) ++counts[class_index(s.label)];
  }
  return counts;
}

DatasetManifest DatasetManifest::rebased(const fs::path& new_base) const {
  auto normalized = [](const fs::path& p) {
    return fs::weakly_canonical(fs::absolute(p.empty() ? fs::path(".") : p));
  };
  const fs::path from = normalized(base_dir_);
  const fs::path to = normalized(new_base);
  std::vector<ImageSample> moved = samples_;
  if (from != to) {
    for (auto& s : moved) {
      s.path = (from / s.path).lexically_relative(to).generic_string();
    }
  }
  return DatasetManifest(std::move(moved), seed_, new_base, ratios_);
}

DatasetManifest scan_corpus(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw DatasetError("corpus root is not a directory: " + root.string());
  }
  std::vector<ImageSample> samples;
  std::vector<std::string> unknown;

  auto add_files = [&](const fs::path& dir, ClassLabel label, SampleSource source) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (is_hidden(entry.path())) continue;
      if (entry.is_directory()) {
        const auto sub = entry.path().filename().string();
        const auto sub_source = parse_sample_source(sub);
        if (!sub_source) {
          unknown.push_back(entry.path().string());
          continue;
        }
        for (const auto& inner : fs::directory_iterator(entry.path())) {
          if (inner.is_regular_file() && !is_hidden(inner.path()) &&
              is_image_file(inner.path())) {
            samples.push_back({fs::relative(inner.path(), root).generic_string(),
                               label, *sub_source, Split::kUnassigned});
          } else if (inner.is_directory()) {
            unknown.push_back(inner.path().string());
          }
        }
      } else if (entry.is_regular_file() && is_image_file(entry.path())) {
        samples.push_back({fs::relative(entry.path(), root).generic_string(),
                           label, source, Split::kUnassigned});
      }
    }
  };

  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory() || is_hidden(entry.path())) continue;
    const auto name = entry.path().filename().string();
    const auto label = parse_class_label(name);
    if (!label) {
      unknown.push_back(entry.path().string());
      continue;
    }
    add_files(entry.path(), *label, SampleSource::kReal);
  }

  if (!unknown.empty()) {
    std::sort(unknown.begin(), unknown.end());
    std::string msg = "unknown directories in corpus (expected one of the class names";
    for (auto n : kClassNames) msg += " " + std::string(n);
    msg += "):";
    for (const auto& u : unknown) msg += "\n  " + u;
    throw DatasetError(msg);
  }
  if (samples.empty()) {
    throw DatasetError("corpus contains no images: " + root.string());
  }
  std::sort(samples.begin(), samples.end(),
            [](const ImageSample& a, const ImageSample& b) { return a.path < b.path; });
  return DatasetManifest(std::move(samples), 0, root);
}

fs::path meta_path_for(const fs::path& csv_path) {
  fs::path meta = csv_path;
  meta.replace_extension(".meta.json");
  return meta;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& csv_path) {
  fs::path dir = csv_path.parent_path();
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  const DatasetManifest local = manifest.rebased(dir);

  std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write manifest: " + csv_path.string());
  out << kCsvHeader << '\n';
  for (const auto& s : local.samples()) {
    out << csv::join({s.path, std::string(class_name(s.label)),
                      std::string(to_string(s.source)),
                      std::string(to_string(s.split))})
        << '\n';
  }
  if (!out) throw DatasetError("failed writing manifest: " + csv_path.string());

  nlohmann::ordered_json meta;
  meta["format_version"] = 1;
  meta["seed"] = local.seed();
  if (local.ratios()) {
    meta["ratios"] = {{"train", local.ratios()->train},
                      {"val", local.ratios()->val},
                      {"test", local.ratios()->test}};
  } else {
    meta["ratios"] = nullptr;
  }
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    counts[std::string(kClassNames[c])] = local.class_counts()[c];
  }
  meta["class_counts"] = counts;
  meta["num_samples"] = local.size();

  std::ofstream meta_out(meta_path_for(csv_path), std::ios::binary | std::ios::trunc);
  if (!meta_out) throw DatasetError("cannot write manifest metadata for " + csv_path.string());
  meta_out << meta.dump(2) << '\n';
}

DatasetManifest load_manifest(const fs::path& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw DatasetError("cannot open manifest: " + csv_path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw DatasetError("manifest " + csv_path.string() + " lacks header '" +
                       std::string(kCsvHeader) + "'");
  }
  std::vector<ImageSample> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = csv_path.string() + ":" + std::to_string(line_no);
    std::vector<std::string> f;
    try {
      f = csv::split(line);
    } catch (const std::invalid_argument& e) {
      throw DatasetError(where + ": " + e.what());
    }
    if (f.size() != 4) throw DatasetError(where + ": expected 4 fields");
    const auto label = parse_class_label(f[1]);
    if (!label) throw DatasetError(where + ": unknown label '" + f[1] + "'");
    const auto source = parse_sample_source(f[2]);
    if (!source) throw DatasetError(where + ": unknown source '" + f[2] + "'");
    const auto split = parse_split(f[3]);
    if (!split) throw DatasetError(where + ": unknown split '" + f[3] + "'");
    samples.push_back({f[0], *label, *source, *split});
  }

  std::uint64_t seed = 0;
  std::optional<SplitRatios> ratios;
  const fs::path meta_path = meta_path_for(csv_path);
  if (fs::exists(meta_path)) {
    std::ifstream meta_in(meta_path);
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(meta_in);
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError("malformed manifest metadata " + meta_path.string() + ": " + e.what());
    }
    seed = meta.value("seed", std::uint64_t{0});
    if (meta.contains("ratios") && meta["ratios"].is_object()) {
      const auto& r = meta["ratios"];
      ratios = SplitRatios{r.at("train").get<double>(), r.at("val").get<double>(),
                           r.at("test").get<double>()};
    }
    DatasetManifest loaded(std::move(samples), seed, csv_path.parent_path(), ratios);
    if (meta.contains("class_counts")) {
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const auto name = std::string(kClassNames[c]);
        const auto stored = meta["class_counts"].value(name, std::size_t{0});
        if (stored != loaded.class_counts()[c]) {
          throw DatasetError("manifest metadata count for " + name + " (" +
                             std::to_string(stored) + ") disagrees with CSV tally (" +
                             std::to_string(loaded.class_counts()[c]) + ")");
        }
      }
    }
    return loaded;
  }
  return DatasetManifest(std::move(samples), seed, csv_path.parent_path(), ratios);
}

}  // namespace knitpat
