#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "knitpat/dataset/manifest.hpp"
#include "knitpat/image/transforms.hpp"
#include "knitpat/model/classifier.hpp"
#include "knitpat/train/config.hpp"

namespace knitpat {

/// Invalid configuration or flags; maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PathsConfig {
  std::filesystem::path corpus;
  std::filesystem::path manifest;
  std::filesystem::path runs = "runs";
  std::filesystem::path weights = "weights";
};

/// Overrides applied on top of TrainConfig::comparison_preset().
struct CompareConfig {
  std::optional<double> learning_rate;
  std::optional<std::size_t> max_epochs;
  std::optional<bool> use_class_weights;
};

struct RunConfig {
  PathsConfig paths;
  AugmentationConfig augmentation;
  ClassifierSpec model{backbone_spec(BackboneName::kInceptionResNetV2), HeadSpec{},
                       FreezePolicy::kFreezeExceptLastBlock};
  TrainConfig train;
  SplitRatios split;
  CompareConfig compare;
  std::size_t workers = 1;
  std::filesystem::path dump_augmented;
  std::size_t dump_count = 16;

  /// Checks every field against its owning type; throws ConfigError.
  void validate() const;
};

/// Text form of a backbone choice: a registry id, "stub" or "stub:<dim>".
BackboneSpec parse_backbone_choice(std::string_view text);
std::string backbone_choice(const BackboneSpec& spec);
/// Results-table label, e.g. "Inception-Resnet-V2" or "Stub-16".
std::string backbone_display_name(const BackboneSpec& spec);

/// Reads an INI file over the defaults. Relative paths resolve against the
/// file's directory. Unknown sections or keys are errors.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig load_run_config_text(std::string_view text, const std::filesystem::path& base_dir);

/// INI text that load_run_config reads back to an equal configuration.
std::string run_config_ini(const RunConfig& cfg);

}  // namespace knitpat
