#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "knitpat/model/backbone.hpp"

namespace knitpat {

inline constexpr std::string_view kWeightsLockName = "weights.lock";

struct WeightsEntry {
  std::filesystem::path file;  // relative to the registry directory
  std::string sha256;          // lowercase hex
};

/// Local pretrained-weight registry: a directory holding `weights.lock`
/// (JSON: {"version": 1, "backbones": {name: {"path", "sha256"}}}) and the
/// backbone files it names.
class WeightsRegistry {
 public:
  WeightsRegistry(std::filesystem::path directory, std::map<BackboneName, WeightsEntry> entries);

  /// Throws ModelError if weights.lock is missing or malformed.
  static WeightsRegistry load(const std::filesystem::path& directory);

  const std::filesystem::path& directory() const { return directory_; }
  std::optional<WeightsEntry> entry(BackboneName name) const;

  /// Checks presence and checksum without decoding. Throws ModelError naming
  /// the backbone and the expected checksum.
  void verify(BackboneName name) const;

  /// verify() then decode; the decoded graph must report the registry's
  /// feature_dim for `name`.
  ConvBackbone resolve(BackboneName name) const;

 private:
  std::filesystem::path directory_;
  std::map<BackboneName, WeightsEntry> entries_;
};

std::string sha256_file(const std::filesystem::path& file);
std::string sha256_hex(std::string_view bytes);

/// Backbone file: "KPBB", u32 version, u64 header length, JSON header with
/// the layer list, then float64 little-endian weights and biases per layer.
void write_backbone_file(const ConvBackbone& backbone, const std::filesystem::path& path);
ConvBackbone read_backbone_file(const std::filesystem::path& path);

/// Writes weights.lock for `entries`, hashing each file.
void write_weights_lock(const std::filesystem::path& directory,
                        const std::map<BackboneName, std::filesystem::path>& files);

}  // namespace knitpat
