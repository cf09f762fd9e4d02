#pragma once

#include <filesystem>
#include <string>

#include "knitpat/model/classifier.hpp"

namespace knitpat {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string spec_to_json(const ClassifierSpec& spec);
/// Throws ModelError on malformed input.
ClassifierSpec spec_from_json(const std::string& text);

/// Single-file archive: "KPCK", u32 version, u64 JSON length, JSON (spec,
/// backbone layout, head layout), float64 tensors, trailing SHA-256 of all
/// preceding bytes.
void save_checkpoint(const ClassifierModel& model, const std::filesystem::path& path);

/// Throws ModelError for missing, truncated, corrupt or wrong-version files.
ClassifierModel load_checkpoint(const std::filesystem::path& path);

}  // namespace knitpat
