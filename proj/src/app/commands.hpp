#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "knitpat/app/run_config.hpp"

namespace knitpat::commands {

// Each command checks its inputs first and throws ConfigError before
// touching the filesystem; later failures surface as other exceptions.

void ingest(const RunConfig& cfg, std::ostream& out);
void split(const RunConfig& cfg, const std::filesystem::path& out_manifest, std::ostream& out);
std::filesystem::path train(const RunConfig& cfg, std::ostream& out);
void evaluate(const RunConfig& cfg, const std::filesystem::path& run, Split split,
              std::ostream& out);
std::filesystem::path compare(const RunConfig& cfg, const std::vector<std::string>& backbones,
                              bool parallel, std::ostream& out);
void report(const RunConfig& cfg, const std::filesystem::path& run, std::ostream& out);

}  // namespace knitpat::commands
