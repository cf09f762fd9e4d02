#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace knitpat {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitFailure = 2;

/// Runs the command line `args` (program name excluded). Returns 0 on
/// success, 1 when flags or configuration are invalid (nothing has been
/// written), 2 when a command fails while running.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Creates `<root>/<prefix>-NNN` with NNN one past the highest existing
/// index for that prefix; never reuses or overwrites a directory.
std::filesystem::path create_run_dir(const std::filesystem::path& root, std::string_view prefix);

}  // namespace knitpat
