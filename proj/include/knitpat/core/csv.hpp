#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace knitpat::csv {

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

/// Splits one RFC 4180 record. A trailing '\r' is not stripped.
std::vector<std::string> split(std::string_view line);

}  // namespace knitpat::csv
