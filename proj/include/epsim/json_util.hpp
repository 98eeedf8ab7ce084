#pragma once

#include <string>

#include "json.hpp"

namespace epsim {

using json = nlohmann::json;

std::string read_text_file(const std::string& path, const std::string& what);

/// Parses JSON; malformed input raises ConfigError naming line and column.
json parse_json_text(const std::string& text, const std::string& what);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace epsim
