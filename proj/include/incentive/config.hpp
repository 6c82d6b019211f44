#pragma once

#include "incentive/io.hpp"

#include <json.hpp>

#include <filesystem>
#include <string_view>

namespace incentive::config {

// Parses the TOML subset used by the experiment configs into JSON:
//   - comments, blank lines
//   - [table] and [dotted.table] headers, dotted keys
//   - bare and quoted keys
//   - basic and literal strings, integers (with _ separators), floats
//     (including inf and nan), booleans
//   - arrays (may span lines, trailing comma allowed) and inline tables
// Dates, multi-line strings and arrays of tables are not supported.
// Throws io::ParseError naming the line on malformed input or a redefined
// key.
nlohmann::json parse_toml(std::string_view text);

// Reads a config file: JSON when the extension is .json, TOML otherwise.
nlohmann::json load_file(const std::filesystem::path& path);

}  // namespace incentive::config
