#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace rearsim::io {

namespace fs = std::filesystem;

using Row = std::vector<std::string>;

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

/// Strict parse; throws ParseError naming `context` on failure.
double parse_double(std::string_view text, std::string_view context);
long long parse_int(std::string_view text, std::string_view context);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, std::string_view content);

/// Comma-separated rows, blank lines skipped, CR stripped. No quoting support.
std::vector<Row> read_csv(const fs::path& path);
std::string join_row(const Row& fields);

nlohmann::json read_json(const fs::path& path);
/// Two-space indented JSON followed by a newline.
void write_json(const fs::path& path, const nlohmann::json& doc);

/// Resolves `p` against `base` unless it is already absolute.
fs::path resolve(const fs::path& base, const fs::path& p);

}  // namespace rearsim::io
