#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "reqmetric/corpus.hpp"

namespace reqmetric::detail {

// Throws InputError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Creates parent directories. Throws InputError when the file cannot be written.
void write_file(const std::filesystem::path& path, std::string_view content);
void append_file(const std::filesystem::path& path, std::string_view content);

// Splits on '\n', dropping a trailing '\r' from each line. A final empty line
// (text ending in '\n') is not returned.
std::vector<std::string_view> split_lines(std::string_view text);

// Serializes like Json::dump, except that doubles use the shortest
// round-trip digits: fixed notation for decimal exponents in [-4, 16),
// scientific otherwise, and a ".0" suffix on integral values.
std::string dump_json(const Json& value, int indent = -1);
std::string format_double(double v);

}  // namespace reqmetric::detail
