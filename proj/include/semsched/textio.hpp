#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace semsched::textio {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

/// Strict parse of a whole token; throws Error(Format) on trailing junk.
double parse_double(std::string_view token);
long long parse_int(std::string_view token);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split_ws(std::string_view line);
std::vector<std::string_view> split(std::string_view line, char sep);

/// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

} // namespace semsched::textio
