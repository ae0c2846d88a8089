#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace border_rdd {

//! Shortest decimal representation that round-trips to the same double.
//! NaN is written as "NA".
std::string format_number(double value);
std::string format_number(std::int64_t value);

std::optional<double> parse_double(std::string_view text);
std::optional<std::int64_t> parse_int(std::string_view text);

std::string_view trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);
std::vector<std::string> split_whitespace(std::string_view text);

//! Write `contents` to `path` through a temporary file and rename, so readers
//! never observe a partially written file.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

} // namespace border_rdd
