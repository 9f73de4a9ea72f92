#pragma once

// Small text and file helpers shared by the CSV / JSON writers.

#include <string>
#include <string_view>
#include <vector>

namespace specnhmc::detail {

std::string_view trim(std::string_view s);

/// Splits one CSV line on commas; fields are trimmed. No quoting support.
std::vector<std::string> split_csv(std::string_view line);

/// Parses a finite double; throws ParseError mentioning `where` otherwise.
double parse_double(std::string_view field, const std::string& where);
long long parse_int(std::string_view field, const std::string& where);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace specnhmc::detail
