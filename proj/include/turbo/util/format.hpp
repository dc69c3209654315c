#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace turbo {

/// Shortest-safe round-trip text for a double: 17 significant digits.
std::string format_exact(double value);

/// Parses a double, rejecting trailing garbage. Throws std::invalid_argument.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string> split_ws(std::string_view line);
std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

}  // namespace turbo
