#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kadmap {

/// Shortest decimal form that round-trips.
std::string format_number(double v);

/// Fixed-point with `digits` decimals, for human-readable reports.
std::string format_fixed(double v, int digits);

/// Parses a full string as a double; throws std::invalid_argument otherwise.
double parse_number(std::string_view s);

std::vector<std::string> split_ws(std::string_view line);

std::string_view trim(std::string_view s);

}  // namespace kadmap
