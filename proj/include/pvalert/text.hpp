#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pvalert {

std::vector<std::string_view> split(std::string_view text, char delim);
std::string_view trim(std::string_view text);
std::string to_lower(std::string_view text);

/// Whole-string numeric parses; none on trailing garbage or overflow.
std::optional<double> parse_double(std::string_view text);
std::optional<std::uint64_t> parse_uint(std::string_view text);
std::optional<std::int64_t> parse_int(std::string_view text);

/// Shortest text that reads back as the same double.
std::string format_double(double v);
std::string format_fixed(double v, int decimals);

}  // namespace pvalert
