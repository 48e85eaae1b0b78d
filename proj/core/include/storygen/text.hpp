#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace storygen {

std::vector<std::string_view> split(std::string_view s, char sep);
std::vector<std::string_view> split_whitespace(std::string_view s);
std::string_view trim(std::string_view s);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

/// Shortest decimal that parses back to the identical double.
std::string format_double(double v);

}  // namespace storygen
