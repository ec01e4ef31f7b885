#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sddnn {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

/// Parses a full field as a double; accepts "nan". Throws InputError otherwise.
double parse_number(std::string_view field);

/// Splits one CSV line on commas (no quoting; identifiers never contain commas).
std::vector<std::string_view> split_csv(std::string_view line);

}  // namespace sddnn
