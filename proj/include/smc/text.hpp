#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace smc::text {

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// Whole-string parses; throw smc::Error(invalid_argument) naming `what`.
double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);
std::size_t parse_size(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

}  // namespace smc::text
