#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace evload {

// Shortest decimal string that round-trips to the same double. All numeric
// output goes through this so that repeated runs are byte-identical.
std::string format_double(double v);

// Strict double parse; the whole field must be consumed. Accepts "nan"/"inf"
// spellings (case-insensitive) since format_double can emit them.
std::optional<double> parse_double(std::string_view text);

std::optional<long long> parse_int(std::string_view text);

}  // namespace evload
