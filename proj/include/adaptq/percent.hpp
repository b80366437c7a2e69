#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace adaptq {

enum class Rounding { HalfUp, Truncate };

std::string_view to_string(Rounding mode);
Rounding rounding_from_string(std::string_view s);

// 100 * part / whole scaled by 10^decimals, rounded in exact integer
// arithmetic. `whole` must be positive.
std::int64_t scaled_percent(std::int64_t part, std::int64_t whole, int decimals, Rounding mode);

// "34.29" for (12, 35, 2, HalfUp). No percent sign.
std::string format_percent(std::int64_t part, std::int64_t whole, int decimals, Rounding mode);

}  // namespace adaptq
