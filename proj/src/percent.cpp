#include "adaptq/percent.hpp"

#include "adaptq/errors.hpp"

namespace adaptq {

std::string_view to_string(Rounding mode) {
  return mode == Rounding::HalfUp ? "half-up" : "truncate";
}

Rounding rounding_from_string(std::string_view s) {
  if (s == "half-up") return Rounding::HalfUp;
  if (s == "truncate") return Rounding::Truncate;
  throw ValidationError("unknown rounding mode '" + std::string(s) + "'");
}

std::int64_t scaled_percent(std::int64_t part, std::int64_t whole, int decimals, Rounding mode) {
  if (whole <= 0) throw ValidationError("percentage of an empty total");
  if (part < 0 || decimals < 0) throw ValidationError("negative percentage input");
  std::int64_t scale = 100;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  std::int64_t numerator = part * scale;
  std::int64_t quotient = numerator / whole;
  std::int64_t remainder = numerator % whole;
  if (mode == Rounding::HalfUp && 2 * remainder >= whole) ++quotient;
  return quotient;
}

std::string format_percent(std::int64_t part, std::int64_t whole, int decimals, Rounding mode) {
  std::int64_t scaled = scaled_percent(part, whole, decimals, mode);
  if (decimals == 0) return std::to_string(scaled);
  std::int64_t unit = 1;
  for (int i = 0; i < decimals; ++i) unit *= 10;
  std::string frac = std::to_string(scaled % unit);
  frac.insert(0, static_cast<std::size_t>(decimals) - frac.size(), '0');
  return std::to_string(scaled / unit) + "." + frac;
}

}  // namespace adaptq
