#include "p2pgrid/format.hpp"

#include <charconv>
#include <cstdlib>
#include <system_error>

#include "p2pgrid/money.hpp"

namespace p2pgrid {

std::string format_double(double value) {
  if (value == 0.0) return "0";  // folds -0
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

std::string Money::to_string() const {
  const std::int64_t whole = micros_ / kMicrosPerUnit;
  const std::int64_t frac = std::llabs(micros_ % kMicrosPerUnit);
  std::string out = (micros_ < 0 && whole == 0) ? "-" : "";
  out += std::to_string(whole);
  std::string f = std::to_string(frac);
  out += "." + std::string(6 - f.size(), '0') + f;
  return out;
}

}  // namespace p2pgrid
