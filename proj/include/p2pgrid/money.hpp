#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>

namespace p2pgrid {

// Fixed-point currency amount with a resolution of 1e-6 money units. Settlement sums are
// integer additions, so buyer payments and seller receipts balance exactly.
class Money {
 public:
  static constexpr std::int64_t kMicrosPerUnit = 1'000'000;

  constexpr Money() = default;

  static constexpr Money from_micros(std::int64_t micros) {
    Money m;
    m.micros_ = micros;
    return m;
  }
  static Money from_double(double units) {
    return from_micros(static_cast<std::int64_t>(std::llround(units * kMicrosPerUnit)));
  }
  // Amount for `kwh` at `price` per kWh, rounded once to the nearest micro-unit.
  static Money of(double price, double kwh) { return from_double(price * kwh); }

  constexpr std::int64_t micros() const { return micros_; }
  constexpr double to_double() const {
    return static_cast<double>(micros_) / static_cast<double>(kMicrosPerUnit);
  }
  std::string to_string() const;

  constexpr Money operator-() const { return from_micros(-micros_); }
  constexpr Money& operator+=(Money o) {
    micros_ += o.micros_;
    return *this;
  }
  constexpr Money& operator-=(Money o) {
    micros_ -= o.micros_;
    return *this;
  }
  friend constexpr Money operator+(Money a, Money b) { return a += b; }
  friend constexpr Money operator-(Money a, Money b) { return a -= b; }
  friend constexpr auto operator<=>(Money, Money) = default;

 private:
  std::int64_t micros_ = 0;
};

}  // namespace p2pgrid
