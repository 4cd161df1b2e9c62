#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace pb {

// Exact rational number with a positive denominator, always kept in lowest
// terms. Used for timestamps and frame rates so that segment boundaries at
// whole seconds stay exact.
class Rational {
public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  // Largest integer <= value.
  std::int64_t floor() const;
  // Smallest integer >= value.
  std::int64_t ceil() const;

  friend Rational operator+(const Rational &a, const Rational &b);
  friend Rational operator-(const Rational &a, const Rational &b);
  friend Rational operator*(const Rational &a, const Rational &b);
  friend Rational operator/(const Rational &a, const Rational &b);
  Rational operator-() const { return Rational(-num_, den_); }
  Rational &operator+=(const Rational &o) { return *this = *this + o; }

  friend bool operator==(const Rational &a, const Rational &b) = default;
  friend std::strong_ordering operator<=>(const Rational &a, const Rational &b);

  // "num/den", or just "num" when den == 1.
  std::string str() const;
  // Accepts "30", "30000/1001" or a plain decimal such as "29.97".
  static Rational parse(std::string_view text);

private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

} // namespace pb
