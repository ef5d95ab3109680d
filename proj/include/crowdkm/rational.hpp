#pragma once

#include <cstdint>
#include <string>

namespace crowdkm {

// Exact rational on int64. Scores, proportions, progress fractions and
// credit balances stay exact so replays are bit-identical; floating point
// never enters the engine state.
class Rational {
 public:
  Rational() : num_(0), den_(1) {}
  Rational(std::int64_t value) : num_(value), den_(1) {}  // NOLINT(google-explicit-constructor)
  Rational(std::int64_t num, std::int64_t den);

  static Rational from_string(const std::string& text);  // "3", "-7/2", "0.25"

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator/(const Rational& o) const;
  Rational& operator+=(const Rational& o) { return *this = *this + o; }

  bool operator==(const Rational& o) const { return num_ == o.num_ && den_ == o.den_; }
  bool operator!=(const Rational& o) const { return !(*this == o); }
  bool operator<(const Rational& o) const;
  bool operator<=(const Rational& o) const { return *this < o || *this == o; }
  bool operator>(const Rational& o) const { return o < *this; }
  bool operator>=(const Rational& o) const { return o <= *this; }

  bool is_integer() const { return den_ == 1; }
  bool is_zero() const { return num_ == 0; }

  // Canonical text form: "5" when integral, "5/8" otherwise.
  std::string str() const;

 private:
  void normalize();

  std::int64_t num_;
  std::int64_t den_;  // always > 0
};

}  // namespace crowdkm
