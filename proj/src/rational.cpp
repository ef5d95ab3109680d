#include "crowdkm/rational.hpp"

#include <numeric>
#include <stdexcept>

namespace crowdkm {

Rational::Rational(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
  if (den_ == 0) throw std::invalid_argument("rational with zero denominator");
  normalize();
}

void Rational::normalize() {
  if (den_ < 0) {
    num_ = -num_;
    den_ = -den_;
  }
  std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
  if (g > 1) {
    num_ /= g;
    den_ /= g;
  }
  if (num_ == 0) den_ = 1;
}

Rational Rational::operator+(const Rational& o) const {
  // Reduce cross factors before multiplying to keep magnitudes small.
  std::int64_t g = std::gcd(den_, o.den_);
  std::int64_t lhs_scale = o.den_ / g;
  std::int64_t rhs_scale = den_ / g;
  return Rational(num_ * lhs_scale + o.num_ * rhs_scale, den_ * lhs_scale);
}

Rational Rational::operator-(const Rational& o) const {
  return *this + Rational(-o.num_, o.den_);
}

Rational Rational::operator*(const Rational& o) const {
  std::int64_t g1 = std::gcd(num_ < 0 ? -num_ : num_, o.den_);
  std::int64_t g2 = std::gcd(o.num_ < 0 ? -o.num_ : o.num_, den_);
  return Rational((num_ / g1) * (o.num_ / g2), (den_ / g2) * (o.den_ / g1));
}

Rational Rational::operator/(const Rational& o) const {
  if (o.num_ == 0) throw std::invalid_argument("rational division by zero");
  return *this * Rational(o.den_, o.num_);
}

bool Rational::operator<(const Rational& o) const {
  // den_ > 0 on both sides, so cross multiplication preserves order.
  return static_cast<__int128>(num_) * o.den_ < static_cast<__int128>(o.num_) * den_;
}

std::string Rational::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational Rational::from_string(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty rational literal");
  auto slash = text.find('/');
  if (slash != std::string::npos) {
    std::int64_t n = std::stoll(text.substr(0, slash));
    std::int64_t d = std::stoll(text.substr(slash + 1));
    return Rational(n, d);
  }
  auto dot = text.find('.');
  if (dot != std::string::npos) {
    bool negative = text[0] == '-';
    std::string digits = text.substr(0, dot) + text.substr(dot + 1);
    if (negative) digits = digits.substr(1);
    std::size_t frac_len = text.size() - dot - 1;
    if (frac_len == 0 || frac_len > 17) throw std::invalid_argument("bad decimal literal: " + text);
    std::int64_t n = digits.empty() ? 0 : std::stoll(digits);
    std::int64_t d = 1;
    for (std::size_t i = 0; i < frac_len; ++i) d *= 10;
    return Rational(negative ? -n : n, d);
  }
  return Rational(std::stoll(text), 1);
}

}  // namespace crowdkm
