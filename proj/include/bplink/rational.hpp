#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>

#include "bplink/errors.hpp"

namespace bplink {

// Exact rational arithmetic on int64 numerator/denominator, normalized with
// den > 0 and gcd(num, den) == 1. Intermediate products go through __int128;
// results that do not fit int64 throw RationalOverflowError. Used wherever a
// quantity is a ratio of model parameters, so that derived parameters agree
// bit-for-bit across algebraically equal computation routes.
class Rational {
public:
  Rational() : num_(0), den_(1) {}
  Rational(std::int64_t n) : num_(n), den_(1) {}  // NOLINT: implicit by design
  Rational(std::int64_t n, std::int64_t d) {
    if (d == 0) throw std::invalid_argument("Rational: zero denominator");
    __int128 nn = n, dd = d;
    if (dd < 0) {
      nn = -nn;
      dd = -dd;
    }
    normalize_assign(nn, dd);
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  bool is_integer() const { return den_ == 1; }
  bool is_zero() const { return num_ == 0; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  // Largest integer <= value.
  std::int64_t floor() const {
    if (num_ >= 0) return num_ / den_;
    return -(((-num_) + den_ - 1) / den_);
  }
  std::int64_t ceil() const { return -(Rational(-num_, den_).floor()); }

  Rational frac() const { return *this - Rational(floor()); }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return make(i128(a.num_) * b.den_ + i128(b.num_) * a.den_, i128(a.den_) * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return make(i128(a.num_) * b.den_ - i128(b.num_) * a.den_, i128(a.den_) * b.den_);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return make(i128(a.num_) * b.num_, i128(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw std::invalid_argument("Rational: division by zero");
    return make(i128(a.num_) * b.den_, i128(a.den_) * b.num_);
  }
  Rational operator-() const { return Rational(-num_, den_); }
  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }
  Rational& operator/=(const Rational& o) { return *this = *this / o; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    __int128 lhs = i128(a.num_) * b.den_;
    __int128 rhs = i128(b.num_) * a.den_;
    if (lhs < rhs) return std::strong_ordering::less;
    if (lhs > rhs) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  // gcd extended to rationals: gcd(a/b, c/d) = gcd(a*d, c*b) / (b*d).
  // Satisfies x / rational_gcd(x, y) being a non-negative integer for x, y >= 0.
  static Rational gcd(const Rational& a, const Rational& b) {
    __int128 n = steins(abs128(i128(a.num_) * b.den_), abs128(i128(b.num_) * a.den_));
    return make(n, i128(a.den_) * b.den_);
  }

  // Exact parse of integers and plain decimals ("3", "-1.25", "0.5e-2" is not
  // supported; exponents never appear in the config grammar).
  static std::optional<Rational> parse(std::string_view s);

  // Best rational approximation with |x - p/q| <= rel_tol * |x|, by continued
  // fractions with denominators capped at 10^12. Returns nullopt for
  // non-finite input or when the cap is hit before reaching the tolerance.
  static std::optional<Rational> approximate(double x, double rel_tol = 1e-10);

  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

private:
  static __int128 i128(std::int64_t v) { return static_cast<__int128>(v); }
  static __int128 abs128(__int128 v) { return v < 0 ? -v : v; }

  static __int128 steins(__int128 a, __int128 b) {
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  static Rational make(__int128 n, __int128 d) {
    Rational r;
    if (d < 0) {
      n = -n;
      d = -d;
    }
    r.normalize_assign(n, d);
    return r;
  }

  void normalize_assign(__int128 n, __int128 d) {
    __int128 g = steins(abs128(n), d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
    constexpr __int128 lo = static_cast<__int128>(INT64_MIN);
    constexpr __int128 hi = static_cast<__int128>(INT64_MAX);
    if (n < lo || n > hi || d > hi)
      throw RationalOverflowError("Rational: value does not fit in int64/int64");
    num_ = static_cast<std::int64_t>(n);
    den_ = static_cast<std::int64_t>(d);
  }

  std::int64_t num_;
  std::int64_t den_;
};

inline std::optional<Rational> Rational::parse(std::string_view s) {
  if (s.empty()) return std::nullopt;
  bool neg = false;
  std::size_t i = 0;
  if (s[0] == '+' || s[0] == '-') {
    neg = s[0] == '-';
    i = 1;
  }
  __int128 num = 0;
  __int128 den = 1;
  bool seen_digit = false, seen_dot = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (c == '.') {
      if (seen_dot) return std::nullopt;
      seen_dot = true;
      continue;
    }
    if (c == '/') {
      // "a/b" form, integers only on both sides.
      auto lhs = s.substr(0, i), rhs = s.substr(i + 1);
      if (lhs.find('.') != std::string_view::npos || rhs.find('.') != std::string_view::npos)
        return std::nullopt;
      auto a = parse(lhs), b = parse(rhs);
      if (!a || !b || b->is_zero()) return std::nullopt;
      try {
        return *a / *b;
      } catch (const RationalOverflowError&) {
        return std::nullopt;
      }
    }
    if (c < '0' || c > '9') return std::nullopt;
    seen_digit = true;
    num = num * 10 + (c - '0');
    if (seen_dot) den *= 10;
    if (num > (static_cast<__int128>(INT64_MAX) * 1000000) || den > INT64_MAX)
      return std::nullopt;
  }
  if (!seen_digit) return std::nullopt;
  if (neg) num = -num;
  try {
    Rational r;
    r.normalize_assign(num, den);
    return r;
  } catch (const RationalOverflowError&) {
    return std::nullopt;
  }
}

inline std::optional<Rational> Rational::approximate(double x, double rel_tol) {
  if (!std::isfinite(x)) return std::nullopt;
  if (x == 0.0) return Rational(0);
  const bool neg = x < 0;
  double v = std::abs(x);
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double frac = v;
  for (int it = 0; it < 64; ++it) {
    double a_f = std::floor(frac);
    if (a_f > 9e17) return std::nullopt;
    auto a = static_cast<std::int64_t>(a_f);
    __int128 p2 = static_cast<__int128>(a) * p1 + p0;
    __int128 q2 = static_cast<__int128>(a) * q1 + q0;
    if (q2 > 1000000000000LL || p2 > INT64_MAX) return std::nullopt;
    p0 = p1;
    q0 = q1;
    p1 = static_cast<std::int64_t>(p2);
    q1 = static_cast<std::int64_t>(q2);
    double approx = static_cast<double>(p1) / static_cast<double>(q1);
    if (std::abs(approx - v) <= rel_tol * v)
      return Rational(neg ? -p1 : p1, q1);
    double rem = frac - a_f;
    if (rem <= 0) break;
    frac = 1.0 / rem;
  }
  return std::nullopt;
}

}  // namespace bplink
