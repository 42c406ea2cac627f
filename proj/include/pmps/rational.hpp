#ifndef PMPS_RATIONAL_HPP
#define PMPS_RATIONAL_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace pmps {

using Int = boost::multiprecision::cpp_int;

// Exact rational, always in lowest terms with a positive denominator.
// Arbitrary-precision components: probabilities multiply along reduction
// paths and fixed-width denominators overflow within ~20 steps.
struct Rational {
  Int num{0};
  Int den{1};

  Rational() = default;
  Rational(long long n) : num(n) {}  // NOLINT: implicit by design, literals read as rationals
  Rational(Int n, Int d) : num(std::move(n)), den(std::move(d)) {
    if (den == 0) throw std::domain_error("rational with zero denominator");
    normalize();
  }

  void normalize() {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    Int g = boost::multiprecision::gcd(num < 0 ? Int(-num) : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
    if (num == 0) den = 1;
  }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return Rational(a.num * b.den + b.num * a.den, a.den * b.den);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return Rational(a.num * b.den - b.num * a.den, a.den * b.den);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return Rational(a.num * b.num, a.den * b.den);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num == 0) throw std::domain_error("rational division by zero");
    return Rational(a.num * b.den, a.den * b.num);
  }
  Rational operator-() const { return Rational(-num, den); }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
  friend bool operator<(const Rational& a, const Rational& b) {
    return a.num * b.den < b.num * a.den;
  }
  friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
  friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
  friend bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }
};

// Digit string to integer; leading zeros are plain digits, never a base prefix.
inline Int int_from_digits(std::string_view t) {
  size_t i = 0;
  while (i + 1 < t.size() && t[i] == '0') ++i;
  return Int{std::string(t.substr(i))};
}

// Accepts "3", "007", "3/10", "0.14". Returns nothing on any other shape.
inline std::optional<Rational> parse_rational(std::string_view s) {
  auto digits = [](std::string_view t) {
    if (t.empty()) return false;
    for (char c : t)
      if (c < '0' || c > '9') return false;
    return true;
  };
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  auto finish = [neg](Rational r) -> std::optional<Rational> {
    return neg ? -r : r;
  };
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    auto n = s.substr(0, slash), d = s.substr(slash + 1);
    if (!digits(n) || !digits(d)) return std::nullopt;
    Int den = int_from_digits(d);
    if (den == 0) return std::nullopt;
    return finish(Rational(int_from_digits(n), den));
  }
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    auto whole = s.substr(0, dot), frac = s.substr(dot + 1);
    if (!digits(whole) || !digits(frac)) return std::nullopt;
    Int scale = 1;
    for (size_t i = 0; i < frac.size(); ++i) scale *= 10;
    return finish(Rational(int_from_digits(whole) * scale + int_from_digits(frac), scale));
  }
  if (!digits(s)) return std::nullopt;
  return finish(Rational(int_from_digits(s), 1));
}

inline std::string to_fraction_string(const Rational& r) {
  std::string s = r.num.str();
  if (r.den != 1) s += "/" + r.den.str();
  return s;
}

// Exact decimal rendering; empty when the expansion does not terminate.
inline std::optional<std::string> to_decimal_string(const Rational& r) {
  Int d = r.den;
  int twos = 0, fives = 0;
  while (d % 2 == 0) {
    d /= 2;
    ++twos;
  }
  while (d % 5 == 0) {
    d /= 5;
    ++fives;
  }
  if (d != 1) return std::nullopt;
  int digits = std::max(twos, fives);
  Int scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  Int scaled = r.num * (scale / r.den);
  bool neg = scaled < 0;
  if (neg) scaled = -scaled;
  std::string raw = scaled.str();
  std::string out;
  if (digits == 0) {
    out = raw;
  } else {
    if (raw.size() <= static_cast<size_t>(digits))
      raw.insert(0, static_cast<size_t>(digits) + 1 - raw.size(), '0');
    out = raw.substr(0, raw.size() - digits) + "." + raw.substr(raw.size() - digits);
    while (out.back() == '0') out.pop_back();
    if (out.back() == '.') out.pop_back();
  }
  return neg ? "-" + out : out;
}

inline std::string to_display_string(const Rational& r) {
  if (auto d = to_decimal_string(r)) return *d;
  return to_fraction_string(r);
}

// Nearest double; the values handled here sit well inside the finite range.
inline double to_double(const Rational& r) {
  return r.num.convert_to<double>() / r.den.convert_to<double>();
}

}  // namespace pmps

#endif
