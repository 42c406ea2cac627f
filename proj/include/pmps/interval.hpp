#ifndef PMPS_INTERVAL_HPP
#define PMPS_INTERVAL_HPP

#include <string>

#include "pmps/rational.hpp"

namespace pmps {

// Probability interval over [0,1] with independently open or closed ends.
// A plain probability p is the degenerate closed interval [p,p].
struct ProbInterval {
  Rational lo;
  Rational hi;
  bool lo_closed = true;
  bool hi_closed = true;

  static ProbInterval point(const Rational& p) {
    if (p < Rational(0) || p > Rational(1))
      throw std::domain_error("probability outside [0,1]");
    return ProbInterval{p, p, true, true};
  }

  bool is_point() const { return lo == hi && lo_closed && hi_closed; }

  bool valid() const {
    if (lo < Rational(0) || hi > Rational(1)) return false;
    if (lo > hi) return false;
    if (lo == hi && !(lo_closed && hi_closed)) return false;
    return true;
  }

  bool contains(const Rational& p) const {
    if (lo_closed ? p < lo : p <= lo) return false;
    if (hi_closed ? p > hi : p >= hi) return false;
    return true;
  }

  friend bool operator==(const ProbInterval& a, const ProbInterval& b) {
    return a.lo == b.lo && a.hi == b.hi && a.lo_closed == b.lo_closed &&
           a.hi_closed == b.hi_closed;
  }
  friend bool operator!=(const ProbInterval& a, const ProbInterval& b) { return !(a == b); }
};

// Endpointwise sum clamped at 1. An endpoint of the sum is closed when both
// summand endpoints are closed; clamping to 1 closes the endpoint regardless,
// since the sum then meets the bound exactly.
inline ProbInterval interval_add(const ProbInterval& a, const ProbInterval& b) {
  ProbInterval r;
  r.lo = a.lo + b.lo;
  r.hi = a.hi + b.hi;
  r.lo_closed = a.lo_closed && b.lo_closed;
  r.hi_closed = a.hi_closed && b.hi_closed;
  if (r.lo > Rational(1)) {
    r.lo = Rational(1);
    r.lo_closed = true;
  }
  if (r.hi > Rational(1)) {
    r.hi = Rational(1);
    r.hi_closed = true;
  }
  return r;
}

// Endpointwise product. Both factors live in [0,1], so no clamping is needed;
// an endpoint of the product is closed only when both factor endpoints are.
inline ProbInterval interval_mul(const ProbInterval& a, const ProbInterval& b) {
  ProbInterval r;
  r.lo = a.lo * b.lo;
  r.hi = a.hi * b.hi;
  r.lo_closed = a.lo_closed && b.lo_closed;
  r.hi_closed = a.hi_closed && b.hi_closed;
  if (r.lo == r.hi) {
    r.lo_closed = r.hi_closed = r.lo_closed || r.hi_closed || a.is_point() || b.is_point();
  }
  return r;
}

inline std::string to_string(const ProbInterval& d) {
  if (d.is_point()) return to_display_string(d.lo);
  std::string s;
  s += d.lo_closed ? '[' : '(';
  s += to_display_string(d.lo);
  s += ',';
  s += to_display_string(d.hi);
  s += d.hi_closed ? ']' : ')';
  return s;
}

}  // namespace pmps

#endif
