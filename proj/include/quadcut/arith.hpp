#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <string>
#include <utility>

#include "errors.hpp"

namespace quadcut {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

// cpp_rational keeps fractions canonical on its own: denominator positive,
// gcd(num, den) = 1.  Equality of Rat is therefore structural equality.

inline Int rat_num(const Rat& r) { return numerator(r); }
inline Int rat_den(const Rat& r) { return denominator(r); }
inline int rat_sign(const Rat& r) { return r.sign(); }

inline Rat make_rat(const Int& n, const Int& d) {
  if (d == 0) throw DivisionByZero("denominator zero");
  if (d < 0) return Rat(-n, -d);
  return Rat(n, d);
}

inline std::string rat_str(const Rat& r) {
  Int n = rat_num(r), d = rat_den(r);
  if (d == 1) return n.str();
  return n.str() + "/" + d.str();
}

// Accepts "p", "-p", "p/q", "-p/q" with decimal digits.
inline Rat parse_rat(const std::string& s) {
  std::size_t i = 0;
  bool neg = false;
  if (i < s.size() && (s[i] == '-' || s[i] == '+')) { neg = s[i] == '-'; ++i; }
  std::size_t start = i;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  if (i == start) throw SyntaxError(i, "expected digits in rational literal");
  Int n(s.substr(start, i - start));
  Int d = 1;
  if (i < s.size() && s[i] == '/') {
    ++i;
    std::size_t dstart = i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    if (i == dstart) throw SyntaxError(i, "expected digits after '/'");
    d = Int(s.substr(dstart, i - dstart));
  }
  if (i != s.size()) throw SyntaxError(i, "trailing characters in rational literal");
  if (neg) n = -n;
  return make_rat(n, d);
}

// Floor division with the usual caveat that C++ '/' truncates toward zero.
inline Int floor_div(const Int& a, const Int& b) {
  Int q = a / b, r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) --q;
  return q;
}

inline Int rat_floor(const Rat& r) { return floor_div(rat_num(r), rat_den(r)); }

// Which quadratic field we work in.  d must be square-free so that {1, sqrt d}
// is a basis and the componentwise representation below is unique.
struct Config {
  std::int64_t d = 2;

  void validate() const {
    if (d < 2) throw InvalidConfig("field parameter must be at least 2");
    for (std::int64_t p = 2; p * p <= d; ++p)
      if (d % (p * p) == 0)
        throw InvalidConfig("field parameter must be square-free, got " + std::to_string(d));
  }
};

// Element a + b*sqrt(d) of Q(sqrt d).  Values carry their own d so that plain
// value semantics work; mixing different fields is an error, except that a
// value with b = 0 is a plain rational and embeds in any field.
struct Quad {
  Rat a, b;
  std::int64_t d = 2;

  Quad() = default;
  Quad(Rat a_) : a(std::move(a_)) {}
  Quad(Rat a_, Rat b_, std::int64_t d_ = 2) : a(std::move(a_)), b(std::move(b_)), d(d_) {}

  bool is_rational() const { return b == 0; }
  bool is_zero() const { return a == 0 && b == 0; }
};

inline std::int64_t join_fields(const Quad& x, const Quad& y) {
  if (x.d == y.d) return x.d;
  if (x.b == 0) return y.d;
  if (y.b == 0) return x.d;
  throw InternalError("mixed field parameters " + std::to_string(x.d) + " and " + std::to_string(y.d));
}

inline Quad operator+(const Quad& x, const Quad& y) { return Quad(x.a + y.a, x.b + y.b, join_fields(x, y)); }
inline Quad operator-(const Quad& x, const Quad& y) { return Quad(x.a - y.a, x.b - y.b, join_fields(x, y)); }
inline Quad operator-(const Quad& x) { return Quad(-x.a, -x.b, x.d); }

inline Quad operator*(const Quad& x, const Quad& y) {
  std::int64_t d = join_fields(x, y);
  return Quad(x.a * y.a + Rat(d) * x.b * y.b, x.a * y.b + x.b * y.a, d);
}

inline Quad operator*(const Rat& q, const Quad& x) { return Quad(q * x.a, q * x.b, x.d); }
inline Quad operator*(const Quad& x, const Rat& q) { return q * x; }

// Multiplication by sqrt(d):  (a + b sqrt d) sqrt d = d b + a sqrt d.
inline Quad sqrt_mult(const Quad& x) { return Quad(Rat(x.d) * x.b, x.a, x.d); }

// 1/(a + b sqrt d) = (a - b sqrt d)/(a^2 - d b^2).  The denominator cannot
// vanish for a nonzero element because sqrt d is irrational.
inline Quad quad_inv(const Quad& x) {
  if (x.is_zero()) throw DivisionByZero("inverse of zero");
  Rat n = x.a * x.a - Rat(x.d) * x.b * x.b;
  if (n == 0) throw InternalError("field parameter is a perfect square");
  return Quad(x.a / n, -x.b / n, x.d);
}

inline Quad operator/(const Quad& x, const Quad& y) { return x * quad_inv(y); }
inline Quad operator/(const Quad& x, const Rat& q) {
  if (q == 0) throw DivisionByZero("division by zero");
  return Quad(x.a / q, x.b / q, x.d);
}

inline bool operator==(const Quad& x, const Quad& y) { return x.a == y.a && x.b == y.b && (x.b == 0 || x.d == y.d); }
inline bool operator!=(const Quad& x, const Quad& y) { return !(x == y); }

// Sign of a + b sqrt d, decided exactly.  When a and b disagree in sign the
// question reduces to comparing a^2 against d b^2: for a > 0 > b we have
// a + b sqrt d > 0  iff  a > |b| sqrt d  iff  a^2 > d b^2, and dually.
inline int quad_sign(const Quad& x) {
  int sa = rat_sign(x.a), sb = rat_sign(x.b);
  if (sb == 0) return sa;
  if (sa == 0) return sb;
  if (sa == sb) return sa;
  Rat t = x.a * x.a - Rat(x.d) * x.b * x.b;
  int st = rat_sign(t);
  if (st == 0) throw InternalError("field parameter is a perfect square");
  if (sa > 0) return st > 0 ? 1 : -1;   // a > 0, b < 0
  return st < 0 ? 1 : -1;               // a < 0, b > 0
}

inline int quad_cmp(const Quad& x, const Quad& y) { return quad_sign(x - y); }
inline bool operator<(const Quad& x, const Quad& y) { return quad_cmp(x, y) < 0; }
inline bool operator>(const Quad& x, const Quad& y) { return quad_cmp(x, y) > 0; }
inline bool operator<=(const Quad& x, const Quad& y) { return quad_cmp(x, y) <= 0; }
inline bool operator>=(const Quad& x, const Quad& y) { return quad_cmp(x, y) >= 0; }

// Total order used for canonical sorting only; unrelated to the field order.
inline int quad_struct_cmp(const Quad& x, const Quad& y) {
  if (x.a != y.a) return x.a < y.a ? -1 : 1;
  if (x.b != y.b) return x.b < y.b ? -1 : 1;
  return 0;
}

// floor(a + b sqrt d).  Bring everything over one positive denominator,
// q = (A + sqrt S)/D with S = d B^2, and use that floor((A + y)/D) only
// depends on floor(y) when A, D are integers with D > 0.
inline Int quad_floor(const Quad& x) {
  if (x.b == 0) return rat_floor(x.a);
  if (rat_sign(x.b) < 0) return -quad_floor(-x) - 1;  // irrational, so no exact-integer case
  Int pa = rat_num(x.a), qa = rat_den(x.a);
  Int pb = rat_num(x.b), qb = rat_den(x.b);
  Int D = qa * qb;
  Int A = pa * qb;
  Int B = pb * qa;
  Int S = B * B * x.d;
  return floor_div(A + sqrt(S), D);
}

inline std::string quad_str(const Quad& x) {
  if (x.b == 0) return rat_str(x.a);
  std::string irr = (x.b == 1) ? "rt" : (x.b == -1) ? "-rt" : rat_str(x.b) + "*rt";
  if (x.a == 0) return irr;
  if (rat_sign(x.b) < 0) {
    Quad m = -x;
    std::string tail = (m.b == 1) ? "rt" : rat_str(m.b) + "*rt";
    return rat_str(x.a) + " - " + tail;
  }
  return rat_str(x.a) + " + " + irr;
}

}  // namespace quadcut
