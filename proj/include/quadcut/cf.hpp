#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "arith.hpp"

namespace quadcut {

// Continued fractions over Q(sqrt d), run in exact field arithmetic:
// s_{k+1} = 1/(s_k - floor s_k).  For a rational input the expansion is
// finite; for a quadratic irrational it runs forever (and is eventually
// periodic, which keeps the iterates small).

// First `count` convergents h_k/k_k of s; fewer if the expansion ends.
inline std::vector<Rat> cf_convergents(const Quad& s, std::size_t count) {
  std::vector<Rat> out;
  Int h1 = 1, h2 = 0, k1 = 0, k2 = 1;  // h_{-1}, h_{-2}, k_{-1}, k_{-2}
  Quad cur = s;
  for (std::size_t i = 0; i < count; ++i) {
    Int a = quad_floor(cur);
    Int h = a * h1 + h2, k = a * k1 + k2;
    out.push_back(make_rat(h, k));
    h2 = h1; h1 = h; k2 = k1; k1 = k;
    Quad frac = cur - Quad(Rat(a));
    if (frac.is_zero()) break;  // s was rational and is now fully expanded
    cur = quad_inv(frac);
  }
  return out;
}

// Consecutive convergents alternate around an irrational target, so walking
// the expansion until two neighbours are closer than eps yields exact
// rationals q1 < s < q2 with q2 - q1 < eps.
inline std::pair<Rat, Rat> cf_straddle(const Quad& s, const Rat& eps) {
  if (s.is_rational()) throw InternalError("straddle of a rational value");
  if (eps <= 0) throw InvalidEpsilon("epsilon must be positive");
  Int h1 = 1, h2 = 0, k1 = 0, k2 = 1;
  Quad cur = s;
  std::optional<Rat> prev;
  while (true) {
    Int a = quad_floor(cur);
    Int h = a * h1 + h2, k = a * k1 + k2;
    Rat c = make_rat(h, k);
    if (prev) {
      Rat gap = *prev < c ? c - *prev : *prev - c;
      if (gap < eps) {
        Rat lo = *prev < c ? *prev : c;
        Rat hi = *prev < c ? c : *prev;
        if (!(Quad(lo) < s && s < Quad(hi)))
          throw InternalError("convergents failed to straddle");
        return {lo, hi};
      }
    }
    prev = c;
    h2 = h1; h1 = h; k2 = k1; k1 = k;
    cur = quad_inv(cur - Quad(Rat(a)));
  }
}

// k-th convergent when s is irrational, s itself when rational.
inline Rat cf_approx(const Quad& s, std::size_t k) {
  if (s.is_rational()) return s.a;
  auto cs = cf_convergents(s, k + 1);
  return cs.back();
}

// A rational strictly between lo and hi (either side may be absent, meaning
// unbounded).  For two finite endpoints we take midpoints of continued
// fraction approximants, deepening the expansion until the midpoint lands
// inside; the checks are exact, so the result is too.
inline Rat rat_between(const std::optional<Quad>& lo, const std::optional<Quad>& hi) {
  if (!lo && !hi) return Rat(0);
  if (!lo) {
    Int f = quad_floor(*hi);
    return Rat(f - 1);
  }
  if (!hi) {
    Int f = quad_floor(*lo);
    return Rat(f + 1);
  }
  if (!(*lo < *hi)) throw InternalError("empty interval in rat_between");
  for (std::size_t depth = 10;; depth += 4) {
    Rat m = (cf_approx(*lo, depth) + cf_approx(*hi, depth)) / 2;
    Quad mq{m};
    if (*lo < mq && mq < *hi) return m;
  }
}

}  // namespace quadcut
