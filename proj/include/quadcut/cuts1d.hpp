#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cf.hpp"
#include "qe.hpp"
#include "random.hpp"

namespace quadcut {

// One maximal convex component of a definable subset of the line.  Endpoints
// live in the completion; over the base structure a closed endpoint is
// always rational, since an irrational bound is never attained.
struct ConvexPiece {
  std::optional<Quad> lo, hi;  // nullopt means unbounded on that side
  bool lo_closed = false, hi_closed = false;

  bool is_point() const {
    return lo && hi && lo_closed && hi_closed && quad_sign(*lo - *hi) == 0;
  }
};

inline bool piece_contains(const ConvexPiece& p, const Quad& x) {
  if (p.lo) {
    int s = quad_sign(x - *p.lo);
    if (s < 0 || (s == 0 && !p.lo_closed)) return false;
  }
  if (p.hi) {
    int s = quad_sign(x - *p.hi);
    if (s > 0 || (s == 0 && !p.hi_closed)) return false;
  }
  return true;
}

struct Decomp1D {
  Structure kind = Structure::M;
  std::vector<Quad> roots;          // sorted boundary values of the atoms
  std::vector<ConvexPiece> pieces;  // maximal convex components, ascending
};

namespace detail_cuts {

inline void lin_roots(const Formula& f, const std::string& x, std::vector<Quad>& out) {
  if (f.kind() == FKind::lin) {
    const LinForm& lf = f.node->lin.form;
    auto it = lf.coeffs.find(x);
    if (it == lf.coeffs.end()) return;
    if (lf.coeffs.size() != 1)
      throw InternalError("one-variable decomposition saw a second variable");
    out.push_back(-(quad_inv(it->second) * lf.constant));
    return;
  }
  for (const auto& k : f.kids()) lin_roots(k, x, out);
}

}  // namespace detail_cuts

// Partition the line into the maximal convex pieces on which the formula
// holds.  The atoms' roots carve out finitely many regions, each with a
// constant truth value; adjacent true regions merge across a contained true
// point, and over the base structure also across an irrational root, which
// is simply absent from the line there.
inline Decomp1D decompose1(const Formula& f, Structure st, const Config& cfg = {},
                           const Limits& lim = {}) {
  if (st == Structure::Pair) throw IllFormed("pair formulas decompose through their trace");
  auto fv = free_vars(f);
  if (fv.size() != 1) throw IllFormed("one-variable decomposition needs exactly one free variable");
  const std::string x = *fv.begin();
  Formula g = qe(f, st, cfg, lim);

  Decomp1D out;
  out.kind = st;
  detail_cuts::lin_roots(g, x, out.roots);
  std::sort(out.roots.begin(), out.roots.end(), [](const Quad& a, const Quad& b) { return a < b; });
  out.roots.erase(std::unique(out.roots.begin(), out.roots.end(),
                              [](const Quad& a, const Quad& b) { return quad_sign(a - b) == 0; }),
                  out.roots.end());
  const auto& R = out.roots;

  auto sat = [&](const Quad& v) {
    Env env{{x, v}};
    return eval_qf(g, st, env, cfg);
  };

  if (R.empty()) {
    if (sat(Quad(Rat(0)))) out.pieces.push_back({});
    return out;
  }

  auto inner_sample = [&](std::size_t i) {  // a point of (R[i], R[i+1])
    if (st == Structure::M) return Quad(rat_between(R[i], R[i + 1]));
    return make_rat(1, 2) * (R[i] + R[i + 1]);
  };
  std::vector<bool> region(R.size() + 1), at(R.size());
  region[0] = sat(st == Structure::M ? Quad(rat_between(std::nullopt, R.front()))
                                     : R.front() - Quad(Rat(1)));
  for (std::size_t i = 0; i + 1 < R.size(); ++i) region[i + 1] = sat(inner_sample(i));
  region[R.size()] = sat(st == Structure::M ? Quad(rat_between(R.back(), std::nullopt))
                                            : R.back() + Quad(Rat(1)));
  for (std::size_t i = 0; i < R.size(); ++i)
    at[i] = (st == Structure::M && !R[i].is_rational()) ? false : sat(R[i]);

  std::optional<ConvexPiece> cur;
  bool last_point_included = false;
  for (std::size_t i = 0; i <= R.size(); ++i) {
    if (region[i]) {
      if (!cur) {
        cur = ConvexPiece{};
        if (i > 0) cur->lo = R[i - 1];  // opens strictly after the root
      }
    } else if (cur) {
      cur->hi = R[i - 1];
      cur->hi_closed = last_point_included;
      out.pieces.push_back(*cur);
      cur.reset();
    }
    if (i == R.size()) break;
    last_point_included = false;
    if (st == Structure::M && !R[i].is_rational()) continue;  // absent point, transparent
    if (at[i]) {
      if (!cur) {
        cur = ConvexPiece{};
        cur->lo = R[i];
        cur->lo_closed = true;
      }
      last_point_included = true;
    } else if (cur) {
      cur->hi = R[i];
      out.pieces.push_back(*cur);
      cur.reset();
    }
  }
  if (cur) out.pieces.push_back(*cur);
  return out;
}

// ---------------------------------------------------------------------------
// Cuts.  A formula in one variable defines an initial segment of the
// rationals; its supremum is computed in the completion and reported with
// its coordinates there.

struct CutSup {
  Quad sup;
  bool rational;
};

inline CutSup cut_sup(const Formula& f, const Config& cfg = {}, const Limits& lim = {}) {
  Decomp1D d = decompose1(f, Structure::M, cfg, lim);
  if (d.pieces.empty()) throw EmptyCut("the set is empty");
  if (!d.pieces.back().hi) throw UnboundedCut("the set has no upper bound");
  if (d.pieces.size() > 1 || d.pieces.front().lo)
    throw NotDownwardClosed("the set is not an initial segment");
  const ConvexPiece& p = d.pieces.front();
  if (p.hi_closed) throw HasMaximum("the set attains its supremum");
  return {*p.hi, p.hi->is_rational()};
}

// Rationals witnessing that the cut's gap is thinner than eps: `inside` lies
// in the set, `above` bounds it, and they differ by less than eps.  The
// existence of such pairs for every eps is what keeps every definable cut
// non-valuational.
struct GapWitness {
  Rat inside;
  Rat above;
};

inline GapWitness nonval_witness(const Formula& f, const Rat& eps, const Config& cfg = {},
                                 const Limits& lim = {}) {
  if (eps <= 0) throw InvalidEpsilon("epsilon must be positive");
  CutSup s = cut_sup(f, cfg, lim);
  if (s.rational) return {s.sup.a - eps / 4, s.sup.a + eps / 4};
  auto [l, u] = cf_straddle(s.sup, eps);
  return {l, u};
}

// ---------------------------------------------------------------------------
// Axiom checks against the standard model.  The half-plane predicate and the
// cut family are injectable so a deviant candidate (say, an honest rational
// half plane) shows exactly which axioms reject it.

struct AxiomCheck {
  std::string name;
  bool pass;
  std::string detail;
};

struct AxiomReport {
  std::vector<AxiomCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

using HalfPlane = std::function<Formula(const Term&, const Term&)>;
using CutFamily = std::function<Formula(const std::string&, const Rat&)>;

inline AxiomReport check_axioms(const Config& cfg = {}, std::uint64_t seed = 0, int samples = 4,
                                HalfPlane hp = {}, CutFamily cuts = {}, const Limits& lim = {}) {
  cfg.validate();
  if (!hp) hp = [](const Term& s, const Term& t) { return f_psq(s, t); };
  if (!cuts) cuts = [&hp](const std::string& var, const Rat& a) { return hp(t_rat(a), t_var(var)); };

  AxiomReport rep;
  Rng rng(seed);
  auto positive_rat = [&] {
    Rat q = rnd_rat(rng, 6);
    if (q < 0) q = -q;
    if (q == 0) q = Rat(1);
    return q;
  };
  auto run = [&](const std::string& name, auto&& body) {
    try {
      auto [ok, detail] = body();
      rep.checks.push_back({name, ok, detail});
    } catch (const Error& e) {
      rep.checks.push_back({name, false, e.what()});
    }
  };
  auto holds = [&](const Formula& sentence) { return decide(sentence, Structure::M, cfg, lim); };
  auto all_sentences = [&](const std::vector<Formula>& ss) -> std::pair<bool, std::string> {
    for (const auto& s : ss)
      if (!holds(s)) return {false, "fails: " + print(s)};
    return {true, std::to_string(ss.size()) + " sentences hold"};
  };

  const Term x = t_var("x"), y = t_var("y"), u = t_var("u"), v = t_var("v");

  run("order-group", [&] {
    std::vector<Formula> ss;
    ss.push_back(f_forall("x", f_forall("y", f_implies(f_lt(x, y), f_exists("z", f_and(
        f_lt(x, t_var("z")), f_lt(t_var("z"), y)))))));
    ss.push_back(f_forall("x", f_exists("y", f_lt(x, y))));
    ss.push_back(f_forall("x", f_exists("y", f_lt(y, x))));
    ss.push_back(f_forall("x", f_forall("y", f_forall("z", f_implies(
        f_lt(x, y), f_lt(x + t_var("z"), y + t_var("z")))))));
    for (int i = 0; i < samples; ++i) {
      Rat q = positive_rat();
      ss.push_back(f_forall("x", f_forall("y", f_implies(f_lt(x, y), f_lt(q * x, q * y)))));
      ss.push_back(f_forall("y", f_exists("x", f_eq(q * x, y))));
    }
    return all_sentences(ss);
  });

  run("halfplane-linear", [&] {
    std::vector<Formula> ss;
    ss.push_back(f_forall("x", f_forall("y", f_forall("u", f_forall("v", f_implies(
        f_and(hp(x, y), hp(u, v)), hp(x + u, y + v)))))));
    for (int i = 0; i < samples; ++i) {
      Rat q = positive_rat();
      ss.push_back(f_forall("x", f_forall("y", f_implies(hp(x, y), hp(q * x, q * y)))));
    }
    return all_sentences(ss);
  });

  run("halfplane-exists", [&] {
    return all_sentences({f_forall("x", f_exists("y", hp(x, y))),
                          f_forall("x", f_exists("y", f_not(hp(x, y))))});
  });

  run("rational-bounds", [&] {
    // Convergents alternate around the root and pin the half plane between
    // rational slopes from both sides, ten on each side.
    Quad root(Rat(0), Rat(1), cfg.d);
    auto cs = cf_convergents(root, 20);
    std::vector<Formula> ss;
    for (const Rat& c : cs) {
      Formula inside = hp(x, t_var("x", c));
      Formula guard = f_lt(t_rat(0), x);
      int side = quad_sign(Quad(c) - root);
      if (side < 0)
        ss.push_back(f_forall("x", f_implies(guard, inside)));
      else
        ss.push_back(f_forall("x", f_implies(guard, f_not(inside))));
    }
    return all_sentences(ss);
  });

  run("cut-gaps", [&]() -> std::pair<bool, std::string> {
    int done = 0;
    for (int i = 0; i < samples; ++i) {
      Rat a = positive_rat();
      Formula psi = cuts("y", a);
      for (const Rat& eps : {Rat(1), make_rat(1, 10), make_rat(1, 1000)}) {
        GapWitness w = nonval_witness(psi, eps, cfg, lim);
        Env in{{"y", Quad(w.inside)}}, ab{{"y", Quad(w.above)}};
        Formula q = qe_m(psi, cfg, lim);
        if (!eval_qf(q, Structure::M, in, cfg) || eval_qf(q, Structure::M, ab, cfg) ||
            !(w.above - w.inside < eps))
          return {false, "bad witness for parameter " + rat_str(a)};
        ++done;
      }
    }
    return {true, std::to_string(done) + " gap witnesses verified"};
  });

  run("cut-sup-outside", [&]() -> std::pair<bool, std::string> {
    for (int i = 0; i < samples; ++i) {
      Rat a = positive_rat();
      CutSup s = cut_sup(cuts("y", a), cfg, lim);
      if (s.rational)
        return {false, "cut at parameter " + rat_str(a) + " has a rational supremum"};
    }
    return {true, std::to_string(samples) + " cuts land outside the base line"};
  });

  run("composition", [&] {
    Formula lhs = f_exists("z", f_and(hp(x, t_var("z")), hp(t_var("z"), y)));
    Formula rhs = f_lt(y, t_var("x", Rat(cfg.d)));
    return all_sentences({f_forall("x", f_forall("y", f_iff(lhs, rhs)))});
  });

  return rep;
}

}  // namespace quadcut
