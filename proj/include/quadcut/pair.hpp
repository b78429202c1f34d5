#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cells.hpp"

namespace quadcut {

// ---------------------------------------------------------------------------
// The dense pair (V, Q).  Everything reduces to the base structure through
// the coordinate interpretation: a pair-variable v becomes (v1, v2) with
// value v1 + rt*v2, and P becomes "second coordinate zero".

struct CoordFormula {
  Formula body;  // over doubled variables, P eliminated
  std::map<std::string, std::pair<std::string, std::string>> coords;  // free var -> (v1, v2)
};

namespace detail_pair {

using VarPairs = std::map<std::string, std::pair<std::string, std::string>>;

struct Split {
  Term one, two;  // value = one + rt*two, both with rational coefficients
};

inline Split split_term(const Term& t, const VarPairs& env) {
  Split s;
  s.one = t_const(Quad(t.constant.a));
  s.two = t_const(Quad(t.constant.b));
  for (const auto& [v, c] : t.coeffs) {
    auto it = env.find(v);
    if (it == env.end()) throw InternalError("unmapped variable in the pair interpretation");
    s.one = s.one + t_var(it->second.first, c);
    s.two = s.two + t_var(it->second.second, c);
  }
  return s;
}

// (ca + rt*cb)(v1 + rt*v2) = (ca*v1 + d*cb*v2) + rt*(cb*v1 + ca*v2)
inline Split split_lin(const LinForm& lf, const VarPairs& env, std::int64_t d) {
  Split s;
  s.one = t_const(Quad(lf.constant.a));
  s.two = t_const(Quad(lf.constant.b));
  for (const auto& [v, c] : lf.coeffs) {
    auto it = env.find(v);
    if (it == env.end()) throw InternalError("unmapped variable in the pair interpretation");
    const auto& [v1, v2] = it->second;
    s.one = s.one + t_var(v1, c.a) + t_var(v2, c.b * Rat(d));
    s.two = s.two + t_var(v1, c.b) + t_var(v2, c.a);
  }
  return s;
}

inline Formula lt_split(const Split& a, const Split& b) {
  // a < b  iff  a1 - b1 < rt*(b2 - a2)
  return f_psq(b.two - a.two, a.one - b.one);
}

inline Formula go(const Formula& f, VarPairs env, std::set<std::string>& taken,
                  const Config& cfg) {
  switch (f.kind()) {
    case FKind::truth:
    case FKind::falsity:
      return f;
    case FKind::lt:
      return lt_split(split_term(f.node->a, env), split_term(f.node->b, env));
    case FKind::leq:
      return f_not(lt_split(split_term(f.node->b, env), split_term(f.node->a, env)));
    case FKind::eq: {
      Split a = split_term(f.node->a, env), b = split_term(f.node->b, env);
      return f_and(f_eq(a.one, b.one), f_eq(a.two, b.two));
    }
    case FKind::psq: {
      // t < rt*s  iff  t1 - d*s2 < rt*(s1 - t2)
      Split s = split_term(f.node->a, env), t = split_term(f.node->b, env);
      return f_psq(s.one - t.two, t.one - Rat(cfg.d) * s.two);
    }
    case FKind::pmem:
      return f_eq(split_term(f.node->a, env).two, t_rat(Rat(0)));
    case FKind::lin: {
      Split s = split_lin(f.node->lin.form, env, cfg.d);
      if (f.node->lin.rel == Rel::lt) return f_psq(-s.two, s.one);
      return f_and(f_eq(s.one, t_rat(Rat(0))), f_eq(s.two, t_rat(Rat(0))));
    }
    case FKind::lnot:
      return f_not(go(f.kid(), env, taken, cfg));
    case FKind::land:
    case FKind::lor: {
      std::vector<Formula> kids;
      for (const auto& k : f.kids()) kids.push_back(go(k, env, taken, cfg));
      return f.kind() == FKind::land ? f_and(std::move(kids)) : f_or(std::move(kids));
    }
    case FKind::implies:
      return f_implies(go(f.kid(0), env, taken, cfg), go(f.kid(1), env, taken, cfg));
    case FKind::iff:
      return f_iff(go(f.kid(0), env, taken, cfg), go(f.kid(1), env, taken, cfg));
    case FKind::exists:
    case FKind::forall: {
      const std::string& v = f.node->var;
      std::string v1 = fresh_var(v + "1", taken);
      taken.insert(v1);
      std::string v2 = fresh_var(v + "2", taken);
      taken.insert(v2);
      env[v] = {v1, v2};
      Formula body = go(f.kid(), env, taken, cfg);
      return f_quant(f.kind(), v1, f_quant(f.kind(), v2, std::move(body)));
    }
  }
  throw InternalError("unhandled formula kind in the pair interpretation");
}

}  // namespace detail_pair

inline CoordFormula interpret(const Formula& f, const Config& cfg = {}) {
  std::set<std::string> taken;
  collect_all_vars(f, taken);
  CoordFormula out;
  detail_pair::VarPairs env;
  for (const auto& v : free_vars(f)) {
    std::string v1 = fresh_var(v + "1", taken);
    taken.insert(v1);
    std::string v2 = fresh_var(v + "2", taken);
    taken.insert(v2);
    env[v] = {v1, v2};
    out.coords[v] = {v1, v2};
  }
  out.body = detail_pair::go(f, std::move(env), taken, cfg);
  return out;
}

inline bool decide_pair(const Formula& f, const Config& cfg = {}, const Limits& lim = {}) {
  if (!free_vars(f).empty()) throw IllFormed("deciding a pair formula needs a sentence");
  return decide(interpret(f, cfg).body, Structure::M, cfg, lim);
}

// ---------------------------------------------------------------------------
// The one-block existential normal form: every pair formula is equivalent to
// exists p1..pk in P (decompositions v = p + rt*q, and a P-free matrix).

struct EpfForm {
  std::vector<std::string> pvars;  // the existential P-prefix, possibly empty
  Formula matrix;                  // P-free and quantifier-free

  Formula lp() const {
    std::vector<Formula> kids;
    for (const auto& p : pvars) kids.push_back(f_pmem(t_var(p)));
    kids.push_back(matrix);
    Formula body = f_and(std::move(kids));
    for (auto it = pvars.rbegin(); it != pvars.rend(); ++it) body = f_exists(*it, body);
    return body;
  }
};

namespace detail_pair {

inline bool quantifier_free(const Formula& f) {
  if (f.kind() == FKind::exists || f.kind() == FKind::forall) return false;
  for (const auto& k : f.kids())
    if (!quantifier_free(k)) return false;
  return true;
}

// v - p = rt*q, quantifier-free through the trichotomy of the half plane.
inline Formula decomp_atom(const std::string& v, const std::string& p, const std::string& q) {
  return f_and(f_not(f_psq(t_var(q), t_var(v) - t_var(p))),
               f_not(f_psq(-t_var(q), t_var(p) - t_var(v))));
}

}  // namespace detail_pair

inline EpfForm epf_normal_form(const Formula& f, const Config& cfg = {}, const Limits& lim = {}) {
  EpfForm out;
  auto fv = free_vars(f);
  if (detail_pair::quantifier_free(f) && !has_pmem(f)) {
    out.matrix = f;
  } else {
    CoordFormula cf = interpret(f, cfg);
    Formula psi = qe_m(cf.body, cfg, lim);
    std::vector<Formula> kids;
    for (const auto& [v, pq] : cf.coords) {
      out.pvars.push_back(pq.first);
      out.pvars.push_back(pq.second);
      kids.push_back(detail_pair::decomp_atom(v, pq.first, pq.second));
    }
    kids.push_back(std::move(psi));
    out.matrix = f_and(std::move(kids));
  }
  Formula same = f_iff(f, out.lp());
  for (auto it = fv.rbegin(); it != fv.rend(); ++it) same = f_forall(*it, same);
  if (!decide_pair(same, cfg, lim)) throw InternalError("normal form failed its audit");
  return out;
}

// ---------------------------------------------------------------------------
// Traces and their lifts.

inline Formula trace(const Formula& f, const Config& cfg = {}, const Limits& lim = {}) {
  CoordFormula cf = interpret(f, cfg);
  std::map<std::string, Term> zero, back;
  for (const auto& [v, pq] : cf.coords) {
    zero[pq.second] = t_rat(Rat(0));
    back[pq.first] = t_var(v);
  }
  Formula g = qe_m(substitute(cf.body, zero), cfg, lim);
  return to_surface(substitute(g, back), Structure::M, cfg);
}

inline Formula lift_trace(const Formula& f, std::vector<std::string> vars = {},
                          const Config& cfg = {}, const Limits& lim = {}) {
  CellDecomp d = cell_decompose(f, std::move(vars), cfg, lim);
  std::vector<Formula> hs;
  for (const auto& c : d.cells) hs.push_back(hull(c, d.vars, cfg));
  Formula lifted = n_sorted(false, std::move(hs));
  std::vector<Formula> mem;
  for (const auto& v : d.vars) mem.push_back(f_pmem(t_var(v)));
  Formula same = f_implies(f_and(std::move(mem)), f_iff(f, lifted));
  for (auto it = d.vars.rbegin(); it != d.vars.rend(); ++it) same = f_forall(*it, same);
  if (!decide_pair(same, cfg, lim)) throw InternalError("lifted set failed its audit");
  return lifted;
}

// ---------------------------------------------------------------------------
// Closure over the pair, in coordinates.

inline CoordFormula topo_pair(const Formula& f, TopoOp op = TopoOp::cl, const Config& cfg = {},
                              const Limits& lim = {}) {
  if (op != TopoOp::cl) throw IllFormed("only closure is defined over the pair");
  auto fv = free_vars(f);
  if (fv.size() > 2) throw DimensionLimit("pair closure supports at most 2 variables");
  if (fv.empty()) {
    CoordFormula out = interpret(f, cfg);
    out.body = qe_m(out.body, cfg, lim);
    return out;
  }
  std::set<std::string> taken;
  collect_all_vars(f, taken);
  std::map<std::string, Term> move;
  std::vector<std::string> ys;
  std::vector<Formula> parts;
  for (const auto& x : fv) {
    std::string y = fresh_var(x + "0", taken);
    taken.insert(y);
    ys.push_back(y);
    move[x] = t_var(y);
  }
  std::string eps = fresh_var("e", taken);
  parts.push_back(substitute(f, move));
  for (const auto& x : fv) {
    const Term& y = move[x];
    parts.push_back(f_lt(t_var(x) - y, t_var(eps)));
    parts.push_back(f_lt(y - t_var(x), t_var(eps)));
  }
  Formula body = f_and(std::move(parts));
  for (auto it = ys.rbegin(); it != ys.rend(); ++it) body = f_exists(*it, std::move(body));
  Formula phi = f_forall(eps, f_implies(f_lt(t_rat(Rat(0)), t_var(eps)), std::move(body)));
  CoordFormula out = interpret(phi, cfg);
  out.body = qe_m(out.body, cfg, lim);
  return out;
}

// ---------------------------------------------------------------------------
// Open core: an open pair-definable set is definable without P.  The
// pipeline follows the closure route: trace the set, close the trace, pass
// to the complement through the sup-norm distance region, and come back.

namespace detail_pair {

// cl(S) for S open: the rational points are dense in S, so the closure of
// the trace is the closure of the set.
inline Formula closure_of_open(const Formula& f, const std::vector<std::string>& vars,
                               const Config& cfg, const Limits& lim) {
  return closure_set(trace(f, cfg, lim), vars, cfg, lim);
}

}  // namespace detail_pair

inline Formula extract_open_core(const Formula& f, const Config& cfg = {},
                                 const Limits& lim = {}) {
  auto fvs = free_vars(f);
  if (fvs.empty()) throw IllFormed("an open core needs free variables");
  if (fvs.size() > 2) throw DimensionLimit("open cores support at most 2 variables");
  std::vector<std::string> vars(fvs.begin(), fvs.end());
  std::set<std::string> taken;
  collect_all_vars(f, taken);

  std::map<std::string, Term> move;
  std::vector<std::string> ys;
  for (const auto& x : vars) {
    std::string y = fresh_var(x + "0", taken);
    taken.insert(y);
    ys.push_back(y);
    move[x] = t_var(y);
  }
  std::string eps = fresh_var("e", taken);

  // Interiority: around every point of the set lies a box inside it.
  std::vector<Formula> near;
  for (const auto& x : vars) {
    near.push_back(f_lt(t_var(x) - move[x], t_var(eps)));
    near.push_back(f_lt(move[x] - t_var(x), t_var(eps)));
  }
  Formula inside = f_implies(f_and(near), substitute(f, move));
  for (auto it = ys.rbegin(); it != ys.rend(); ++it) inside = f_forall(*it, inside);
  Formula open_at = f_exists(eps, f_and(f_lt(t_rat(Rat(0)), t_var(eps)), std::move(inside)));
  Formula openness = f_implies(f, std::move(open_at));
  for (auto it = vars.rbegin(); it != vars.rend(); ++it) openness = f_forall(*it, openness);
  if (!decide_pair(openness, cfg, lim)) throw NotOpen("the set has no interior around some point");

  // The region t < d(x, complement): every point of the complement is
  // further than t in the sup norm.  Closing it yields t <= d(x, .), and
  // the complement is recovered as distance zero.
  std::string tv = fresh_var("t", taken);
  std::vector<Formula> far;
  for (const auto& x : vars) {
    far.push_back(f_lt(t_var(tv), t_var(x) - move[x]));
    far.push_back(f_lt(t_var(tv), move[x] - t_var(x)));
  }
  Formula region = f_implies(f_not(substitute(f, move)), f_or(std::move(far)));
  for (auto it = ys.rbegin(); it != ys.rend(); ++it) region = f_forall(*it, region);

  std::vector<std::string> rvars = vars;
  rvars.push_back(tv);
  Formula closed_region = detail_pair::closure_of_open(region, rvars, cfg, lim);
  Formula zero_away =
      f_not(f_exists(tv, f_and(f_lt(t_rat(Rat(0)), t_var(tv)), std::move(closed_region))));
  Formula out = qe_vstar(f_not(std::move(zero_away)), cfg, lim);

  Formula same = f_iff(f, out);
  for (auto it = vars.rbegin(); it != vars.rend(); ++it) same = f_forall(*it, same);
  if (!decide_pair(same, cfg, lim)) throw InternalError("open core failed its audit");
  return out;
}

// ---------------------------------------------------------------------------
// The infimum of a bounded-below pair-definable subset of the completion,
// from the rational section of its strict lower bounds.

inline Quad pair_inf(const Formula& f, const Config& cfg = {}, const Limits& lim = {}) {
  auto fv = free_vars(f);
  if (fv.size() != 1) throw IllFormed("the infimum needs exactly one free variable");
  const std::string& v = *fv.begin();
  if (!decide_pair(f_exists(v, f), cfg, lim)) throw EmptyCut("the set is empty");
  std::set<std::string> taken;
  collect_all_vars(f, taken);
  std::string w = fresh_var("w", taken);
  Formula low = f_forall(v, f_implies(f, f_lt(t_var(w), t_var(v))));
  if (!decide_pair(f_exists(w, low), cfg, lim))
    throw UnboundedCut("the set has no lower bound");
  CoordFormula cf = interpret(low, cfg);
  const auto& [w1, w2] = cf.coords.at(w);
  Formula sect = substitute(cf.body, {{w2, t_rat(Rat(0))}});
  Decomp1D dd = decompose1(sect, Structure::M, cfg, lim);
  if (dd.pieces.size() != 1 || dd.pieces.front().lo || !dd.pieces.front().hi)
    throw InternalError("lower bounds failed to form an initial segment");
  return *dd.pieces.front().hi;
}

// ---------------------------------------------------------------------------
// The pair axioms, decided sentence by sentence.

inline AxiomReport axioms_pair_check(const Config& cfg = {}, std::uint64_t seed = 0,
                                     std::size_t samples = 4, const Limits& lim = {}) {
  if (samples < 1) throw InvalidConfig("samples must be at least 1");
  cfg.validate();
  AxiomReport rep;
  Rng r(seed);
  auto run = [&](const std::string& name, auto&& body) {
    AxiomCheck c{name, true, ""};
    try {
      body(c);
    } catch (const Error& e) {
      c.pass = false;
      c.detail = e.what();
    }
    rep.checks.push_back(std::move(c));
  };
  auto sent = [&](const std::string& text) {
    return decide_pair(parse(text, Lang::LP, cfg), cfg, lim);
  };

  run("base-theory", [&](AxiomCheck& c) {
    if (!sent("P(0)") || !sent("A p. A q. P(p) & P(q) -> P(p + q) & P(p - q)")) {
      c.pass = false;
      c.detail = "P is not a subgroup";
      return;
    }
    for (std::size_t i = 0; i < samples; ++i) {
      std::int64_t k = 2 + r.uniform(0, 3);
      std::string ks = std::to_string(k);
      if (!sent("A p. P(p) -> E q. P(q) & p = " + ks + "*q")) {
        c.pass = false;
        c.detail = "P is not divisible by " + ks;
        return;
      }
    }
    if (!sent("A v. E w. v = w + w") || !sent("A u. A v. u < v -> E w. u < w & w < v")) {
      c.pass = false;
      c.detail = "the completion is not a dense divisible group";
    }
  });

  run("density", [&](AxiomCheck& c) {
    if (!sent("A a. A b. a < b -> E p. P(p) & a < p & p < b")) {
      c.pass = false;
      c.detail = "P is not dense";
      return;
    }
    if (!sent("A a. A b. a < b -> E v. ~P(v) & a < v & v < b") ||
        !sent("E v. ~P(v) & 0 < v & v < 1")) {
      c.pass = false;
      c.detail = "the complement of P is not dense";
    }
  });

  run("cut-suprema", [&](AxiomCheck& c) {
    for (std::size_t i = 0; i < samples; ++i) {
      Rat a = rnd_rat(r, 6), b = rnd_rat(r, 4);
      Formula phi = f_psq(t_rat(b), t_var("p") - t_rat(a));  // p < a + rt*b
      Formula upper = f_forall(
          "p", f_implies(f_and(f_pmem(t_var("p")), phi), f_not(f_lt(t_var("s"), t_var("p")))));
      Formula least = f_forall(
          "w", f_implies(f_lt(t_var("w"), t_var("s")),
                         f_exists("p", f_and({f_pmem(t_var("p")), phi,
                                              f_lt(t_var("w"), t_var("p"))}))));
      if (!decide_pair(f_exists("s", f_and(upper, least)), cfg, lim)) {
        c.pass = false;
        c.detail = "cut below " + rat_str(a) + " + rt*" + rat_str(b) + " has no supremum";
        return;
      }
    }
  });

  run("cut-realization", [&](AxiomCheck& c) {
    for (std::size_t i = 0; i < samples; ++i) {
      Rat a = rnd_rat(r, 6), b = rnd_rat(r, 4);
      Term val = t_const(Quad(a, b, cfg.d));
      Formula cut = f_psq(t_rat(b), t_var("p") - t_rat(a));
      Formula defines = f_forall(
          "p", f_implies(f_pmem(t_var("p")),
                         f_iff(f_lt(t_var("p"), val), cut)));
      Formula is_sup = f_forall(
          "w", f_implies(f_lt(t_var("w"), val),
                         f_exists("p", f_and({f_pmem(t_var("p")), f_lt(t_var("w"), t_var("p")),
                                              f_lt(t_var("p"), val)}))));
      if (!decide_pair(defines, cfg, lim) || !decide_pair(is_sup, cfg, lim)) {
        c.pass = false;
        c.detail = "the value " + quad_str(Quad(a, b, cfg.d)) + " realizes no definable cut";
        return;
      }
    }
  });

  run("definable-completeness", [&](AxiomCheck& c) {
    Term root = t_const(Quad(Rat(0), Rat(1), cfg.d));
    auto verify = [&](const Formula& phi, const std::string& v) {
      Quad inf = pair_inf(phi, cfg, lim);
      Term c0 = t_const(inf);
      Formula lower = f_forall(v, f_implies(phi, f_not(f_lt(t_var(v), c0))));
      Formula best = f_forall(
          "u", f_implies(f_lt(c0, t_var("u")),
                         f_exists(v, f_and(phi, f_lt(t_var(v), t_var("u"))))));
      return decide_pair(lower, cfg, lim) && decide_pair(best, cfg, lim);
    };
    Formula above_root = f_and(f_not(f_lt(t_var("v"), root)), f_not(f_eq(t_var("v"), root)));
    Quad inf0 = pair_inf(above_root, cfg, lim);
    if (quad_sign(inf0 - Quad(Rat(0), Rat(1), cfg.d)) != 0 || !verify(above_root, "v")) {
      c.pass = false;
      c.detail = "the set above rt has a wrong infimum";
      return;
    }
    for (std::size_t i = 0; i < samples; ++i) {
      Rat a = rnd_rat(r, 5);
      Formula base = f_not(f_lt(t_var("v"), t_rat(a)));  // v >= a keeps it bounded
      Formula phi;
      switch (r.uniform(0, 2)) {
        case 0: phi = f_and(base, f_pmem(t_var("v"))); break;
        case 1: phi = f_and(base, f_not(f_pmem(t_var("v")))); break;
        default:
          phi = f_and(base, f_not(f_psq(t_rat(rnd_rat(r, 3)), t_var("v") - t_rat(a))));
          break;
      }
      if (!decide_pair(f_exists("v", phi), cfg, lim)) continue;
      if (!verify(phi, "v")) {
        c.pass = false;
        c.detail = "a bounded set failed its infimum check";
        return;
      }
    }
  });

  return rep;
}

}  // namespace quadcut
