#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "formula.hpp"

namespace quadcut {

struct Limits {
  std::size_t branch_limit = 100000;  // cap on live disjunctive branches
  int dim_limit = 3;                  // cap on decomposition arity
};

struct QeStats {
  std::size_t max_branches = 0;
  std::size_t eliminated = 0;
};

namespace detail_qe {

using Branch = std::vector<LinAtom>;

inline bool same_coeffs(const LinForm& x, const LinForm& y) {
  if (x.coeffs.size() != y.coeffs.size()) return false;
  auto i = x.coeffs.begin();
  auto j = y.coeffs.begin();
  for (; i != x.coeffs.end(); ++i, ++j) {
    if (i->first != j->first) return false;
    if (quad_struct_cmp(i->second, j->second) != 0) return false;
  }
  return true;
}

// Add one canonical atom to a conjunction.  Duplicates and implied atoms are
// folded, parallel strict atoms keep only the tighter one, and a detected
// contradiction reports the branch dead (returns false).
inline bool branch_insert(Branch& b, const LinAtom& a) {
  LinForm na = -a.form;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const LinAtom& e = b[i];
    if (e.rel == a.rel && lf_cmp(e.form, a.form) == 0) return true;
    if (same_coeffs(e.form, a.form)) {
      // Same hyperplane direction, possibly different constants.
      if (e.rel == Rel::lt && a.rel == Rel::lt) {
        if (quad_cmp(e.form.constant, a.form.constant) >= 0) return true;
        b.erase(b.begin() + i);
        return branch_insert(b, a);
      }
      if (e.rel == Rel::eq && a.rel == Rel::eq) return false;
      // One equality pins the form; a strict atom with a smaller constant is
      // implied, any other is contradictory.
      const LinAtom& eq = e.rel == Rel::eq ? e : a;
      const LinAtom& lt = e.rel == Rel::eq ? a : e;
      if (quad_cmp(lt.form.constant, eq.form.constant) < 0) {
        if (e.rel == Rel::eq) return true;
        b.erase(b.begin() + i);
        return branch_insert(b, a);
      }
      return false;
    }
    if (same_coeffs(e.form, na)) {
      // Opposite directions: e.form + a.form is the ground gap between them.
      int s = quad_sign(e.form.constant + a.form.constant);
      if (e.rel == Rel::lt && a.rel == Rel::lt) {
        if (s >= 0) return false;
        continue;
      }
      if (e.rel == Rel::eq && a.rel == Rel::eq) return s == 0;
      if (s >= 0) return false;
      if (a.rel == Rel::lt) return true;  // implied by the equality already present
      b.erase(b.begin() + i);
      return branch_insert(b, a);
    }
  }
  b.insert(std::upper_bound(b.begin(), b.end(), a,
                            [](const LinAtom& x, const LinAtom& y) { return linatom_cmp(x, y) < 0; }),
           a);
  return true;
}

inline int branch_cmp(const Branch& x, const Branch& y) {
  if (x.size() != y.size()) return x.size() < y.size() ? -1 : 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    int c = linatom_cmp(x[i], y[i]);
    if (c != 0) return c;
  }
  return 0;
}

// Rough count of branches a subformula will contribute, to order conjuncts
// cheapest-first before distributing.
inline std::size_t dnf_width(const Formula& f) {
  constexpr std::size_t cap = 1u << 20;
  switch (f.kind()) {
    case FKind::lor: {
      std::size_t s = 0;
      for (const auto& k : f.kids()) s = std::min(cap, s + dnf_width(k));
      return s;
    }
    case FKind::land: {
      std::size_t p = 1;
      for (const auto& k : f.kids()) p = std::min(cap, p * dnf_width(k));
      return p;
    }
    default:
      return 1;
  }
}

inline void expand(const Formula& f, std::vector<Branch>& bs, const Limits& lim, QeStats* stats) {
  switch (f.kind()) {
    case FKind::truth:
      return;
    case FKind::falsity:
      bs.clear();
      return;
    case FKind::lin: {
      std::vector<Branch> out;
      out.reserve(bs.size());
      for (auto& b : bs)
        if (branch_insert(b, f.node->lin)) out.push_back(std::move(b));
      bs = std::move(out);
      return;
    }
    case FKind::land: {
      std::vector<Formula> kids = f.kids();
      std::stable_sort(kids.begin(), kids.end(),
                       [](const Formula& x, const Formula& y) { return dnf_width(x) < dnf_width(y); });
      for (const auto& k : kids) {
        expand(k, bs, lim, stats);
        if (bs.empty()) return;
      }
      return;
    }
    case FKind::lor: {
      std::vector<Branch> acc;
      for (const auto& k : f.kids()) {
        std::vector<Branch> part = bs;
        expand(k, part, lim, stats);
        acc.insert(acc.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
        if (acc.size() > lim.branch_limit)
          throw ResourceLimit("disjunctive branches exceed the configured limit");
      }
      std::sort(acc.begin(), acc.end(), [](const Branch& x, const Branch& y) { return branch_cmp(x, y) < 0; });
      acc.erase(std::unique(acc.begin(), acc.end(),
                            [](const Branch& x, const Branch& y) { return branch_cmp(x, y) == 0; }),
                acc.end());
      bs = std::move(acc);
      if (stats) stats->max_branches = std::max(stats->max_branches, bs.size());
      return;
    }
    default:
      throw InternalError("disjunctive expansion on a non-normalized formula");
  }
}

inline std::vector<Branch> to_dnf(const Formula& f, const Limits& lim, QeStats* stats) {
  std::vector<Branch> bs{Branch{}};
  expand(f, bs, lim, stats);
  return bs;
}

// Remove the variable from one satisfiable-so-far conjunction of atoms.  An
// equality solves for the variable; over the base structure the solution
// u + rt v additionally forces v = 0 since the variable is rational.  With
// strict bounds only, density of the order (and of the rationals inside the
// completion) reduces existence to the lower bounds sitting below the upper
// bounds.
inline Formula branch_reduce(const Branch& b, const std::string& x, Structure st, Lang lang) {
  std::vector<Formula> keep;
  std::vector<LinAtom> with_x;
  for (const auto& a : b) {
    if (a.form.coeffs.count(x)) with_x.push_back(a);
    else keep.push_back(f_lin(a, lang));
  }
  if (with_x.empty()) return n_sorted(true, std::move(keep));

  for (std::size_t i = 0; i < with_x.size(); ++i) {
    if (with_x[i].rel != Rel::eq) continue;
    LinForm rest = with_x[i].form;
    Quad c = rest.coeffs.at(x);
    rest.coeffs.erase(x);
    LinForm sol = -quad_inv(c) * rest;
    LinForm target;
    if (st == Structure::M) {
      auto [u, v] = lf_split(sol);
      if (!(v.coeffs.empty() && v.constant.is_zero()))
        keep.push_back(f_lin_eq(lf_from_term(v), lang));
      target = lf_from_term(u);
    } else {
      target = std::move(sol);
    }
    for (std::size_t j = 0; j < with_x.size(); ++j) {
      if (j == i) continue;
      keep.push_back(f_lin(LinAtom{lf_subst(with_x[j].form, x, target), with_x[j].rel}, lang));
    }
    return n_sorted(true, std::move(keep));
  }

  std::vector<LinForm> lowers, uppers;
  for (const auto& a : with_x) {
    Quad c = a.form.coeffs.at(x);
    LinForm rest = a.form;
    rest.coeffs.erase(x);
    LinForm bound = -quad_inv(c) * rest;
    (quad_sign(c) > 0 ? uppers : lowers).push_back(std::move(bound));
  }
  for (const auto& l : lowers)
    for (const auto& u : uppers)
      keep.push_back(f_lin_lt(l - u, lang));
  return n_sorted(true, std::move(keep));
}

inline Formula elim_exists(const std::string& x, const Formula& f, Structure st, Lang lang,
                           const Limits& lim, QeStats* stats) {
  if (!free_vars(f).count(x)) return f;
  if (f.kind() == FKind::lor) {
    std::vector<Formula> kids;
    for (const auto& k : f.kids()) kids.push_back(elim_exists(x, k, st, lang, lim, stats));
    return n_sorted(false, std::move(kids));
  }
  if (f.kind() == FKind::land) {
    // The quantifier only needs the conjuncts that mention the variable.
    std::vector<Formula> with, without;
    for (const auto& k : f.kids())
      (free_vars(k).count(x) ? with : without).push_back(k);
    if (!without.empty()) {
      without.push_back(elim_exists(x, n_sorted(true, std::move(with)), st, lang, lim, stats));
      return n_sorted(true, std::move(without));
    }
  }
  auto branches = to_dnf(f, lim, stats);
  std::vector<Formula> out;
  out.reserve(branches.size());
  for (const auto& b : branches) out.push_back(branch_reduce(b, x, st, lang));
  if (stats) stats->eliminated++;
  return n_sorted(false, std::move(out));
}

inline Formula elim_all(const Formula& f, Structure st, Lang lang, const Config& cfg,
                        const Limits& lim, QeStats* stats) {
  switch (f.kind()) {
    case FKind::exists: {
      Formula body = elim_all(f.kid(), st, lang, cfg, lim, stats);
      return elim_exists(f.node->var, body, st, lang, lim, stats);
    }
    case FKind::forall: {
      Formula body = elim_all(f.kid(), st, lang, cfg, lim, stats);
      Formula inner = elim_exists(f.node->var, normalize(f_not(body), cfg), st, lang, lim, stats);
      return normalize(f_not(inner), cfg);
    }
    case FKind::land: case FKind::lor: {
      std::vector<Formula> kids;
      for (const auto& k : f.kids()) kids.push_back(elim_all(k, st, lang, cfg, lim, stats));
      return n_sorted(f.kind() == FKind::land, std::move(kids));
    }
    default:
      return f;
  }
}

}  // namespace detail_qe

// Quantifier elimination over the rationals (kind M) or their completion
// (kind Vstar).  Input may be any P-free formula; the result is quantifier
// free, normalized, and canonical, so equal inputs give identical output.
inline Formula qe(const Formula& f, Structure st, const Config& cfg = {}, const Limits& lim = {},
                  QeStats* stats = nullptr) {
  if (st == Structure::Pair) throw IllFormed("pair formulas reduce through interpretation first");
  if (has_pmem(f)) throw IllFormed("P-atoms have no elimination in the one-sorted languages");
  cfg.validate();
  Formula n = normalize(f, cfg);
  return detail_qe::elim_all(n, st, n.lang, cfg, lim, stats);
}

inline Formula qe_m(const Formula& f, const Config& cfg = {}, const Limits& lim = {},
                    QeStats* stats = nullptr) {
  return qe(f, Structure::M, cfg, lim, stats);
}

inline Formula qe_vstar(const Formula& f, const Config& cfg = {}, const Limits& lim = {},
                        QeStats* stats = nullptr) {
  return qe(f, Structure::Vstar, cfg, lim, stats);
}

inline Formula negate_qf(const Formula& f, const Config& cfg = {}) {
  return normalize(f_not(f), cfg);
}

inline bool decide(const Formula& f, Structure st, const Config& cfg = {}, const Limits& lim = {}) {
  if (!free_vars(f).empty()) throw IllFormed("decide needs a sentence");
  Formula r = qe(f, st, cfg, lim);
  if (r.kind() == FKind::truth) return true;
  if (r.kind() == FKind::falsity) return false;
  throw InternalError("sentence did not reduce to a truth value");
}

// Logical equivalence of two formulas with parameters, decided as two
// universally closed implications; a direct biconditional would square the
// disjunctive blowup for no gain.
inline bool equiv(const Formula& f, const Formula& g, Structure st, const Config& cfg = {},
                  const Limits& lim = {}) {
  auto closed = [&](Formula h) {
    for (const auto& v : free_vars(h)) h = f_forall(v, std::move(h));
    return h;
  };
  return decide(closed(f_implies(f, g)), st, cfg, lim) &&
         decide(closed(f_implies(g, f)), st, cfg, lim);
}

// Rewrite internal linear atoms back into the surface syntax.  A strict atom
// u + rt v < 0 is exactly the half-plane atom P2(-v, u).  An equality splits:
// over the rationals u + rt v = 0 forces u = 0 and v = 0 separately; over
// the completion it pins the point from both sides with negated strict
// atoms.  The output always lies in the base language.
inline Formula to_surface(const Formula& f, Structure st, const Config& cfg = {}) {
  switch (f.kind()) {
    case FKind::lin: {
      auto [u, v] = lf_split(f.node->lin.form);
      bool vzero = v.coeffs.empty() && v.constant.is_zero();
      auto varpart = [](const Term& t) { Term r; r.coeffs = t.coeffs; return r; };
      if (f.node->lin.rel == Rel::lt) {
        if (vzero) return f_lt(varpart(u), t_const(-u.constant));
        return f_psq(-v, u);
      }
      if (st == Structure::M) {
        std::vector<Formula> parts;
        for (const Term* t : {&u, &v}) {
          if (t->coeffs.empty()) {
            if (!t->constant.is_zero()) return f_false();
          } else {
            parts.push_back(f_eq(varpart(*t), t_const(-t->constant)));
          }
        }
        return n_sorted(true, std::move(parts));
      }
      if (vzero) return f_eq(varpart(u), t_const(-u.constant));
      return n_sorted(true, {f_not(f_psq(-v, u)), f_not(f_psq(v, -u))});
    }
    case FKind::truth: case FKind::falsity: case FKind::lt: case FKind::leq:
    case FKind::eq: case FKind::psq: case FKind::pmem:
      return f;
    case FKind::lnot:
      return f_not(to_surface(f.kid(), st, cfg));
    case FKind::land: case FKind::lor: {
      std::vector<Formula> kids;
      for (const auto& k : f.kids()) kids.push_back(to_surface(k, st, cfg));
      return f.kind() == FKind::land ? f_and(std::move(kids)) : f_or(std::move(kids));
    }
    case FKind::implies:
      return f_implies(to_surface(f.kid(0), st, cfg), to_surface(f.kid(1), st, cfg));
    case FKind::iff:
      return f_iff(to_surface(f.kid(0), st, cfg), to_surface(f.kid(1), st, cfg));
    case FKind::exists: case FKind::forall:
      return f_quant(f.kind(), f.node->var, to_surface(f.kid(), st, cfg));
  }
  throw InternalError("unhandled formula kind in to_surface");
}

// Canonical pruned disjunctive normal form of a quantifier-free P-free
// formula.
inline Formula simplify(const Formula& f, const Config& cfg = {}, const Limits& lim = {}) {
  if (!is_qf(f)) throw IllFormed("simplify expects a quantifier-free formula");
  Formula n = normalize(f, cfg);
  if (has_pmem(n)) return n;
  auto branches = detail_qe::to_dnf(n, lim, nullptr);
  std::vector<Formula> out;
  out.reserve(branches.size());
  for (const auto& b : branches) {
    std::vector<Formula> atoms;
    atoms.reserve(b.size());
    for (const auto& a : b) atoms.push_back(f_lin(a, n.lang));
    out.push_back(n_sorted(true, std::move(atoms)));
  }
  return n_sorted(false, std::move(out));
}

}  // namespace quadcut
