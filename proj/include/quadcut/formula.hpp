#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "arith.hpp"

namespace quadcut {

// Three nested languages: L speaks about the rationals with the half-plane
// predicate, Lstar additionally allows sqrt(d) constants (the completion),
// LP adds the unary predicate P picking out the rationals inside the
// completion.
enum class Lang { L, Lstar, LP };

inline Lang lang_join(Lang a, Lang b) { return a < b ? b : a; }

// Which structure a formula is evaluated in: the rationals, the completion,
// or the dense pair.
enum class Structure { M, Vstar, Pair };

using Env = std::map<std::string, Quad>;

// ---------------------------------------------------------------------------
// Terms: rational linear combinations of variables plus a constant.  Only the
// constant may have a sqrt(d) part, and in L it must not.  This is the whole
// term algebra of the languages; there is no multiplication of variables.

struct Term {
  std::map<std::string, Rat> coeffs;  // zero coefficients are never stored
  Quad constant;

  bool is_ground() const { return coeffs.empty(); }
};

inline Term t_const(Quad q) { Term t; t.constant = std::move(q); return t; }
inline Term t_rat(Rat q) { return t_const(Quad(std::move(q))); }
inline Term t_var(const std::string& name, Rat coeff = Rat(1)) {
  Term t;
  if (coeff != 0) t.coeffs[name] = std::move(coeff);
  return t;
}

inline Term operator+(const Term& x, const Term& y) {
  Term r = x;
  for (const auto& [v, c] : y.coeffs) {
    Rat s = (r.coeffs.count(v) ? r.coeffs[v] : Rat(0)) + c;
    if (s == 0) r.coeffs.erase(v); else r.coeffs[v] = s;
  }
  r.constant = r.constant + y.constant;
  return r;
}

inline Term operator-(const Term& x) {
  Term r;
  for (const auto& [v, c] : x.coeffs) r.coeffs[v] = -c;
  r.constant = -x.constant;
  return r;
}

inline Term operator-(const Term& x, const Term& y) { return x + (-y); }

inline Term operator*(const Rat& q, const Term& x) {
  Term r;
  if (q == 0) return r;
  for (const auto& [v, c] : x.coeffs) r.coeffs[v] = q * c;
  r.constant = q * x.constant;
  return r;
}

inline int term_cmp(const Term& x, const Term& y) {
  auto i = x.coeffs.begin(); auto j = y.coeffs.begin();
  for (; i != x.coeffs.end() && j != y.coeffs.end(); ++i, ++j) {
    if (i->first != j->first) return i->first < j->first ? -1 : 1;
    if (i->second != j->second) return i->second < j->second ? -1 : 1;
  }
  if (i != x.coeffs.end()) return 1;
  if (j != y.coeffs.end()) return -1;
  return quad_struct_cmp(x.constant, y.constant);
}

inline bool operator==(const Term& x, const Term& y) { return term_cmp(x, y) == 0; }

inline Quad term_value(const Term& t, const Env& env) {
  Quad v = t.constant;
  for (const auto& [name, c] : t.coeffs) {
    auto it = env.find(name);
    if (it == env.end()) throw UnboundVariable("variable " + name + " has no value");
    v = v + c * it->second;
  }
  return v;
}

inline Lang term_lang(const Term& t) { return t.constant.is_rational() ? Lang::L : Lang::Lstar; }

// ---------------------------------------------------------------------------
// Affine forms with coefficients from Q(sqrt d).  Every atom normalises to
// "form < 0" or "form = 0"; the sqrt(d) parts of coefficients enter through
// the half-plane predicate.

struct LinForm {
  std::map<std::string, Quad> coeffs;  // zero coefficients are never stored
  Quad constant;

  bool is_ground() const { return coeffs.empty(); }
};

inline void lf_set(LinForm& f, const std::string& v, const Quad& c) {
  if (c.is_zero()) f.coeffs.erase(v); else f.coeffs[v] = c;
}

inline LinForm lf_from_term(const Term& t) {
  LinForm f;
  for (const auto& [v, c] : t.coeffs) f.coeffs[v] = Quad(c);
  f.constant = t.constant;
  return f;
}

inline LinForm operator+(const LinForm& x, const LinForm& y) {
  LinForm r = x;
  for (const auto& [v, c] : y.coeffs) {
    Quad s = (r.coeffs.count(v) ? r.coeffs[v] : Quad()) + c;
    lf_set(r, v, s);
  }
  r.constant = r.constant + y.constant;
  return r;
}

inline LinForm operator-(const LinForm& x) {
  LinForm r;
  for (const auto& [v, c] : x.coeffs) r.coeffs[v] = -c;
  r.constant = -x.constant;
  return r;
}

inline LinForm operator-(const LinForm& x, const LinForm& y) { return x + (-y); }

inline LinForm operator*(const Quad& q, const LinForm& x) {
  LinForm r;
  if (q.is_zero()) return r;
  for (const auto& [v, c] : x.coeffs) r.coeffs[v] = q * c;
  r.constant = q * x.constant;
  return r;
}

// Replace a variable by an affine form.
inline LinForm lf_subst(const LinForm& x, const std::string& var, const LinForm& rep) {
  auto it = x.coeffs.find(var);
  if (it == x.coeffs.end()) return x;
  Quad c = it->second;
  LinForm r = x;
  r.coeffs.erase(var);
  return r + c * rep;
}

inline Quad lf_value(const LinForm& f, const Env& env) {
  Quad v = f.constant;
  for (const auto& [name, c] : f.coeffs) {
    auto it = env.find(name);
    if (it == env.end()) throw UnboundVariable("variable " + name + " has no value");
    v = v + c * it->second;
  }
  return v;
}

// Split u + sqrt(d) v into the rational affine pieces (u, v), both of which
// are legal L-terms over the same variables.
inline std::pair<Term, Term> lf_split(const LinForm& f) {
  Term u, v;
  for (const auto& [name, c] : f.coeffs) {
    if (c.a != 0) u.coeffs[name] = c.a;
    if (c.b != 0) v.coeffs[name] = c.b;
  }
  u.constant = Quad(f.constant.a);
  v.constant = Quad(f.constant.b);
  return {u, v};
}

inline int lf_cmp(const LinForm& x, const LinForm& y) {
  auto i = x.coeffs.begin(); auto j = y.coeffs.begin();
  for (; i != x.coeffs.end() && j != y.coeffs.end(); ++i, ++j) {
    if (i->first != j->first) return i->first < j->first ? -1 : 1;
    int c = quad_struct_cmp(i->second, j->second);
    if (c != 0) return c;
  }
  if (i != x.coeffs.end()) return 1;
  if (j != y.coeffs.end()) return -1;
  return quad_struct_cmp(x.constant, y.constant);
}

inline bool operator==(const LinForm& x, const LinForm& y) { return lf_cmp(x, y) == 0; }

enum class Rel { lt, eq };

struct LinAtom {
  LinForm form;
  Rel rel;  // form < 0  or  form = 0
};

inline int linatom_cmp(const LinAtom& x, const LinAtom& y) {
  if (x.rel != y.rel) return x.rel < y.rel ? -1 : 1;
  return lf_cmp(x.form, y.form);
}

// Canonical scaling: unit leading coefficient for equalities, unit absolute
// leading coefficient for strict inequalities.  Ground atoms fold to a truth
// value instead, so stored atoms always mention a variable.
inline std::optional<bool> lin_canon(LinAtom& a) {
  if (a.form.is_ground()) {
    int s = quad_sign(a.form.constant);
    return a.rel == Rel::lt ? s < 0 : s == 0;
  }
  Quad lead = a.form.coeffs.begin()->second;
  if (a.rel == Rel::lt && quad_sign(lead) < 0) lead = -lead;
  a.form = quad_inv(lead) * a.form;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Formulas.  Immutable trees with shared subterms; "and"/"or" are n-ary.

enum class FKind {
  truth, falsity, lt, leq, eq, psq, pmem, lin,
  lnot, land, lor, implies, iff, exists, forall,
};

struct Formula;

struct FNode {
  FKind kind;
  Term a, b;                  // lt/leq/eq: sides; psq: (s, t); pmem: a
  LinAtom lin;                // kind lin
  std::vector<Formula> kids;  // connectives and quantifier bodies
  std::string var;            // quantified variable
};

struct Formula {
  std::shared_ptr<const FNode> node;
  Lang lang = Lang::L;

  FKind kind() const { return node->kind; }
  const std::vector<Formula>& kids() const { return node->kids; }
  const Formula& kid(std::size_t i = 0) const { return node->kids[i]; }
};

inline Formula mk(FNode n, Lang lang) {
  return Formula{std::make_shared<const FNode>(std::move(n)), lang};
}

inline Formula f_true() { FNode n; n.kind = FKind::truth; return mk(std::move(n), Lang::L); }
inline Formula f_false() { FNode n; n.kind = FKind::falsity; return mk(std::move(n), Lang::L); }
inline Formula f_bool(bool b) { return b ? f_true() : f_false(); }

inline Formula f_lt(Term x, Term y) {
  FNode n; n.kind = FKind::lt;
  Lang l = lang_join(term_lang(x), term_lang(y));
  n.a = std::move(x); n.b = std::move(y);
  return mk(std::move(n), l);
}

inline Formula f_leq(Term x, Term y) {
  FNode n; n.kind = FKind::leq;
  Lang l = lang_join(term_lang(x), term_lang(y));
  n.a = std::move(x); n.b = std::move(y);
  return mk(std::move(n), l);
}

inline Formula f_eq(Term x, Term y) {
  FNode n; n.kind = FKind::eq;
  Lang l = lang_join(term_lang(x), term_lang(y));
  n.a = std::move(x); n.b = std::move(y);
  return mk(std::move(n), l);
}

inline Formula f_psq(Term s, Term t) {
  FNode n; n.kind = FKind::psq;
  Lang l = lang_join(term_lang(s), term_lang(t));
  n.a = std::move(s); n.b = std::move(t);
  return mk(std::move(n), l);
}

inline Formula f_pmem(Term t) {
  FNode n; n.kind = FKind::pmem;
  n.a = std::move(t);
  return mk(std::move(n), Lang::LP);
}

// Ground linear atoms fold away immediately.
inline Formula f_lin(LinAtom atom, Lang lang) {
  if (auto v = lin_canon(atom)) return f_bool(*v);
  FNode n; n.kind = FKind::lin;
  n.lin = std::move(atom);
  return mk(std::move(n), lang);
}

inline Formula f_lin_lt(LinForm form, Lang lang) { return f_lin(LinAtom{std::move(form), Rel::lt}, lang); }
inline Formula f_lin_eq(LinForm form, Lang lang) { return f_lin(LinAtom{std::move(form), Rel::eq}, lang); }

inline Formula f_not(Formula f) {
  FNode n; n.kind = FKind::lnot;
  Lang l = f.lang;
  n.kids.push_back(std::move(f));
  return mk(std::move(n), l);
}

inline Formula f_and(std::vector<Formula> kids) {
  std::vector<Formula> flat;
  Lang l = Lang::L;
  for (auto& k : kids) {
    if (k.kind() == FKind::truth) continue;
    if (k.kind() == FKind::falsity) return f_false();
    l = lang_join(l, k.lang);
    if (k.kind() == FKind::land)
      for (const auto& kk : k.kids()) flat.push_back(kk);
    else
      flat.push_back(std::move(k));
  }
  if (flat.empty()) return f_true();
  if (flat.size() == 1) return flat[0];
  FNode n; n.kind = FKind::land;
  n.kids = std::move(flat);
  return mk(std::move(n), l);
}

inline Formula f_or(std::vector<Formula> kids) {
  std::vector<Formula> flat;
  Lang l = Lang::L;
  for (auto& k : kids) {
    if (k.kind() == FKind::falsity) continue;
    if (k.kind() == FKind::truth) return f_true();
    l = lang_join(l, k.lang);
    if (k.kind() == FKind::lor)
      for (const auto& kk : k.kids()) flat.push_back(kk);
    else
      flat.push_back(std::move(k));
  }
  if (flat.empty()) return f_false();
  if (flat.size() == 1) return flat[0];
  FNode n; n.kind = FKind::lor;
  n.kids = std::move(flat);
  return mk(std::move(n), l);
}

inline Formula f_and(Formula x, Formula y) { std::vector<Formula> v{std::move(x), std::move(y)}; return f_and(std::move(v)); }
inline Formula f_or(Formula x, Formula y) { std::vector<Formula> v{std::move(x), std::move(y)}; return f_or(std::move(v)); }

inline Formula f_implies(Formula x, Formula y) {
  FNode n; n.kind = FKind::implies;
  Lang l = lang_join(x.lang, y.lang);
  n.kids = {std::move(x), std::move(y)};
  return mk(std::move(n), l);
}

inline Formula f_iff(Formula x, Formula y) {
  FNode n; n.kind = FKind::iff;
  Lang l = lang_join(x.lang, y.lang);
  n.kids = {std::move(x), std::move(y)};
  return mk(std::move(n), l);
}

inline Formula f_quant(FKind q, std::string var, Formula body) {
  FNode n; n.kind = q;
  Lang l = body.lang;
  n.var = std::move(var);
  n.kids.push_back(std::move(body));
  return mk(std::move(n), l);
}

inline Formula f_exists(std::string var, Formula body) { return f_quant(FKind::exists, std::move(var), std::move(body)); }
inline Formula f_forall(std::string var, Formula body) { return f_quant(FKind::forall, std::move(var), std::move(body)); }

// ---------------------------------------------------------------------------
// Structural queries.

inline void collect_free(const Formula& f, std::set<std::string>& bound, std::set<std::string>& out) {
  switch (f.kind()) {
    case FKind::truth: case FKind::falsity: return;
    case FKind::lt: case FKind::leq: case FKind::eq: case FKind::psq:
      for (const auto& [v, c] : f.node->a.coeffs) if (!bound.count(v)) out.insert(v);
      for (const auto& [v, c] : f.node->b.coeffs) if (!bound.count(v)) out.insert(v);
      return;
    case FKind::pmem:
      for (const auto& [v, c] : f.node->a.coeffs) if (!bound.count(v)) out.insert(v);
      return;
    case FKind::lin:
      for (const auto& [v, c] : f.node->lin.form.coeffs) if (!bound.count(v)) out.insert(v);
      return;
    case FKind::exists: case FKind::forall: {
      bool was = bound.count(f.node->var) > 0;
      bound.insert(f.node->var);
      collect_free(f.kid(), bound, out);
      if (!was) bound.erase(f.node->var);
      return;
    }
    default:
      for (const auto& k : f.kids()) collect_free(k, bound, out);
  }
}

inline std::set<std::string> free_vars(const Formula& f) {
  std::set<std::string> bound, out;
  collect_free(f, bound, out);
  return out;
}

inline void collect_all_vars(const Formula& f, std::set<std::string>& out) {
  switch (f.kind()) {
    case FKind::truth: case FKind::falsity: return;
    case FKind::lt: case FKind::leq: case FKind::eq: case FKind::psq:
      for (const auto& [v, c] : f.node->a.coeffs) out.insert(v);
      for (const auto& [v, c] : f.node->b.coeffs) out.insert(v);
      return;
    case FKind::pmem:
      for (const auto& [v, c] : f.node->a.coeffs) out.insert(v);
      return;
    case FKind::lin:
      for (const auto& [v, c] : f.node->lin.form.coeffs) out.insert(v);
      return;
    case FKind::exists: case FKind::forall:
      out.insert(f.node->var);
      collect_all_vars(f.kid(), out);
      return;
    default:
      for (const auto& k : f.kids()) collect_all_vars(k, out);
  }
}

inline bool is_qf(const Formula& f) {
  if (f.kind() == FKind::exists || f.kind() == FKind::forall) return false;
  for (const auto& k : f.kids()) if (!is_qf(k)) return false;
  return true;
}

inline bool has_pmem(const Formula& f) {
  if (f.kind() == FKind::pmem) return true;
  for (const auto& k : f.kids()) if (has_pmem(k)) return true;
  return false;
}

inline int struct_cmp(const Formula& x, const Formula& y) {
  if (x.node == y.node) return 0;
  if (x.kind() != y.kind()) return x.kind() < y.kind() ? -1 : 1;
  switch (x.kind()) {
    case FKind::truth: case FKind::falsity: return 0;
    case FKind::lt: case FKind::leq: case FKind::eq: case FKind::psq: {
      int c = term_cmp(x.node->a, y.node->a);
      if (c != 0) return c;
      return term_cmp(x.node->b, y.node->b);
    }
    case FKind::pmem: return term_cmp(x.node->a, y.node->a);
    case FKind::lin: return linatom_cmp(x.node->lin, y.node->lin);
    case FKind::exists: case FKind::forall: {
      if (x.node->var != y.node->var) return x.node->var < y.node->var ? -1 : 1;
      return struct_cmp(x.kid(), y.kid());
    }
    default: {
      if (x.kids().size() != y.kids().size()) return x.kids().size() < y.kids().size() ? -1 : 1;
      for (std::size_t i = 0; i < x.kids().size(); ++i) {
        int c = struct_cmp(x.kid(i), y.kid(i));
        if (c != 0) return c;
      }
      return 0;
    }
  }
}

inline bool operator==(const Formula& x, const Formula& y) { return struct_cmp(x, y) == 0; }

inline std::string fresh_var(const std::string& base, const std::set<std::string>& taken) {
  if (!taken.count(base)) return base;
  for (int i = 0;; ++i) {
    std::string cand = base + "_" + std::to_string(i);
    if (!taken.count(cand)) return cand;
  }
}

// ---------------------------------------------------------------------------
// Printing.  Canonical and reparseable for everything the grammar covers;
// internal linear atoms print in a braced debug form instead.

inline std::string term_str(const Term& t) {
  struct Piece { bool neg; std::string body; };
  std::vector<Piece> pieces;
  for (const auto& [v, c] : t.coeffs) {
    Rat ac = c < 0 ? Rat(-c) : c;
    std::string body = (ac == 1) ? v : rat_str(ac) + "*" + v;
    pieces.push_back({c < 0, body});
  }
  const Quad& k = t.constant;
  if (k.a != 0) {
    Rat ac = k.a < 0 ? Rat(-k.a) : k.a;
    pieces.push_back({k.a < 0, rat_str(ac)});
  }
  if (k.b != 0) {
    Rat ac = k.b < 0 ? Rat(-k.b) : k.b;
    std::string body = (ac == 1) ? "rt" : rat_str(ac) + "*rt";
    pieces.push_back({k.b < 0, body});
  }
  if (pieces.empty()) return "0";
  std::string out;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (i == 0) out += pieces[i].neg ? "-" + pieces[i].body : pieces[i].body;
    else out += (pieces[i].neg ? " - " : " + ") + pieces[i].body;
  }
  return out;
}

inline std::string linform_str(const LinForm& f) {
  struct Piece { bool neg; std::string body; };
  std::vector<Piece> pieces;
  for (const auto& [v, c] : f.coeffs) {
    if (c.b == 0) {
      Rat ac = c.a < 0 ? Rat(-c.a) : c.a;
      pieces.push_back({c.a < 0, ac == 1 ? v : rat_str(ac) + "*" + v});
    } else {
      pieces.push_back({false, "(" + quad_str(c) + ")*" + v});
    }
  }
  const Quad& k = f.constant;
  if (k.a != 0) {
    Rat ac = k.a < 0 ? Rat(-k.a) : k.a;
    pieces.push_back({k.a < 0, rat_str(ac)});
  }
  if (k.b != 0) {
    Rat ac = k.b < 0 ? Rat(-k.b) : k.b;
    pieces.push_back({k.b < 0, ac == 1 ? std::string("rt") : rat_str(ac) + "*rt"});
  }
  if (pieces.empty()) return "0";
  std::string out;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (i == 0) out += pieces[i].neg ? "-" + pieces[i].body : pieces[i].body;
    else out += (pieces[i].neg ? " - " : " + ") + pieces[i].body;
  }
  return out;
}

inline std::string print(const Formula& f);

inline std::string print_prec(const Formula& f, int min_prec) {
  auto wrap = [&](int prec, const std::string& s) {
    return prec < min_prec ? "(" + s + ")" : s;
  };
  switch (f.kind()) {
    case FKind::truth: return "true";
    case FKind::falsity: return "false";
    case FKind::lt: return term_str(f.node->a) + " < " + term_str(f.node->b);
    case FKind::leq: return term_str(f.node->a) + " <= " + term_str(f.node->b);
    case FKind::eq: return term_str(f.node->a) + " = " + term_str(f.node->b);
    case FKind::psq: return "P2(" + term_str(f.node->a) + ", " + term_str(f.node->b) + ")";
    case FKind::pmem: return "P(" + term_str(f.node->a) + ")";
    case FKind::lin:
      return "{" + linform_str(f.node->lin.form) + (f.node->lin.rel == Rel::lt ? " < 0}" : " = 0}");
    case FKind::lnot: return wrap(5, "~" + print_prec(f.kid(), 6));
    case FKind::land: {
      std::string s;
      for (std::size_t i = 0; i < f.kids().size(); ++i)
        s += (i ? " & " : "") + print_prec(f.kid(i), 5);
      return wrap(4, s);
    }
    case FKind::lor: {
      std::string s;
      for (std::size_t i = 0; i < f.kids().size(); ++i)
        s += (i ? " | " : "") + print_prec(f.kid(i), 4);
      return wrap(3, s);
    }
    case FKind::implies:
      return wrap(2, print_prec(f.kid(0), 3) + " -> " + print_prec(f.kid(1), 2));
    case FKind::iff:
      return wrap(1, print_prec(f.kid(0), 1) + " <-> " + print_prec(f.kid(1), 2));
    // A quantifier body extends as far right as possible, so a quantified
    // subformula is parenthesized anywhere but the rightmost position.
    case FKind::exists:
      return wrap(0, "E " + f.node->var + ". " + print_prec(f.kid(), 0));
    case FKind::forall:
      return wrap(0, "A " + f.node->var + ". " + print_prec(f.kid(), 0));
  }
  throw InternalError("unhandled formula kind in print");
}

inline std::string print(const Formula& f) { return print_prec(f, 0); }

// ---------------------------------------------------------------------------
// Parsing.

namespace detail {

enum class Tok {
  end, lparen, rparen, dot, comma, amp, pipe, tilde, arrow, darrow,
  lt, le, eq, gt, ge, plus, minus, star, slash, integer, ident,
  kw_e, kw_a, kw_p, kw_p2, kw_rt, kw_true, kw_false,
};

struct Token {
  Tok type;
  std::string text;
  std::size_t pos;
};

inline std::vector<Token> lex(const std::string& s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto push = [&](Tok t, std::size_t pos, std::string text = "") { out.push_back({t, std::move(text), pos}); };
  while (i < s.size()) {
    char c = s[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') { ++i; continue; }
    std::size_t p = i;
    if (c == '(') { push(Tok::lparen, p); ++i; continue; }
    if (c == ')') { push(Tok::rparen, p); ++i; continue; }
    if (c == '.') { push(Tok::dot, p); ++i; continue; }
    if (c == ',') { push(Tok::comma, p); ++i; continue; }
    if (c == '&') { push(Tok::amp, p); ++i; continue; }
    if (c == '|') { push(Tok::pipe, p); ++i; continue; }
    if (c == '~') { push(Tok::tilde, p); ++i; continue; }
    if (c == '+') { push(Tok::plus, p); ++i; continue; }
    if (c == '*') { push(Tok::star, p); ++i; continue; }
    if (c == '/') { push(Tok::slash, p); ++i; continue; }
    if (c == '-') {
      if (i + 1 < s.size() && s[i + 1] == '>') { push(Tok::arrow, p); i += 2; }
      else { push(Tok::minus, p); ++i; }
      continue;
    }
    if (c == '<') {
      if (i + 2 < s.size() && s[i + 1] == '-' && s[i + 2] == '>') { push(Tok::darrow, p); i += 3; continue; }
      if (i + 1 < s.size() && s[i + 1] == '=') { push(Tok::le, p); i += 2; continue; }
      push(Tok::lt, p); ++i; continue;
    }
    if (c == '>') {
      if (i + 1 < s.size() && s[i + 1] == '=') { push(Tok::ge, p); i += 2; continue; }
      push(Tok::gt, p); ++i; continue;
    }
    if (c == '=') { push(Tok::eq, p); ++i; continue; }
    if (c >= '0' && c <= '9') {
      std::size_t start = i;
      while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
      push(Tok::integer, p, s.substr(start, i - start));
      continue;
    }
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') {
      std::size_t start = i;
      while (i < s.size() && ((s[i] >= 'a' && s[i] <= 'z') || (s[i] >= 'A' && s[i] <= 'Z') ||
                              (s[i] >= '0' && s[i] <= '9') || s[i] == '_')) ++i;
      std::string w = s.substr(start, i - start);
      if (w == "E") push(Tok::kw_e, p);
      else if (w == "A") push(Tok::kw_a, p);
      else if (w == "P") push(Tok::kw_p, p);
      else if (w == "P2") push(Tok::kw_p2, p);
      else if (w == "rt") push(Tok::kw_rt, p);
      else if (w == "true") push(Tok::kw_true, p);
      else if (w == "false") push(Tok::kw_false, p);
      else push(Tok::ident, p, std::move(w));
      continue;
    }
    throw SyntaxError(p, std::string("unexpected character '") + c + "'");
  }
  push(Tok::end, s.size());
  return out;
}

struct Parser {
  std::vector<Token> toks;
  std::size_t at = 0;
  Lang lang;
  Config cfg;

  const Token& peek() const { return toks[at]; }
  Token take() { return toks[at++]; }
  bool accept(Tok t) { if (peek().type == t) { ++at; return true; } return false; }
  void expect(Tok t, const char* what) {
    if (!accept(t)) throw SyntaxError(peek().pos, std::string("expected ") + what);
  }

  Rat number() {
    Token n = take();
    Int num(n.text);
    if (accept(Tok::slash)) {
      if (peek().type != Tok::integer) throw SyntaxError(peek().pos, "expected denominator");
      Int den(take().text);
      return make_rat(num, den);
    }
    return Rat(num);
  }

  // addend := number ['*' primary] | primary;  primary := ident | rt
  Term addend() {
    if (peek().type == Tok::integer) {
      Rat q = number();
      if (accept(Tok::star)) return primary(q);
      return t_rat(q);
    }
    return primary(Rat(1));
  }

  Term primary(const Rat& coeff) {
    if (peek().type == Tok::ident) return t_var(take().text, coeff);
    if (peek().type == Tok::kw_rt) {
      if (lang == Lang::L) throw IllFormed("rt is not a constant of the base language");
      take();
      return t_const(Quad(Rat(0), coeff, cfg.d));
    }
    throw SyntaxError(peek().pos, "expected a variable, rt, or a number");
  }

  Term term() {
    bool neg = accept(Tok::minus);
    Term t = addend();
    if (neg) t = -t;
    while (peek().type == Tok::plus || peek().type == Tok::minus) {
      bool minus = take().type == Tok::minus;
      Term u = addend();
      t = minus ? t - u : t + u;
    }
    return t;
  }

  Formula atom() {
    if (accept(Tok::kw_true)) return f_true();
    if (accept(Tok::kw_false)) return f_false();
    if (peek().type == Tok::kw_p2) {
      take();
      expect(Tok::lparen, "'('");
      Term s = term();
      expect(Tok::comma, "','");
      Term t = term();
      expect(Tok::rparen, "')'");
      return f_psq(std::move(s), std::move(t));
    }
    if (peek().type == Tok::kw_p) {
      if (lang != Lang::LP) throw IllFormed("P is only available in the pair language");
      take();
      expect(Tok::lparen, "'('");
      Term t = term();
      expect(Tok::rparen, "')'");
      return f_pmem(std::move(t));
    }
    Term lhs = term();
    Tok rel = peek().type;
    switch (rel) {
      case Tok::lt: case Tok::le: case Tok::eq: case Tok::gt: case Tok::ge: break;
      default: throw SyntaxError(peek().pos, "expected a relation");
    }
    take();
    Term rhs = term();
    switch (rel) {
      case Tok::lt: return f_lt(std::move(lhs), std::move(rhs));
      case Tok::le: return f_leq(std::move(lhs), std::move(rhs));
      case Tok::eq: return f_eq(std::move(lhs), std::move(rhs));
      case Tok::gt: return f_lt(std::move(rhs), std::move(lhs));
      default: return f_leq(std::move(rhs), std::move(lhs));
    }
  }

  Formula unary() {
    if (accept(Tok::tilde)) return f_not(unary());
    if (peek().type == Tok::kw_e || peek().type == Tok::kw_a) {
      bool ex = take().type == Tok::kw_e;
      if (peek().type != Tok::ident) throw SyntaxError(peek().pos, "expected a variable after the quantifier");
      std::string v = take().text;
      expect(Tok::dot, "'.'");
      Formula body = formula();
      return ex ? f_exists(std::move(v), std::move(body)) : f_forall(std::move(v), std::move(body));
    }
    if (accept(Tok::lparen)) {
      Formula f = formula();
      expect(Tok::rparen, "')'");
      return f;
    }
    return atom();
  }

  Formula conjunction() {
    Formula f = unary();
    if (peek().type != Tok::amp) return f;
    std::vector<Formula> kids{std::move(f)};
    while (accept(Tok::amp)) kids.push_back(unary());
    return f_and(std::move(kids));
  }

  Formula disjunction() {
    Formula f = conjunction();
    if (peek().type != Tok::pipe) return f;
    std::vector<Formula> kids{std::move(f)};
    while (accept(Tok::pipe)) kids.push_back(conjunction());
    return f_or(std::move(kids));
  }

  Formula implication() {
    Formula f = disjunction();
    if (accept(Tok::arrow)) return f_implies(std::move(f), implication());
    return f;
  }

  Formula formula() {
    Formula f = implication();
    while (accept(Tok::darrow)) f = f_iff(std::move(f), implication());
    return f;
  }
};

}  // namespace detail

inline Formula parse(const std::string& text, Lang lang, const Config& cfg = {}) {
  cfg.validate();
  detail::Parser p{detail::lex(text), 0, lang, cfg};
  Formula f = p.formula();
  if (p.peek().type != detail::Tok::end)
    throw SyntaxError(p.peek().pos, "trailing input after formula");
  if (f.lang > lang) throw IllFormed("formula uses symbols outside the requested language");
  return f;
}

// Ground term in the literal syntax, for assignment values and the like.
inline Quad parse_quad(const std::string& text, const Config& cfg = {}) {
  cfg.validate();
  detail::Parser p{detail::lex(text), 0, Lang::Lstar, cfg};
  Term t = p.term();
  if (p.peek().type != detail::Tok::end)
    throw SyntaxError(p.peek().pos, "trailing input after value");
  if (!t.is_ground()) throw IllFormed("value must not contain variables");
  return t.constant;
}

// ---------------------------------------------------------------------------
// Normalization: expand sugar, rewrite atoms to linear form, push negations
// to the leaves (only P-atoms keep them), flatten, sort, deduplicate.  The
// result evaluates identically and a second pass is the identity.

// All conjunctions and disjunctions the normal form emits go through here:
// flattened by the builders, then sorted and deduplicated so normalization
// is idempotent and syntactic equality is meaningful.
inline Formula n_sorted(bool conj, std::vector<Formula> kids) {
  Formula out = conj ? f_and(std::move(kids)) : f_or(std::move(kids));
  if (out.kind() != FKind::land && out.kind() != FKind::lor) return out;
  std::vector<Formula> s = out.kids();
  std::sort(s.begin(), s.end(), [](const Formula& x, const Formula& y) { return struct_cmp(x, y) < 0; });
  s.erase(std::unique(s.begin(), s.end(), [](const Formula& x, const Formula& y) { return struct_cmp(x, y) == 0; }), s.end());
  return out.kind() == FKind::land ? f_and(std::move(s)) : f_or(std::move(s));
}

inline Formula norm_lin(LinForm form, Rel rel, bool positive, Lang lang) {
  if (positive) return f_lin(LinAtom{std::move(form), rel}, lang);
  if (rel == Rel::lt)  // not(form < 0)  ==  -form < 0 or form = 0
    return n_sorted(false, {f_lin_lt(-form, lang), f_lin_eq(std::move(form), lang)});
  return n_sorted(false, {f_lin_lt(form, lang), f_lin_lt(-form, lang)});
}

inline Formula normalize_rec(const Formula& f, bool positive, const Config& cfg) {
  Lang lang = f.lang;
  switch (f.kind()) {
    case FKind::truth: return f_bool(positive);
    case FKind::falsity: return f_bool(!positive);
    case FKind::lt:
      return norm_lin(lf_from_term(f.node->a - f.node->b), Rel::lt, positive, lang);
    case FKind::leq: {
      LinForm u = lf_from_term(f.node->a - f.node->b);
      if (positive) return n_sorted(false, {f_lin_lt(u, lang), f_lin_eq(u, lang)});
      return f_lin_lt(-u, lang);
    }
    case FKind::eq:
      return norm_lin(lf_from_term(f.node->a - f.node->b), Rel::eq, positive, lang);
    case FKind::psq: {
      // P2(s, t) says t < sqrt(d) s, so the linear form is t - sqrt(d) s.
      LinForm s = lf_from_term(f.node->a), t = lf_from_term(f.node->b);
      Quad root(Rat(0), Rat(1), cfg.d);
      return norm_lin(t - root * s, Rel::lt, positive, lang);
    }
    case FKind::pmem: {
      Formula p = f_pmem(f.node->a);
      return positive ? p : f_not(std::move(p));
    }
    case FKind::lin:
      return norm_lin(f.node->lin.form, f.node->lin.rel, positive, lang);
    case FKind::lnot: return normalize_rec(f.kid(), !positive, cfg);
    case FKind::land: case FKind::lor: {
      bool conj = (f.kind() == FKind::land) == positive;
      std::vector<Formula> kids;
      for (const auto& k : f.kids()) kids.push_back(normalize_rec(k, positive, cfg));
      return n_sorted(conj, std::move(kids));
    }
    case FKind::implies: {
      Formula a = normalize_rec(f.kid(0), !positive, cfg);
      Formula b = normalize_rec(f.kid(1), positive, cfg);
      return n_sorted(!positive, {std::move(a), std::move(b)});
    }
    case FKind::iff: {
      // positive: (a and b) or (not a and not b); negated: one side flips.
      Formula pa = normalize_rec(f.kid(0), true, cfg), na = normalize_rec(f.kid(0), false, cfg);
      Formula pb = normalize_rec(f.kid(1), positive, cfg), nb = normalize_rec(f.kid(1), !positive, cfg);
      return n_sorted(false, {n_sorted(true, {std::move(pa), std::move(pb)}),
                              n_sorted(true, {std::move(na), std::move(nb)})});
    }
    case FKind::exists: case FKind::forall: {
      bool ex = (f.kind() == FKind::exists) == positive;
      Formula body = normalize_rec(f.kid(), positive, cfg);
      return ex ? f_exists(f.node->var, std::move(body)) : f_forall(f.node->var, std::move(body));
    }
  }
  throw InternalError("unhandled formula kind in normalize");
}

inline Formula normalize(const Formula& f, const Config& cfg = {}) { return normalize_rec(f, true, cfg); }

// ---------------------------------------------------------------------------
// Evaluation of quantifier-free formulas.

inline bool eval_qf(const Formula& f, Structure st, const Env& env, const Config& cfg = {}) {
  if (st == Structure::M)
    for (const auto& [v, q] : env)
      if (!q.is_rational()) throw SortViolation("value of " + v + " is irrational in the base structure");

  struct Ev {
    Structure st;
    const Env& env;
    Quad root;

    Quad tval(const Term& t) const {
      if (st == Structure::M && !t.constant.is_rational())
        throw SortViolation("irrational constant in the base structure");
      return term_value(t, env);
    }

    bool go(const Formula& f) const {
      switch (f.kind()) {
        case FKind::truth: return true;
        case FKind::falsity: return false;
        case FKind::lt: return tval(f.node->a) < tval(f.node->b);
        case FKind::leq: return tval(f.node->a) <= tval(f.node->b);
        case FKind::eq: return tval(f.node->a) == tval(f.node->b);
        case FKind::psq: {
          Quad s = tval(f.node->a), t = tval(f.node->b);
          return quad_sign(t - root * s) < 0;
        }
        case FKind::pmem: {
          if (st != Structure::Pair) throw IllFormed("P outside the pair structure");
          return term_value(f.node->a, env).is_rational();
        }
        case FKind::lin: {
          Quad v = lf_value(f.node->lin.form, env);
          int s = quad_sign(v);
          return f.node->lin.rel == Rel::lt ? s < 0 : s == 0;
        }
        case FKind::lnot: return !go(f.kid());
        case FKind::land:
          for (const auto& k : f.kids()) if (!go(k)) return false;
          return true;
        case FKind::lor:
          for (const auto& k : f.kids()) if (go(k)) return true;
          return false;
        case FKind::implies: return !go(f.kid(0)) || go(f.kid(1));
        case FKind::iff: return go(f.kid(0)) == go(f.kid(1));
        case FKind::exists: case FKind::forall:
          throw IllFormed("eval_qf on a quantified formula");
      }
      throw InternalError("unhandled formula kind in eval");
    }
  };

  return Ev{st, env, Quad(Rat(0), Rat(1), cfg.d)}.go(f);
}

// ---------------------------------------------------------------------------
// Capture-avoiding substitution of terms for free variables.

inline Term term_subst(const Term& t, const std::map<std::string, Term>& sub) {
  Term r = t_const(t.constant);
  for (const auto& [v, c] : t.coeffs) {
    auto it = sub.find(v);
    if (it == sub.end()) r = r + t_var(v, c);
    else r = r + c * it->second;
  }
  return r;
}

inline LinForm lf_subst_terms(const LinForm& f, const std::map<std::string, Term>& sub) {
  LinForm r;
  r.constant = f.constant;
  for (const auto& [v, c] : f.coeffs) {
    auto it = sub.find(v);
    if (it == sub.end()) {
      LinForm one; one.coeffs[v] = c;
      r = r + one;
    } else {
      r = r + c * lf_from_term(it->second);
    }
  }
  return r;
}

inline Formula substitute(const Formula& f, const std::map<std::string, Term>& sub) {
  if (sub.empty()) return f;
  switch (f.kind()) {
    case FKind::truth: case FKind::falsity: return f;
    case FKind::lt: return f_lt(term_subst(f.node->a, sub), term_subst(f.node->b, sub));
    case FKind::leq: return f_leq(term_subst(f.node->a, sub), term_subst(f.node->b, sub));
    case FKind::eq: return f_eq(term_subst(f.node->a, sub), term_subst(f.node->b, sub));
    case FKind::psq: return f_psq(term_subst(f.node->a, sub), term_subst(f.node->b, sub));
    case FKind::pmem: return f_pmem(term_subst(f.node->a, sub));
    case FKind::lin: return f_lin(LinAtom{lf_subst_terms(f.node->lin.form, sub), f.node->lin.rel}, f.lang);
    case FKind::lnot: return f_not(substitute(f.kid(), sub));
    case FKind::land: case FKind::lor: case FKind::implies: case FKind::iff: {
      std::vector<Formula> kids;
      for (const auto& k : f.kids()) kids.push_back(substitute(k, sub));
      switch (f.kind()) {
        case FKind::land: return f_and(std::move(kids));
        case FKind::lor: return f_or(std::move(kids));
        case FKind::implies: return f_implies(std::move(kids[0]), std::move(kids[1]));
        default: return f_iff(std::move(kids[0]), std::move(kids[1]));
      }
    }
    case FKind::exists: case FKind::forall: {
      std::map<std::string, Term> inner = sub;
      inner.erase(f.node->var);
      std::string var = f.node->var;
      Formula body = f.kid();
      // Rename the bound variable when a replacement would capture it.
      bool clash = false;
      for (const auto& [v, t] : inner)
        if (t.coeffs.count(var)) { clash = true; break; }
      if (clash) {
        std::set<std::string> taken;
        collect_all_vars(body, taken);
        for (const auto& [v, t] : inner) {
          taken.insert(v);
          for (const auto& [w, c] : t.coeffs) taken.insert(w);
        }
        std::string nv = fresh_var(var, taken);
        std::map<std::string, Term> ren{{var, t_var(nv)}};
        body = substitute(body, ren);
        var = nv;
      }
      if (inner.empty()) return f_quant(f.kind(), var, std::move(body));
      return f_quant(f.kind(), var, substitute(body, inner));
    }
  }
  throw InternalError("unhandled formula kind in substitute");
}

inline Formula substitute1(const Formula& f, const std::string& var, const Term& t) {
  std::map<std::string, Term> sub{{var, t}};
  return substitute(f, sub);
}

}  // namespace quadcut
