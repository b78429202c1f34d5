#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cuts1d.hpp"

namespace quadcut {

inline std::vector<std::string> default_vars(std::size_t n) {
  static const char* names[] = {"x", "y", "z"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(i < 3 ? names[i] : "x" + std::to_string(i + 1));
  return out;
}

// ---------------------------------------------------------------------------
// Affine data.  Every boundary function that appears in a cell is globally
// affine with coefficients from the quadratic field, stored as a rational
// part u and a root part v: x |-> u(x) + rt*v(x).

struct AffForm {
  std::vector<Rat> coeffs;
  Rat constant;
};

inline AffForm aff_zero(std::size_t arity) { return {std::vector<Rat>(arity, Rat(0)), Rat(0)}; }

inline Quad aff_value(const AffForm& a, const std::vector<Quad>& xs) {
  Quad acc{a.constant};
  for (std::size_t i = 0; i < a.coeffs.size(); ++i) acc = acc + a.coeffs[i] * xs[i];
  return acc;
}

inline bool aff_is_zero(const AffForm& a) {
  if (a.constant != 0) return false;
  for (const auto& c : a.coeffs)
    if (c != 0) return false;
  return true;
}

inline int aff_cmp(const AffForm& a, const AffForm& b) {
  if (a.coeffs != b.coeffs) return a.coeffs < b.coeffs ? -1 : 1;
  if (a.constant != b.constant) return a.constant < b.constant ? -1 : 1;
  return 0;
}

struct BoundaryFn {
  AffForm u, v;
};

inline int bf_cmp(const BoundaryFn& a, const BoundaryFn& b) {
  int c = aff_cmp(a.u, b.u);
  return c ? c : aff_cmp(a.v, b.v);
}

inline Quad bf_value(const BoundaryFn& f, const std::vector<Quad>& xs, std::int64_t d) {
  Quad uv = aff_value(f.u, xs), vv = aff_value(f.v, xs);
  return uv + Quad(vv.b * Rat(d), vv.a, d);  // rt*(a + b*rt) = b*d + a*rt
}

// f with its first k arguments fixed at a.
inline BoundaryFn bf_restrict(const BoundaryFn& f, const std::vector<Rat>& a) {
  BoundaryFn out;
  auto cut = [&](const AffForm& g) {
    AffForm h;
    h.constant = g.constant;
    for (std::size_t i = 0; i < a.size(); ++i) h.constant += g.coeffs[i] * a[i];
    h.coeffs.assign(g.coeffs.begin() + a.size(), g.coeffs.end());
    return h;
  };
  out.u = cut(f.u);
  out.v = cut(f.v);
  return out;
}

// The linear form f(x) - y, the building block of every graph and band atom.
inline LinForm bf_minus_var(const BoundaryFn& f, const std::vector<std::string>& vars,
                            const std::string& y, std::int64_t d) {
  LinForm lf;
  for (std::size_t i = 0; i < f.u.coeffs.size(); ++i)
    lf_set(lf, vars[i], Quad(f.u.coeffs[i], f.v.coeffs[i], d));
  lf.constant = Quad(f.u.constant, f.v.constant, d);
  lf_set(lf, y, Quad(Rat(-1)));
  return lf;
}

inline LinForm aff_linform(const AffForm& a, const std::vector<std::string>& vars) {
  LinForm lf;
  for (std::size_t i = 0; i < a.coeffs.size(); ++i) lf_set(lf, vars[i], Quad(a.coeffs[i]));
  lf.constant = Quad(a.constant);
  return lf;
}

inline Lang lin_lang(const LinForm& lf) {
  if (!lf.constant.is_rational()) return Lang::Lstar;
  for (const auto& [v, c] : lf.coeffs)
    if (!c.is_rational()) return Lang::Lstar;
  return Lang::L;
}

// ---------------------------------------------------------------------------
// Strong cells.  The recursive shape mirrors the one-variable case: points
// and open convex pieces on the line, graphs and bands of affine boundary
// functions above a lower cell.  The same description read over the
// completion is the iterative convex hull.

struct StrongCell;
using Cell = std::shared_ptr<const StrongCell>;

enum class CellKind { point, interval, graph, band };

struct StrongCell {
  CellKind kind;
  std::vector<Rat> point;            // point: rational coordinates
  ConvexPiece piece;                 // interval: open piece of the line
  Cell base;                         // graph, band
  BoundaryFn f;                      // graph
  bool in_m = true;                  // graph: range stays inside the base line
  std::optional<BoundaryFn> lo, hi;  // band: absent side is unbounded

  std::size_t arity() const {
    switch (kind) {
      case CellKind::point: return point.size();
      case CellKind::interval: return 1;
      default: return base->arity() + 1;
    }
  }
};

inline Cell make_point(std::vector<Rat> coords) {
  if (coords.empty()) throw InvalidCell("a point cell needs at least one coordinate");
  auto c = std::make_shared<StrongCell>();
  c->kind = CellKind::point;
  c->point = std::move(coords);
  return c;
}

inline Cell make_interval(std::optional<Quad> lo, std::optional<Quad> hi) {
  if (lo && hi && quad_sign(*hi - *lo) <= 0)
    throw InvalidCell("interval bounds must be strictly ordered");
  auto c = std::make_shared<StrongCell>();
  c->kind = CellKind::interval;
  c->piece.lo = std::move(lo);
  c->piece.hi = std::move(hi);
  return c;
}

namespace detail_cells {

inline Formula forall_close(const std::vector<std::string>& vars, Formula body) {
  for (auto it = vars.rbegin(); it != vars.rend(); ++it) body = f_forall(*it, std::move(body));
  return body;
}

inline Formula exists_close(const std::vector<std::string>& vars, Formula body) {
  for (auto it = vars.rbegin(); it != vars.rend(); ++it) body = f_exists(*it, std::move(body));
  return body;
}

}  // namespace detail_cells

inline Formula hull(const Cell& c, const std::vector<std::string>& vars, const Config& cfg = {});

inline Formula hull(const Cell& c, const Config& cfg = {}) {
  return hull(c, default_vars(c->arity()), cfg);
}

inline Formula hull(const Cell& c, const std::vector<std::string>& vars, const Config& cfg) {
  if (vars.size() != c->arity()) throw IllFormed("variable list does not match the cell arity");
  switch (c->kind) {
    case CellKind::point: {
      std::vector<Formula> kids;
      for (std::size_t i = 0; i < c->point.size(); ++i) {
        LinForm lf;
        lf_set(lf, vars[i], Quad(Rat(1)));
        lf.constant = Quad(-c->point[i]);
        kids.push_back(f_lin_eq(std::move(lf), Lang::L));
      }
      return n_sorted(true, std::move(kids));
    }
    case CellKind::interval: {
      std::vector<Formula> kids;
      if (c->piece.lo) {
        LinForm lf;  // lo - x < 0
        lf_set(lf, vars[0], Quad(Rat(-1)));
        lf.constant = *c->piece.lo;
        kids.push_back(f_lin_lt(lf, lin_lang(lf)));
      }
      if (c->piece.hi) {
        LinForm lf;  // x - hi < 0
        lf_set(lf, vars[0], Quad(Rat(1)));
        lf.constant = -*c->piece.hi;
        kids.push_back(f_lin_lt(lf, lin_lang(lf)));
      }
      return n_sorted(true, std::move(kids));
    }
    case CellKind::graph: {
      std::vector<std::string> bv(vars.begin(), vars.end() - 1);
      LinForm lf = -bf_minus_var(c->f, bv, vars.back(), cfg.d);  // y - f = 0
      return n_sorted(true, {hull(c->base, bv, cfg), f_lin_eq(lf, lin_lang(lf))});
    }
    case CellKind::band: {
      std::vector<std::string> bv(vars.begin(), vars.end() - 1);
      std::vector<Formula> kids{hull(c->base, bv, cfg)};
      if (c->lo) {
        LinForm lf = bf_minus_var(*c->lo, bv, vars.back(), cfg.d);  // lo - y < 0
        kids.push_back(f_lin_lt(lf, lin_lang(lf)));
      }
      if (c->hi) {
        LinForm lf = -bf_minus_var(*c->hi, bv, vars.back(), cfg.d);  // y - hi < 0
        kids.push_back(f_lin_lt(lf, lin_lang(lf)));
      }
      return n_sorted(true, std::move(kids));
    }
  }
  throw InternalError("unreachable cell kind");
}

// Graphs must satisfy the range dichotomy and bands strict separation, both
// on the whole hull of the base; the constructors decide these conditions.
inline Cell make_graph(Cell base, BoundaryFn f, const Config& cfg = {}, const Limits& lim = {}) {
  std::size_t n = base->arity();
  if (f.u.coeffs.size() != n || f.v.coeffs.size() != n)
    throw InvalidCell("boundary function arity does not match the base");
  auto c = std::make_shared<StrongCell>();
  c->kind = CellKind::graph;
  c->base = std::move(base);
  c->f = std::move(f);
  std::vector<std::string> vars = default_vars(n);
  if (aff_is_zero(c->f.v)) {
    c->in_m = true;
    return c;
  }
  Formula H = hull(c->base, vars, cfg);
  Formula vzero = f_lin_eq(aff_linform(c->f.v, vars), Lang::L);
  using detail_cells::forall_close;
  bool all_zero =
      decide(forall_close(vars, f_implies(H, vzero)), Structure::Vstar, cfg, lim);
  if (all_zero) {
    c->in_m = true;
    return c;
  }
  bool never_zero =
      decide(forall_close(vars, f_implies(H, f_not(vzero))), Structure::Vstar, cfg, lim);
  if (!never_zero)
    throw InvalidCell("graph values cross the base line on the hull");
  c->in_m = false;
  return c;
}

inline Cell make_band(Cell base, std::optional<BoundaryFn> lo, std::optional<BoundaryFn> hi,
                      const Config& cfg = {}, const Limits& lim = {}) {
  std::size_t n = base->arity();
  for (const auto* b : {&lo, &hi})
    if (*b && ((*b)->u.coeffs.size() != n || (*b)->v.coeffs.size() != n))
      throw InvalidCell("boundary function arity does not match the base");
  auto c = std::make_shared<StrongCell>();
  c->kind = CellKind::band;
  c->base = std::move(base);
  c->lo = std::move(lo);
  c->hi = std::move(hi);
  if (c->lo && c->hi) {
    std::vector<std::string> vars = default_vars(n);
    LinForm diff;  // lo - hi < 0 pointwise on the hull
    for (std::size_t i = 0; i < n; ++i)
      lf_set(diff, vars[i],
             Quad(c->lo->u.coeffs[i] - c->hi->u.coeffs[i], c->lo->v.coeffs[i] - c->hi->v.coeffs[i],
                  cfg.d));
    diff.constant =
        Quad(c->lo->u.constant - c->hi->u.constant, c->lo->v.constant - c->hi->v.constant, cfg.d);
    Formula sep = f_lin_lt(std::move(diff), Lang::Lstar);
    Formula H = hull(c->base, vars, cfg);
    if (!decide(detail_cells::forall_close(vars, f_implies(H, sep)), Structure::Vstar, cfg, lim))
      throw InvalidCell("band bounds must stay strictly ordered on the base hull");
  }
  return c;
}

inline Formula closure_cell(const Cell& c, const std::vector<std::string>& vars,
                            const Config& cfg = {});

inline Formula closure_cell(const Cell& c, const Config& cfg = {}) {
  return closure_cell(c, default_vars(c->arity()), cfg);
}

inline Formula closure_cell(const Cell& c, const std::vector<std::string>& vars, const Config& cfg) {
  if (vars.size() != c->arity()) throw IllFormed("variable list does not match the cell arity");
  auto weak_lt = [](LinForm lf, Lang lang) {  // lf < 0 or lf = 0
    return n_sorted(false, {f_lin_lt(lf, lang), f_lin_eq(lf, lang)});
  };
  switch (c->kind) {
    case CellKind::point:
      return hull(c, vars, cfg);
    case CellKind::interval: {
      std::vector<Formula> kids;
      if (c->piece.lo) {
        LinForm lf;
        lf_set(lf, vars[0], Quad(Rat(-1)));
        lf.constant = *c->piece.lo;
        kids.push_back(weak_lt(lf, lin_lang(lf)));
      }
      if (c->piece.hi) {
        LinForm lf;
        lf_set(lf, vars[0], Quad(Rat(1)));
        lf.constant = -*c->piece.hi;
        kids.push_back(weak_lt(lf, lin_lang(lf)));
      }
      return n_sorted(true, std::move(kids));
    }
    case CellKind::graph: {
      std::vector<std::string> bv(vars.begin(), vars.end() - 1);
      LinForm lf = -bf_minus_var(c->f, bv, vars.back(), cfg.d);
      return n_sorted(true, {closure_cell(c->base, bv, cfg), f_lin_eq(lf, lin_lang(lf))});
    }
    case CellKind::band: {
      // Non-strict bounds over the closed base; sound because the bounds
      // stay strictly separated on the entire hull.
      std::vector<std::string> bv(vars.begin(), vars.end() - 1);
      std::vector<Formula> kids{closure_cell(c->base, bv, cfg)};
      if (c->lo) {
        LinForm lf = bf_minus_var(*c->lo, bv, vars.back(), cfg.d);
        kids.push_back(weak_lt(lf, lin_lang(lf)));
      }
      if (c->hi) {
        LinForm lf = -bf_minus_var(*c->hi, bv, vars.back(), cfg.d);
        kids.push_back(weak_lt(lf, lin_lang(lf)));
      }
      return n_sorted(true, std::move(kids));
    }
  }
  throw InternalError("unreachable cell kind");
}

// A concrete point of the cell: rational coordinates for the base reading,
// arbitrary field coordinates for the completion.
inline std::vector<Quad> cell_sample(const Cell& c, Structure st, const Config& cfg = {}) {
  auto between = [&](const std::optional<Quad>& lo, const std::optional<Quad>& hi) {
    if (st == Structure::M) return Quad(rat_between(lo, hi));
    if (lo && hi) return make_rat(1, 2) * (*lo + *hi);
    if (lo) return *lo + Quad(Rat(1));
    if (hi) return *hi - Quad(Rat(1));
    return Quad(Rat(0));
  };
  switch (c->kind) {
    case CellKind::point: {
      std::vector<Quad> xs;
      for (const auto& q : c->point) xs.emplace_back(q);
      return xs;
    }
    case CellKind::interval:
      return {between(c->piece.lo, c->piece.hi)};
    case CellKind::graph: {
      std::vector<Quad> xs = cell_sample(c->base, st, cfg);
      Quad y = bf_value(c->f, xs, cfg.d);
      if (st == Structure::M && !y.is_rational())
        throw NotInBase("the graph cell has no point over the base structure");
      xs.push_back(y);
      return xs;
    }
    case CellKind::band: {
      std::vector<Quad> xs = cell_sample(c->base, st, cfg);
      std::optional<Quad> lo, hi;
      if (c->lo) lo = bf_value(*c->lo, xs, cfg.d);
      if (c->hi) hi = bf_value(*c->hi, xs, cfg.d);
      xs.push_back(between(lo, hi));
      return xs;
    }
  }
  throw InternalError("unreachable cell kind");
}

// ---------------------------------------------------------------------------
// The slicing engine.  Both the base decomposition and the completion-side
// one used by the closed normal form run the same recursion: solve every
// atom for the last variable, refine the space below by the pairwise order
// of the resulting boundary functions (and, over the base structure, by the
// zero sets of their root parts, which is what secures the range
// dichotomy), then slice each refined base cell into bands and graphs.

namespace detail_cells {

struct VCell;
using VPtr = std::shared_ptr<const VCell>;

struct VCell {
  CellKind kind;
  std::vector<Quad> point;
  std::optional<Quad> lo1, hi1;  // interval bounds
  VPtr base;
  BoundaryFn f;  // graph
  bool in_m = true;
  std::optional<BoundaryFn> lo, hi;  // band

  std::size_t arity() const {
    switch (kind) {
      case CellKind::point: return point.size();
      case CellKind::interval: return 1;
      default: return base->arity() + 1;
    }
  }
};

inline std::vector<Quad> vcell_sample(const VPtr& c, Structure st, const Config& cfg) {
  auto between = [&](const std::optional<Quad>& lo, const std::optional<Quad>& hi) {
    if (st == Structure::M) return Quad(rat_between(lo, hi));
    if (lo && hi) return make_rat(1, 2) * (*lo + *hi);
    if (lo) return *lo + Quad(Rat(1));
    if (hi) return *hi - Quad(Rat(1));
    return Quad(Rat(0));
  };
  switch (c->kind) {
    case CellKind::point: return c->point;
    case CellKind::interval: return {between(c->lo1, c->hi1)};
    case CellKind::graph: {
      auto xs = vcell_sample(c->base, st, cfg);
      xs.push_back(bf_value(c->f, xs, cfg.d));
      return xs;
    }
    default: {
      auto xs = vcell_sample(c->base, st, cfg);
      std::optional<Quad> lo, hi;
      if (c->lo) lo = bf_value(*c->lo, xs, cfg.d);
      if (c->hi) hi = bf_value(*c->hi, xs, cfg.d);
      xs.push_back(between(lo, hi));
      return xs;
    }
  }
}

// Extract from an atom form the boundary function of its last variable:
// c*y + rest ~ 0 becomes the form b(x) - y with b = -rest/c.
inline BoundaryFn solve_boundary(const LinForm& minus_y, const std::vector<std::string>& vars,
                                 std::size_t m) {
  BoundaryFn b;
  b.u.coeffs.resize(m - 1, Rat(0));
  b.v.coeffs.resize(m - 1, Rat(0));
  for (std::size_t i = 0; i + 1 < m; ++i) {
    auto it = minus_y.coeffs.find(vars[i]);
    if (it == minus_y.coeffs.end()) continue;
    b.u.coeffs[i] = it->second.a;
    b.v.coeffs[i] = it->second.b;
  }
  b.u.constant = minus_y.constant.a;
  b.v.constant = minus_y.constant.b;
  return b;
}

inline void note_cells(std::size_t count, const Limits& lim, std::size_t& made) {
  made += count;
  if (made > lim.branch_limit)
    throw ResourceLimit("cell count exceeds the configured limit");
}

inline std::vector<VPtr> partition(const std::vector<LinForm>& forms,
                                   const std::vector<std::string>& vars, std::size_t m,
                                   Structure st, const Config& cfg, const Limits& lim,
                                   std::size_t& made) {
  std::vector<VPtr> out;
  if (m == 1) {
    std::vector<Quad> roots;
    for (const auto& lf : forms) {
      auto it = lf.coeffs.find(vars[0]);
      if (it == lf.coeffs.end()) continue;
      roots.push_back(-(quad_inv(it->second) * lf.constant));
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](const Quad& a, const Quad& b) { return quad_sign(a - b) == 0; }),
                roots.end());
    std::optional<Quad> prev;
    for (const auto& r : roots) {
      auto seg = std::make_shared<VCell>();
      seg->kind = CellKind::interval;
      seg->lo1 = prev;
      seg->hi1 = r;
      out.push_back(seg);
      if (st == Structure::Vstar || r.is_rational()) {
        auto pt = std::make_shared<VCell>();
        pt->kind = CellKind::point;
        pt->point = {r};
        out.push_back(pt);
      }
      prev = r;
    }
    auto last = std::make_shared<VCell>();
    last->kind = CellKind::interval;
    last->lo1 = prev;
    out.push_back(last);
    note_cells(out.size(), lim, made);
    return out;
  }

  const std::string& y = vars[m - 1];
  std::vector<std::pair<BoundaryFn, LinForm>> bounds;  // fn with its b - y form
  std::vector<LinForm> below;
  for (const auto& lf : forms) {
    auto it = lf.coeffs.find(y);
    if (it == lf.coeffs.end()) {
      below.push_back(lf);
      continue;
    }
    LinForm minus_y = -quad_inv(it->second) * lf;
    BoundaryFn b = solve_boundary(minus_y, vars, m);
    bool seen = false;
    for (const auto& [eb, el] : bounds)
      if (bf_cmp(eb, b) == 0) {
        seen = true;
        break;
      }
    if (!seen) bounds.emplace_back(std::move(b), std::move(minus_y));
  }
  auto add_form = [&](LinForm lf) {
    if (!lf.is_ground()) below.push_back(std::move(lf));
  };
  std::vector<std::string> bv(vars.begin(), vars.begin() + (m - 1));
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    for (std::size_t j = i + 1; j < bounds.size(); ++j) {
      LinForm diff = bounds[i].second - bounds[j].second;  // the y parts cancel
      add_form(std::move(diff));
    }
    if (st == Structure::M) add_form(aff_linform(bounds[i].first.v, bv));
  }
  std::vector<VPtr> bases = partition(below, vars, m - 1, st, cfg, lim, made);

  for (const auto& D : bases) {
    std::vector<Quad> a = vcell_sample(D, st, cfg);
    std::vector<std::size_t> order(bounds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<Quad> vals;
    for (const auto& [b, l] : bounds) vals.push_back(bf_value(b, a, cfg.d));
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return vals[i] < vals[j]; });
    std::vector<std::size_t> reps;
    for (std::size_t i : order)
      if (reps.empty() || quad_sign(vals[i] - vals[reps.back()]) != 0) reps.push_back(i);

    std::optional<BoundaryFn> prev;
    for (std::size_t k = 0; k <= reps.size(); ++k) {
      auto band = std::make_shared<VCell>();
      band->kind = CellKind::band;
      band->base = D;
      band->lo = prev;
      if (k < reps.size()) band->hi = bounds[reps[k]].first;
      out.push_back(band);
      if (k < reps.size()) {
        const BoundaryFn& b = bounds[reps[k]].first;
        bool on_line = aff_value(b.v, a).is_rational() && quad_sign(aff_value(b.v, a)) == 0;
        if (st == Structure::Vstar || on_line) {
          auto g = std::make_shared<VCell>();
          g->kind = CellKind::graph;
          g->base = D;
          g->f = b;
          g->in_m = on_line;
          out.push_back(g);
        }
        prev = b;
      }
    }
  }
  note_cells(out.size(), lim, made);
  return out;
}

inline void collect_forms(const Formula& f, std::vector<LinForm>& out) {
  if (f.kind() == FKind::lin) {
    for (const auto& lf : out)
      if (lf_cmp(lf, f.node->lin.form) == 0) return;
    out.push_back(f.node->lin.form);
    return;
  }
  for (const auto& k : f.kids()) collect_forms(k, out);
}

inline Cell to_strong(const VPtr& v, const Config& cfg, const Limits& lim,
                      std::map<const VCell*, Cell>& memo) {
  auto it = memo.find(v.get());
  if (it != memo.end()) return it->second;
  Cell out;
  switch (v->kind) {
    case CellKind::point: {
      std::vector<Rat> coords;
      for (const auto& q : v->point) {
        if (!q.is_rational()) throw InternalError("base-side point cell with an irrational coordinate");
        coords.push_back(q.a);
      }
      out = make_point(std::move(coords));
      break;
    }
    case CellKind::interval:
      out = make_interval(v->lo1, v->hi1);
      break;
    case CellKind::graph:
      out = make_graph(to_strong(v->base, cfg, lim, memo), v->f, cfg, lim);
      break;
    default:
      out = make_band(to_strong(v->base, cfg, lim, memo), v->lo, v->hi, cfg, lim);
      break;
  }
  memo.emplace(v.get(), out);
  return out;
}

}  // namespace detail_cells

// ---------------------------------------------------------------------------
// Decomposition of a definable set into strong cells.

struct CellDecomp {
  std::vector<Cell> cells;
  Formula source;
  std::vector<std::string> vars;

  // Pairwise disjointness and union equivalence, both decided over the base
  // structure.  The union check splits into one containment per cell and a
  // base-grouped coverage sweep, and disjointness of cells over distinct
  // bases is inherited from the bases; a monolithic check over dozens of
  // disjuncts is out of reach for the eliminator.
  bool verify(const Config& cfg = {}, const Limits& lim = {}) const {
    using detail_cells::forall_close;
    std::vector<Formula> fs;
    for (const auto& c : cells) fs.push_back(hull(c, vars, cfg));
    for (const auto& f : fs)
      if (!decide(forall_close(vars, f_implies(f, source)), Structure::M, cfg, lim)) return false;
    if (!covered(fs, cfg, lim)) return false;
    std::map<std::pair<const StrongCell*, const StrongCell*>, bool> base_apart;
    for (std::size_t i = 0; i < cells.size(); ++i)
      for (std::size_t j = i + 1; j < cells.size(); ++j) {
        const auto& bi = cells[i]->base;
        const auto& bj = cells[j]->base;
        if (bi && bj && bi != bj && bi->arity() == bj->arity()) {
          auto key = bi.get() < bj.get() ? std::make_pair(bi.get(), bj.get())
                                         : std::make_pair(bj.get(), bi.get());
          auto it = base_apart.find(key);
          if (it == base_apart.end()) {
            std::vector<std::string> bv(vars.begin(), vars.begin() + bi->arity());
            Formula both = f_and(hull(bi, bv, cfg), hull(bj, bv, cfg));
            it = base_apart
                     .emplace(key, decide(detail_cells::forall_close(bv, f_not(both)),
                                          Structure::M, cfg, lim))
                     .first;
          }
          if (it->second) continue;
        }
        Formula both = f_and(fs[i], fs[j]);
        if (!decide(detail_cells::forall_close(vars, f_not(both)), Structure::M, cfg, lim))
          return false;
      }
    return true;
  }

 private:
  // source is inside the union of cells.  Grouping by base keeps each decide
  // small; if a group check fails (overlapping bases of a hand-built
  // decomposition, say) the single big equivalence settles it.
  bool covered(const std::vector<Formula>& fs, const Config& cfg, const Limits& lim) const {
    using detail_cells::forall_close;
    bool split = vars.size() > 1;
    for (const auto& c : cells)
      if (!c->base || c->arity() != vars.size()) split = false;
    if (split) {
      std::vector<std::string> bv(vars.begin(), vars.end() - 1);
      std::map<const StrongCell*, std::pair<Formula, std::vector<Formula>>> groups;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        auto& g = groups[cells[i]->base.get()];
        if (g.second.empty()) g.first = hull(cells[i]->base, bv, cfg);
        g.second.push_back(fs[i]);
      }
      std::vector<Formula> cyl;
      for (const auto& [b, g] : groups) cyl.push_back(g.first);
      bool ok = decide(forall_close(vars, f_implies(source, f_or(std::move(cyl)))),
                       Structure::M, cfg, lim);
      for (auto& [b, g] : groups) {
        if (!ok) break;
        ok = decide(forall_close(vars, f_implies(f_and(g.first, source), f_or(g.second))),
                    Structure::M, cfg, lim);
      }
      if (ok) return true;
    }
    Formula all = n_sorted(false, fs);
    return decide(forall_close(vars, f_implies(source, all)), Structure::M, cfg, lim);
  }
};

inline CellDecomp cell_decompose(const Formula& f, std::vector<std::string> vars = {},
                                 const Config& cfg = {}, const Limits& lim = {}) {
  auto fv = free_vars(f);
  if (vars.empty()) vars.assign(fv.begin(), fv.end());
  for (const auto& v : fv)
    if (std::find(vars.begin(), vars.end(), v) == vars.end())
      throw IllFormed("free variable " + v + " is not in the decomposition variables");
  if (vars.empty()) throw IllFormed("a decomposition needs at least one variable");
  if (vars.size() > 3 || static_cast<int>(vars.size()) > lim.dim_limit)
    throw DimensionLimit("decomposition supports at most " +
                         std::to_string(std::min<int>(3, lim.dim_limit)) + " variables");

  Formula g = qe_m(f, cfg, lim);
  CellDecomp out;
  out.source = g;
  out.vars = vars;

  if (vars.size() == 1 && fv.size() == 1) {
    // Reuse the one-variable decomposition and split closed endpoints off
    // as point cells: line cells are points or open convex pieces.
    Decomp1D d = decompose1(g, Structure::M, cfg, lim);
    for (const auto& p : d.pieces) {
      if (p.is_point()) {
        out.cells.push_back(make_point({p.lo->a}));
        continue;
      }
      if (p.lo_closed) out.cells.push_back(make_point({p.lo->a}));
      out.cells.push_back(make_interval(p.lo, p.hi));
      if (p.hi_closed) out.cells.push_back(make_point({p.hi->a}));
    }
  } else {
    bool truth_value = g.kind() == FKind::truth || g.kind() == FKind::falsity;
    std::vector<LinForm> forms;
    detail_cells::collect_forms(g, forms);
    std::size_t made = 0;
    auto slices = detail_cells::partition(forms, vars, vars.size(), Structure::M, cfg, lim, made);
    std::map<const detail_cells::VCell*, Cell> memo;
    for (const auto& s : slices) {
      std::vector<Quad> pt = detail_cells::vcell_sample(s, Structure::M, cfg);
      Env env;
      for (std::size_t i = 0; i < vars.size(); ++i) env[vars[i]] = pt[i];
      bool in = truth_value ? g.kind() == FKind::truth : eval_qf(g, Structure::M, env, cfg);
      if (in) out.cells.push_back(detail_cells::to_strong(s, cfg, lim, memo));
    }
  }
  if (!out.verify(cfg, lim)) throw InternalError("decomposition failed its own audit");
  return out;
}

inline Formula closure_set(const Formula& f, std::vector<std::string> vars = {},
                           const Config& cfg = {}, const Limits& lim = {}) {
  CellDecomp d = cell_decompose(f, std::move(vars), cfg, lim);
  std::vector<Formula> parts;
  for (const auto& c : d.cells) parts.push_back(closure_cell(c, d.vars, cfg));
  return n_sorted(false, std::move(parts));
}

// ---------------------------------------------------------------------------
// Fibers.  The first k coordinates are fixed at a rational point of the
// cell's projection; the identity hull(fiber) = fiber(hull) is decided on
// every call.

namespace detail_cells {

inline Cell restrict_cell(const Cell& c, const std::vector<Rat>& a, const Config& cfg,
                          const Limits& lim) {
  std::size_t k = a.size();
  switch (c->kind) {
    case CellKind::point: {
      for (std::size_t i = 0; i < k; ++i)
        if (c->point[i] != a[i]) throw InternalError("fiber at a mismatched point coordinate");
      return make_point(std::vector<Rat>(c->point.begin() + k, c->point.end()));
    }
    case CellKind::interval:
      throw InternalError("fiber recursion reached an interval");
    case CellKind::graph: {
      if (k < c->base->arity())
        return make_graph(restrict_cell(c->base, a, cfg, lim), bf_restrict(c->f, a), cfg, lim);
      std::vector<Quad> xs;
      for (const auto& q : a) xs.emplace_back(q);
      Quad val = bf_value(c->f, xs, cfg.d);
      if (!val.is_rational()) throw InternalError("fiber of a graph outside the base line");
      return make_point({val.a});
    }
    default: {
      if (k < c->base->arity())
        return make_band(restrict_cell(c->base, a, cfg, lim),
                         c->lo ? std::optional<BoundaryFn>(bf_restrict(*c->lo, a)) : std::nullopt,
                         c->hi ? std::optional<BoundaryFn>(bf_restrict(*c->hi, a)) : std::nullopt,
                         cfg, lim);
      std::vector<Quad> xs;
      for (const auto& q : a) xs.emplace_back(q);
      return make_interval(c->lo ? std::optional<Quad>(bf_value(*c->lo, xs, cfg.d)) : std::nullopt,
                           c->hi ? std::optional<Quad>(bf_value(*c->hi, xs, cfg.d)) : std::nullopt);
    }
  }
}

}  // namespace detail_cells

inline Cell fiber(const Cell& c, const std::vector<Rat>& a, const Config& cfg = {},
                  const Limits& lim = {}) {
  std::size_t n = c->arity(), k = a.size();
  if (k == 0) return c;
  if (k >= n) throw IllFormed("the fiber point must fix a proper prefix of the coordinates");
  std::vector<std::string> vars = default_vars(n);
  Formula H = hull(c, vars, cfg);
  std::map<std::string, Term> fix;
  for (std::size_t i = 0; i < k; ++i) fix[vars[i]] = t_rat(a[i]);
  Formula at = substitute(H, fix);
  std::vector<std::string> rest(vars.begin() + k, vars.end());
  if (!decide(detail_cells::exists_close(rest, at), Structure::M, cfg, lim))
    throw NotInBase("the point is not in the projection of the cell");
  Cell r = detail_cells::restrict_cell(c, a, cfg, lim);
  if (!equiv(hull(r, rest, cfg), at, Structure::Vstar, cfg, lim))
    throw InternalError("fiber and hull fail to commute");
  return r;
}

// ---------------------------------------------------------------------------
// Topological operators over the completion, from the first-order closure
// definition in the max norm.

enum class TopoOp { cl, interior, boundary };

namespace detail_cells {

inline Formula cl_core(const Formula& f, const Config& cfg, const Limits& lim) {
  Formula g = qe_vstar(f, cfg, lim);
  auto fv = free_vars(g);
  if (fv.empty()) return g;
  std::set<std::string> taken;
  collect_all_vars(g, taken);
  std::map<std::string, Term> move;
  std::map<std::string, std::string> twin;
  std::vector<std::string> ys;
  for (const auto& x : fv) {
    std::string y = fresh_var(x + "0", taken);
    taken.insert(y);
    ys.push_back(y);
    twin[x] = y;
    move[x] = t_var(y);
  }
  std::string eps = fresh_var("e", taken);
  std::vector<Formula> parts{substitute(g, move)};
  for (const auto& x : fv) {
    const std::string& y = twin[x];
    LinForm a;  // x - y - eps < 0
    lf_set(a, x, Quad(Rat(1)));
    lf_set(a, y, Quad(Rat(-1)));
    lf_set(a, eps, Quad(Rat(-1)));
    LinForm b;  // y - x - eps < 0
    lf_set(b, y, Quad(Rat(1)));
    lf_set(b, x, Quad(Rat(-1)));
    lf_set(b, eps, Quad(Rat(-1)));
    parts.push_back(f_lin_lt(a, Lang::L));
    parts.push_back(f_lin_lt(b, Lang::L));
  }
  LinForm pos;  // -eps < 0
  lf_set(pos, eps, Quad(Rat(-1)));
  Formula body = f_implies(f_lin_lt(pos, Lang::L),
                           exists_close(ys, f_and(std::move(parts))));
  return qe_vstar(f_forall(eps, std::move(body)), cfg, lim);
}

}  // namespace detail_cells

inline Formula topo(const Formula& f, TopoOp op, const Config& cfg = {}, const Limits& lim = {}) {
  using detail_cells::cl_core;
  switch (op) {
    case TopoOp::cl:
      return cl_core(f, cfg, lim);
    case TopoOp::interior:
      return normalize(f_not(cl_core(f_not(f), cfg, lim)), cfg);
    case TopoOp::boundary: {
      Formula cl = cl_core(f, cfg, lim);
      Formula outer = cl_core(normalize(f_not(cl), cfg), cfg, lim);
      return n_sorted(true, {std::move(cl), std::move(outer)});
    }
  }
  throw InternalError("unreachable operator");
}

// ---------------------------------------------------------------------------
// Closed normal form: the set rewritten as a boolean combination of
// closures of open sets.  Full-dimensional pieces are convex, hence regular
// open, and come out as cl(U) minus its residue; lower-dimensional pieces
// are complements of open half spaces inside open cylinders.

namespace detail_cells {

// U must be regular open; represents U as cl(U) \ cl(complement of cl(U)).
struct OpenCombo {
  Formula inside;   // the combination equal to U
  Formula outside;  // the combination equal to the complement of U
};

inline OpenCombo open_combo(const Formula& u, const Config& cfg, const Limits& lim) {
  Formula c1 = cl_core(u, cfg, lim);
  Formula c2 = cl_core(normalize(f_not(c1), cfg), cfg, lim);
  OpenCombo out{f_and(c1, f_not(c2)), f_or(f_not(c1), c2)};
  return out;
}

inline Formula cnf_cell(const VPtr& c, const std::vector<std::string>& vars, const Config& cfg,
                        const Limits& lim) {
  switch (c->kind) {
    case CellKind::point: {
      std::vector<Formula> parts;
      for (std::size_t i = 0; i < c->point.size(); ++i) {
        LinForm l;  // x - p < 0
        lf_set(l, vars[i], Quad(Rat(1)));
        l.constant = -c->point[i];
        LinForm r;  // p - x < 0
        lf_set(r, vars[i], Quad(Rat(-1)));
        r.constant = c->point[i];
        parts.push_back(open_combo(f_lin_lt(l, lin_lang(l)), cfg, lim).outside);
        parts.push_back(open_combo(f_lin_lt(r, lin_lang(r)), cfg, lim).outside);
      }
      return f_and(std::move(parts));
    }
    case CellKind::interval: {
      std::vector<Formula> kids;
      if (c->lo1) {
        LinForm lf;
        lf_set(lf, vars[0], Quad(Rat(-1)));
        lf.constant = *c->lo1;
        kids.push_back(f_lin_lt(lf, lin_lang(lf)));
      }
      if (c->hi1) {
        LinForm lf;
        lf_set(lf, vars[0], Quad(Rat(1)));
        lf.constant = -*c->hi1;
        kids.push_back(f_lin_lt(lf, lin_lang(lf)));
      }
      if (kids.empty()) return f_true();
      return open_combo(n_sorted(true, std::move(kids)), cfg, lim).inside;
    }
    case CellKind::graph: {
      std::vector<std::string> bv(vars.begin(), vars.begin() + c->base->arity());
      Formula B = cnf_cell(c->base, bv, cfg, lim);
      LinForm above = -bf_minus_var(c->f, bv, vars[c->base->arity()], cfg.d);  // y - f < 0
      LinForm under = bf_minus_var(c->f, bv, vars[c->base->arity()], cfg.d);   // f - y < 0
      return f_and({std::move(B),
                    open_combo(f_lin_lt(above, lin_lang(above)), cfg, lim).outside,
                    open_combo(f_lin_lt(under, lin_lang(under)), cfg, lim).outside});
    }
    default: {
      std::vector<std::string> bv(vars.begin(), vars.begin() + c->base->arity());
      Formula B = cnf_cell(c->base, bv, cfg, lim);
      std::vector<Formula> slab;
      if (c->lo) {
        LinForm lf = bf_minus_var(*c->lo, bv, vars[c->base->arity()], cfg.d);
        slab.push_back(f_lin_lt(lf, lin_lang(lf)));
      }
      if (c->hi) {
        LinForm lf = -bf_minus_var(*c->hi, bv, vars[c->base->arity()], cfg.d);
        slab.push_back(f_lin_lt(lf, lin_lang(lf)));
      }
      if (slab.empty()) return B;
      return f_and(B, open_combo(n_sorted(true, std::move(slab)), cfg, lim).inside);
    }
  }
}

}  // namespace detail_cells

inline Formula closed_normal_form(const Formula& f, const Config& cfg = {},
                                  const Limits& lim = {}) {
  Formula g = qe_vstar(f, cfg, lim);
  auto fv = free_vars(g);
  if (fv.empty()) return g;
  if (fv.size() > 3 || static_cast<int>(fv.size()) > lim.dim_limit)
    throw DimensionLimit("normal form supports at most " +
                         std::to_string(std::min<int>(3, lim.dim_limit)) + " variables");

  // A regular closed set is a single closure term.
  Formula inner = topo(g, TopoOp::interior, cfg, lim);
  Formula clint = topo(inner, TopoOp::cl, cfg, lim);
  if (equiv(g, clint, Structure::Vstar, cfg, lim)) return clint;

  std::vector<std::string> vars(fv.begin(), fv.end());
  std::vector<LinForm> forms;
  detail_cells::collect_forms(g, forms);
  std::size_t made = 0;
  auto slices = detail_cells::partition(forms, vars, vars.size(), Structure::Vstar, cfg, lim, made);
  std::vector<Formula> parts;
  for (const auto& s : slices) {
    std::vector<Quad> pt = detail_cells::vcell_sample(s, Structure::Vstar, cfg);
    Env env;
    for (std::size_t i = 0; i < vars.size(); ++i) env[vars[i]] = pt[i];
    if (eval_qf(g, Structure::Vstar, env, cfg))
      parts.push_back(detail_cells::cnf_cell(s, vars, cfg, lim));
  }
  Formula out = f_or(std::move(parts));
  if (!equiv(out, g, Structure::Vstar, cfg, lim))
    throw InternalError("normal form failed its own audit");
  return out;
}

// ---------------------------------------------------------------------------
// Random cells for the property harnesses.  `inhabited` forces every graph
// onto the base line so the cell has rational points.

inline Cell rnd_cell(Rng& r, std::size_t n, const Config& cfg = {}, const Limits& lim = {},
                     bool inhabited = false) {
  auto gap = [&r] {  // strictly positive offset
    Rat q = rnd_rat(r, 3);
    return Rat(1) + q * q;
  };
  if (n == 1) {
    switch (r.uniform(0, 3)) {
      case 0: return make_point({rnd_rat(r, 4)});
      case 1: {
        Quad lo = r.flip(0.3) ? Quad(rnd_rat(r, 4)) : rnd_quad(r, cfg.d, 3);
        return make_interval(lo, lo + Quad(gap()));
      }
      case 2: return make_interval(std::nullopt, Quad(rnd_rat(r, 4)));
      default: return make_interval(Quad(rnd_rat(r, 4)), std::nullopt);
    }
  }
  Cell base = rnd_cell(r, n - 1, cfg, lim, inhabited);
  auto rnd_aff = [&](std::int64_t span) {
    AffForm a;
    a.constant = rnd_rat(r, span);
    for (std::size_t i = 0; i + 1 < n; ++i)
      a.coeffs.push_back(r.flip(0.5) ? rnd_rat(r, span) : Rat(0));
    return a;
  };
  if (r.flip(0.4)) {  // graph
    BoundaryFn f{rnd_aff(3), aff_zero(n - 1)};
    if (!inhabited && r.flip(0.4)) {
      for (int attempt = 0; attempt < 6; ++attempt) {
        BoundaryFn cand{f.u, rnd_aff(2)};
        if (aff_is_zero(cand.v)) continue;
        try {
          return make_graph(base, cand, cfg, lim);
        } catch (const InvalidCell&) {
        }
      }
      BoundaryFn flat{f.u, aff_zero(n - 1)};
      flat.v.constant = Rat(1);  // constant root offset never meets the line
      return make_graph(base, flat, cfg, lim);
    }
    return make_graph(base, f, cfg, lim);
  }
  std::optional<BoundaryFn> lo, hi;
  if (r.flip(0.8)) lo = BoundaryFn{rnd_aff(3), r.flip(0.3) ? rnd_aff(1) : aff_zero(n - 1)};
  if (r.flip(0.8)) {
    if (lo && r.flip(0.7)) {
      BoundaryFn h = *lo;  // parallel shift keeps separation everywhere
      h.u.constant += gap();
      hi = h;
    } else {
      hi = BoundaryFn{rnd_aff(3), r.flip(0.3) ? rnd_aff(1) : aff_zero(n - 1)};
    }
  }
  try {
    return make_band(base, lo, hi, cfg, lim);
  } catch (const InvalidCell&) {
    BoundaryFn l{rnd_aff(3), aff_zero(n - 1)};
    BoundaryFn h = l;
    h.u.constant += Rat(2);
    return make_band(base, l, h, cfg, lim);
  }
}

}  // namespace quadcut
