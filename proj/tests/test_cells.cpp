#include <catch2/catch_amalgamated.hpp>

#include "quadcut/cells.hpp"

using namespace quadcut;

namespace {

const Quad rt2(Rat(0), Rat(1), 2);

bool same_quad(const Quad& a, const Quad& b) { return quad_sign(a - b) == 0; }

AffForm aff(std::vector<Rat> cs, Rat k) { return {std::move(cs), std::move(k)}; }

BoundaryFn bfn(AffForm u) {
  AffForm v = aff_zero(u.coeffs.size());
  return {std::move(u), std::move(v)};
}

BoundaryFn bfn(AffForm u, AffForm v) { return {std::move(u), std::move(v)}; }

Formula L(const std::string& text) { return parse(text, Lang::L); }
Formula Ls(const std::string& text) { return parse(text, Lang::Lstar); }

bool veq(const Formula& a, const Formula& b) { return equiv(a, b, Structure::Vstar); }

// (0,1) as a cell and the usual suspects above it.
Cell unit() { return make_interval(Quad(Rat(0)), Quad(Rat(1))); }

}  // namespace

TEST_CASE("a half plane decomposes along its root line") {
  auto d = cell_decompose(Ls("P2(x, y)"), {"x", "y"});
  REQUIRE(d.cells.size() == 3);
  CHECK(d.cells[0]->base->kind == CellKind::interval);
  CHECK(d.cells[1]->base->kind == CellKind::point);
  CHECK(d.cells[2]->base->kind == CellKind::interval);
  for (const auto& c : d.cells) {
    REQUIRE(c->kind == CellKind::band);
    CHECK(c->arity() == 2);
    CHECK(!c->lo);
    REQUIRE(c->hi);
    CHECK(aff_is_zero(c->hi->u));
    CHECK(c->hi->v.constant == 0);
    REQUIRE(c->hi->v.coeffs.size() == 1);
    CHECK(c->hi->v.coeffs[0] == 1);
  }
  CHECK(d.verify());
}

TEST_CASE("the whole plane is a single unbounded band") {
  auto d = cell_decompose(L("0 < 1"), {"x", "y"});
  REQUIRE(d.cells.size() == 1);
  CHECK(d.cells[0]->kind == CellKind::band);
  CHECK(!d.cells[0]->lo);
  CHECK(!d.cells[0]->hi);
  CHECK(d.cells[0]->base->kind == CellKind::interval);
  CHECK(!d.cells[0]->base->piece.lo);
  CHECK(!d.cells[0]->base->piece.hi);
}

TEST_CASE("one-variable decompositions split closed endpoints into points") {
  auto d1 = cell_decompose(Ls("P2(1, x)"));
  REQUIRE(d1.cells.size() == 1);
  CHECK(d1.cells[0]->kind == CellKind::interval);
  CHECK(same_quad(*d1.cells[0]->piece.hi, rt2));

  auto d2 = cell_decompose(L("x < 3 | x = 3"));
  REQUIRE(d2.cells.size() == 2);
  CHECK(d2.cells[0]->kind == CellKind::interval);
  CHECK(same_quad(*d2.cells[0]->piece.hi, Quad(Rat(3))));
  CHECK(d2.cells[1]->kind == CellKind::point);
  CHECK(d2.cells[1]->point == std::vector<Rat>{Rat(3)});

  auto d3 = cell_decompose(L("x = 2 | 2 < x & x < 4"));
  REQUIRE(d3.cells.size() == 2);
  CHECK(d3.cells[0]->kind == CellKind::point);
  CHECK(d3.cells[1]->kind == CellKind::interval);
}

TEST_CASE("decomposition rejects bad variable lists and high arity") {
  CHECK_THROWS_AS(cell_decompose(L("x < y & y < z"), {"x", "y"}), IllFormed);
  CHECK_THROWS_AS(cell_decompose(L("0 < 1")), IllFormed);
  CHECK_THROWS_AS(cell_decompose(L("w < x & x < y & y < z"), {"w", "x", "y", "z"}),
                  DimensionLimit);
  Limits tight;
  tight.dim_limit = 2;
  CHECK_THROWS_AS(cell_decompose(L("x < y & y < z"), {"x", "y", "z"}, Config{}, tight),
                  DimensionLimit);
  CHECK_THROWS_AS(cell_decompose(parse("P(x)", Lang::LP)), IllFormed);
}

TEST_CASE("cell constructors validate their geometry") {
  CHECK_THROWS_AS(make_point({}), InvalidCell);
  CHECK_THROWS_AS(make_interval(Quad(Rat(1)), Quad(Rat(1))), InvalidCell);
  CHECK_THROWS_AS(make_interval(rt2, Quad(Rat(1))), InvalidCell);

  // Root-part zero at an interior hull point: neither branch of the range
  // dichotomy holds.
  auto sym = make_interval(Quad(Rat(-1)), Quad(Rat(1)));
  CHECK_THROWS_AS(make_graph(sym, bfn(aff({0}, 0), aff({1}, 0))), InvalidCell);
  auto ok = make_graph(unit(), bfn(aff({0}, 0), aff({1}, 0)));
  CHECK(!ok->in_m);
  CHECK(make_graph(unit(), bfn(aff({1}, 0)))->in_m);

  CHECK_THROWS_AS(make_band(unit(), bfn(aff({1}, 0)), bfn(aff({-1}, 0))), InvalidCell);
  CHECK_THROWS_AS(make_graph(unit(), bfn(aff({1, 2}, 0))), InvalidCell);
  CHECK_THROWS_AS(hull(unit(), {"x", "y"}), IllFormed);
}

TEST_CASE("hull formulas read the cell over the completion") {
  CHECK(veq(hull(make_point({Rat(3)})), L("x = 3")));
  CHECK(veq(hull(make_interval(Quad(Rat(0)), rt2)), Ls("0 < x & P2(1, x)")));

  auto g = make_graph(unit(), bfn(aff({0}, 0), aff({1}, 0)));
  LinForm yx;  // y - rt*x
  lf_set(yx, "y", Quad(Rat(1)));
  lf_set(yx, "x", Quad(Rat(0), Rat(-1), 2));
  CHECK(veq(hull(g), f_and(L("0 < x & x < 1"), f_lin_eq(yx, Lang::Lstar))));

  auto b = make_band(unit(), bfn(aff({-1}, 0)), bfn(aff({1}, 0)));
  CHECK(veq(hull(b), L("0 < x & x < 1 & 0 < x + y & y < x")));
}

TEST_CASE("closures add the hull boundary") {
  auto b = make_band(unit(), bfn(aff({-1}, 0)), bfn(aff({1}, 0)));
  CHECK(veq(closure_cell(b),
            L("(0 < x | 0 = x) & (x < 1 | x = 1) & (0 < x + y | 0 = x + y) & (y < x | y = x)")));

  auto g = make_graph(unit(), bfn(aff({0}, 0), aff({1}, 0)));
  Formula cg = closure_cell(g);
  CHECK(eval_qf(cg, Structure::Vstar, {{"x", Quad(Rat(0))}, {"y", Quad(Rat(0))}}));
  CHECK(eval_qf(cg, Structure::Vstar, {{"x", Quad(Rat(1))}, {"y", rt2}}));
  CHECK(!eval_qf(cg, Structure::Vstar, {{"x", Quad(Rat(1))}, {"y", Quad(Rat(0))}}));

  auto p = make_point({Rat(2), Rat(5)});
  CHECK(veq(closure_cell(p), hull(p)));
}

TEST_CASE("set closure works through the decomposition") {
  CHECK(veq(closure_set(Ls("P2(1, x) & 0 < x")),
            Ls("(0 < x | 0 = x) & (x < rt | x = rt)")));
  CHECK(veq(closure_set(L("x < 3 | x = 3")), L("x < 3 | x = 3")));
  LinForm yx;  // y - rt*x, so the closed half plane is yx < 0 or yx = 0
  lf_set(yx, "y", Quad(Rat(1)));
  lf_set(yx, "x", Quad(Rat(0), Rat(-1), 2));
  CHECK(veq(closure_set(Ls("P2(x, y)"), {"x", "y"}),
            f_or(f_lin_lt(yx, Lang::Lstar), f_lin_eq(yx, Lang::Lstar))));
}

TEST_CASE("fibers restrict cells at rational base points") {
  auto b = make_band(unit(), bfn(aff({-1}, 0)), bfn(aff({1}, 0)));
  auto fb = fiber(b, {make_rat(1, 2)});
  REQUIRE(fb->kind == CellKind::interval);
  CHECK(same_quad(*fb->piece.lo, Quad(make_rat(-1, 2))));
  CHECK(same_quad(*fb->piece.hi, Quad(make_rat(1, 2))));
  CHECK_THROWS_AS(fiber(b, {Rat(2)}), NotInBase);
  CHECK_THROWS_AS(fiber(b, {make_rat(1, 2), Rat(0)}), IllFormed);
  CHECK(fiber(b, {}) == b);

  auto g = make_graph(unit(), bfn(aff({1}, 0)));
  auto fg = fiber(g, {make_rat(1, 2)});
  REQUIRE(fg->kind == CellKind::point);
  CHECK(fg->point == std::vector<Rat>{make_rat(1, 2)});

  // The rational projection of an off-line graph is empty.
  auto ig = make_graph(unit(), bfn(aff({0}, 0), aff({1}, 0)));
  CHECK_THROWS_AS(fiber(ig, {make_rat(1, 2)}), NotInBase);

  auto square = make_band(unit(), bfn(aff({0}, 0)), bfn(aff({0}, 1)));
  auto wedge = make_band(square, bfn(aff({1, 0}, 0)), bfn(aff({1, 1}, 0)));
  auto w1 = fiber(wedge, {make_rat(1, 2)});
  REQUIRE(w1->kind == CellKind::band);
  CHECK(w1->arity() == 2);
  auto w2 = fiber(wedge, {make_rat(1, 2), make_rat(1, 4)});
  REQUIRE(w2->kind == CellKind::interval);
  CHECK(same_quad(*w2->piece.lo, Quad(make_rat(1, 2))));
  CHECK(same_quad(*w2->piece.hi, Quad(make_rat(3, 4))));
}

TEST_CASE("closure interior and boundary operators") {
  CHECK(veq(topo(L("0 < x & x < 1 | x = 2"), TopoOp::cl),
            L("(0 < x | 0 = x) & (x < 1 | x = 1) | x = 2")));
  CHECK(veq(topo(L("(0 < x | 0 = x) & (x < 1 | x = 1)"), TopoOp::interior),
            L("0 < x & x < 1")));
  CHECK(veq(topo(Ls("0 < x & P2(1, x)"), TopoOp::boundary), Ls("x = 0 | x = rt")));
  CHECK(veq(topo(L("x < x"), TopoOp::cl), f_false()));

  Formula square = L("0 < x & x < 1 & 0 < y & y < 1");
  Formula closed = L("(0 < x | 0 = x) & (x < 1 | x = 1) & (0 < y | 0 = y) & (y < 1 | y = 1)");
  CHECK(veq(topo(square, TopoOp::cl), closed));
  CHECK(veq(topo(closed, TopoOp::interior), square));

  LinForm yx;  // the line y = rt*x is closed with empty interior
  lf_set(yx, "y", Quad(Rat(1)));
  lf_set(yx, "x", Quad(Rat(0), Rat(-1), 2));
  Formula line = f_lin_eq(yx, Lang::Lstar);
  CHECK(veq(topo(line, TopoOp::boundary), line));
  CHECK(veq(topo(line, TopoOp::interior), f_false()));
}

TEST_CASE("closure operator algebra on random sets") {
  Config cfg;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Rng r(seed);
    std::vector<std::string> vars = seed % 3 == 2 ? std::vector<std::string>{"x", "y"}
                                                  : std::vector<std::string>{"x"};
    int depth = vars.size() == 2 ? 1 : 2;  // plane closures grow fast under elimination
    Formula f = rnd_qf(r, vars, cfg, Lang::Lstar, depth);
    Formula g = rnd_qf(r, vars, cfg, Lang::Lstar, depth);
    Formula cf = topo(f, TopoOp::cl);
    CHECK(veq(topo(cf, TopoOp::cl), cf));
    Formula grows = f_implies(qe_vstar(f), cf);
    for (auto it = vars.rbegin(); it != vars.rend(); ++it) grows = f_forall(*it, grows);
    CHECK(decide(grows, Structure::Vstar));
    CHECK(veq(topo(f_or(f, g), TopoOp::cl), f_or(cf, topo(g, TopoOp::cl))));
  }
}

TEST_CASE("closed normal form rewrites sets through closures of open sets") {
  Formula open1 = L("0 < x & x < 1");
  CHECK(veq(closed_normal_form(open1), open1));
  Formula closed1 = L("(0 < x | 0 = x) & (x < 1 | x = 1)");
  CHECK(veq(closed_normal_form(closed1), closed1));
  CHECK(veq(closed_normal_form(L("0 < x & x < 1 | x = 2")), L("0 < x & x < 1 | x = 2")));

  LinForm yx;
  lf_set(yx, "y", Quad(Rat(1)));
  lf_set(yx, "x", Quad(Rat(0), Rat(-1), 2));
  Formula line = f_lin_eq(yx, Lang::Lstar);
  CHECK(veq(closed_normal_form(line), line));

  Formula half = Ls("P2(x, y)");
  CHECK(veq(closed_normal_form(half), half));

  CHECK(closed_normal_form(L("0 < 1")).kind() == FKind::truth);
}

TEST_CASE("random cells satisfy the closure identity") {
  Config cfg;
  Limits lim;
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    Rng r(seed);
    std::size_t n = 1 + seed % 3;
    Cell c = rnd_cell(r, n, cfg, lim);
    CHECK(equiv(closure_cell(c), topo(hull(c), TopoOp::cl, cfg, lim), Structure::Vstar, cfg, lim));
  }
}

TEST_CASE("random fibers commute with hulls") {
  Config cfg;
  Limits lim;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng r(seed);
    std::size_t n = 2 + seed % 2;
    Cell c = rnd_cell(r, n, cfg, lim, true);
    std::vector<Quad> pt = cell_sample(c, Structure::M, cfg);
    std::size_t k = 1 + seed % (n - 1);
    std::vector<Rat> a;
    for (std::size_t i = 0; i < k; ++i) a.push_back(pt[i].a);
    Cell f = fiber(c, a, cfg, lim);  // decides the hull identity on the way
    CHECK(f->arity() == n - k);
    std::vector<Quad> rest(pt.begin() + k, pt.end());
    std::vector<std::string> rv = default_vars(n - k);
    Env env;
    for (std::size_t i = 0; i < rest.size(); ++i) env[rv[i]] = rest[i];
    CHECK(eval_qf(hull(f, rv, cfg), Structure::Vstar, env, cfg));
  }
}

TEST_CASE("random decompositions partition their sets") {
  Config cfg;
  Limits lim;
  std::vector<std::string> vars{"x", "y"};
  std::size_t done = 0;
  for (std::uint64_t seed = 0; done < 15; ++seed) {
    REQUIRE(seed < 200);
    Rng r(seed);
    Formula f = rnd_qf(r, vars, cfg, seed % 4 == 3 ? Lang::Lstar : Lang::L, 2);
    CellDecomp d;
    try {
      d = cell_decompose(f, vars, cfg, lim);  // audits itself before returning
    } catch (const ResourceLimit&) {
      continue;
    }
    ++done;
    for (int t = 0; t < 8; ++t) {
      Env env{{"x", Quad(rnd_rat(r, 6))}, {"y", Quad(rnd_rat(r, 6))}};
      bool in = eval_qf(d.source, Structure::M, env, cfg);
      std::size_t hits = 0;
      for (const auto& c : d.cells)
        if (eval_qf(hull(c, vars, cfg), Structure::M, env, cfg)) ++hits;
      CHECK(hits == (in ? 1u : 0u));
    }
    for (const auto& c : d.cells) {
      std::vector<Quad> s = cell_sample(c, Structure::M, cfg);
      Env env{{"x", s[0]}, {"y", s[1]}};
      CHECK(eval_qf(d.source, Structure::M, env, cfg));
    }
  }
}
