#include <catch2/catch_amalgamated.hpp>

#include "quadcut/cf.hpp"
#include "quadcut/qe.hpp"
#include "quadcut/random.hpp"

using namespace quadcut;

namespace {

void collect_roots(const Formula& f, const std::string& x, std::vector<Quad>& out) {
  if (f.kind() == FKind::lin) {
    auto it = f.node->lin.form.coeffs.find(x);
    if (it == f.node->lin.form.coeffs.end()) return;
    REQUIRE(f.node->lin.form.coeffs.size() == 1);
    out.push_back(-(quad_inv(it->second) * f.node->lin.form.constant));
    return;
  }
  for (const auto& k : f.kids()) collect_roots(k, x, out);
}

// Independent one-variable satisfiability check: the atoms carve the line
// into finitely many pieces, so probing one point per piece is complete.
// For the base structure only rational probes count, and density supplies
// one inside every open piece.
bool brute_exists(const Formula& qf, const std::string& x, Structure st, const Config& cfg) {
  Formula n = normalize(qf, cfg);
  std::vector<Quad> roots;
  collect_roots(n, x, roots);
  std::sort(roots.begin(), roots.end(), [](const Quad& a, const Quad& b) { return a < b; });
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](const Quad& a, const Quad& b) { return quad_sign(a - b) == 0; }),
              roots.end());
  std::vector<Quad> cands;
  cands.push_back(Quad(Rat(0)));
  if (!roots.empty()) {
    if (st == Structure::M) {
      for (const auto& r : roots)
        if (r.is_rational()) cands.push_back(r);
      cands.push_back(Quad(rat_between(std::nullopt, roots.front())));
      cands.push_back(Quad(rat_between(roots.back(), std::nullopt)));
      for (std::size_t i = 0; i + 1 < roots.size(); ++i)
        cands.push_back(Quad(rat_between(roots[i], roots[i + 1])));
    } else {
      for (const auto& r : roots) {
        cands.push_back(r);
        cands.push_back(r - Quad(Rat(1)));
        cands.push_back(r + Quad(Rat(1)));
      }
      for (std::size_t i = 0; i + 1 < roots.size(); ++i)
        cands.push_back(make_rat(1, 2) * (roots[i] + roots[i + 1]));
    }
  }
  for (const auto& c : cands) {
    Env env{{x, c}};
    if (eval_qf(n, st, env, cfg)) return true;
  }
  return false;
}

bool no_lin(const Formula& f) {
  if (f.kind() == FKind::lin) return false;
  for (const auto& k : f.kids()) if (!no_lin(k)) return false;
  return true;
}

}  // namespace

TEST_CASE("existential elimination matches the worked example") {
  Config cfg;
  Formula f = parse("E x. P2(x, y) & x < 1", Lang::L);
  Formula g = qe_m(f, cfg);
  CHECK(is_qf(g));
  CHECK(print(g) == "{y - rt < 0}");
  CHECK(print(to_surface(g, Structure::M, cfg)) == "P2(1, y)");

  // The completion eliminates the same way here: no equalities involved.
  Formula gv = qe_vstar(f, cfg);
  CHECK(print(gv) == "{y - rt < 0}");

  // Sanity against the definition: y < rt iff the pair (1, y) lies in the
  // half plane.
  for (int y = -3; y <= 3; ++y) {
    Env env{{"y", Quad(Rat(y))}};
    CHECK(eval_qf(g, Structure::M, env, cfg) == (Quad(Rat(y)) < Quad(Rat(0), Rat(1), 2)));
  }
}

TEST_CASE("deciding closed sentences") {
  Config cfg;
  auto dec = [&](const char* s, Structure st, Lang lang = Lang::L) {
    return decide(parse(s, lang, cfg), st, cfg);
  };

  CHECK(dec("A x. E y. x < y", Structure::M));
  CHECK(dec("A x. E y. x < y", Structure::Vstar));
  CHECK(!dec("E x. A y. x < y", Structure::M));
  CHECK(!dec("E x. A y. x < y", Structure::Vstar));

  CHECK(dec("A y. E x. 2*x = y", Structure::M));
  CHECK(dec("A y. E x. x + y = 0", Structure::M));
  CHECK(dec("E x. x < 0 & 0 < x", Structure::M) == false);

  // The root is a point of the completion but not of the base structure.
  CHECK(!dec("E x. x = rt", Structure::M, Lang::Lstar));
  CHECK(dec("E x. x = rt", Structure::Vstar, Lang::Lstar));

  // Composing the half plane with itself doubles: E z (P2(x,z) and P2(z,y))
  // holds exactly when y < 2 x.
  const char* comp = "A x. A y. (E z. P2(x, z) & P2(z, y)) <-> y < 2*x";
  CHECK(dec(comp, Structure::M));
  CHECK(dec(comp, Structure::Vstar));

  // Linearity of the half plane.
  CHECK(dec("A x. A y. A u. A v. P2(x, y) & P2(u, v) -> P2(x + u, y + v)", Structure::M));
  CHECK(dec("A x. A y. P2(x, y) -> P2(3*x, 3*y)", Structure::M));
  // Trichotomy: over the rationals the boundary line holds no point besides
  // the origin, so the two open half planes and the origin cover everything.
  // The completion has the whole boundary line, so the same sentence fails.
  CHECK(dec("A x. A y. P2(x, y) | P2(-x, -y) | x = 0 & y = 0", Structure::M));
  CHECK(!dec("A x. A y. P2(x, y) | P2(-x, -y) | x = 0 & y = 0", Structure::Vstar));

  CHECK_THROWS_AS(decide(parse("x < 1", Lang::L), Structure::M), IllFormed);
  CHECK_THROWS_AS(qe(parse("P(x)", Lang::LP), Structure::M), IllFormed);
}

TEST_CASE("rational equality constraints split into parts") {
  Config cfg;
  // x = rt y has a rational solution x only when y = 0.
  Formula f = parse("E x. ~P2(y, x) & ~P2(-y, -x)", Lang::L);
  Formula m = qe_m(f, cfg);
  CHECK(print(m) == "{y = 0}");
  CHECK(equiv(m, parse("y = 0", Lang::L), Structure::M, cfg));
  // In the completion the solution always exists.
  CHECK(qe_vstar(f, cfg).kind() == FKind::truth);
}

TEST_CASE("elimination agrees with a brute-force region check") {
  Config cfg;
  const std::vector<std::string> vars{"x", "y"};
  int agreements = 0;
  for (std::uint64_t seed = 500; seed < 560; ++seed) {
    Rng r(seed);
    Structure st = seed % 2 ? Structure::M : Structure::Vstar;
    Lang lang = st == Structure::M ? Lang::L : Lang::Lstar;
    Formula f = rnd_qf(r, vars, cfg, lang, 2);
    Formula g = qe(f_exists("x", f), st, cfg);
    CHECK(is_qf(g));
    for (int k = 0; k < 6; ++k) {
      Quad b = st == Structure::M ? Quad(rnd_rat(r)) : rnd_quad(r, cfg.d);
      Formula fb = substitute1(f, "y", t_const(b));
      Env env{{"y", b}};
      bool expect = brute_exists(fb, "x", st, cfg);
      CAPTURE(seed, print(f), print(g), quad_str(b));
      CHECK(eval_qf(g, st, env, cfg) == expect);
      ++agreements;
    }
  }
  CHECK(agreements == 360);
}

TEST_CASE("universal quantifiers eliminate through duality") {
  Config cfg;
  const std::vector<std::string> vars{"x", "y"};
  for (std::uint64_t seed = 700; seed < 730; ++seed) {
    Rng r(seed);
    Structure st = seed % 2 ? Structure::M : Structure::Vstar;
    Lang lang = st == Structure::M ? Lang::L : Lang::Lstar;
    Formula f = rnd_qf(r, vars, cfg, lang, 2);
    Formula g = qe(f_forall("x", f), st, cfg);
    for (int k = 0; k < 4; ++k) {
      Quad b = st == Structure::M ? Quad(rnd_rat(r)) : rnd_quad(r, cfg.d);
      Formula fb = substitute1(f, "y", t_const(b));
      Env env{{"y", b}};
      bool expect = !brute_exists(normalize(f_not(fb), cfg), "x", st, cfg);
      CHECK(eval_qf(g, st, env, cfg) == expect);
    }
  }
}

TEST_CASE("elimination output is canonical and stable") {
  Config cfg;
  const std::vector<std::string> vars{"y"};
  for (std::uint64_t seed = 800; seed < 820; ++seed) {
    Rng r(seed);
    Formula f = rnd_formula(r, vars, cfg, Lang::Lstar, 3);
    QeStats s1, s2;
    Formula g1 = qe_vstar(f, cfg, {}, &s1);
    Formula g2 = qe_vstar(f, cfg, {}, &s2);
    CHECK(struct_cmp(g1, g2) == 0);
    CHECK(print(g1) == print(g2));
    CHECK(s1.eliminated == s2.eliminated);
    // Eliminating an already quantifier-free formula is the identity.
    CHECK(struct_cmp(qe_vstar(g1, cfg), g1) == 0);
  }
}

TEST_CASE("branch limit stops runaway expansion") {
  Config cfg;
  Limits tight;
  tight.branch_limit = 2;
  Formula f = parse("E x. (x < 1 | 1 < x) & (x < 2 | 2 < x) & (x < 3 | 3 < x)", Lang::L);
  CHECK_THROWS_AS(qe_m(f, cfg, tight), ResourceLimit);
  CHECK(decide(f_exists("q", parse("E x. (x < 1 | 1 < x) & (x < 2 | 2 < x) & q < x", Lang::L)),
               Structure::M, cfg));
}

TEST_CASE("surface form round-trips semantically") {
  Config cfg;
  const std::vector<std::string> vars{"x", "y"};
  for (std::uint64_t seed = 900; seed < 930; ++seed) {
    Rng r(seed);
    Structure st = seed % 2 ? Structure::M : Structure::Vstar;
    Lang lang = st == Structure::M ? Lang::L : Lang::Lstar;
    Formula n = normalize(rnd_qf(r, vars, cfg, lang, 2), cfg);
    Formula s = to_surface(n, st, cfg);
    CHECK(no_lin(s));
    // The surface form stays in the base language: the root only ever
    // appears through the half-plane atom.
    CHECK(s.lang == Lang::L);
    Formula re = parse(print(s), Lang::L, cfg);
    CHECK(print(re) == print(s));
    for (int k = 0; k < 6; ++k) {
      Env env = rnd_env(r, vars, cfg, st == Structure::M);
      CHECK(eval_qf(n, st, env, cfg) == eval_qf(s, st, env, cfg));
    }
  }

  // An irrational hyperplane over the completion pins its point with two
  // negated half-plane atoms.
  LinForm lf;
  lf.coeffs["x"] = Quad(Rat(1));
  lf.coeffs["y"] = Quad(Rat(0), make_rat(-1, 2), 2);
  Formula atom = f_lin_eq(lf, Lang::Lstar);
  Formula sv = to_surface(atom, Structure::Vstar, cfg);
  CHECK(print(sv) == "~P2(-1/2*y, -x) & ~P2(1/2*y, x)");
  for (int k = 0; k < 20; ++k) {
    Rng r(4000 + k);
    Env env{{"x", rnd_quad(r, 2)}, {"y", rnd_quad(r, 2)}};
    CHECK(eval_qf(atom, Structure::Vstar, env, cfg) == eval_qf(sv, Structure::Vstar, env, cfg));
  }
}

TEST_CASE("simplify prunes conjunctions") {
  Config cfg;
  CHECK(print(simplify(parse("x < 1 & x < 2", Lang::L), cfg)) == "{x - 1 < 0}");
  CHECK(simplify(parse("x < 1 & 1 < x", Lang::L), cfg).kind() == FKind::falsity);
  CHECK(simplify(parse("x = 1 & x < 1", Lang::L), cfg).kind() == FKind::falsity);
  CHECK(simplify(parse("x = 1 & x < 2", Lang::L), cfg).kind() == FKind::lin);
  CHECK(print(simplify(parse("x < 1 | x < 1", Lang::L), cfg)) == "{x - 1 < 0}");
  CHECK_THROWS_AS(simplify(parse("E x. x < 1", Lang::L), cfg), IllFormed);
}

TEST_CASE("equivalence through double implication") {
  Config cfg;
  CHECK(equiv(parse("x < 1", Lang::L), parse("~(1 <= x)", Lang::L), Structure::M, cfg));
  CHECK(!equiv(parse("x < 1", Lang::L), parse("x <= 1", Lang::L), Structure::M, cfg));
  CHECK(equiv(parse("P2(x, y)", Lang::L), parse("~P2(-x, -y) & ~(x = 0 & y = 0)", Lang::L),
              Structure::M, cfg));
  // Fails over the completion: the boundary line is inhabited there.
  CHECK(!equiv(parse("P2(x, y)", Lang::L), parse("~P2(-x, -y) & ~(x = 0 & y = 0)", Lang::L),
               Structure::Vstar, cfg));
}
