#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "quadcut/arith.hpp"
#include "quadcut/cf.hpp"

using namespace quadcut;

namespace {

// Oracle for quad_sign, independent of the cross-multiplication route: pin
// sqrt(d) between s/2^k and (s+1)/2^k with s an integer square root, then
// bound a + b sqrt d by an exact rational interval.  Refine until the
// interval excludes zero (the value is zero only when a = b = 0).
int interval_sign(const Quad& x, unsigned bits = 200) {
  if (x.a == 0 && x.b == 0) return 0;
  for (unsigned k = bits;; k *= 2) {
    Int scale = Int(1) << k;
    Int s = sqrt(Int(x.d) * scale * scale);
    Rat l = make_rat(s, scale), u = make_rat(s + 1, scale);
    Rat blo = rat_sign(x.b) >= 0 ? x.b * l : x.b * u;
    Rat bhi = rat_sign(x.b) >= 0 ? x.b * u : x.b * l;
    if (x.a + blo > 0) return 1;
    if (x.a + bhi < 0) return -1;
  }
}

Rat rnd_rat(std::mt19937_64& g, long bound = 50) {
  long n = (long)(g() % (2 * bound + 1)) - bound;
  long d = 1 + (long)(g() % bound);
  return make_rat(Int(n), Int(d));
}

}  // namespace

TEST_CASE("rationals are kept canonical") {
  CHECK(make_rat(2, 4) == make_rat(1, 2));
  CHECK(make_rat(1, -2) == make_rat(-1, 2));
  CHECK(rat_num(make_rat(-6, -4)) == 3);
  CHECK(rat_den(make_rat(-6, -4)) == 2);
  CHECK(rat_str(make_rat(5, 1)) == "5");
  CHECK(rat_str(make_rat(-1, 2)) == "-1/2");
  CHECK_THROWS_AS(make_rat(1, 0), DivisionByZero);
}

TEST_CASE("rational literals") {
  CHECK(parse_rat("3/2") == make_rat(3, 2));
  CHECK(parse_rat("-7") == Rat(-7));
  CHECK(parse_rat("+4/6") == make_rat(2, 3));
  CHECK_THROWS_AS(parse_rat("1/"), SyntaxError);
  CHECK_THROWS_AS(parse_rat(""), SyntaxError);
  CHECK_THROWS_AS(parse_rat("1.5"), SyntaxError);
}

TEST_CASE("config accepts exactly the square-free parameters") {
  for (std::int64_t d : {2, 3, 5, 6, 7, 10, 11, 13}) CHECK_NOTHROW(Config{d}.validate());
  for (std::int64_t d : {-2, 0, 1, 4, 8, 9, 12, 18, 25}) CHECK_THROWS_AS(Config{d}.validate(), InvalidConfig);
}

TEST_CASE("field inverse") {
  Quad x(Rat(1), Rat(1), 2);          // 1 + rt
  Quad ix = quad_inv(x);
  CHECK((x * ix) == Quad(Rat(1)));    // oracle: multiply back
  CHECK(ix == Quad(Rat(-1), Rat(1), 2));
  CHECK_THROWS_AS(quad_inv(Quad()), DivisionByZero);
}

TEST_CASE("sign with mixed components") {
  CHECK(quad_sign(Quad(Rat(3), Rat(-2), 2)) == 1);    // 9 > 2*4
  CHECK(quad_sign(Quad(Rat(-3), Rat(2), 2)) == -1);
  CHECK(quad_sign(Quad(Rat(2), Rat(-1), 3)) == 1);    // 4 > 3
  CHECK(quad_sign(Quad(Rat(0), Rat(0), 2)) == 0);
  CHECK(quad_sign(Quad(Rat(0), Rat(-5), 2)) == -1);
  CHECK(quad_sign(Quad(Rat(7), Rat(-5), 2)) == -1);   // 49 < 50
}

TEST_CASE("sign agrees with interval arithmetic") {
  std::mt19937_64 g(7);
  for (std::int64_t d : {2, 3, 5}) {
    for (int i = 0; i < 700; ++i) {
      Quad x(rnd_rat(g), rnd_rat(g), d);
      CHECK(quad_sign(x) == interval_sign(x));
    }
    // adversarial: a close to -b sqrt d via convergents
    auto cs = cf_convergents(Quad(Rat(0), Rat(1), d), 12);
    for (const Rat& c : cs) {
      for (int s : {-1, 1}) {
        Rat b = rnd_rat(g, 9) + Rat(10);
        Quad x(-c * b + make_rat(s, 1000000), b, d);
        CHECK(quad_sign(x) == interval_sign(x));
      }
    }
  }
}

TEST_CASE("order embeds the rationals") {
  std::mt19937_64 g(11);
  for (int i = 0; i < 500; ++i) {
    Rat p = rnd_rat(g), q = rnd_rat(g);
    CHECK((p < q) == (Quad(p) < Quad(q)));
    CHECK((p == q) == (Quad(p) == Quad(q)));
  }
}

TEST_CASE("field laws on random samples") {
  std::mt19937_64 g(13);
  for (int i = 0; i < 300; ++i) {
    Quad x(rnd_rat(g), rnd_rat(g), 2), y(rnd_rat(g), rnd_rat(g), 2), z(rnd_rat(g), rnd_rat(g), 2);
    CHECK((x + y) + z == x + (y + z));
    CHECK((x * y) * z == x * (y * z));
    CHECK(x * (y + z) == x * y + x * z);
    CHECK(x + y == y + x);
    CHECK(x * y == y * x);
    if (!x.is_zero()) CHECK(x * quad_inv(x) == Quad(Rat(1)));
    CHECK(sqrt_mult(sqrt_mult(x)) == Rat(2) * x);
  }
}

TEST_CASE("order respects addition and positive scaling") {
  std::mt19937_64 g(17);
  for (int i = 0; i < 300; ++i) {
    Quad x(rnd_rat(g), rnd_rat(g), 2), y(rnd_rat(g), rnd_rat(g), 2), z(rnd_rat(g), rnd_rat(g), 2);
    if (x < y) {
      CHECK(x + z < y + z);
      Rat c = rnd_rat(g, 20);
      if (c > 0) CHECK(c * x < c * y);
    }
  }
}

TEST_CASE("floor") {
  CHECK(quad_floor(Quad(Rat(0), Rat(1), 2)) == 1);
  CHECK(quad_floor(Quad(Rat(0), Rat(-1), 2)) == -2);
  CHECK(quad_floor(Quad(make_rat(3, 2))) == 1);
  CHECK(quad_floor(Quad(make_rat(-3, 2))) == -2);
  CHECK(quad_floor(Quad(Rat(2))) == 2);
  CHECK(quad_floor(Quad(Rat(-2))) == -2);
  std::mt19937_64 g(19);
  for (int i = 0; i < 400; ++i) {
    Quad x(rnd_rat(g), rnd_rat(g), 3);
    Int f = quad_floor(x);
    CHECK(Quad(Rat(f)) <= x);
    CHECK(x < Quad(Rat(f + 1)));
  }
}

TEST_CASE("convergents of rt 2") {
  // Known expansion [1; 2, 2, 2, ...], written down independently.
  std::vector<Rat> expected = {Rat(1), make_rat(3, 2), make_rat(7, 5), make_rat(17, 12),
                               make_rat(41, 29), make_rat(99, 70)};
  auto cs = cf_convergents(Quad(Rat(0), Rat(1), 2), 6);
  REQUIRE(cs.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(cs[i] == expected[i]);
}

TEST_CASE("convergents terminate on rationals") {
  auto cs = cf_convergents(Quad(make_rat(7, 3)), 10);
  REQUIRE(!cs.empty());
  CHECK(cs.back() == make_rat(7, 3));
}

TEST_CASE("straddling rt 2 within 1/100") {
  auto [lo, hi] = cf_straddle(Quad(Rat(0), Rat(1), 2), make_rat(1, 100));
  CHECK(lo == make_rat(41, 29));
  CHECK(hi == make_rat(17, 12));
  CHECK(hi - lo < make_rat(1, 100));
  CHECK(Quad(lo) < Quad(Rat(0), Rat(1), 2));
  CHECK(Quad(Rat(0), Rat(1), 2) < Quad(hi));
}

TEST_CASE("rational between") {
  std::mt19937_64 g(23);
  for (int i = 0; i < 200; ++i) {
    Quad a(rnd_rat(g), rnd_rat(g), 2), b(rnd_rat(g), rnd_rat(g), 2);
    if (quad_cmp(a, b) == 0) continue;
    Quad lo = a < b ? a : b, hi = a < b ? b : a;
    Rat m = rat_between(lo, hi);
    CHECK(lo < Quad(m));
    CHECK(Quad(m) < hi);
  }
  Quad r2(Rat(0), Rat(1), 2);
  Rat below = rat_between(std::nullopt, r2);
  Rat above = rat_between(r2, std::nullopt);
  CHECK(Quad(below) < r2);
  CHECK(r2 < Quad(above));
  CHECK(rat_between(std::nullopt, std::nullopt) == 0);
}
