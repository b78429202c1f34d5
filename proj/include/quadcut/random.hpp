#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "formula.hpp"

namespace quadcut {

// All randomized paths draw from one seeded generator so runs reproduce
// exactly from the seed alone.
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed = 0) : gen(seed) {}

  std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(gen);
  }
  bool flip(double p = 0.5) { return std::bernoulli_distribution(p)(gen); }
};

inline Rat rnd_rat(Rng& r, std::int64_t span = 8) {
  return make_rat(Int(r.uniform(-span, span)), Int(r.uniform(1, span)));
}

inline Quad rnd_quad(Rng& r, std::int64_t d, std::int64_t span = 8) {
  return Quad(rnd_rat(r, span), rnd_rat(r, span), d);
}

inline Env rnd_env(Rng& r, const std::vector<std::string>& vars, const Config& cfg, bool rational) {
  Env env;
  for (const auto& v : vars)
    env[v] = rational ? Quad(rnd_rat(r)) : rnd_quad(r, cfg.d);
  return env;
}

inline Term rnd_term(Rng& r, const std::vector<std::string>& vars, const Config& cfg, Lang lang) {
  Term t;
  for (const auto& v : vars)
    if (r.flip(0.55)) t = t + t_var(v, rnd_rat(r, 4));
  if (r.flip(0.8)) t = t + t_rat(rnd_rat(r, 4));
  if (lang != Lang::L && r.flip(0.35)) t = t + t_const(Quad(Rat(0), rnd_rat(r, 4), cfg.d));
  return t;
}

inline Formula rnd_atom(Rng& r, const std::vector<std::string>& vars, const Config& cfg, Lang lang) {
  auto t = [&] { return rnd_term(r, vars, cfg, lang); };
  std::int64_t hi = lang == Lang::LP ? 5 : 4;
  switch (r.uniform(0, hi)) {
    case 0: return f_lt(t(), t());
    case 1: return f_leq(t(), t());
    case 2: return f_eq(t(), t());
    case 3: case 4: return f_psq(t(), t());
    default: return f_pmem(t());
  }
}

inline Formula rnd_qf(Rng& r, const std::vector<std::string>& vars, const Config& cfg, Lang lang, int depth) {
  if (depth <= 0 || r.flip(0.3)) return rnd_atom(r, vars, cfg, lang);
  switch (r.uniform(0, 5)) {
    case 0: return f_not(rnd_qf(r, vars, cfg, lang, depth - 1));
    case 1: case 2: {
      std::vector<Formula> kids;
      std::int64_t n = r.uniform(2, 3);
      for (std::int64_t i = 0; i < n; ++i) kids.push_back(rnd_qf(r, vars, cfg, lang, depth - 1));
      return r.flip() ? f_and(std::move(kids)) : f_or(std::move(kids));
    }
    case 3: return f_implies(rnd_qf(r, vars, cfg, lang, depth - 1), rnd_qf(r, vars, cfg, lang, depth - 1));
    case 4: return f_iff(rnd_qf(r, vars, cfg, lang, depth - 1), rnd_qf(r, vars, cfg, lang, depth - 1));
    default: return rnd_atom(r, vars, cfg, lang);
  }
}

// Quantifiers bind fresh names from a reserved pool so the free variables
// stay exactly `vars`; they may appear anywhere in the tree.
inline Formula rnd_formula(Rng& r, const std::vector<std::string>& vars, const Config& cfg, Lang lang,
                           int depth, int quant_budget = 2) {
  if (depth <= 0) return rnd_atom(r, vars, cfg, lang);
  if (quant_budget > 0 && r.flip(0.3)) {
    std::string q = "q" + std::to_string(quant_budget);
    std::vector<std::string> inner = vars;
    inner.push_back(q);
    Formula body = rnd_formula(r, inner, cfg, lang, depth - 1, quant_budget - 1);
    return r.flip() ? f_exists(q, std::move(body)) : f_forall(q, std::move(body));
  }
  switch (r.uniform(0, 4)) {
    case 0: return f_not(rnd_formula(r, vars, cfg, lang, depth - 1, quant_budget));
    case 1: {
      std::vector<Formula> kids;
      std::int64_t n = r.uniform(2, 3);
      for (std::int64_t i = 0; i < n; ++i) kids.push_back(rnd_formula(r, vars, cfg, lang, depth - 1, quant_budget));
      return r.flip() ? f_and(std::move(kids)) : f_or(std::move(kids));
    }
    case 2: return f_implies(rnd_formula(r, vars, cfg, lang, depth - 1, quant_budget),
                             rnd_formula(r, vars, cfg, lang, depth - 1, quant_budget));
    case 3: return f_iff(rnd_formula(r, vars, cfg, lang, depth - 1, quant_budget),
                         rnd_formula(r, vars, cfg, lang, depth - 1, quant_budget));
    default: return rnd_atom(r, vars, cfg, lang);
  }
}

}  // namespace quadcut
