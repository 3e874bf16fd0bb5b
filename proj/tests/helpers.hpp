#pragma once

#include "pmx/symcore.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace pmx::testing {

#ifdef PMX_FIXTURES
inline std::string fixture_text(const std::string& name) {
  std::ifstream in(std::string(PMX_FIXTURES) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
#endif

inline BitString random_bits(std::mt19937_64& rng, std::size_t n) {
  BitString b;
  for (std::size_t i = 0; i < n; ++i) b.push_back(rng() & 1);
  return b;
}

/// Random IML expression over the given variables using arithmetic, comparisons,
/// concatenation, ranges and lengths.
struct ExprGen {
  std::mt19937_64& rng;
  WordParams p;
  std::vector<std::string> vars{"x", "y", "z"};
  std::vector<std::string> ops{"+b", "-b", "+N", "-N", "=", "<=", "<", "not", "or"};

  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

  ExprP leaf() {
    switch (pick(4)) {
      case 0: return mk_const(bs(pick(std::size_t(1) << p.N), p));
      case 1: return mk_const(random_bits(rng, pick(9)));
      default: return mk_var(vars[pick(vars.size())]);
    }
  }

  ExprP numeric(int depth) {
    if (depth <= 0 || pick(3) == 0) {
      if (pick(2)) return mk_const(bs(pick(std::size_t(1) << p.N), p));
      return pick(2) ? mk_len(mk_var(vars[pick(vars.size())])) : mk_var(vars[pick(vars.size())]);
    }
    return gen(depth - 1);
  }

  ExprP gen(int depth) {
    if (depth <= 0) return leaf();
    switch (pick(6)) {
      case 0: return leaf();
      case 1: {
        std::string op = ops[pick(ops.size())];
        if (op == "not") return mk_op(op, {gen(depth - 1)});
        return mk_op(op, {numeric(depth - 1), numeric(depth - 1)});
      }
      case 2: return mk_concat({gen(depth - 1), gen(depth - 1)});
      case 3: return mk_range(gen(depth - 1), numeric(depth - 1), numeric(depth - 1));
      case 4: return mk_len(gen(depth - 1));
      default: return mk_op(ops[pick(4)], {numeric(depth - 1), numeric(depth - 1)});
    }
  }

  Valuation valuation(std::size_t max_len) {
    Valuation eta;
    for (auto& v : vars) eta.vars[v] = pick(3) == 0 ? bs(pick(std::size_t(1) << p.N), p) : random_bits(rng, pick(max_len + 1));
    return eta;
  }
};

}  // namespace pmx::testing
