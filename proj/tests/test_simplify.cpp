#include "helpers.hpp"
#include "pmx/simplify.hpp"

#include <gtest/gtest.h>

using namespace pmx;
using pmx::testing::ExprGen;

namespace {

struct Env {
  WordParams p;
  OpSet ops = default_ops();
  ExprP e(const std::string& s) const { return parse_expr(s, ops, p); }
  FactSet facts(std::initializer_list<const char*> fs) const {
    FactSet f;
    for (auto s : fs) f.add(e(s));
    return f;
  }
  std::string simp(std::initializer_list<const char*> fs, const char* x) const {
    Solver s(ops, p);
    return print_expr(simplify(s, facts(fs), e(x)), p);
  }
};

std::vector<BitString> strings_up_to(std::size_t max_len) {
  std::vector<BitString> out;
  for (std::size_t len = 0; len <= max_len; ++len)
    for (std::uint64_t v = 0; v < (std::uint64_t(1) << len); ++v) out.push_back(word_bits(v, len));
  return out;
}

}  // namespace

TEST(Simplify, FullRangeElided) {
  Env env;
  EXPECT_EQ(env.simp({"len(x) = l"}, "x{i0, l}"), "x");
  EXPECT_EQ(env.simp({}, "x{i0, len(x)}"), "x");
  EXPECT_EQ(env.simp({}, "mac(k, x){i0, i20}"), "mac(k, x)");
}

TEST(Simplify, MacExtraction) {
  Env env;
  EXPECT_EQ(env.simp({"len(x1) = l", "len(mac(k, x1)) = i20"}, "(x1 @ mac(k, x1)){l, i20}"), "mac(k, x1)");
  EXPECT_EQ(env.simp({"len(x1) = l"}, "(x1 @ mac(k, x1)){i0, l}"), "x1");
}

TEST(Simplify, ZeroLength) {
  Env env;
  EXPECT_EQ(env.simp({"n = i0"}, "x{i3, n}"), "eps");
}

TEST(Simplify, NestedRangeFusion) {
  Env env;
  EXPECT_EQ(env.simp({"len(x) = i64"}, "x{i8, i32}{i4, i8}"), "x{i12, i8}");
}

TEST(Simplify, Unchanged) {
  Env env;
  EXPECT_EQ(env.simp({}, "x{o, l}"), "x{o, l}");
  EXPECT_EQ(env.simp({}, "(x @ y){o, l}"), "(x @ y){o, l}");
  EXPECT_EQ(env.simp({}, "mac(k, x @ y)"), "mac(k, x @ y)");
}

TEST(Simplify, ConstantFolding) {
  Env env;
  EXPECT_EQ(env.simp({}, "x{i2 +N i3, i4 -N i1}"), "x{i5, i3}");
  EXPECT_EQ(env.simp({}, "x{i0 +N o, l}"), "x{o, l}");
  EXPECT_EQ(env.simp({}, "\"ab\" @ \"cd\" @ x"), "\"abcd\" @ x");
}

TEST(Simplify, Cuts) {
  Env env;
  Solver s(env.ops, env.p);
  FactSet none;
  EXPECT_EQ(print_expr(cut_right(s, none, env.e("len(a)"), env.e("a @ b")), env.p), "b");
  EXPECT_EQ(print_expr(cut_left(s, none, env.e("len(a)"), env.e("a @ b")), env.p), "a");
  EXPECT_EQ(print_expr(cut_left(s, none, env.e("l"), env.e("a @ b")), env.p), "(a @ b){i0, l}");
  EXPECT_EQ(print_expr(cut_right(s, none, env.e("i0"), env.e("a @ b")), env.p), "a @ b");
  EXPECT_EQ(env.simp({"len(a) = x", "len(b) = y"}, "(a @ b){x, y}"), "b");
}

TEST(Simplify, Idempotent) {
  Env env;
  Solver s(env.ops, env.p);
  FactSet sigma = env.facts({"len(x1) = l", "not(l > i1000)", "len(x2) = i20"});
  for (auto src : {"(x1 @ mac(k, x1) @ x2){l +N i20, i20}", "(x1 @ mac(k, x1)){i0, l}", "(x1 @ x2){i4, l}",
                   "x1{i0, l}{i2, i3}"}) {
    ExprP once = simplify(s, sigma, env.e(src));
    EXPECT_TRUE(same(once, simplify(s, sigma, once))) << src;
  }
}

// eval(e) ≠ ⊥ ⇒ eval(simplify(e)) = eval(e) under every small Σ-consistent valuation.
TEST(Simplify, RandomSoundnessN4) {
  std::mt19937_64 rng(11);
  WordParams p;
  p.N = 4;
  OpSet ops = default_ops();
  Solver s(ops, p);
  ExprGen gen{rng, p};
  gen.vars = {"x", "y"};
  auto domain = strings_up_to(4);
  std::size_t cases = 0, checked = 0, changed = 0;
  while (cases < 10000) {
    FactSet sigma;
    for (std::size_t i = gen.pick(3); i-- > 0;) {
      if (gen.pick(2)) {
        sigma.add(mk_op("=", {mk_len(mk_var(gen.vars[gen.pick(2)])), mk_word(gen.pick(5), p)}));
      } else {
        const char* rel[] = {"=", "<=", "<"};
        sigma.add(mk_op(rel[gen.pick(3)], {gen.numeric(1), gen.numeric(1)}));
      }
    }
    ExprP e;
    if (gen.pick(2)) {
      std::vector<ExprP> ps;
      for (std::size_t i = 1 + gen.pick(3); i-- > 0;) ps.push_back(gen.pick(3) ? mk_var(gen.vars[gen.pick(2)]) : gen.leaf());
      ExprP body = mk_concat(ps);
      auto num = [&]() -> ExprP {
        switch (gen.pick(4)) {
          case 0: return mk_len(mk_var(gen.vars[gen.pick(2)]));
          case 1: return mk_op(gen.pick(2) ? "+N" : "-N", {mk_len(mk_var(gen.vars[gen.pick(2)])), mk_word(gen.pick(4), p)});
          default: return mk_word(gen.pick(6), p);
        }
      };
      e = mk_range(body, num(), num());
      if (gen.pick(3) == 0) e = mk_range(e, num(), num());
    } else {
      e = gen.gen(3);
    }
    ++cases;
    ExprP r = simplify(s, sigma, e);
    if (!same(r, e)) ++changed;
    EXPECT_LE(expr_size(r), expr_size(e) + 8) << print_expr(e, p);
    Valuation eta;
    for (auto& a : domain)
      for (auto& b : domain) {
        eta.vars["x"] = a;
        eta.vars["y"] = b;
        if (!satisfies(sigma, eta, ops, p)) continue;
        auto v = eval(e, eta, ops, p);
        if (!v) continue;
        ++checked;
        auto w = eval(r, eta, ops, p);
        ASSERT_TRUE(w && *w == *v) << print_expr(e, p) << " => " << print_expr(r, p) << " x=" << to_hex(a)
                                   << " y=" << to_hex(b);
      }
  }
  EXPECT_GT(changed, 1000u);
  EXPECT_GT(checked, 100000u);
}
