#include "helpers.hpp"
#include "pmx/solver.hpp"

#include <gtest/gtest.h>

using namespace pmx;
using pmx::testing::ExprGen;

namespace {

struct Fixture {
  WordParams p;
  OpSet ops = default_ops();
  SolverOptions opt;
  ExprP e(const std::string& s) const { return parse_expr(s, ops, p); }
  FactSet facts(std::initializer_list<const char*> fs) const {
    FactSet f;
    for (auto s : fs) f.add(e(s));
    return f;
  }
  bool proves(std::initializer_list<const char*> fs, const char* goal) const {
    Solver s(ops, p, opt);
    return s.proves(facts(fs), e(goal));
  }
};

std::vector<BitString> strings_up_to(std::size_t max_len) {
  std::vector<BitString> out;
  for (std::size_t len = 0; len <= max_len; ++len)
    for (std::uint64_t v = 0; v < (std::uint64_t(1) << len); ++v) out.push_back(word_bits(v, len));
  return out;
}

}  // namespace

TEST(Solver, LengthBoundExample) {
  Fixture f;
  EXPECT_TRUE(f.proves({"not(l > i1000)"}, "l <= l +N i40"));
  EXPECT_TRUE(f.proves({"len(l) = i32", "not(l > i1000)"}, "l <= l +b i2 * i20"));
  EXPECT_FALSE(f.proves({"len(l) = i32"}, "l <= l +b i2 * i20"));
}

TEST(Solver, Reflexivity) {
  Fixture f;
  EXPECT_TRUE(f.proves({}, "x = x"));
  EXPECT_TRUE(f.proves({}, "len(x) = len(x)"));
  EXPECT_TRUE(f.proves({"len(x) = i8"}, "x{i0, i8} = x{i0, i8}"));
  EXPECT_FALSE(f.proves({}, "x{i0, i8} = x{i0, i8}"));
}

TEST(Solver, FactsAndCongruence) {
  Fixture f;
  EXPECT_TRUE(f.proves({"mac(k, x) = y"}, "mac(k, x) = y"));
  EXPECT_FALSE(f.proves({"x = y"}, "len(x) = len(y)"));
  EXPECT_TRUE(f.proves({"len(x) = i32", "len(y) = i32", "x = y"}, "sha1(x) = sha1(y)"));
  EXPECT_FALSE(f.proves({"len(x) = i32", "len(y) = i16", "x = y"}, "sha1(x) = sha1(y)"));
  EXPECT_TRUE(f.proves({}, "len(mac(k, x)) = i20"));
  EXPECT_TRUE(f.proves({}, "len(x @ y) = len(x) +N len(y)"));
}

TEST(Solver, RangeDefinedness) {
  Fixture f;
  EXPECT_TRUE(f.proves({"len(x) = i64"}, "len(x{i8, i16}) = i16"));
  EXPECT_FALSE(f.proves({"len(x) = i16"}, "len(x{i8, i16}) = i16"));
  EXPECT_TRUE(f.proves({"len(x) = l +N i40", "not(l > i1000)"}, "len(x{i40, l}) = l"));
}

TEST(Solver, WrappingArithmetic) {
  Fixture f;
  EXPECT_TRUE(f.proves({"len(x) = i32", "x <= i100"}, "x +b i1 > x"));
  EXPECT_FALSE(f.proves({"len(x) = i32"}, "x +b i1 > x"));
  EXPECT_TRUE(f.proves({"len(x) = i32", "x >= i5"}, "x -b i5 <= x"));
  EXPECT_FALSE(f.proves({"len(x) = i32"}, "x -N i5 <= x"));
  EXPECT_TRUE(f.proves({"len(x) = i32", "x > i5"}, "(x -N i5) +N i5 = x"));
}

TEST(Solver, NoOverflowMode) {
  Fixture f;
  f.opt.mode = ArithMode::NoOverflow;
  EXPECT_TRUE(f.proves({"len(x) = i32"}, "x +b i1 > x"));
  f.opt.mode = ArithMode::Exact;
  EXPECT_FALSE(f.proves({"len(x) = i32"}, "x +b i1 > x"));
}

TEST(Solver, LogicalConnectives) {
  Fixture f;
  EXPECT_TRUE(f.proves({"x > i3", "x < i5"}, "x = i4"));
  EXPECT_TRUE(f.proves({"or(x = i1, x = i2)"}, "x <= i2"));
  EXPECT_FALSE(f.proves({"or(x = i1, x = i7)"}, "x <= i2"));
  EXPECT_TRUE(f.proves({"and(x < i2, y < i2)"}, "x +N y <= i2"));
  EXPECT_TRUE(f.proves({}, "not(and(x < i2, x > i5))"));
}

TEST(Solver, GroundFacts) {
  Fixture f;
  EXPECT_TRUE(f.proves({"i1 = i2"}, "x = y"));
  EXPECT_TRUE(f.proves({}, "i3 +N i4 = i7"));
  EXPECT_FALSE(f.proves({}, "i3 -N i4 = i7"));
}

TEST(Solver, Monotonicity) {
  Fixture f;
  Solver s(f.ops, f.p);
  FactSet a = f.facts({"not(l > i1000)"});
  FactSet b = a;
  b.add(f.e("len(x) = l"));
  b.add(f.e("y = mac(k, x)"));
  for (auto g : {"l <= l +N i40", "l +N i1 > l", "len(x{i0, l}) = l"}) {
    if (s.proves(a, f.e(g))) EXPECT_TRUE(s.proves(b, f.e(g))) << g;
  }
  EXPECT_TRUE(s.proves(b, f.e("len(x{i0, l}) = l")));
}

// Every proved entailment must hold under all small valuations satisfying the facts.
TEST(Solver, RandomSoundnessN4) {
  std::mt19937_64 rng(7);
  WordParams p;
  p.N = 4;
  OpSet ops = default_ops();
  ExprGen gen{rng, p};
  gen.vars = {"x", "y"};
  auto domain = strings_up_to(4);
  for (unsigned n = 0; n < 16; ++n) domain.push_back(bs(n, p));
  std::size_t proved = 0, checked = 0;
  for (SolverOptions opt : {SolverOptions{}}) {
    Solver s(ops, p, opt);
    for (int iter = 0; iter < 10000; ++iter) {
      FactSet sigma;
      std::size_t nf = gen.pick(3);
      for (std::size_t i = 0; i < nf; ++i) {
        const char* rel[] = {"=", "<=", "<"};
        if (gen.pick(3) == 0) {
          sigma.add(mk_op("=", {mk_len(mk_var(gen.vars[gen.pick(2)])), mk_const(bs(gen.pick(6), p))}));
          continue;
        }
        sigma.add(mk_op(rel[gen.pick(3)], {gen.numeric(1), gen.numeric(1)}));
      }
      ExprP phi = gen.pick(2) ? mk_op(gen.ops[4 + gen.pick(3)], {gen.numeric(2), gen.numeric(2)}) : gen.gen(3);
      if (s.entails(sigma, phi) != Verdict::Proved) continue;
      ++proved;
      Valuation eta;
      for (auto& a : domain)
        for (auto& b : domain) {
          eta.vars["x"] = a;
          eta.vars["y"] = b;
          if (!satisfies(sigma, eta, ops, p)) continue;
          ++checked;
          auto v = eval(phi, eta, ops, p);
          ASSERT_TRUE(v && *v == bs(1, p)) << "unsound: " << print_expr(phi, p) << " x=" << to_hex(a)
                                           << " y=" << to_hex(b) << "\n"
                                           << s.dump(sigma, phi);
        }
    }
  }
  RecordProperty("proved", int(proved));
  EXPECT_GT(proved, 100u);
  EXPECT_GT(checked, 1000u);
}

TEST(Solver, SamplerFindsWitness) {
  Fixture f;
  f.p.N = 8;
  FactSet sigma = f.facts({"len(x) = i3", "x = y", "y > i2"});
  auto eta = consistent_valuation_sampler(sigma, {"x", "y"}, f.ops, f.p, 4);
  ASSERT_TRUE(eta);
  EXPECT_TRUE(satisfies(sigma, *eta, f.ops, f.p));
  FactSet bad = f.facts({"x < i2", "x > i3"});
  EXPECT_FALSE(consistent_valuation_sampler(bad, {"x"}, f.ops, f.p, 3));
}

TEST(Solver, DumpAndSmtlib) {
  Fixture f;
  Solver s(f.ops, f.p);
  FactSet sigma = f.facts({"not(l > i1000)"});
  std::string d = s.dump(sigma, f.e("l <= l +N i40"));
  EXPECT_NE(d.find("negated goal"), std::string::npos);
  std::string smt = s.to_smtlib(sigma, f.e("l <= l +N i40"));
  EXPECT_NE(smt.find("(check-sat)"), std::string::npos);
  EXPECT_NE(smt.find("declare-const"), std::string::npos);
}

TEST(Solver, WrappingSubtractionIsUnbounded) {
  WordParams p;
  p.N = 4;
  OpSet ops = default_ops();
  Solver s(ops, p);
  FactSet sigma;
  sigma.add(parse_expr("len(y) = i3", ops, p));
  EXPECT_FALSE(s.proves(sigma, parse_expr("i1 -b len(y) +N i10", ops, p)));
  EXPECT_FALSE(s.proves(sigma, parse_expr("i1 -b len(y) <= i1", ops, p)));
}
