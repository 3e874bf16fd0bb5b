#include "helpers.hpp"
#include "pmx/symcore.hpp"

#include <gtest/gtest.h>

using namespace pmx;
using pmx::testing::ExprGen;

namespace {

// Independent interpreter for ptr-free expressions over the arithmetic/logic subset.
// Bitstrings are held as std::string of '0'/'1' with index 0 the least significant bit.
using S = std::optional<std::string>;

std::string word(unsigned long long n, unsigned w) {
  std::string s;
  for (unsigned i = 0; i < w; ++i) s.push_back(((n >> i) & 1) ? '1' : '0');
  return s;
}
unsigned long long num(const std::string& s) {
  unsigned long long r = 0;
  for (std::size_t i = s.size(); i-- > 0;) r = r * 2 + (s[i] == '1');
  return r;
}
std::string minimal(unsigned long long n) {
  std::string s;
  while (n) {
    s.push_back((n & 1) ? '1' : '0');
    n >>= 1;
  }
  return s;
}
std::string to_s(const BitString& b) {
  std::string s;
  for (std::size_t i = 0; i < b.size(); ++i) s.push_back(b[i] ? '1' : '0');
  return s;
}

S oracle(const ExprP& e, const std::map<std::string, std::string>& env, unsigned N) {
  auto wordN = [&](unsigned long long n) { return n < (1ull << N) ? word(n, N) : minimal(n); };
  switch (e->kind) {
    case ExprKind::Const: return to_s(e->value);
    case ExprKind::Var: {
      auto it = env.find(e->name);
      if (it == env.end()) return std::nullopt;
      return it->second;
    }
    case ExprKind::Concat: {
      std::string r;
      for (auto& a : e->args) {
        S v = oracle(a, env, N);
        if (!v) return std::nullopt;
        r += *v;
      }
      return r;
    }
    case ExprKind::Len: {
      S v = oracle(e->args[0], env, N);
      if (!v) return std::nullopt;
      return wordN(v->size());
    }
    case ExprKind::Range: {
      S b = oracle(e->args[0], env, N), o = oracle(e->args[1], env, N), l = oracle(e->args[2], env, N);
      if (!b || !o || !l) return std::nullopt;
      unsigned long long oo = num(*o), ll = num(*l);
      if (oo + ll > b->size()) return std::nullopt;
      return b->substr(oo, ll);
    }
    case ExprKind::Op: {
      std::vector<std::string> a;
      for (auto& x : e->args) {
        S v = oracle(x, env, N);
        if (!v) return std::nullopt;
        a.push_back(*v);
      }
      const std::string& op = e->name;
      if (op == "not") return word(num(a[0]) == 0, N);
      unsigned long long x = num(a[0]), y = num(a[1]);
      if (op == "+b" || op == "-b") {
        if (a[0].size() != a[1].size()) return std::nullopt;
        unsigned w = a[0].size();
        unsigned long long m = 1ull << w;
        return word(op == "+b" ? (x + y) % m : (x + m - y) % m, w);
      }
      if (op == "+N") return wordN(x + y);
      if (op == "-N") return x < y ? S() : S(wordN(x - y));
      if (op == "=") return word(x == y, N);
      if (op == "<=") return word(x <= y, N);
      if (op == "<") return word(x < y, N);
      if (op == "or") return word(x != 0 || y != 0, N);
      return std::nullopt;
    }
    default: return std::nullopt;
  }
}

}  // namespace

TEST(Symcore, UnboundVariableIsUndefined) {
  OpSet ops = default_ops();
  EXPECT_FALSE(eval(mk_var("x"), Valuation{}, ops, WordParams{}).has_value());
}

TEST(Symcore, ConcatOfConstants) {
  OpSet ops = default_ops();
  WordParams p{8};
  auto e = mk_concat({mk_const(BitString::from_bytes("a")), mk_const(BitString::from_bytes("b"))});
  EXPECT_EQ(eval(e, {}, ops, p), BitString::from_bytes("ab"));
}

TEST(Symcore, EvalMatchesOracle) {
  std::mt19937_64 rng(11);
  OpSet ops = default_ops();
  ExprGen g{rng, WordParams{4}};
  int defined = 0;
  for (int i = 0; i < 20000; ++i) {
    ExprP e = g.gen(4);
    Valuation eta = g.valuation(10);
    std::map<std::string, std::string> env;
    for (auto& [k, v] : eta.vars) env[k] = to_s(v);
    auto got = eval(e, eta, ops, g.p);
    S want = oracle(e, env, 4);
    ASSERT_EQ(got.has_value(), want.has_value()) << print_expr(e, g.p);
    if (got) {
      ++defined;
      ASSERT_EQ(to_s(*got), *want) << print_expr(e, g.p);
    }
  }
  EXPECT_GT(defined, 2000);
}

TEST(Symcore, EvalMonotoneInValuation) {
  std::mt19937_64 rng(12);
  OpSet ops = default_ops();
  ExprGen g{rng, WordParams{4}};
  g.vars = {"x", "y"};
  for (int i = 0; i < 3000; ++i) {
    ExprP e = g.gen(3);
    Valuation eta = g.valuation(8);
    auto before = eval(e, eta, ops, g.p);
    Valuation ext = eta;
    ext.vars["z"] = pmx::testing::random_bits(rng, 5);
    if (before) ASSERT_EQ(eval(e, ext, ops, g.p), before);
  }
}

TEST(Symcore, GetLenCases) {
  WordParams p{8};
  EXPECT_TRUE(same(get_len(mk_ptr(PtrBase::heap_id(1), mk_word(0, p)), p), mk_word(8, p)));
  EXPECT_TRUE(same(get_len(mk_len(mk_var("x")), p), mk_word(8, p)));
  EXPECT_TRUE(same(get_len(mk_const(BitString::from_bytes("abc")), p), mk_word(24, p)));
  EXPECT_TRUE(same(get_len(mk_var("x"), p), mk_len(mk_var("x"))));
  auto m = mk_op("mac", {mk_var("k"), mk_var("x")});
  EXPECT_TRUE(same(get_len(m, p), mk_len(m)));
  EXPECT_TRUE(same(get_len(mk_range(mk_var("x"), mk_word(1, p), mk_var("l")), p), mk_var("l")));
  EXPECT_TRUE(same(get_len(mk_concat({mk_var("a"), mk_var("b")}), p),
                   mk_op("+N", {mk_len(mk_var("a")), mk_len(mk_var("b"))})));
}

TEST(Symcore, GetLenSound) {
  std::mt19937_64 rng(13);
  OpSet ops = default_ops();
  for (unsigned N : {4u, 8u}) {
    ExprGen g{rng, WordParams{N}};
    int checked = 0;
    for (int i = 0; i < 10000; ++i) {
      ExprP e = g.gen(4);
      Valuation eta = g.valuation(12);
      auto v = eval(e, eta, ops, g.p);
      if (!v) continue;
      // getLen(len(e')) = bs(N) presumes |e'| < 2^N, so every subterm must stay below the word limit.
      bool small = true;
      subterms(e, [&](const ExprP& t) {
        auto tv = eval(t, eta, ops, g.p);
        if (tv && tv->size() >= (std::size_t(1) << N)) small = false;
      });
      if (!small) continue;
      ++checked;
      // Range lengths are returned as written, so only the value is fixed.
      auto l = eval(get_len(e, g.p), eta, ops, g.p);
      ASSERT_TRUE(l) << print_expr(e, g.p);
      ASSERT_EQ(val(*l, g.p), v->size()) << print_expr(e, g.p);
      if (e->kind != ExprKind::Range) ASSERT_EQ(*l, bs(Nat(v->size()), g.p)) << print_expr(e, g.p);
    }
    EXPECT_GT(checked, 1000);
  }
}

TEST(Symcore, ApplySym) {
  OpSet ops = default_ops();
  WordParams p{8};
  auto l = mk_var("l"), i0 = mk_word(0, p);
  auto r = apply_sym("+b", {mk_ptr(PtrBase::heap_id(2), i0), l}, ops);
  ASSERT_TRUE(r);
  EXPECT_TRUE(same(r, mk_ptr(PtrBase::heap_id(2), mk_op("+b", {i0, l}))));
  auto r2 = apply_sym("+", {l, mk_ptr(PtrBase::heap_id(2), i0)}, ops);
  ASSERT_TRUE(r2);
  EXPECT_TRUE(same(r2, r));
  EXPECT_FALSE(apply_sym("-b", {mk_ptr(PtrBase::heap_id(1), i0), mk_ptr(PtrBase::heap_id(2), i0)}, ops));
  auto d = apply_sym("-b", {mk_ptr(PtrBase::heap_id(1), l), mk_ptr(PtrBase::heap_id(1), i0)}, ops);
  ASSERT_TRUE(d);
  EXPECT_TRUE(same(d, mk_op("-b", {l, i0})));
  auto m = apply_sym("mac", {mk_var("k"), mk_var("x1")}, ops);
  EXPECT_TRUE(same(m, mk_op("mac", {mk_var("k"), mk_var("x1")})));
  EXPECT_FALSE(apply_sym("mac", {mk_ptr(PtrBase::heap_id(1), i0), mk_var("x")}, ops));
}

TEST(Symcore, ComparisonExhaustiveN4) {
  OpSet ops = default_ops();
  WordParams p{4};
  for (unsigned a = 0; a < 16; ++a)
    for (unsigned b = 0; b < 16; ++b)
      for (unsigned la : {3u, 4u, 6u}) {
        Valuation eta;
        eta.vars["a"] = word_bits(a % (1u << la), la);
        eta.vars["b"] = word_bits(b, 4);
        auto r = eval(parse_expr("a = b", ops, p), eta, ops, p);
        ASSERT_TRUE(r);
        EXPECT_EQ(*r, bs((a % (1u << la)) == b ? 1 : 0, p));
        EXPECT_EQ(*eval(parse_expr("a <= b", ops, p), eta, ops, p), bs((a % (1u << la)) <= b ? 1 : 0, p));
        EXPECT_EQ(*eval(parse_expr("a < b", ops, p), eta, ops, p), bs((a % (1u << la)) < b ? 1 : 0, p));
      }
}

TEST(Symcore, WordOpsRequireEqualLengths) {
  OpSet ops = default_ops();
  WordParams p{8};
  Valuation eta;
  eta.vars["a"] = word_bits(200, 8);
  eta.vars["b"] = word_bits(100, 8);
  eta.vars["c"] = word_bits(1, 4);
  EXPECT_EQ(eval(parse_expr("a +b b", ops, p), eta, ops, p), word_bits(44, 8));
  EXPECT_EQ(eval(parse_expr("b -b a", ops, p), eta, ops, p), word_bits(156, 8));
  EXPECT_FALSE(eval(parse_expr("a +b c", ops, p), eta, ops, p));
  EXPECT_EQ(eval(parse_expr("a +N b", ops, p), eta, ops, p), bs(300, p));
  EXPECT_FALSE(eval(parse_expr("b -N a", ops, p), eta, ops, p));
}

TEST(Symcore, OpaqueStubsRoundTrip) {
  OpSet ops = default_ops();
  WordParams p{16};
  Valuation eta;
  eta.vars["r"] = BitString::from_bytes("seed");
  eta.vars["t"] = BitString::from_bytes("rand");
  eta.vars["m"] = BitString::from_bytes("hello");
  auto ev = [&](const char* s) { return eval(parse_expr(s, ops, p), eta, ops, p); };
  EXPECT_EQ(ev("D(dk(r), E(ek(r), m, t))"), eta.vars["m"]);
  EXPECT_FALSE(ev("D(dk(t), E(ek(r), m, t))"));
  EXPECT_EQ(ev("ekof(E(ek(r), m, t))"), ev("ek(r)"));
  EXPECT_EQ(ev("fst(pair(m, r))"), eta.vars["m"]);
  EXPECT_EQ(ev("snd(pair(m, r))"), eta.vars["r"]);
  EXPECT_EQ(ev("decrypt(r, encrypt(pk(r), m))"), eta.vars["m"]);
  EXPECT_EQ(ev("len(mac(r, m))"), bs(20, p));
  EXPECT_EQ(ev("cmp(m, m)"), bs(0, p));
  EXPECT_EQ(ev("cmp(m, r)"), bs(1, p));
  EXPECT_FALSE(ev("eq(m, r)"));
}

TEST(Symcore, PrintParseRoundTrip) {
  std::mt19937_64 rng(14);
  OpSet ops = default_ops();
  ExprGen g{rng, WordParams{8}};
  for (int i = 0; i < 5000; ++i) {
    ExprP e = g.gen(4);
    std::string s = print_expr(e, g.p);
    ExprP back = parse_expr(s, ops, g.p);
    ASSERT_TRUE(same(back, e)) << s << " vs " << print_expr(back, g.p);
  }
}

TEST(Symcore, ParsesPaperNotation) {
  OpSet ops = default_ops();
  WordParams p{32};
  auto e = parse_expr("m1{i4 +b iN +b m1{i4,iN}, len(m1) -b i4 -b iN -b m1{i4,iN}}", ops, p);
  EXPECT_EQ(print_expr(e, p), "m1{i4 +b i32 +b m1{i4, i32}, len(m1) -b i4 -b i32 -b m1{i4, i32}}");
  auto f = parse_expr("\xC2\xAC(l > i1000)", ops, p);
  EXPECT_EQ(print_expr(f, p), "not(l > i1000)");
  EXPECT_EQ(print_expr(parse_expr("\"msg1\" @ len(nA) @ nA @ pkA", ops, p), p), "\"msg1\" @ len(nA) @ nA @ pkA");
  EXPECT_EQ(print_expr(parse_expr("a \xE2\x88\x92\xE2\x84\x95 b \xE2\x89\xA4 c", ops, p), p), "a -N b <= c");
}
