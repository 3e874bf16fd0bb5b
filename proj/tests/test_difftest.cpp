#include "pmx/difftest.hpp"

#include <gtest/gtest.h>

using namespace pmx;

namespace {

struct Env {
  WordParams p;
  OpSet ops = default_ops();
  Env() { p.N = 8; }
};

}  // namespace

TEST(Difftest, GeneratorIsBoundedAndDeterministic) {
  Env env;
  for (std::uint64_t s = 0; s < 200; ++s) {
    std::mt19937_64 a(s), b(s);
    std::string ta = random_cvm_program(a, 30, env.p);
    EXPECT_EQ(ta, random_cvm_program(b, 30, env.p));
    std::size_t n = parse_cvm(ta, env.ops, env.p).instrs.size();
    EXPECT_LE(n, 30u);
    EXPECT_GT(n, 0u);
  }
}

TEST(Difftest, ModelRunFollowsFeeds) {
  Env env;
  CvmProgram prog = parse_cvm("Const i3; In x read; Const i4; In r rnd; Apply' pair/2; Out write;", env.ops, env.p);
  SymResult sym = extract_model(prog, env.ops, env.p);
  ASSERT_FALSE(sym.fail);
  EXPECT_EQ(print_iml(sym.model, env.p), "in(x); new r[i4]; out(pair(r, x)); 0");
  std::mt19937_64 rng(3);
  ConcreteRun c = run_concrete(prog, env.ops, env.p, {}, rng);
  ASSERT_FALSE(c.stuck) << c.detail;
  ASSERT_EQ(c.reads.size(), 1u);
  ASSERT_EQ(c.rnds.size(), 1u);
  ModelRun m = run_model(sym.model, env.ops, env.p, {}, c.reads, c.rnds);
  ASSERT_FALSE(m.stuck) << m.detail;
  EXPECT_EQ(m.actions, c.actions);
  EXPECT_EQ(m.eta.vars.at("x"), c.reads[0]);
  EXPECT_TRUE(satisfies(sym.final_state.sigma, m.eta, env.ops, env.p));
}

// A model that swaps the pair arguments must be caught by the comparison.
TEST(Difftest, DetectsWrongModel) {
  Env env;
  CvmProgram prog = parse_cvm("Const i3; In x read; Const i4; In r rnd; Apply' pair/2; Out write;", env.ops, env.p);
  ImlP wrong = parse_iml("in(x); new r[i4]; out(pair(x, r)); 0", env.ops, env.p);
  std::mt19937_64 rng(5);
  ConcreteRun c = run_concrete(prog, env.ops, env.p, {}, rng);
  ModelRun m = run_model(wrong, env.ops, env.p, {}, c.reads, c.rnds);
  EXPECT_NE(m.actions, c.actions);
  ImlP short_rnd = parse_iml("in(x); new r[i5]; out(pair(r, x)); 0", env.ops, env.p);
  EXPECT_TRUE(run_model(short_rnd, env.ops, env.p, {}, c.reads, c.rnds).stuck);
}

TEST(Difftest, SimulationOnGeneratedPrograms) {
  DiffOptions o;
  DiffReport r = run_difftest(o);
  std::cout << "generated " << r.generated << ", extracted " << r.extracted << ", runs " << r.runs << ", stuck "
            << r.concrete_stuck << ", compared " << r.compared << ", actions " << r.actions << ", "
            << r.seconds << " s\n";
  for (auto& s : r.samples) std::cout << s.program << "=> " << s.model << "\n" << s.detail << "\n";
  EXPECT_EQ(r.extracted, 500u);
  EXPECT_EQ(r.runs, 5000u);
  EXPECT_EQ(r.mismatches, 0u);
  EXPECT_EQ(r.inconsistent, 0u);
  EXPECT_GT(r.compared, r.runs / 2);
  EXPECT_LT(r.seconds, 60.0);
}
