#include "helpers.hpp"
#include "pmx/iml.hpp"
#include "pmx/pts.hpp"

#include <gtest/gtest.h>

using namespace pmx;

namespace {

BitString ev(const std::string& tag, const std::string& body) {
  return concat(op_tag(tag), BitString::from_bytes(body));
}

// Prec by prefix enumeration: every prefix ending in body(x) contains head(x).
bool prec_oracle(const std::vector<BitString>& t, const std::string& head, const std::string& body) {
  for (std::size_t n = 1; n <= t.size(); ++n) {
    const BitString& last = t[n - 1];
    BitString bt = op_tag(body);
    if (last.size() < bt.size() || sub(last, 0, bt.size()) != bt) continue;
    BitString want = concat(op_tag(head), *sub(last, bt.size(), last.size() - bt.size()));
    bool found = false;
    for (std::size_t j = 0; j + 1 < n; ++j) found = found || t[j] == want;
    if (!found) return false;
  }
  return true;
}

void all_traces(const std::vector<BitString>& alphabet, std::size_t max_len,
                const std::function<void(const std::vector<BitString>&)>& f) {
  std::vector<BitString> t;
  std::function<void()> rec = [&] {
    f(t);
    if (t.size() == max_len) return;
    for (auto& a : alphabet) {
      t.push_back(a);
      rec();
      t.pop_back();
    }
  };
  rec();
}

struct Env {
  WordParams p;
  OpSet ops = default_ops();
};

}  // namespace

TEST(Pts, PrecExamples) {
  auto tg = tagging_for({"request", "acc"});
  Prec rho{"request", "acc"};
  EXPECT_TRUE(check_trace({}, rho, tg));
  EXPECT_TRUE(check_trace({ev("request", "a"), ev("acc", "a")}, rho, tg));
  EXPECT_FALSE(check_trace({ev("acc", "a"), ev("request", "a")}, rho, tg));
  EXPECT_FALSE(check_trace({ev("request", "b"), ev("acc", "a")}, rho, tg));
  EXPECT_TRUE(check_trace({ev("request", "a"), ev("acc", "a"), ev("acc", "a")}, rho, tg));
  EXPECT_TRUE(check_trace({BitString::from_bytes("noise"), ev("request", "a")}, rho, tg));
  TraceProperty short_traces = TracePredicate([](const std::vector<BitString>& t) { return t.size() < 2; });
  EXPECT_TRUE(check_trace({ev("acc", "a")}, short_traces, tg));
  EXPECT_FALSE(check_trace({ev("acc", "a"), ev("acc", "a")}, short_traces, tg));
}

TEST(Pts, PrecMatchesPrefixOracle) {
  auto tg = tagging_for({"request", "acc"});
  Prec rho{"request", "acc"};
  std::size_t n = 0;
  for (auto alphabet : {std::vector<BitString>{ev("request", "a"), ev("acc", "a"), ev("acc", "b")},
                        std::vector<BitString>{ev("request", "a"), ev("request", "b"), ev("acc", "b")}}) {
    all_traces(alphabet, 5, [&](const std::vector<BitString>& t) {
      ++n;
      bool v = check_trace(t, rho, tg);
      ASSERT_EQ(v, prec_oracle(t, "request", "acc"));
      if (v)
        for (std::size_t k = 0; k < t.size(); ++k)
          ASSERT_TRUE(check_trace(std::vector<BitString>(t.begin(), t.begin() + long(k)), rho, tg));
    });
  }
  EXPECT_EQ(n, 2u * 364u);
}

TEST(Pts, ScriptParsing) {
  WordParams p;
  AttackerScript s = parse_script(
      "# honest run\nseed 42\ndeliver * read i16\ndeliver 'ctr:eps 1*' ctr i5000\nexpect \"ab\"\n\n", p);
  EXPECT_EQ(s.seed, 42u);
  ASSERT_EQ(s.entries.size(), 3u);
  EXPECT_EQ(s.entries[0].selector, "*");
  EXPECT_EQ(s.entries[0].label, LabelKind::Read);
  EXPECT_EQ(s.entries[0].payload, bs(16, p));
  EXPECT_EQ(s.entries[1].selector, "ctr:eps 1*");
  EXPECT_EQ(s.entries[1].label, LabelKind::Ctr);
  EXPECT_EQ(s.entries[2].kind, ScriptEntry::Kind::Expect);
  EXPECT_EQ(s.entries[2].line, 5);
  EXPECT_THROW(parse_script("deliver * write i1\n", p), ParseError);
  EXPECT_THROW(parse_script("shout\n", p), ParseError);
  EXPECT_THROW(parse_script("deliver * read zz\n", p), ParseError);
}

TEST(Pts, MacModelHonestAndTampered) {
  Env env;
  ImlP model = parse_iml("in(x1); in(x2); if x2 = mac(k, x1) then event(acc(x1)); 0", env.ops, env.p);
  Valuation eta;
  eta.vars["k"] = BitString::from_bytes("key");
  BitString x1 = BitString::from_bytes("hi");
  BitString m = *env.ops.find("mac")->fn({eta.vars["k"], x1}, env.p);
  std::string honest = "deliver * read " + format_literal(x1, env.p) + "\ndeliver * read " + format_literal(m, env.p);
  ExecResult r = execute(iml_pts(model, env.ops, env.p, eta), parse_script(honest, env.p), env.p);
  EXPECT_EQ(r.reason, StopReason::ScriptEnd);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0], concat(op_tag("acc"), x1));

  BitString bad = m;
  bad.set(0, !bad[0]);
  std::string tampered = "deliver * read " + format_literal(x1, env.p) + "\ndeliver * read " + format_literal(bad, env.p);
  r = execute(iml_pts(model, env.ops, env.p, eta), parse_script(tampered, env.p), env.p);
  EXPECT_TRUE(r.events.empty());
  ASSERT_EQ(r.stuck.size(), 1u);
  EXPECT_EQ(r.stuck[0].second.rule, "I-Cond-False");
}

TEST(Pts, StopReasons) {
  Env env;
  Pts t = iml_pts(parse_iml("in(x); out(x); in(y); 0", env.ops, env.p), env.ops, env.p);
  EXPECT_EQ(execute(t, {}, env.p).reason, StopReason::ScriptEnd);
  auto run = [&](const std::string& s) { return execute(t, parse_script(s, env.p), env.p); };
  ExecResult ok = run("deliver * read \"a\"\nexpect \"a\"\n");
  EXPECT_EQ(ok.reason, StopReason::ScriptEnd);
  EXPECT_EQ(run("deliver * read \"a\"\nexpect \"b\"\n").reason, StopReason::Malformed);
  EXPECT_EQ(run("expect \"a\"\n").reason, StopReason::Malformed);
  EXPECT_EQ(run("deliver nothing* read \"a\"\n").reason, StopReason::Malformed);
  EXPECT_EQ(run("deliver * ctr 1\n").reason, StopReason::Malformed);
  EXPECT_EQ(execute(t, parse_script("deliver * read \"a\"\n", env.p), env.p, 1).reason, StopReason::Bound);

  // Two readers make `*` ambiguous.
  Pts two = iml_pts(parse_iml("in(x); 0 | in(y); 0", env.ops, env.p), env.ops, env.p);
  EXPECT_EQ(execute(two, parse_script("deliver * read i1\n", env.p), env.p).reason, StopReason::Malformed);
  EXPECT_EQ(execute(two, parse_script("deliver 'ctr:eps 2' read i1\n", env.p), env.p).reason, StopReason::ScriptEnd);

  // A scripted command without a transition stops the run.
  Pts cond = iml_pts(parse_iml("!(if i0 then 0)", env.ops, env.p), env.ops, env.p);
  ExecResult s = execute(cond, parse_script("deliver '' ctr 1\n", env.p), env.p);
  EXPECT_EQ(s.reason, StopReason::Stuck);
}

TEST(Pts, DeterministicGivenScriptAndSeed) {
  Env env;
  Pts t = iml_pts(parse_iml("!(new n[i8]; in(x); out(n @ x); event(acc(n)); 0)", env.ops, env.p), env.ops, env.p);
  std::string script = "seed 9\ndeliver '' ctr eps\ndeliver 'ctr:eps 1*' read \"q\"\ndeliver 'ctr:eps 2' ctr eps\n"
                       "deliver 'ctr:eps 2 ctr:eps 1*' read \"r\"\n";
  ExecResult a = execute(t, parse_script(script, env.p), env.p);
  ExecResult b = execute(t, parse_script(script, env.p), env.p);
  ASSERT_EQ(a.reason, StopReason::ScriptEnd) << a.detail;
  EXPECT_EQ(a.actions, b.actions);
  EXPECT_EQ(a.events.size(), 2u);
  ExecResult c = execute(t, parse_script("seed 10\n" + script.substr(7), env.p), env.p);
  EXPECT_NE(a.actions, c.actions);
}

TEST(Pts, HistoriesArePrefixFree) {
  Env env;
  Pts t = iml_pts(parse_iml("!(in(x); (out(x); 0 | event(x); 0))", env.ops, env.p), env.ops, env.p);
  ProtocolRun run(t, env.p, 1);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> keys;
    for (auto k : {LabelKind::Read, LabelKind::Ctr})
      for (auto& key : run.match("*", k)) keys.push_back(key);
    if (keys.empty()) break;
    std::string key = keys[rng() % keys.size()];
    const ExecutingProcess* e = run.find(key);
    Label l = e->proc->kind(e->eta) == ProcKind::Reading ? Label{LabelKind::Read, bs(rng() % 4, env.p)} : Label::ctr_eps();
    ASSERT_FALSE(run.command(key, l));
    run.auto_run(100);
    for (auto& a : run.state())
      for (auto& b : run.state())
        if (&a != &b) ASSERT_NE(b.key.rfind(a.key + " ", 0), 0u) << a.key << " / " << b.key;
  }
  EXPECT_GT(run.events().size(), 0u);
}
