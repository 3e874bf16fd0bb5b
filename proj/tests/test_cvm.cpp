#include "pmx/cvm.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace pmx;

namespace {

std::string read_fixture(const std::string& name) {
  std::ifstream in(std::string(PMX_FIXTURES) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Machine {
  WordParams p;
  OpSet ops = default_ops();
  std::shared_ptr<CvmContext> ctx = std::make_shared<CvmContext>();

  explicit Machine(const std::string& src) {
    ctx->prog = parse_cvm(src, ops, p);
    ctx->addr = AddrMap::pack(ctx->prog, p);
    ctx->ops = &ops;
    ctx->p = p;
  }

  /// Runs to completion feeding `inputs` to every non-forced step in order.
  std::pair<std::vector<Label>, std::optional<Stuck>> run(Valuation eta, std::vector<BitString> inputs) {
    ConcState s;
    std::vector<Label> labels;
    std::size_t next = 0;
    for (int guard = 0; guard < 10000; ++guard) {
      ProcKind k = cvm_kind(*ctx, s);
      if (k == ProcKind::Done) return {labels, std::nullopt};
      ProcessP proc = cvm_process(ctx, s);
      BitString in;
      if (auto f = proc->forced(eta)) {
        in = f->payload;
      } else if (k == ProcKind::Writing || k == ProcKind::Event) {
      } else {
        if (next >= inputs.size()) return {labels, Stuck{"script", "out of inputs"}};
        in = inputs[next++];
      }
      auto r = cvm_step(*ctx, eta, s, in);
      if (auto* st = std::get_if<Stuck>(&r)) return {labels, *st};
      auto& [l, e, n] = std::get<0>(r);
      labels.push_back(l);
      eta = e;
      s = n;
      for (auto& [a, _] : s.mem) EXPECT_TRUE(s.alloc.covers(a, 1));
    }
    return {labels, Stuck{"guard", "too many steps"}};
  }
};

}  // namespace

TEST(Cvm, ParsesListing) {
  WordParams p;
  OpSet ops = default_ops();
  auto prog = parse_cvm("Const i20; Test;", ops, p);
  ASSERT_EQ(prog.instrs.size(), 2u);
  EXPECT_EQ(prog.instrs[0].kind, InstrKind::Const);
  EXPECT_EQ(prog.instrs[0].value, bs(20, p));
  EXPECT_EQ(prog.instrs[1].kind, InstrKind::Test);
}

TEST(Cvm, MacroExpansion) {
  WordParams p;
  OpSet ops = default_ops();
  auto prog = parse_cvm("Apply' mac/2; Env' k; Varsize; Clear;", ops, p);
  std::vector<std::string> got;
  for (auto& i : prog.instrs) got.push_back(i.str(p));
  std::vector<std::string> want{"Apply mac", "Ref dummy", "Store", "Env k", "Ref dummy", "Store",
                                "Const i32", "Ref dummy", "Store"};
  EXPECT_EQ(got, want);
}

TEST(Cvm, ParseErrors) {
  WordParams p;
  OpSet ops = default_ops();
  EXPECT_THROW(parse_cvm("Apply frob/2;", ops, p), ParseError);
  EXPECT_THROW(parse_cvm("Apply mac/3;", ops, p), ParseError);
  EXPECT_THROW(parse_cvm("Const i1", ops, p), ParseError);
  EXPECT_THROW(parse_cvm("Jump;", ops, p), ParseError);
  EXPECT_THROW(parse_cvm("In x send;", ops, p), ParseError);
}

TEST(Cvm, MacServerInstructionCount) {
  std::string src = read_fixture("fig11.cvm");
  // independent count: every ';' is one instruction, each primed macro or Clear adds a Ref and a Store
  std::size_t semis = 0, primed = 0;
  std::istringstream in(src);
  for (std::string line; std::getline(in, line);) {
    line = line.substr(0, line.find("//"));
    for (char c : line) semis += c == ';';
    for (std::size_t pos = 0; (pos = line.find("' ", pos)) != std::string::npos; ++pos) ++primed;
    for (std::size_t pos = 0; (pos = line.find("Clear", pos)) != std::string::npos; ++pos) ++primed;
  }
  WordParams p;
  OpSet ops = default_ops();
  auto prog = parse_cvm(src, ops, p);
  EXPECT_EQ(prog.instrs.size(), semis + 2 * primed);
  EXPECT_EQ(prog.ref_vars(), (std::vector<std::string>{"keylen", "key", "len", "dummy", "buf"}));
  EXPECT_EQ(prog.instrs.front().note, "void * key; size_t keylen;\nreadenv(\"k\", &key, &keylen);");
}

TEST(Cvm, ConstPushes) {
  Machine m("Const i7; Const \"ab\"; Out write; Out write;");
  auto [labels, stuck] = m.run({}, {});
  ASSERT_FALSE(stuck);
  ASSERT_EQ(labels.size(), 5u);
  EXPECT_EQ(labels[3], (Label{LabelKind::Write, BitString::from_bytes("ab")}));
  EXPECT_EQ(labels[4], (Label{LabelKind::Write, bs(7, m.p)}));
}

TEST(Cvm, StoreOutsideAllocationIsStuck) {
  Machine m("Const i1; Const i4000; Store;");
  auto [labels, stuck] = m.run({}, {});
  ASSERT_TRUE(stuck);
  EXPECT_EQ(stuck->rule, "C-Store");
}

TEST(Cvm, TestRequiresOne) {
  Machine ok("Const i1; Test;");
  EXPECT_FALSE(ok.run({}, {}).second);
  Machine bad("Const i2; Test;");
  auto [labels, stuck] = bad.run({}, {});
  ASSERT_TRUE(stuck);
  EXPECT_EQ(stuck->rule, "C-Test");
}

TEST(Cvm, EnvAndApplyPushLength) {
  Machine m("Env k; Out write; Out write; Env k; Apply sha1; Out write; Out write;");
  Valuation eta;
  eta.vars["k"] = BitString::from_bytes("key");
  auto [labels, stuck] = m.run(eta, {});
  ASSERT_FALSE(stuck);
  std::vector<BitString> writes;
  for (auto& l : labels)
    if (l.kind == LabelKind::Write) writes.push_back(l.payload);
  ASSERT_EQ(writes.size(), 4u);
  EXPECT_EQ(writes[0], bs(24, m.p));
  EXPECT_EQ(writes[1], eta.vars["k"]);
  EXPECT_EQ(writes[2], bs(20, m.p));
  EXPECT_EQ(writes[3].size(), 20u);
}

TEST(Cvm, InReadStoresInEnvironment) {
  Machine m("Const i8; In x read; Out write;");
  ConcState s;
  Valuation eta;
  auto step = [&](const BitString& in) {
    auto r = cvm_step(*m.ctx, eta, s, in);
    auto& [l, e, n] = std::get<0>(r);
    eta = e;
    s = n;
    return l;
  };
  step({});
  step({});
  BitString x = BitString::from_bytes("z");
  EXPECT_EQ(step(x), (Label{LabelKind::Read, x}));
  EXPECT_EQ(*eta.lookup("x"), x);
  // a payload of the wrong length is rejected
  auto again = cvm_step(*m.ctx, {}, ConcState{false, {}, {}, {bs(8, m.p)}, 1}, BitString::from_bytes("zz"));
  EXPECT_TRUE(std::holds_alternative<Stuck>(again));
}

TEST(Cvm, MallocAndUninitialisedLoad) {
  Machine m("Const i16; Malloc; Const i16; Load; Out write;");
  BitString addr = bs(500, m.p);
  BitString fill = BitString::from_bytes("hi");
  auto [labels, stuck] = m.run({}, {addr, fill});
  ASSERT_FALSE(stuck);
  EXPECT_EQ(labels[2], (Label{LabelKind::Ctr, addr}));
  EXPECT_EQ(labels.back(), (Label{LabelKind::Write, fill}));
  // overlapping allocation is refused
  Machine twice("Const i16; Malloc; Const i16; Malloc;");
  auto [l2, s2] = twice.run({}, {addr, bs(508, twice.p)});
  ASSERT_TRUE(s2);
  EXPECT_EQ(s2->rule, "C-Malloc");
}

TEST(Cvm, InitialisedBitsWinOverAttacker) {
  Machine m("Const \"ab\"; Const i16; Malloc; Store; Const i700; Const i16; Load; Out write;");
  auto [labels, stuck] = m.run({}, {bs(700, m.p), BitString::from_bytes("zz")});
  ASSERT_FALSE(stuck) << stuck->rule << stuck->detail;
  EXPECT_EQ(labels.back().payload, BitString::from_bytes("ab"));
}

TEST(Cvm, MacServerConcreteRun) {
  Machine m(read_fixture("fig11.cvm"));
  Valuation eta;
  eta.vars["k"] = BitString::from_bytes("secret");
  BitString x1 = BitString::from_bytes("ab");
  BitString mac = *m.ops.find("mac")->fn({eta.vars["k"], x1}, m.p);
  auto [labels, stuck] = m.run(eta, {bs(1000, m.p), bs(16, m.p), bs(5000, m.p), x1, mac});
  ASSERT_FALSE(stuck) << stuck->rule << ": " << stuck->detail;
  std::vector<Label> visible;
  for (auto& l : labels)
    if (l.kind != LabelKind::Ctr || l.payload.size() == 1) visible.push_back(l);
  ASSERT_EQ(visible.size(), 6u);
  EXPECT_EQ(visible[0], (Label{LabelKind::Read, bs(16, m.p)}));
  EXPECT_EQ(visible[1], Label::ctr_bit(true));
  EXPECT_EQ(visible[2], (Label{LabelKind::Read, x1}));
  EXPECT_EQ(visible[3], (Label{LabelKind::Read, mac}));
  EXPECT_EQ(visible[4], Label::ctr_bit(true));
  EXPECT_EQ(visible[5], (Label{LabelKind::Event, concat(op_tag("acc"), x1)}));
}

TEST(Cvm, MacServerRejectsWrongMac) {
  Machine m(read_fixture("fig11.cvm"));
  Valuation eta;
  eta.vars["k"] = BitString::from_bytes("secret");
  auto [labels, stuck] = m.run(eta, {bs(1000, m.p), bs(16, m.p), bs(5000, m.p), BitString::from_bytes("ab"),
                                     BitString::zeros(20)});
  ASSERT_TRUE(stuck);
  EXPECT_EQ(stuck->rule, "C-Test");
  for (auto& l : labels) EXPECT_NE(l.kind, LabelKind::Event);
}

TEST(Cvm, MacServerLengthCheck) {
  Machine m(read_fixture("fig11.cvm"));
  Valuation eta;
  eta.vars["k"] = BitString::from_bytes("secret");
  auto [labels, stuck] = m.run(eta, {bs(1000, m.p), bs(1001, m.p)});
  ASSERT_TRUE(stuck);
  EXPECT_EQ(stuck->rule, "C-Test");
}

TEST(Cvm, AddrMapPacking) {
  WordParams p;
  OpSet ops = default_ops();
  auto prog = parse_cvm("Ref a; Ref b; Ref a; Ref c;", ops, p);
  auto m = AddrMap::pack(prog, p);
  EXPECT_EQ(m.addr.at("a"), 1u);
  EXPECT_EQ(m.addr.at("b"), 33u);
  EXPECT_EQ(m.addr.at("c"), 65u);
  EXPECT_TRUE(m.valid(p));
  m.addr["d"] = 40;
  EXPECT_FALSE(m.valid(p));
}
