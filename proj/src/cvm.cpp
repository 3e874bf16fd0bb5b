#include "pmx/cvm.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace pmx {

std::string Instr::str(const WordParams& p) const {
  switch (kind) {
    case InstrKind::Const: return "Const " + format_literal(value, p);
    case InstrKind::Ref: return "Ref " + var;
    case InstrKind::Malloc: return "Malloc";
    case InstrKind::Load: return "Load";
    case InstrKind::In: return "In " + var + (rnd ? " rnd" : " read");
    case InstrKind::Env: return "Env " + var;
    case InstrKind::Apply: return "Apply " + op;
    case InstrKind::Out: return event ? "Out event" : "Out write";
    case InstrKind::Test: return "Test";
    case InstrKind::Store: return "Store";
  }
  return "?";
}

std::vector<std::string> CvmProgram::ref_vars() const {
  std::vector<std::string> out;
  for (auto& i : instrs)
    if (i.kind == InstrKind::Ref && std::find(out.begin(), out.end(), i.var) == out.end()) out.push_back(i.var);
  return out;
}

std::vector<std::string> CvmProgram::all_vars() const {
  std::vector<std::string> out;
  for (auto& i : instrs)
    if ((i.kind == InstrKind::Ref || i.kind == InstrKind::In || i.kind == InstrKind::Env) &&
        std::find(out.begin(), out.end(), i.var) == out.end())
      out.push_back(i.var);
  return out;
}

// ---------------------------------------------------------------- parsing

CvmProgram parse_cvm(std::string_view text, const OpSet& ops, const WordParams& p) {
  CvmProgram prog;
  std::string note;
  bool last_was_comment = false;
  std::string stmt;
  int stmt_line = 0, line_no = 0;

  auto fail = [&](int line, const std::string& msg) {
    throw ParseError("line " + std::to_string(line) + ": " + msg);
  };
  auto emit = [&](Instr i, int line) {
    i.line = line;
    i.note = note;
    prog.instrs.push_back(std::move(i));
  };
  auto clear = [&](int line) {
    Instr r{InstrKind::Ref};
    r.var = "dummy";
    emit(r, line);
    emit(Instr{InstrKind::Store}, line);
  };
  auto statement = [&](const std::string& s, int line) {
    std::istringstream in(s);
    std::vector<std::string> w;
    for (std::string t; in >> t;) w.push_back(t);
    if (w.empty()) return;
    auto need = [&](std::size_t n) {
      if (w.size() != n) fail(line, "'" + w[0] + "' expects " + std::to_string(n - 1) + " operand(s)");
    };
    const std::string& k = w[0];
    if (k == "Const") {
      need(2);
      auto b = parse_literal(w[1], p);
      if (!b && std::all_of(w[1].begin(), w[1].end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
        b = parse_literal("i" + w[1], p);
      if (!b) fail(line, "bad literal '" + w[1] + "'");
      Instr i{InstrKind::Const};
      i.value = *b;
      emit(i, line);
    } else if (k == "Varsize") {
      need(1);
      Instr i{InstrKind::Const};
      i.value = bs(p.N, p);
      emit(i, line);
    } else if (k == "Ref" || k == "Env" || k == "Env'") {
      need(2);
      Instr i{k == "Ref" ? InstrKind::Ref : InstrKind::Env};
      i.var = w[1];
      emit(i, line);
      if (k == "Env'") clear(line);
    } else if (k == "Malloc" || k == "Load" || k == "Test" || k == "Store") {
      need(1);
      emit(Instr{k == "Malloc" ? InstrKind::Malloc
                 : k == "Load" ? InstrKind::Load
                 : k == "Test" ? InstrKind::Test
                               : InstrKind::Store},
           line);
    } else if (k == "Clear") {
      need(1);
      clear(line);
    } else if (k == "In") {
      need(3);
      if (w[2] != "read" && w[2] != "rnd") fail(line, "In source must be read or rnd");
      Instr i{InstrKind::In};
      i.var = w[1];
      i.rnd = w[2] == "rnd";
      emit(i, line);
    } else if (k == "Out" || k == "Event") {
      Instr i{InstrKind::Out};
      if (k == "Event") {
        need(1);
        i.event = true;
      } else {
        need(2);
        if (w[1] != "write" && w[1] != "event") fail(line, "Out destination must be write or event");
        i.event = w[1] == "event";
      }
      emit(i, line);
    } else if (k == "Apply" || k == "Apply'") {
      need(2);
      std::string name = w[1];
      std::optional<unsigned> arity;
      auto slash = name.rfind('/');
      if (slash != std::string::npos && slash + 1 < name.size() && slash > 0 &&
          std::all_of(name.begin() + long(slash) + 1, name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        arity = unsigned(std::stoul(name.substr(slash + 1)));
        name.resize(slash);
      }
      const OpInfo* op = ops.find(name);
      if (!op) fail(line, "unknown operation '" + name + "'");
      if (arity && *arity != op->arity)
        fail(line, "arity mismatch for '" + name + "': " + std::to_string(*arity) + " vs " + std::to_string(op->arity));
      Instr i{InstrKind::Apply};
      i.op = op->name;
      emit(i, line);
      if (k == "Apply'") clear(line);
    } else {
      fail(line, "unknown instruction '" + k + "'");
    }
  };

  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    std::string code = raw;
    auto c = raw.find("//");
    bool comment_only = false;
    if (c != std::string::npos) {
      std::string body = raw.substr(c + 2);
      code = raw.substr(0, c);
      comment_only = code.find_first_not_of(" \t\r") == std::string::npos;
      auto b = body.find_first_not_of(' ');
      body = b == std::string::npos ? "" : body.substr(b);
      if (comment_only && last_was_comment)
        note += "\n" + body;
      else if (comment_only)
        note = body;
    }
    last_was_comment = comment_only;
    for (char ch : code) {
      if (ch == ';') {
        statement(stmt, stmt_line ? stmt_line : line_no);
        stmt.clear();
        stmt_line = 0;
      } else {
        if (!std::isspace(static_cast<unsigned char>(ch)) && stmt_line == 0) stmt_line = line_no;
        stmt.push_back(ch);
      }
    }
    stmt.push_back(' ');
  }
  if (stmt.find_first_not_of(" \t\r\n") != std::string::npos) fail(stmt_line, "missing ';'");
  return prog;
}

std::string print_cvm(const CvmProgram& prog, const WordParams& p) {
  std::string out, note;
  for (auto& i : prog.instrs) {
    if (i.note != note) {
      note = i.note;
      std::istringstream ns(note);
      for (std::string l; std::getline(ns, l);) out += "// " + l + "\n";
    }
    out += i.str(p) + ";\n";
  }
  return out;
}

// ---------------------------------------------------------------- addresses

AddrMap AddrMap::pack(const CvmProgram& prog, const WordParams& p) {
  AddrMap m;
  std::uint64_t next = 1;
  for (auto& v : prog.ref_vars()) {
    m.addr[v] = next;
    next += p.N;
  }
  return m;
}

bool AddrMap::valid(const WordParams& p) const {
  Intervals seen;
  Nat limit = p.word_limit();
  for (auto& [v, a] : addr) {
    if (a < 1 || Nat(a) + p.N > limit) return false;
    if (seen.intersects(a, p.N)) return false;
    seen.add(a, p.N);
  }
  return true;
}

bool Intervals::intersects(std::uint64_t a, std::uint64_t n) const {
  if (n == 0) return false;
  auto it = iv_.upper_bound(a);
  if (it != iv_.begin() && std::prev(it)->second > a) return true;
  return it != iv_.end() && it->first < a + n;
}

bool Intervals::covers(std::uint64_t a, std::uint64_t n) const {
  if (n == 0) return true;
  auto it = iv_.upper_bound(a);
  if (it == iv_.begin()) return false;
  --it;
  return it->first <= a && it->second >= a + n;
}

void Intervals::add(std::uint64_t a, std::uint64_t n) {
  if (n == 0) return;
  std::uint64_t lo = a, hi = a + n;
  auto it = iv_.upper_bound(lo);
  if (it != iv_.begin() && std::prev(it)->second >= lo) --it;
  while (it != iv_.end() && it->first <= hi) {
    lo = std::min(lo, it->first);
    hi = std::max(hi, it->second);
    it = iv_.erase(it);
  }
  iv_[lo] = hi;
}

// ---------------------------------------------------------------- semantics

namespace {

bool fits_word(const Nat& n, const WordParams& p) { return n < p.word_limit(); }

/// [a, a+n) inside 1 .. 2^N-1.
bool in_space(const Nat& a, const Nat& n, const WordParams& p) {
  if (n == 0) return true;
  return a >= 1 && a + n <= p.word_limit();
}

}  // namespace

ProcKind cvm_kind(const CvmContext& ctx, const ConcState& s) {
  if (s.init) return ProcKind::Control;
  if (s.pc >= ctx.prog.instrs.size()) return ProcKind::Done;
  const Instr& i = ctx.prog.instrs[s.pc];
  switch (i.kind) {
    case InstrKind::In: return i.rnd ? ProcKind::Randomising : ProcKind::Reading;
    case InstrKind::Out: return i.event ? ProcKind::Event : ProcKind::Writing;
    default: return ProcKind::Control;
  }
}

CvmStep cvm_step(const CvmContext& ctx, const Valuation& eta, const ConcState& s, const BitString& input) {
  const WordParams& p = ctx.p;
  auto stuck = [&](const char* rule, std::string why) -> CvmStep { return Stuck{rule, std::move(why)}; };
  ConcState n = s;
  Valuation e = eta;
  if (s.init) {
    for (auto& v : ctx.prog.ref_vars()) {
      auto it = ctx.addr.addr.find(v);
      if (it == ctx.addr.addr.end()) return stuck("C-Init", "no address for " + v);
      if (!in_space(it->second, p.N, p)) return stuck("C-Init", v + " does not fit in memory");
      n.alloc.add(it->second, p.N);
    }
    n.init = false;
    return std::tuple{Label::ctr_eps(), e, n};
  }
  if (s.pc >= ctx.prog.instrs.size()) return stuck("end", "program finished");
  const Instr& i = ctx.prog.instrs[s.pc];
  n.pc++;
  auto pop = [&]() -> std::optional<BitString> {
    if (n.stack.empty()) return std::nullopt;
    BitString b = std::move(n.stack.back());
    n.stack.pop_back();
    return b;
  };
  switch (i.kind) {
    case InstrKind::Const: n.stack.push_back(i.value); return std::tuple{Label::ctr_eps(), e, n};
    case InstrKind::Ref: {
      auto it = ctx.addr.addr.find(i.var);
      if (it == ctx.addr.addr.end()) return stuck("C-Ref", "no address for " + i.var);
      n.stack.push_back(bs(it->second, p));
      return std::tuple{Label::ctr_eps(), e, n};
    }
    case InstrKind::Malloc: {
      auto l = pop();
      if (!l) return stuck("C-Malloc", "empty stack");
      if (input.size() != p.N) return stuck("C-Malloc", "address must have N bits");
      Nat a = val(input, p), len = val(*l, p);
      if (!in_space(a, len, p)) return stuck("C-Malloc", "range outside address space");
      if (n.alloc.intersects(to_u64(a), to_u64(len))) return stuck("C-Malloc", "range overlaps allocated memory");
      n.alloc.add(to_u64(a), to_u64(len));
      n.stack.push_back(input);
      return std::tuple{Label{LabelKind::Ctr, input}, e, n};
    }
    case InstrKind::Load: {
      auto l = pop();
      auto ptr = pop();
      if (!l || !ptr) return stuck("C-Load", "empty stack");
      Nat len = val(*l, p);
      if (len > input.size()) return stuck("C-Load", "attacker string shorter than the load");
      std::uint64_t a = to_u64(val(*ptr, p));
      BitString b;
      for (std::uint64_t k = 0; k < to_u64(len); ++k) {
        auto m = s.mem.find(a + k);
        b.push_back(m != s.mem.end() ? m->second : input[k]);
      }
      n.stack.push_back(std::move(b));
      return std::tuple{Label{LabelKind::Ctr, input}, e, n};
    }
    case InstrKind::In: {
      auto l = pop();
      if (!l) return stuck("C-In", "empty stack");
      Nat len = val(*l, p);
      if (!fits_word(len, p) || input.size() != len) return stuck("C-In", "input length differs from requested length");
      e.vars[i.var] = input;
      n.stack.push_back(input);
      return std::tuple{Label{i.rnd ? LabelKind::Rnd : LabelKind::Read, input}, e, n};
    }
    case InstrKind::Env: {
      auto* v = eta.lookup(i.var);
      if (!v) return stuck("C-Env", i.var + " is not bound");
      if (!fits_word(v->size(), p)) return stuck("C-Env", i.var + " is too long");
      n.stack.push_back(*v);
      n.stack.push_back(bs(v->size(), p));
      return std::tuple{Label::ctr_eps(), e, n};
    }
    case InstrKind::Apply: {
      const OpInfo* op = ctx.ops->find(i.op);
      if (!op) return stuck("C-Apply", "unknown operation " + i.op);
      std::vector<BitString> args;
      for (unsigned k = 0; k < op->arity; ++k) {
        auto b = pop();
        if (!b) return stuck("C-Apply", "empty stack");
        args.push_back(std::move(*b));
      }
      auto r = op->fn(args, p);
      if (!r) return stuck("C-Apply", i.op + " is undefined on its arguments");
      if (!fits_word(r->size(), p)) return stuck("C-Apply", "result too long");
      std::size_t len = r->size();
      n.stack.push_back(std::move(*r));
      n.stack.push_back(bs(len, p));
      return std::tuple{Label::ctr_eps(), e, n};
    }
    case InstrKind::Out: {
      auto b = pop();
      if (!b) return stuck("C-Out", "empty stack");
      return std::tuple{Label{i.event ? LabelKind::Event : LabelKind::Write, *b}, e, n};
    }
    case InstrKind::Test: {
      auto b = pop();
      if (!b) return stuck("C-Test", "empty stack");
      if (*b != bs(1, p)) return stuck("C-Test", "condition is " + format_literal(*b, p));
      return std::tuple{Label::ctr_bit(true), e, n};
    }
    case InstrKind::Store: {
      auto ptr = pop();
      auto b = pop();
      if (!ptr || !b) return stuck("C-Store", "empty stack");
      Nat a = val(*ptr, p);
      if (!in_space(a, b->size(), p) || !n.alloc.covers(to_u64(a), b->size()))
        return stuck("C-Store", "target range is not allocated");
      std::uint64_t base = to_u64(a);
      for (std::size_t k = 0; k < b->size(); ++k) n.mem[base + k] = (*b)[k];
      return std::tuple{Label::ctr_eps(), e, n};
    }
  }
  return stuck("?", "unknown instruction");
}

namespace {

class CvmProc final : public Process {
 public:
  CvmProc(std::shared_ptr<const CvmContext> ctx, ConcState s) : ctx_(std::move(ctx)), s_(std::move(s)) {}

  ProcKind kind(const Valuation&) const override { return cvm_kind(*ctx_, s_); }

  StepResult step(const Valuation& eta, const Label& label) const override {
    ProcKind k = kind(eta);
    LabelKind expected = k == ProcKind::Reading       ? LabelKind::Read
                         : k == ProcKind::Randomising ? LabelKind::Rnd
                         : k == ProcKind::Writing     ? LabelKind::Write
                         : k == ProcKind::Event       ? LabelKind::Event
                                                      : LabelKind::Ctr;
    if (k == ProcKind::Done) return Stuck{"end", "program finished"};
    if (label.kind != expected) return Stuck{"label", std::string("expected a ") + label_kind_name(expected) + " label"};
    auto r = cvm_step(*ctx_, eta, s_, label.payload);
    if (auto* st = std::get_if<Stuck>(&r)) return *st;
    auto& [l, e, n] = std::get<0>(r);
    if (k == ProcKind::Control && l != label) return Stuck{"label", "control label does not match the step"};
    return Transition{l, {{e, std::make_shared<CvmProc>(ctx_, n)}}};
  }

  std::optional<std::size_t> rnd_length(const Valuation&) const override {
    if (s_.stack.empty()) return std::nullopt;
    Nat l = val(s_.stack.back(), ctx_->p);
    if (l >= ctx_->p.word_limit()) return std::nullopt;
    return std::size_t(to_u64(l));
  }

  std::optional<Label> forced(const Valuation&) const override {
    if (s_.init) return Label::ctr_eps();
    if (s_.pc >= ctx_->prog.instrs.size()) return std::nullopt;
    const Instr& i = ctx_->prog.instrs[s_.pc];
    switch (i.kind) {
      case InstrKind::Const:
      case InstrKind::Ref:
      case InstrKind::Env:
      case InstrKind::Apply:
      case InstrKind::Store: return Label::ctr_eps();
      case InstrKind::Test: return Label::ctr_bit(true);
      case InstrKind::Load: {
        if (s_.stack.size() < 2) return std::nullopt;
        Nat len = val(s_.stack.back(), ctx_->p);
        std::uint64_t a = to_u64(val(s_.stack[s_.stack.size() - 2], ctx_->p));
        if (len >= ctx_->p.word_limit()) return std::nullopt;
        BitString b;
        for (std::uint64_t k = 0; k < to_u64(len); ++k) {
          auto m = s_.mem.find(a + k);
          if (m == s_.mem.end()) return std::nullopt;
          b.push_back(m->second);
        }
        return Label{LabelKind::Ctr, b};
      }
      default: return std::nullopt;
    }
  }

  std::string describe() const override {
    if (s_.init) return "cvm Init";
    if (s_.pc >= ctx_->prog.instrs.size()) return "cvm done";
    return "cvm @" + std::to_string(s_.pc) + " " + ctx_->prog.instrs[s_.pc].str(ctx_->p);
  }

  const ConcState& state() const { return s_; }

 private:
  std::shared_ptr<const CvmContext> ctx_;
  ConcState s_;
};

}  // namespace

ProcessP cvm_process(std::shared_ptr<const CvmContext> ctx, ConcState s) {
  return std::make_shared<CvmProc>(std::move(ctx), std::move(s));
}

Pts cvm_pts(const CvmProgram& prog, const AddrMap& addr, const OpSet& ops, const WordParams& p) {
  auto ctx = std::make_shared<CvmContext>();
  ctx->prog = prog;
  ctx->addr = addr;
  ctx->ops = &ops;
  ctx->p = p;
  return {cvm_process(ctx), {}};
}

}  // namespace pmx
