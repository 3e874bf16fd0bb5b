#include "pmx/symexec.hpp"

#include "pmx/simplify.hpp"

#include <algorithm>
#include <limits>

namespace pmx {

std::string EmittedLabel::str(const WordParams& p) const {
  switch (kind) {
    case Kind::In: return "in(" + var + ");";
    case Kind::Nu: return "new " + var + "[" + print_expr(e, p) + "];";
    case Kind::Out: return "out(" + print_expr(e, p) + ");";
    case Kind::Event: return "event(" + print_expr(e, p) + ");";
    case Kind::If: return "if " + print_expr(e, p) + " then";
  }
  return "?";
}

SymExec::SymExec(const CvmProgram& prog, const OpSet& ops, const WordParams& p, SymOptions opt)
    : prog_(prog), ops_(ops), p_(p), opt_(opt), solver_(ops, p, opt.solver) {}

bool SymExec::fail(const std::string& rule, std::string detail, ExprP obligation) {
  fail_ = SymFail{rule, s_.pc, std::move(detail), std::move(obligation), s_.sigma};
  return false;
}

bool SymExec::prove(const ExprP& phi) { return solver_.proves(s_.sigma, phi); }

std::optional<ExprP> SymExec::pop() {
  if (s_.stack.empty()) return std::nullopt;
  ExprP e = s_.stack.back();
  s_.stack.pop_back();
  return e;
}

std::string SymExec::fresh(const std::string& v) {
  std::string name = v;
  for (unsigned i = 1; s_.names.count(name); ++i) name = v + "_" + std::to_string(i);
  s_.names.insert(name);
  return name;
}

ExprP SymExec::rewrite_test(const ExprP& e) {
  if (!opt_.cmp_rewrite || e->kind != ExprKind::Op || e->name != "=" || e->args.size() != 2) return e;
  for (int side = 0; side < 2; ++side) {
    const ExprP& c = e->args[side];
    const ExprP& z = e->args[1 - side];
    if (c->kind != ExprKind::Op || c->args.size() != 2 || z->kind != ExprKind::Const || val(z->value, p_) != 0)
      continue;
    const OpInfo* info = ops_.find(c->name);
    if (!info || !info->compare_rewrite) continue;
    const ExprP& a = c->args[0];
    const ExprP& b = c->args[1];
    if (prove(mk_op("=", {get_len(a, p_), get_len(b, p_)}))) return mk_op("=", {a, b});
  }
  return e;
}

bool SymExec::step() {
  if (fail_) return false;
  const ExprP i0 = mk_word(0, p_);
  if (s_.init) {
    for (auto& v : prog_.ref_vars()) {
      s_.alloc[PtrBase::stack(v)] = mk_word(p_.N, p_);
      s_.mem[PtrBase::stack(v)] = mk_const({});
    }
    for (auto& in : prog_.instrs)
      if (in.kind == InstrKind::Env) s_.names.insert(in.var);
    s_.init = false;
    trace_.push_back({std::numeric_limits<std::size_t>::max(), "Init", {}, {}, {}, {}});
    return true;
  }
  if (s_.pc >= prog_.instrs.size()) return false;
  const Instr& in = prog_.instrs[s_.pc];
  TraceRow row{s_.pc, in.str(p_), in.note, {}, {}, {}};
  auto underflow = [&](const char* rule) { return fail(rule, "stack underflow"); };
  auto need_free = [&](const char* rule, const ExprP& e) {
    if (ptr_free(e)) return true;
    fail(rule, print_expr(e, p_) + " contains a pointer");
    return false;
  };

  switch (in.kind) {
    case InstrKind::Const: s_.stack.push_back(mk_const(in.value)); break;
    case InstrKind::Ref: s_.stack.push_back(mk_ptr(PtrBase::stack(in.var), i0)); break;
    case InstrKind::Malloc: {
      auto el = pop();
      if (!el) return underflow("S-Malloc");
      if (!need_free("S-Malloc", *el)) return false;
      PtrBase pb = PtrBase::heap_id(s_.next_heap++);
      s_.alloc[pb] = *el;
      s_.mem[pb] = mk_const({});
      s_.stack.push_back(mk_ptr(pb, i0));
      row.mem.push_back({pb, s_.mem[pb]});
      break;
    }
    case InstrKind::Load: {
      auto el = pop();
      auto ptr = pop();
      if (!el || !ptr) return underflow("S-Load");
      if ((*ptr)->kind != ExprKind::Ptr) return fail("S-Load", print_expr(*ptr, p_) + " is not a pointer");
      if (!need_free("S-Load", *el)) return false;
      auto it = s_.mem.find((*ptr)->base);
      if (it == s_.mem.end()) return fail("S-Load", (*ptr)->base.str() + " is not allocated");
      const ExprP& eo = (*ptr)->args[0];
      ExprP ob = mk_op("<=", {mk_op("+N", {eo, *el}), get_len(it->second, p_)});
      if (!prove(ob)) return fail("S-Load", "cannot prove " + print_expr(ob, p_), ob);
      s_.stack.push_back(simplify(solver_, s_.sigma, mk_range(it->second, eo, *el)));
      break;
    }
    case InstrKind::In: {
      auto el = pop();
      if (!el) return underflow("S-In");
      if (!need_free("S-In", *el)) return false;
      std::string v = fresh(in.var);
      ExprP fact = mk_op("=", {mk_len(mk_var(v)), *el});
      s_.sigma.add(fact);
      row.facts.push_back(fact);
      EmittedLabel l{in.rnd ? EmittedLabel::Kind::Nu : EmittedLabel::Kind::In, v, in.rnd ? *el : nullptr};
      labels_.push_back(l);
      row.labels.push_back(l);
      s_.stack.push_back(mk_var(v));
      break;
    }
    case InstrKind::Env:
      s_.stack.push_back(mk_var(in.var));
      s_.stack.push_back(mk_len(mk_var(in.var)));
      break;
    case InstrKind::Apply: {
      const OpInfo* info = ops_.find(in.op);
      if (!info) return fail("S-Apply", "unknown operation " + in.op);
      std::vector<ExprP> args;
      for (unsigned k = 0; k < info->arity; ++k) {
        auto a = pop();
        if (!a) return underflow("S-Apply");
        args.push_back(*a);
      }
      ExprP e = apply_sym(in.op, args, ops_);
      if (!e) return fail("S-Apply", "apply(" + in.op + ") is undefined on pointer arguments");
      s_.stack.push_back(e);
      s_.stack.push_back(get_len(e, p_));
      break;
    }
    case InstrKind::Out: {
      auto e = pop();
      if (!e) return underflow("S-Out");
      if (!need_free("S-Out", *e)) return false;
      EmittedLabel l{in.event ? EmittedLabel::Kind::Event : EmittedLabel::Kind::Out, {}, *e};
      labels_.push_back(l);
      row.labels.push_back(l);
      break;
    }
    case InstrKind::Test: {
      auto e = pop();
      if (!e) return underflow("S-Test");
      if (!need_free("S-Test", *e)) return false;
      ExprP c = rewrite_test(*e);
      s_.sigma.add(*e);
      s_.sigma.add(c);
      if (opt_.emit == EmitMode::All || is_crypto_condition(c, ops_)) {
        EmittedLabel l{EmittedLabel::Kind::If, {}, c};
        labels_.push_back(l);
        row.labels.push_back(l);
      } else {
        row.facts.push_back(c);
      }
      break;
    }
    case InstrKind::Store: {
      auto ptr = pop();
      auto e = pop();
      if (!ptr || !e) return underflow("S-Store");
      if ((*ptr)->kind != ExprKind::Ptr) return fail("S-Store", print_expr(*ptr, p_) + " is not a pointer");
      PtrBase pb = (*ptr)->base;
      auto mh = s_.mem.find(pb);
      auto ms = s_.alloc.find(pb);
      if (mh == s_.mem.end() || ms == s_.alloc.end()) return fail("S-Store", pb.str() + " is not allocated");
      const ExprP& eo = (*ptr)->args[0];
      ExprP eh = mh->second, es = ms->second;
      ExprP elh = get_len(eh, p_), el = get_len(*e, p_);
      ExprP end = mk_op("+N", {eo, el});
      ExprP updated;
      if (prove(mk_op("<", {end, elh}))) {
        updated = mk_concat({mk_range(eh, i0, eo), *e, mk_range(eh, end, mk_op("-N", {elh, end}))});
      } else {
        std::vector<ExprP> goals{mk_op(">=", {end, elh}), mk_op("<=", {eo, elh}), mk_op("<=", {end, es})};
        for (auto& g : goals)
          if (!prove(g)) return fail("S-Store", "cannot prove " + print_expr(g, p_), g);
        updated = mk_concat({mk_range(eh, i0, eo), *e});
      }
      updated = simplify(solver_, s_.sigma, updated);
      s_.mem[pb] = updated;
      row.mem.push_back({pb, updated});
      break;
    }
  }
  ++s_.pc;
  trace_.push_back(std::move(row));
  return true;
}

ImlP model_from_labels(const std::vector<EmittedLabel>& labels) {
  ImlP p = iml_nil();
  for (auto it = labels.rbegin(); it != labels.rend(); ++it) {
    switch (it->kind) {
      case EmittedLabel::Kind::In: p = iml_in(it->var, p); break;
      case EmittedLabel::Kind::Nu: p = iml_new(it->var, it->e, p); break;
      case EmittedLabel::Kind::Out: p = iml_out(it->e, p); break;
      case EmittedLabel::Kind::Event: p = iml_event(it->e, p); break;
      case EmittedLabel::Kind::If: p = iml_if(it->e, p); break;
    }
  }
  return p;
}

SymResult extract_model(const CvmProgram& prog, const OpSet& ops, const WordParams& p, SymOptions opt) {
  SymExec x(prog, ops, p, opt);
  while (x.step()) {
  }
  SymResult r;
  r.fail = x.failure();
  r.labels = x.labels();
  r.trace = x.trace();
  r.final_state = x.state();
  if (!r.fail) r.model = model_from_labels(r.labels);
  return r;
}

std::vector<TraceRow> group_rows(const std::vector<TraceRow>& trace) {
  std::vector<TraceRow> out;
  bool open = false;
  for (auto& r : trace) {
    if (r.index == std::numeric_limits<std::size_t>::max()) continue;
    if (!open || out.back().note != r.note) {
      out.push_back({out.size() + 1, r.note, r.note, {}, {}, {}});
      open = true;
    }
    TraceRow& g = out.back();
    for (auto& [pb, e] : r.mem) {
      if (pb.kind == PtrBase::Kind::Stack && pb.var == "dummy") continue;
      auto it = std::find_if(g.mem.begin(), g.mem.end(), [&](auto& m) { return m.first == pb; });
      if (it == g.mem.end()) g.mem.push_back({pb, e});
      else it->second = e;
    }
    g.facts.insert(g.facts.end(), r.facts.begin(), r.facts.end());
    g.labels.insert(g.labels.end(), r.labels.begin(), r.labels.end());
  }
  return out;
}

std::string format_trace(const std::vector<TraceRow>& rows, const WordParams& p) {
  auto flat = [](std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
  };
  std::string out;
  for (auto& r : rows) {
    std::string idx = r.index == std::numeric_limits<std::size_t>::max() ? "-" : std::to_string(r.index);
    std::string mem, facts, iml;
    for (auto& [pb, e] : r.mem) mem += (mem.empty() ? "" : "; ") + pb.str() + " => " + print_expr(e, p);
    for (auto& f : r.facts) facts += (facts.empty() ? "" : "; ") + print_expr(f, p);
    for (auto& l : r.labels) iml += (iml.empty() ? "" : " ") + l.str(p);
    out += idx + "\t" + flat(r.instr) + "\t" + mem + "\t" + facts + "\t" + iml + "\n";
  }
  return out;
}

}  // namespace pmx
