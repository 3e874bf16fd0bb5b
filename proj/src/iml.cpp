#include "pmx/iml.hpp"

#include <set>
#include <stdexcept>

namespace pmx {

namespace {

ImlP make(ImlKind k, std::string var, ExprP e, ImlP p, ImlP q, unsigned hole = 0) {
  auto n = std::make_shared<Iml>();
  n->kind = k;
  n->var = std::move(var);
  n->e = std::move(e);
  n->p = std::move(p);
  n->q = std::move(q);
  n->hole = hole;
  return n;
}

}  // namespace

ImlP iml_nil() {
  static ImlP nil = make(ImlKind::Nil, {}, nullptr, nullptr, nullptr);
  return nil;
}
ImlP iml_repl(ImlP p) { return make(ImlKind::Repl, {}, nullptr, std::move(p), nullptr); }
ImlP iml_par(ImlP p, ImlP q) { return make(ImlKind::Par, {}, nullptr, std::move(p), std::move(q)); }
ImlP iml_new(std::string x, ExprP len, ImlP p) { return make(ImlKind::New, std::move(x), std::move(len), std::move(p), nullptr); }
ImlP iml_new_tilde(const std::string& x, ImlP p, const WordParams& wp) {
  std::string r = x + "~";
  return iml_new(r, mk_word(wp.k0, wp), iml_let(x, mk_op("nonce", {mk_var(r)}), std::move(p)));
}
ImlP iml_in(std::string x, ImlP p) { return make(ImlKind::In, std::move(x), nullptr, std::move(p), nullptr); }
ImlP iml_out(ExprP e, ImlP p) { return make(ImlKind::Out, {}, std::move(e), std::move(p), nullptr); }
ImlP iml_event(ExprP e, ImlP p) { return make(ImlKind::Event, {}, std::move(e), std::move(p), nullptr); }
ImlP iml_if(ExprP e, ImlP then, ImlP otherwise) {
  return make(ImlKind::If, {}, std::move(e), std::move(then), std::move(otherwise));
}
ImlP iml_let(std::string x, ExprP e, ImlP then, ImlP otherwise) {
  return make(ImlKind::Let, std::move(x), std::move(e), std::move(then), std::move(otherwise));
}
ImlP iml_hole(unsigned i) { return make(ImlKind::Hole, {}, nullptr, nullptr, nullptr, i); }

bool iml_equal(const ImlP& a, const ImlP& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->var != b->var || a->hole != b->hole) return false;
  if (bool(a->e) != bool(b->e) || (a->e && !same(a->e, b->e))) return false;
  return iml_equal(a->p, b->p) && iml_equal(a->q, b->q);
}

std::size_t iml_size(const ImlP& p) {
  if (!p) return 0;
  return 1 + (p->e ? expr_size(p->e) : 0) + iml_size(p->p) + iml_size(p->q);
}

std::vector<unsigned> holes(const ImlP& p) {
  std::vector<unsigned> out;
  std::vector<ImlP> todo{p};
  while (!todo.empty()) {
    ImlP n = todo.back();
    todo.pop_back();
    if (!n) continue;
    if (n->kind == ImlKind::Hole) out.push_back(n->hole);
    todo.push_back(n->q);
    todo.push_back(n->p);
  }
  return out;
}

ImlP ImlModule::find(const std::string& name) const {
  for (auto& [n, p] : defs)
    if (n == name) return p;
  return nullptr;
}

// ---------------------------------------------------------------- parser

namespace {

const std::set<std::string> kKeywords{"new", "new~", "in", "out", "event", "if", "then", "else", "let"};

struct ImlParser {
  Lexer& lx;
  const OpSet& ops;
  const WordParams& p;

  bool at_def() const {
    return lx.peek().kind == Token::Kind::Ident && !kKeywords.count(lx.peek().text) &&
           lx.peek(1).kind == Token::Kind::Sym && lx.peek(1).text == "=";
  }

  ImlP proc() {
    ImlP l = seq();
    while (lx.accept_sym("|")) l = iml_par(l, seq());
    return l;
  }

  // `; P` after a prefix; a missing continuation is 0.
  ImlP cont() {
    if (lx.accept_sym(";")) return seq();
    return iml_nil();
  }

  ExprP paren_expr() {
    lx.expect_sym("(");
    ExprP e = parse_expr(lx, ops, p);
    lx.expect_sym(")");
    return e;
  }

  ImlP seq() {
    const Token& t = lx.peek();
    if (t.kind == Token::Kind::Ident && t.text == "0") {
      lx.next();
      return iml_nil();
    }
    if (lx.accept_sym("!")) return iml_repl(seq());
    if (lx.accept_sym("(")) {
      ImlP inner = proc();
      lx.expect_sym(")");
      return inner;
    }
    if (lx.accept_sym("[")) {
      lx.expect_sym("]");
      const Token& idx = lx.peek();
      if (idx.kind != Token::Kind::Ident || idx.text.size() < 2 || idx.text[0] != '_' ||
          idx.text.find_first_not_of("0123456789", 1) != std::string::npos)
        lx.fail("expected hole index _i");
      unsigned i = unsigned(std::stoul(lx.next().text.substr(1)));
      return iml_hole(i);
    }
    if (lx.accept_ident("new")) {
      std::string x = lx.expect_name();
      lx.expect_sym("[");
      ExprP e = parse_expr(lx, ops, p);
      lx.expect_sym("]");
      return iml_new(x, e, cont());
    }
    if (lx.accept_ident("new~")) {
      std::string x = lx.expect_name();
      return iml_new_tilde(x, cont(), p);
    }
    if (lx.accept_ident("in")) {
      lx.expect_sym("(");
      std::string x = lx.expect_name();
      lx.expect_sym(")");
      return iml_in(x, cont());
    }
    if (lx.accept_ident("out")) {
      ExprP e = paren_expr();
      return iml_out(e, cont());
    }
    if (lx.accept_ident("event")) {
      ExprP e = paren_expr();
      return iml_event(e, cont());
    }
    if (lx.accept_ident("if")) {
      ExprP e = parse_expr(lx, ops, p);
      lx.expect_ident("then");
      ImlP a = seq();
      ImlP b = lx.accept_ident("else") ? seq() : nullptr;
      return iml_if(e, a, b);
    }
    if (lx.accept_ident("let")) {
      std::string x = lx.expect_name();
      lx.expect_sym("=");
      ExprP e = parse_expr(lx, ops, p);
      lx.expect_ident("in");
      ImlP a = seq();
      ImlP b = lx.accept_ident("else") ? seq() : nullptr;
      return iml_let(x, e, a, b);
    }
    lx.fail("expected process");
  }
};

// Whether an `else` printed right after this process would attach inside it.
bool open_tail(const ImlP& n) {
  switch (n->kind) {
    case ImlKind::Repl:
    case ImlKind::New:
    case ImlKind::In:
    case ImlKind::Out:
    case ImlKind::Event: return open_tail(n->p);
    case ImlKind::If:
    case ImlKind::Let: return n->q ? open_tail(n->q) : true;
    default: return false;
  }
}

bool tilde_sugar(const ImlP& n, const WordParams& p) {
  if (n->kind != ImlKind::New || n->var.size() < 2 || n->var.back() != '~') return false;
  if (n->e->kind != ExprKind::Const || n->e->value != bs(p.k0, p)) return false;
  const ImlP& l = n->p;
  std::string x = n->var.substr(0, n->var.size() - 1);
  return l->kind == ImlKind::Let && !l->q && l->var == x && l->e->kind == ExprKind::Op && l->e->name == "nonce" &&
         l->e->args.size() == 1 && l->e->args[0]->kind == ExprKind::Var && l->e->args[0]->name == n->var;
}

struct Printer {
  const WordParams& p;
  std::string out;

  void proc(const ImlP& n) {
    if (n->kind != ImlKind::Par) return seq(n);
    proc(n->p);
    out += " | ";
    seq(n->q);
  }

  void seq(const ImlP& n) {
    switch (n->kind) {
      case ImlKind::Nil: out += "0"; return;
      case ImlKind::Hole: out += "[]_" + std::to_string(n->hole); return;
      case ImlKind::Par:
        out += "(";
        proc(n);
        out += ")";
        return;
      case ImlKind::Repl:
        out += "!";
        seq(n->p);
        return;
      case ImlKind::New:
        if (tilde_sugar(n, p)) {
          out += "new~ " + n->p->var + "; ";
          seq(n->p->p);
          return;
        }
        out += "new " + n->var + "[" + print_expr(n->e, p) + "]; ";
        seq(n->p);
        return;
      case ImlKind::In:
        out += "in(" + n->var + "); ";
        seq(n->p);
        return;
      case ImlKind::Out:
      case ImlKind::Event:
        out += (n->kind == ImlKind::Out ? "out(" : "event(") + print_expr(n->e, p) + "); ";
        seq(n->p);
        return;
      case ImlKind::If:
      case ImlKind::Let:
        if (n->kind == ImlKind::If) out += "if " + print_expr(n->e, p) + " then ";
        else out += "let " + n->var + " = " + print_expr(n->e, p) + " in ";
        if (n->q && open_tail(n->p)) {
          out += "(";
          seq(n->p);
          out += ")";
        } else {
          seq(n->p);
        }
        if (n->q) {
          out += " else ";
          seq(n->q);
        }
        return;
    }
  }
};

}  // namespace

ImlModule parse_iml_module(std::string_view text, const OpSet& ops, const WordParams& p) {
  Lexer lx(text);
  ImlParser ps{lx, ops, p};
  ImlModule m;
  if (!ps.at_def()) {
    m.defs.push_back({"", ps.proc()});
    if (!lx.at_end()) lx.fail("trailing input");
    return m;
  }
  while (!lx.at_end()) {
    if (!ps.at_def()) lx.fail("expected definition `Name = process`");
    std::string name = lx.next().text;
    lx.expect_sym("=");
    if (m.find(name)) lx.fail("duplicate definition " + name);
    m.defs.push_back({name, ps.proc()});
  }
  return m;
}

ImlP parse_iml(std::string_view text, const OpSet& ops, const WordParams& p) {
  ImlModule m = parse_iml_module(text, ops, p);
  if (m.defs.size() != 1 || !m.defs[0].first.empty()) throw ParseError("expected a single process, got definitions");
  return m.defs[0].second;
}

std::string print_iml(const ImlP& proc, const WordParams& p) {
  Printer pr{p, {}};
  pr.proc(proc);
  return pr.out;
}

std::string print_module(const ImlModule& m, const WordParams& p) {
  if (m.defs.size() == 1 && m.defs[0].first.empty()) return print_iml(m.defs[0].second, p) + "\n";
  std::string out;
  for (auto& [name, proc] : m.defs) out += name + " =\n  " + print_iml(proc, p) + "\n";
  return out;
}

// ---------------------------------------------------------------- semantics

namespace {

struct ImlContext {
  OpSet ops;
  WordParams p;
  std::shared_ptr<const std::vector<Pts>> parts;
};

class ImlProc : public Process {
 public:
  ImlProc(ImlP n, std::shared_ptr<const ImlContext> ctx) : n_(std::move(n)), ctx_(std::move(ctx)) {}

  ProcKind kind(const Valuation&) const override {
    switch (n_->kind) {
      case ImlKind::Nil:
      case ImlKind::Hole: return ProcKind::Done;
      case ImlKind::Repl:
      case ImlKind::Par:
      case ImlKind::If:
      case ImlKind::Let: return ProcKind::Control;
      case ImlKind::New: return ProcKind::Randomising;
      case ImlKind::In: return ProcKind::Reading;
      case ImlKind::Out: return ProcKind::Writing;
      case ImlKind::Event: return ProcKind::Event;
    }
    return ProcKind::Done;
  }

  std::optional<std::size_t> rnd_length(const Valuation& eta) const override {
    if (n_->kind != ImlKind::New) return std::nullopt;
    auto l = eval(n_->e, eta, ctx_->ops, ctx_->p);
    if (!l) return std::nullopt;
    return std::size_t(val(*l, ctx_->p));
  }

  std::optional<Label> forced(const Valuation& eta) const override {
    switch (n_->kind) {
      case ImlKind::Par: return Label::ctr_eps();
      case ImlKind::If: {
        auto v = eval(n_->e, eta, ctx_->ops, ctx_->p);
        return Label::ctr_bit(!(v && *v == bs(0, ctx_->p)));
      }
      case ImlKind::Let: return Label::ctr_bit(eval(n_->e, eta, ctx_->ops, ctx_->p).has_value());
      default: return std::nullopt;
    }
  }

  StepResult step(const Valuation& eta, const Label& label) const override {
    const WordParams& p = ctx_->p;
    auto want = [&](LabelKind k) { return label.kind == k; };
    auto stuck = [&](const char* rule, std::string d) -> StepResult { return Stuck{rule, std::move(d)}; };
    switch (n_->kind) {
      case ImlKind::Nil:
      case ImlKind::Hole: return stuck("I-Nil", "no transition");
      case ImlKind::Repl:
        if (!want(LabelKind::Ctr) || !label.payload.empty()) return stuck("I-Repl", "expected ctr eps");
        return Transition{label, {next(eta, n_->p), next(eta, n_)}};
      case ImlKind::Par:
        if (!want(LabelKind::Ctr) || !label.payload.empty()) return stuck("I-Par", "expected ctr eps");
        return Transition{label, {next(eta, n_->p), next(eta, n_->q)}};
      case ImlKind::New: {
        auto l = rnd_length(eta);
        if (!l) return stuck("I-Nonce", "length undefined");
        if (!want(LabelKind::Rnd) || label.payload.size() != *l) return stuck("I-Nonce", "payload length mismatch");
        return Transition{label, {next(bind(eta, n_->var, label.payload), n_->p)}};
      }
      case ImlKind::In:
        if (!want(LabelKind::Read)) return stuck("I-In", "expected read");
        return Transition{label, {next(bind(eta, n_->var, label.payload), n_->p)}};
      case ImlKind::Out:
      case ImlKind::Event: {
        bool out = n_->kind == ImlKind::Out;
        auto b = eval(n_->e, eta, ctx_->ops, p);
        if (!b) return stuck(out ? "I-Out" : "I-Event", print_expr(n_->e, p) + " undefined");
        return Transition{{out ? LabelKind::Write : LabelKind::Event, *b}, {next(eta, n_->p)}};
      }
      case ImlKind::If: {
        if (!want(LabelKind::Ctr) || label.payload.size() != 1) return stuck("I-Cond", "expected ctr 0 or ctr 1");
        auto v = eval(n_->e, eta, ctx_->ops, p);
        bool t = v && *v == bs(1, p), f = v && *v == bs(0, p);
        if (label.payload[0] && t) return Transition{label, {next(eta, n_->p)}};
        if (!label.payload[0] && f && n_->q) return Transition{label, {next(eta, n_->q)}};
        return stuck(label.payload[0] ? "I-Cond-True" : "I-Cond-False",
                     print_expr(n_->e, p) + " = " + (v ? format_literal(*v, p) : std::string("undefined")));
      }
      case ImlKind::Let: {
        if (!want(LabelKind::Ctr) || label.payload.size() != 1) return stuck("I-Let", "expected ctr 0 or ctr 1");
        auto v = eval(n_->e, eta, ctx_->ops, p);
        if (label.payload[0] && v) return Transition{label, {next(bind(eta, n_->var, *v), n_->p)}};
        if (!label.payload[0] && !v && n_->q) return Transition{label, {next(eta, n_->q)}};
        return stuck(label.payload[0] ? "I-Let-True" : "I-Let-False",
                     print_expr(n_->e, p) + (v ? " defined" : " undefined"));
      }
    }
    return stuck("I-Nil", "no transition");
  }

  std::string describe() const override {
    std::string s = print_iml(n_, ctx_->p);
    return s.size() > 60 ? s.substr(0, 57) + "..." : s;
  }

 private:
  static Valuation bind(Valuation eta, const std::string& x, const BitString& b) {
    eta.vars[x] = b;
    return eta;
  }

  Successor next(Valuation eta, const ImlP& n) const {
    if (n->kind == ImlKind::Hole && ctx_->parts) return {std::move(eta), ctx_->parts->at(n->hole - 1).initial};
    return {std::move(eta), std::make_shared<ImlProc>(n, ctx_)};
  }

  ImlP n_;
  std::shared_ptr<const ImlContext> ctx_;
};

}  // namespace

ProcessP iml_process(ImlP proc, std::shared_ptr<const std::vector<Pts>> parts, const OpSet& ops, const WordParams& p) {
  auto ctx = std::make_shared<ImlContext>(ImlContext{ops, p, std::move(parts)});
  if (proc->kind == ImlKind::Hole && ctx->parts) return ctx->parts->at(proc->hole - 1).initial;
  return std::make_shared<ImlProc>(std::move(proc), std::move(ctx));
}

Pts iml_pts(ImlP proc, const OpSet& ops, const WordParams& p, Valuation eta0) {
  return {iml_process(std::move(proc), nullptr, ops, p), std::move(eta0)};
}

Pts embed(ImlP proc, std::vector<Pts> parts, const OpSet& ops, const WordParams& p, Valuation eta0) {
  auto hs = holes(proc);
  std::set<unsigned> seen;
  for (unsigned h : hs) {
    if (h == 0 || h > parts.size()) throw std::invalid_argument("hole []_" + std::to_string(h) + " has no part");
    if (!seen.insert(h).second) throw std::invalid_argument("duplicate hole []_" + std::to_string(h));
  }
  if (seen.size() != parts.size())
    throw std::invalid_argument("expected " + std::to_string(parts.size()) + " holes, found " +
                                std::to_string(seen.size()));
  auto shared = std::make_shared<const std::vector<Pts>>(std::move(parts));
  return {iml_process(std::move(proc), shared, ops, p), std::move(eta0)};
}

std::optional<unsigned> hole_at(const ImlP& proc, const History& h) {
  ImlP n = proc;
  std::size_t i = 0;
  auto label_is = [&](LabelKind k, std::optional<bool> bit) {
    if (i >= h.size() || !h[i].label || h[i].label->kind != k) return false;
    const BitString& b = h[i].label->payload;
    if (!bit) return k != LabelKind::Ctr || b.empty();
    return b.size() == 1 && bool(b[0]) == *bit;
  };
  auto index = [&]() -> std::size_t {
    if (i >= h.size() || h[i].label) return 0;
    return h[i++].index;
  };
  while (i < h.size()) {
    switch (n->kind) {
      case ImlKind::Nil:
      case ImlKind::Hole: return std::nullopt;
      case ImlKind::Repl:
      case ImlKind::Par: {
        if (!label_is(LabelKind::Ctr, std::nullopt)) return std::nullopt;
        ++i;
        std::size_t j = index();
        if (j == 1) n = n->p;
        else if (j == 2) n = n->kind == ImlKind::Repl ? n : n->q;
        else return std::nullopt;
        break;
      }
      case ImlKind::New:
      case ImlKind::Event:
        if (index() != 1) return std::nullopt;
        n = n->p;
        break;
      case ImlKind::In:
      case ImlKind::Out:
        if (!label_is(n->kind == ImlKind::In ? LabelKind::Read : LabelKind::Write, std::nullopt)) return std::nullopt;
        ++i;
        if (index() != 1) return std::nullopt;
        n = n->p;
        break;
      case ImlKind::If:
      case ImlKind::Let: {
        bool t = label_is(LabelKind::Ctr, true);
        if (!t && !label_is(LabelKind::Ctr, false)) return std::nullopt;
        ++i;
        if (index() != 1) return std::nullopt;
        n = t ? n->p : n->q;
        if (!n) return std::nullopt;
        break;
      }
    }
  }
  if (n->kind == ImlKind::Hole) return n->hole;
  return std::nullopt;
}

}  // namespace pmx
