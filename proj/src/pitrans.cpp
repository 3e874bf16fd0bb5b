#include "pmx/pitrans.hpp"

#include "pmx/simplify.hpp"

#include <algorithm>
#include <functional>

namespace pmx {

// ---------------------------------------------------------------- pi processes

namespace {

PiP make_pi(PiKind k, std::string var, ExprP e, std::string tag, PiP p, PiP q) {
  auto n = std::make_shared<PiProcess>();
  n->kind = k;
  n->var = std::move(var);
  n->e = std::move(e);
  n->tag = std::move(tag);
  n->p = std::move(p);
  n->q = std::move(q);
  return n;
}

}  // namespace

PiP pi_nil() { return make_pi(PiKind::Nil, {}, nullptr, {}, nullptr, nullptr); }
PiP pi_repl(PiP p) { return make_pi(PiKind::Repl, {}, nullptr, {}, std::move(p), nullptr); }
PiP pi_par(PiP p, PiP q) { return make_pi(PiKind::Par, {}, nullptr, {}, std::move(p), std::move(q)); }
PiP pi_nu(std::string x, PiP p) { return make_pi(PiKind::NuTilde, std::move(x), nullptr, {}, std::move(p), nullptr); }
PiP pi_in(std::string x, PiP p) { return make_pi(PiKind::In, std::move(x), nullptr, {}, std::move(p), nullptr); }
PiP pi_out(std::string x, PiP p) { return make_pi(PiKind::Out, std::move(x), nullptr, {}, std::move(p), nullptr); }
PiP pi_event(std::string tag, PiP p) { return make_pi(PiKind::Event, {}, nullptr, std::move(tag), std::move(p), nullptr); }
PiP pi_let(std::string x, ExprP e, PiP then, PiP otherwise) {
  return make_pi(PiKind::Let, std::move(x), std::move(e), {}, std::move(then), std::move(otherwise));
}

namespace {

std::string pi_stmt(const PiProcess& n, const WordParams& wp) {
  switch (n.kind) {
    case PiKind::Nil: return "0";
    case PiKind::Repl: return "!";
    case PiKind::Par: return "|";
    case PiKind::NuTilde: return "new~ " + n.var;
    case PiKind::In: return "in(" + n.var + ")";
    case PiKind::Out: return "out(" + n.var + ")";
    case PiKind::Event: return "event(" + n.tag + ")";
    case PiKind::Let: return "let " + n.var + " = " + print_expr(n.e, wp);
  }
  return "?";
}

void print_pi_rec(const PiP& n, const WordParams& wp, std::string& out) {
  switch (n->kind) {
    case PiKind::Nil: out += "0"; return;
    case PiKind::Repl:
      out += "!(";
      print_pi_rec(n->p, wp, out);
      out += ")";
      return;
    case PiKind::Par:
      out += "(";
      print_pi_rec(n->p, wp, out);
      out += " | ";
      print_pi_rec(n->q, wp, out);
      out += ")";
      return;
    case PiKind::Let:
      out += pi_stmt(*n, wp) + " in ";
      if (n->q) {
        out += "(";
        print_pi_rec(n->p, wp, out);
        out += ") else (";
        print_pi_rec(n->q, wp, out);
        out += ")";
      } else {
        print_pi_rec(n->p, wp, out);
      }
      return;
    default:
      out += pi_stmt(*n, wp) + "; ";
      print_pi_rec(n->p, wp, out);
  }
}

}  // namespace

std::string print_pi(const PiP& p, const WordParams& wp) {
  std::string out;
  print_pi_rec(p, wp, out);
  return out;
}

ImlP pi_to_iml(const PiP& n, const WordParams& wp) {
  switch (n->kind) {
    case PiKind::Nil: return iml_nil();
    case PiKind::Repl: return iml_repl(pi_to_iml(n->p, wp));
    case PiKind::Par: return iml_par(pi_to_iml(n->p, wp), pi_to_iml(n->q, wp));
    case PiKind::NuTilde: return iml_new_tilde(n->var, pi_to_iml(n->p, wp), wp);
    case PiKind::In: return iml_in(n->var, pi_to_iml(n->p, wp));
    case PiKind::Out: return iml_out(mk_var(n->var), pi_to_iml(n->p, wp));
    case PiKind::Event: return iml_event(mk_const(op_tag(n->tag)), pi_to_iml(n->p, wp));
    case PiKind::Let:
      return iml_let(n->var, n->e, pi_to_iml(n->p, wp), n->q ? pi_to_iml(n->q, wp) : nullptr);
  }
  return iml_nil();
}

// ---------------------------------------------------------------- classification

namespace {

bool arith_op(const std::string& name, const OpSet& ops) {
  const OpInfo* o = ops.find(name);
  return o && o->builtin && !o->crypto;
}

/// Constants, variables, len, builtin arithmetic, optionally concatenation and ranges.
bool bitstring_expr(const ExprP& e, const OpSet& ops, bool concat, bool range) {
  switch (e->kind) {
    case ExprKind::Const:
    case ExprKind::Var: return true;
    case ExprKind::Ptr: return false;
    case ExprKind::Concat:
      if (!concat) return false;
      break;
    case ExprKind::Range:
      if (!range) return false;
      break;
    case ExprKind::Len: break;
    case ExprKind::Op:
      if (!arith_op(e->name, ops)) return false;
      break;
  }
  return std::all_of(e->args.begin(), e->args.end(), [&](auto& a) { return bitstring_expr(a, ops, concat, range); });
}

bool has_kind(const ExprP& e, ExprKind k) {
  bool found = false;
  subterms(e, [&](const ExprP& s) { found = found || s->kind == k; });
  return found;
}

}  // namespace

IfClass classify_if(const ExprP& e, const OpSet& ops) {
  return is_crypto_condition(e, ops) ? IfClass::Cryptographic : IfClass::Auxiliary;
}

ExprClass classify_expr(const ExprP& e, const OpSet& ops) {
  if (is_crypto_term(e, ops)) return ExprClass::Cryptographic;
  if (bitstring_expr(e, ops, true, false)) return ExprClass::Encoding;
  if (bitstring_expr(e, ops, false, true) && free_vars(e).size() == 1 && has_kind(e, ExprKind::Range))
    return ExprClass::Parsing;
  return ExprClass::None;
}

// ---------------------------------------------------------------- normalisation

namespace {

void collect_names(const ImlP& n, std::set<std::string>& names) {
  if (!n) return;
  if (!n->var.empty()) names.insert(n->var);
  if (n->e)
    for (auto& v : free_vars(n->e)) names.insert(v);
  collect_names(n->p, names);
  collect_names(n->q, names);
}

class Normalizer {
 public:
  Normalizer(const OpSet& ops, std::set<std::string> names) : ops_(ops), names_(std::move(names)) {}

  ImlP run(const ImlP& n) {
    switch (n->kind) {
      case ImlKind::Nil:
      case ImlKind::Hole: return n;
      case ImlKind::Repl: return iml_repl(run(n->p));
      case ImlKind::Par: return iml_par(run(n->p), run(n->q));
      case ImlKind::New: return iml_new(n->var, n->e, run(n->p));
      case ImlKind::In: return iml_in(n->var, run(n->p));
      case ImlKind::Event: return iml_event(n->e, run(n->p));
      case ImlKind::Out: {
        if (n->e->kind == ExprKind::Var) return iml_out(n->e, run(n->p));
        Lets lets;
        std::string v = bind(expr(n->e, lets), lets);
        return wrap(lets, iml_out(mk_var(v), run(n->p)));
      }
      case ImlKind::Let: {
        if (n->q) throw TranslateError("let " + n->var + " has an else branch");
        Lets lets;
        ExprP e = expr(n->e, lets);
        return wrap(lets, iml_let(n->var, e, run(n->p)));
      }
      case ImlKind::If: {
        if (n->q) throw TranslateError("if has an else branch");
        if (classify_if(n->e, ops_) == IfClass::Auxiliary) return iml_if(n->e, run(n->p));
        Lets lets;
        std::vector<ExprP> sides;
        for (auto& a : n->e->args) sides.push_back(a->kind == ExprKind::Var ? a : mk_var(bind(expr(a, lets), lets)));
        return wrap(lets, iml_if(mk_op("=", sides), run(n->p)));
      }
    }
    return n;
  }

 private:
  using Lets = std::vector<std::pair<std::string, ExprP>>;

  std::string fresh() {
    for (;;) {
      std::string v = "t" + std::to_string(++counter_);
      if (names_.insert(v).second) return v;
    }
  }
  std::string bind(ExprP e, Lets& lets) {
    if (e->kind == ExprKind::Var) return e->name;
    std::string v = fresh();
    lets.push_back({v, std::move(e)});
    return v;
  }
  static ImlP wrap(const Lets& lets, ImlP p) {
    for (auto it = lets.rbegin(); it != lets.rend(); ++it) p = iml_let(it->first, it->second, p);
    return p;
  }

  bool crypto_app(const ExprP& e) const {
    if (e->kind != ExprKind::Op) return false;
    const OpInfo* o = ops_.find(e->name);
    return o && o->crypto;
  }

  /// An expression of one of the three classes, with helper lets appended to `lets`.
  ExprP expr(const ExprP& e, Lets& lets) {
    if (e->kind == ExprKind::Var) return e;
    if (crypto_app(e)) {
      std::vector<ExprP> args;
      for (auto& a : e->args) {
        if (a->kind == ExprKind::Var || crypto_app(a)) args.push_back(expr(a, lets));
        else args.push_back(mk_var(bind(bits(a, lets), lets)));
      }
      return mk_op(e->name, args);
    }
    return bits(e, lets);
  }

  ExprP bits(const ExprP& e, Lets& lets) {
    std::function<ExprP(const ExprP&)> lift = [&](const ExprP& s) -> ExprP {
      if (crypto_app(s)) return mk_var(bind(expr(s, lets), lets));
      if (s->args.empty()) return s;
      std::vector<ExprP> args;
      for (auto& a : s->args) args.push_back(lift(a));
      switch (s->kind) {
        case ExprKind::Op: return mk_op(s->name, args);
        case ExprKind::Concat: return mk_concat(args);
        case ExprKind::Range: return mk_range(args[0], args[1], args[2]);
        case ExprKind::Len: return mk_len(args[0]);
        default: return s;
      }
    };
    ExprP r = lift(e);
    if (classify_expr(r, ops_) == ExprClass::None)
      throw TranslateError("expression " + print_expr(e, {}) + " is neither encoding, parsing nor cryptographic");
    return r;
  }

  const OpSet& ops_;
  std::set<std::string> names_;
  unsigned counter_ = 0;
};

}  // namespace

ImlP normalize(const ImlP& proc, const OpSet& ops) {
  std::set<std::string> names;
  collect_names(proc, names);
  return Normalizer(ops, names).run(proc);
}

// ---------------------------------------------------------------- encoders and parsers

namespace {

class Extractor {
 public:
  Extractor(const OpSet& ops, const WordParams& p, Extraction& out) : ops_(ops), p_(p), out_(out) {}

  PiP run(const ImlP& n, std::vector<ExprP>& aux) {
    switch (n->kind) {
      case ImlKind::Nil: return pi_nil();
      case ImlKind::Hole: throw TranslateError("holes cannot be translated");
      case ImlKind::Repl: {
        std::vector<ExprP> a = aux;
        return pi_repl(run(n->p, a));
      }
      case ImlKind::Par: {
        std::vector<ExprP> a = aux, b = aux;
        return pi_par(run(n->p, a), run(n->q, b));
      }
      case ImlKind::New: {
        const ImlP& l = n->p;
        bool tilde = n->e->kind == ExprKind::Const && n->e->value == bs(p_.k0, p_) && l->kind == ImlKind::Let &&
                     !l->q && l->e->kind == ExprKind::Op && l->e->name == "nonce" && l->e->args.size() == 1 &&
                     l->e->args[0]->kind == ExprKind::Var && l->e->args[0]->name == n->var;
        if (!tilde) throw TranslateError("new " + n->var + " is not a nonce restriction new~");
        return pi_nu(l->var, run(l->p, aux));
      }
      case ImlKind::In: return pi_in(n->var, run(n->p, aux));
      case ImlKind::Out:
        if (n->e->kind != ExprKind::Var) throw TranslateError("out(" + print_expr(n->e, p_) + ") is not normalised");
        return pi_out(n->e->name, run(n->p, aux));
      case ImlKind::Event: {
        std::string tag = n->e->kind == ExprKind::Op ? n->e->name : "event" + std::to_string(out_.events.size() + 1);
        out_.events[tag].insert(print_expr(n->e, p_));
        return pi_event(tag, run(n->p, aux));
      }
      case ImlKind::If: {
        if (classify_if(n->e, ops_) == IfClass::Auxiliary) {
          aux.push_back(n->e);
          return run(n->p, aux);
        }
        const ExprP& a = n->e->args[0];
        const ExprP& b = n->e->args[1];
        if (a->kind != ExprKind::Var || b->kind != ExprKind::Var)
          throw TranslateError("cryptographic if " + print_expr(n->e, p_) + " is not normalised");
        return pi_let("_", mk_op("eq", {a, b}), run(n->p, aux));
      }
      case ImlKind::Let: {
        switch (classify_expr(n->e, ops_)) {
          case ExprClass::Cryptographic: return pi_let(n->var, n->e, run(n->p, aux));
          case ExprClass::Encoding: {
            auto vars = vars_in_order(n->e);
            std::map<std::string, ExprP> ren;
            std::vector<ExprP> args;
            for (std::size_t i = 0; i < vars.size(); ++i) {
              ren[vars[i]] = mk_var("x" + std::to_string(i + 1));
              args.push_back(mk_var(vars[i]));
            }
            ExprP body = subst(n->e, ren);
            std::string name;
            for (auto& c : out_.encoders)
              if (same(c.body, body)) name = c.name;
            if (name.empty()) {
              name = "conc" + std::to_string(++counter_);
              EncoderDef c{name, {}, body};
              for (std::size_t i = 0; i < vars.size(); ++i) c.params.push_back("x" + std::to_string(i + 1));
              out_.encoders.push_back(c);
            }
            return pi_let(n->var, mk_op(name, args), run(n->p, aux));
          }
          case ExprClass::Parsing: {
            std::string v = *free_vars(n->e).begin();
            std::string name;
            for (auto& q : out_.parsers)
              if (q.var == v && same(q.body, n->e) && same_facts(q.facts, aux)) name = q.name;
            if (name.empty()) {
              name = "parse" + std::to_string(++counter_);
              out_.parsers.push_back({name, v, n->e, aux, nullptr, {}, 0});
            }
            return pi_let(n->var, mk_op(name, {mk_var(v)}), run(n->p, aux));
          }
          case ExprClass::None: break;
        }
        throw TranslateError("let " + n->var + " = " + print_expr(n->e, p_) + " is not normalised");
      }
    }
    return pi_nil();
  }

 private:
  static bool same_facts(const std::vector<ExprP>& a, const std::vector<ExprP>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!same(a[i], b[i])) return false;
    return true;
  }

  const OpSet& ops_;
  WordParams p_;
  Extraction& out_;
  unsigned counter_ = 0;
};

}  // namespace

Extraction extract_encoders_parsers(const ImlModule& normalized, const OpSet& ops, const WordParams& p) {
  Extraction out;
  Extractor x(ops, p, out);
  for (auto& [name, proc] : normalized.defs) {
    std::vector<ExprP> aux;
    out.defs.push_back({name, x.run(proc, aux)});
  }
  return out;
}

// ---------------------------------------------------------------- (C1)-(C4)

std::optional<EncoderShape> encoder_shape(const EncoderDef& c, std::string* why) {
  auto fail = [&](std::string m) -> std::optional<EncoderShape> {
    if (why) *why = std::move(m);
    return std::nullopt;
  };
  EncoderShape s;
  s.parts = c.body->kind == ExprKind::Concat ? c.body->args : std::vector<ExprP>{c.body};
  std::set<std::string> params, lens;
  std::size_t nx = 0, nl = 0;
  for (auto& f : s.parts) {
    if (f->kind == ExprKind::Var) {
      if (!params.insert(f->name).second) return fail("parameter " + f->name + " occurs twice");
      s.kinds.push_back(EncoderShape::Field::Param);
      ++nx;
    } else if (f->kind == ExprKind::Len && f->args[0]->kind == ExprKind::Var) {
      if (!lens.insert(f->args[0]->name).second) return fail("len(" + f->args[0]->name + ") occurs twice");
      s.kinds.push_back(EncoderShape::Field::Length);
      ++nl;
    } else if (f->kind == ExprKind::Const) {
      s.kinds.push_back(EncoderShape::Field::Tag);
    } else {
      return fail("field " + print_expr(f, {}) + " is not a parameter, length or constant");
    }
  }
  for (auto& l : lens)
    if (!params.count(l)) return fail("len(" + l + ") is not the length of a parameter field");
  if (nx != nl + 1) return fail("needs lengths for all parameters but one");
  return s;
}

C1Result check_c1(const std::vector<EncoderDef>& encoders, const OpSet& ops, const WordParams& p) {
  C1Result r;
  if (encoders.size() < 2) return r;
  struct Tag {
    std::string enc;
    std::uint64_t pos;
    BitString bits;
  };
  std::vector<Tag> tags;
  for (auto& c : encoders) {
    auto parts = c.body->kind == ExprKind::Concat ? c.body->args : std::vector<ExprP>{c.body};
    std::optional<Tag> t;
    std::uint64_t pos = 0;
    for (auto& f : parts) {
      if (f->kind == ExprKind::Const) {
        t = Tag{c.name, pos, f->value};
        break;
      }
      auto len = eval(get_len(f, p), {}, ops, p);
      if (!len) break;  // offset of later fields is not constant
      pos += to_u64(val(*len, p));
    }
    if (!t) {
      r.ok = false;
      r.problems.push_back(c.name + " has no constant tag at a fixed position");
      continue;
    }
    tags.push_back(*t);
  }
  for (std::size_t i = 0; i < tags.size(); ++i)
    for (std::size_t j = i + 1; j < tags.size(); ++j) {
      const Tag &a = tags[i], &b = tags[j];
      if (a.pos != b.pos) {
        r.ok = false;
        r.problems.push_back(a.enc + " and " + b.enc + " carry their tags at different positions");
        continue;
      }
      std::size_t n = std::min(a.bits.size(), b.bits.size());
      if (*sub(a.bits, 0, n) == *sub(b.bits, 0, n)) {
        r.ok = false;
        r.problems.push_back(a.enc + " and " + b.enc + " share the tag " + format_literal(n == a.bits.size() ? a.bits : b.bits, p));
      }
    }
  return r;
}

std::optional<unsigned> check_c3(const EncoderDef& c, const ParserDef& parser, const Solver& s) {
  ExprP e = simplify(s, {}, subst(parser.body, {{parser.var, c.body}}));
  if (e->kind != ExprKind::Var) return std::nullopt;
  for (std::size_t i = 0; i < c.params.size(); ++i)
    if (c.params[i] == e->name) return unsigned(i + 1);
  return std::nullopt;
}

C2C4Result check_c2_c4(const EncoderDef& c, const ParserDef& parser, const Solver& s) {
  C2C4Result r;
  const WordParams& p = s.params();
  std::string why;
  auto shape = encoder_shape(c, &why);
  if (!shape) {
    r.error = c.name + ": " + why;
    return r;
  }
  std::vector<ExprP> candidates;
  for (auto& f : parser.facts)
    subterms(f, [&](const ExprP& t) {
      if (t->kind != ExprKind::Range) return;
      auto fv = free_vars(t);
      if (fv.size() != 1 || *fv.begin() != parser.var) return;
      for (auto& q : candidates)
        if (same(q, t)) return;
      candidates.push_back(t);
    });
  const ExprP xp = mk_var("x'");
  ExprP len_sum;
  auto add = [&](ExprP t) { len_sum = len_sum ? mk_op("+N", {len_sum, t}) : t; };
  std::vector<ExprP> lens;
  for (std::size_t i = 0; i < shape->parts.size(); ++i) {
    if (shape->kinds[i] == EncoderShape::Field::Param) continue;
    std::vector<ExprP> parts = shape->parts;
    parts[i] = xp;
    ExprP probe = mk_concat(parts);
    FactSet sigma;
    sigma.add(mk_op("=", {mk_len(xp), get_len(shape->parts[i], p)}));
    ExprP found;
    for (auto& q : candidates)
      if (same(simplify(s, sigma, subst(q, {{parser.var, probe}})), xp)) {
        found = q;
        break;
      }
    if (!found) {
      r.error = "no condition extracts field " + std::to_string(i + 1) + " (" + print_expr(shape->parts[i], p) +
                ") of " + c.name;
      return r;
    }
    if (shape->kinds[i] == EncoderShape::Field::Tag) r.tag_terms.push_back(mk_op("=", {found, shape->parts[i]}));
    else add(found);
    lens.push_back(get_len(shape->parts[i], p));
  }
  for (auto& l : lens) add(l);
  r.phi_len = mk_op("<=", {len_sum ? len_sum : mk_word(0, p), mk_len(mk_var(parser.var))});
  FactSet phi;
  for (auto& f : parser.facts) phi.add(f);
  for (auto& t : r.tag_terms)
    if (!s.proves(phi, t)) {
      r.error = "conditions do not establish " + print_expr(t, p);
      return r;
    }
  r.len_unproved = !s.proves(phi, r.phi_len);
  ExprP g = r.phi_len;
  for (auto it = r.tag_terms.rbegin(); it != r.tag_terms.rend(); ++it) g = mk_op("and", {*it, g});
  r.guard = g;
  r.ok = true;
  return r;
}

// ---------------------------------------------------------------- key safety

namespace {

class KeySafe {
 public:
  KeySafe(const std::set<std::string>& tupling, std::string where, KeySafety& out)
      : tupling_(tupling), where_(std::move(where)), out_(out) {}

  void proc(const PiP& n) {
    if (!out_.violations.empty()) return;
    switch (n->kind) {
      case PiKind::Nil: return;
      case PiKind::Repl: proc(n->p); return;
      case PiKind::Par:
        proc(n->p);
        proc(n->q);
        return;
      case PiKind::In: proc(n->p); return;
      case PiKind::Event: proc(n->p); return;
      case PiKind::Out:
        if (dk_.count(n->var)) return fail(*n, "decryption key " + n->var + " is sent in out(" + n->var + ")");
        if (rnd_.count(n->var)) return fail(*n, "randomness " + n->var + " is sent in out(" + n->var + ")");
        proc(n->p);
        return;
      case PiKind::NuTilde: {
        const PiP& l = n->p;
        const std::string& r = n->var;
        if (keygen(l, r)) {
          rnd_.insert(r);
          dk_.insert(l->p->var);
          proc(l->p->p);
          return;
        }
        if (l->kind == PiKind::Let && uses_as_randomness(l->e, r)) {
          const ExprP& e = l->e;
          if (e->kind != ExprKind::Op || e->name != "E" || e->args.size() != 3 || e->args[2]->kind != ExprKind::Var ||
              e->args[2]->name != r)
            return fail(*l, "randomness " + r + " is not used as let x = E(isek(e1), e2, " + r + ")");
          if (e->args[0]->kind != ExprKind::Op || e->args[0]->name != "isek")
            return fail(*l, "the key of E must be checked with isek");
          rnd_.insert(r);
          expr(*l, e->args[0]->args[0]);
          expr(*l, e->args[1]);
          if (!out_.violations.empty()) return;
          proc(l->p);
          if (l->q) proc(l->q);
          return;
        }
        proc(l);
        return;
      }
      case PiKind::Let:
        expr(*n, n->e);
        if (!out_.violations.empty()) return;
        proc(n->p);
        if (n->q) proc(n->q);
        return;
    }
  }

 private:
  static bool is_app(const ExprP& e, const char* op, const std::string& arg) {
    return e->kind == ExprKind::Op && e->name == op && e->args.size() == 1 && e->args[0]->kind == ExprKind::Var &&
           e->args[0]->name == arg;
  }
  static bool uses_as_randomness(const ExprP& e, const std::string& r) {
    bool used = false;
    subterms(e, [&](const ExprP& t) {
      if (t->kind == ExprKind::Op && (t->name == "E" || t->name == "ek" || t->name == "dk"))
        for (auto& a : t->args)
          if (a->kind == ExprKind::Var && a->name == r) used = true;
    });
    return used;
  }
  bool keygen(const PiP& l, const std::string& r) const {
    return l->kind == PiKind::Let && !l->q && is_app(l->e, "ek", r) && l->p->kind == PiKind::Let && !l->p->q &&
           is_app(l->p->e, "dk", r);
  }

  void expr(const PiProcess& at, const ExprP& e) {
    if (!out_.violations.empty()) return;
    if (e->kind == ExprKind::Var) {
      if (dk_.count(e->name)) return fail(at, "decryption key " + e->name + " is used outside D");
      if (rnd_.count(e->name)) return fail(at, "randomness " + e->name + " is reused");
      return;
    }
    if (e->kind != ExprKind::Op) return fail(at, "bitstring expression " + print_expr(e, {}) + " is not allowed");
    if (e->name == "ek" || e->name == "dk") return fail(at, e->name + " is applied outside key generation");
    if (e->name == "E") return fail(at, "E is applied outside the encryption idiom");
    if (e->name == "D") {
      if (e->args.size() != 2 || e->args[0]->kind != ExprKind::Var || !dk_.count(e->args[0]->name))
        return fail(at, "D needs a decryption key from key generation");
      expr(at, e->args[1]);
      return;
    }
    static const std::set<std::string> signature{"isek", "isenc", "ekof", "fst", "snd", "eq", "pair"};
    if (!signature.count(e->name) && !tupling_.count(e->name)) out_.foreign_ops.insert(e->name);
    for (auto& a : e->args) expr(at, a);
  }

  void fail(const PiProcess& at, std::string msg) {
    out_.violations.push_back({"key-safety", where_ + (where_.empty() ? "" : ": ") + pi_stmt(at, {}), std::move(msg)});
  }

  const std::set<std::string>& tupling_;
  std::string where_;
  KeySafety& out_;
  std::set<std::string> dk_, rnd_;
};

}  // namespace

KeySafety check_key_safe(const PiP& proc, const std::set<std::string>& tupling, const std::string& where) {
  KeySafety out;
  KeySafe(tupling, where, out).proc(proc);
  return out;
}

// ---------------------------------------------------------------- pipeline

bool PiModel::ok() const {
  return std::none_of(issues.begin(), issues.end(), [](const Issue& i) { return !i.warning; });
}

const EncoderDef* PiModel::encoder(const std::string& name) const {
  for (auto& c : encoders)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

ExprP strip_casts(const ExprP& e, std::vector<std::string>& log, const WordParams& p) {
  if (!e) return e;
  if (e->kind == ExprKind::Op && e->name == "castToInt" && e->args.size() == 1) {
    std::string s = print_expr(e, p);
    if (std::find(log.begin(), log.end(), s) == log.end()) log.push_back(s);
    return strip_casts(e->args[0], log, p);
  }
  if (e->args.empty()) return e;
  std::vector<ExprP> args;
  for (auto& a : e->args) args.push_back(strip_casts(a, log, p));
  switch (e->kind) {
    case ExprKind::Op: return mk_op(e->name, args);
    case ExprKind::Concat: return mk_concat(args);
    case ExprKind::Range: return mk_range(args[0], args[1], args[2]);
    case ExprKind::Len: return mk_len(args[0]);
    case ExprKind::Ptr: return mk_ptr(e->base, args[0]);
    default: return e;
  }
}

ImlP strip_casts(const ImlP& n, std::vector<std::string>& log, const WordParams& p) {
  if (!n) return n;
  auto c = std::make_shared<Iml>(*n);
  c->e = strip_casts(n->e, log, p);
  c->p = strip_casts(n->p, log, p);
  c->q = strip_casts(n->q, log, p);
  return c;
}

}  // namespace

PiModel translate(const ImlModule& m, const OpSet& ops, const WordParams& p, const TranslateOptions& opt) {
  PiModel out;
  ImlModule norm;
  for (auto& [name, proc] : m.defs) {
    try {
      norm.defs.push_back({name, normalize(strip_casts(proc, out.stripped, p), ops)});
    } catch (const TranslateError& e) {
      out.issues.push_back({"normalize", name, e.what()});
      return out;
    }
  }
  Extraction x;
  try {
    x = extract_encoders_parsers(norm, ops, p);
  } catch (const TranslateError& e) {
    out.issues.push_back({"normalize", "", e.what()});
    return out;
  }
  out.defs = std::move(x.defs);
  out.encoders = std::move(x.encoders);
  out.parsers = std::move(x.parsers);
  out.events = std::move(x.events);

  for (auto& pr : check_c1(out.encoders, ops, p).problems) out.issues.push_back({"C1", "", pr});
  Solver s(ops, p, opt.solver);
  for (auto& parser : out.parsers) {
    std::string last;
    bool c3_any = false;
    for (auto& c : out.encoders) {
      auto i = check_c3(c, parser, s);
      if (!i) continue;
      c3_any = true;
      C2C4Result r = check_c2_c4(c, parser, s);
      if (!r.ok) {
        last = r.error;
        continue;
      }
      parser.encoder = c.name;
      parser.index = *i;
      parser.guard = r.guard;
      if (r.len_unproved)
        out.issues.push_back({"C4", parser.name,
                              "conditions do not establish " + print_expr(r.phi_len, p) + "; it is enforced by the parser",
                              !opt.strict_len});
      break;
    }
    if (parser.encoder.empty()) {
      if (!c3_any) out.issues.push_back({"C3", parser.name, "no encoder has " + parser.name + " as an inverse"});
      else out.issues.push_back({"C2", parser.name, last});
    }
  }
  std::set<std::string> tupling;
  for (auto& c : out.encoders) tupling.insert(c.name);
  for (auto& q : out.parsers) tupling.insert(q.name);
  for (auto& d : out.defs) {
    KeySafety k = check_key_safe(d.proc, tupling, d.name);
    out.issues.insert(out.issues.end(), k.violations.begin(), k.violations.end());
    for (auto& f : k.foreign_ops)
      out.issues.push_back({"key-safety", d.name, "operation " + f + " is outside the key-safe signature", true});
  }
  return out;
}

void register_ops(const PiModel& m, OpSet& ops) {
  const OpSet* base = &ops;
  auto snapshot = std::make_shared<OpSet>(*base);
  for (auto& c : m.encoders) {
    OpInfo o;
    o.name = c.name;
    o.arity = unsigned(c.params.size());
    o.crypto = true;
    o.fn = [c, snapshot](const std::vector<BitString>& a, const WordParams& p) -> std::optional<BitString> {
      Valuation eta;
      for (std::size_t i = 0; i < c.params.size(); ++i) eta.vars[c.params[i]] = a[i];
      return eval(c.body, eta, *snapshot, p);
    };
    ops.add(o);
  }
  for (auto& q : m.parsers) {
    OpInfo o;
    o.name = q.name;
    o.arity = 1;
    o.crypto = true;
    o.fn = [q, snapshot](const std::vector<BitString>& a, const WordParams& p) -> std::optional<BitString> {
      Valuation eta;
      eta.vars[q.var] = a[0];
      if (q.guard) {
        auto g = eval(q.guard, eta, *snapshot, p);
        if (!g || *g != bs(1, p)) return std::nullopt;
      }
      return eval(q.body, eta, *snapshot, p);
    };
    ops.add(o);
  }
}

// ---------------------------------------------------------------- ProVerif

namespace {

std::string params_decl(std::size_t n, const char* prefix) {
  std::string s;
  for (std::size_t i = 1; i <= n; ++i) s += (i > 1 ? ", " : "") + std::string(prefix) + std::to_string(i) + ": bitstring";
  return s;
}

std::string types(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += i ? ", bitstring" : "bitstring";
  return s;
}

std::string pv_expr(const ExprP& e) {
  if (e->kind == ExprKind::Var) return e->name;
  std::string s = e->name + "(";
  for (std::size_t i = 0; i < e->args.size(); ++i) s += (i ? ", " : "") + pv_expr(e->args[i]);
  return s + ")";
}

struct PvPrinter {
  std::string out;
  unsigned ok = 0;

  void line(int ind, const std::string& s) { out += std::string(2 * ind, ' ') + s + "\n"; }

  void proc(const PiP& n, int ind) {
    switch (n->kind) {
      case PiKind::Nil: line(ind, "0"); return;
      case PiKind::Repl:
        line(ind, "!(");
        proc(n->p, ind + 1);
        line(ind, ")");
        return;
      case PiKind::Par:
        line(ind, "(");
        proc(n->p, ind + 1);
        line(ind, ") | (");
        proc(n->q, ind + 1);
        line(ind, ")");
        return;
      case PiKind::NuTilde: line(ind, "new " + n->var + ": bitstring;"); break;
      case PiKind::In: line(ind, "in(c, " + n->var + ": bitstring);"); break;
      case PiKind::Out: line(ind, "out(c, " + n->var + ");"); break;
      case PiKind::Event: line(ind, "event " + n->tag + ";"); break;
      case PiKind::Let: {
        std::string v = n->var == "_" ? "ok" + std::to_string(++ok) : n->var;
        if (!n->q) {
          line(ind, "let " + v + " = " + pv_expr(n->e) + " in");
          break;
        }
        line(ind, "let " + v + " = " + pv_expr(n->e) + " in (");
        proc(n->p, ind + 1);
        line(ind, ") else (");
        proc(n->q, ind + 1);
        line(ind, ")");
        return;
      }
    }
    proc(n->p, ind);
  }
};

void pi_ops(const PiP& n, std::map<std::string, std::size_t>& ops) {
  if (!n) return;
  if (n->e) subterms(n->e, [&](const ExprP& t) {
      if (t->kind == ExprKind::Op) ops[t->name] = t->args.size();
    });
  pi_ops(n->p, ops);
  pi_ops(n->q, ops);
}

void pi_vars(const PiP& n, std::set<std::string> bound, std::set<std::string>& free) {
  if (!n) return;
  auto use = [&](const std::string& v) {
    if (!bound.count(v)) free.insert(v);
  };
  switch (n->kind) {
    case PiKind::Out: use(n->var); break;
    case PiKind::Let:
      for (auto& v : free_vars(n->e)) use(v);
      pi_vars(n->q, bound, free);
      bound.insert(n->var);
      break;
    case PiKind::NuTilde:
    case PiKind::In: bound.insert(n->var); break;
    case PiKind::Par: pi_vars(n->q, bound, free); break;
    default: break;
  }
  pi_vars(n->p, bound, free);
}

}  // namespace

std::string emit_proverif(const PiModel& m, const WordParams& p) {
  std::string o;
  o += "(* Applied pi model with extracted encoding and parsing operations. *)\n\n";
  o += "free c: channel.\n\n";
  o += "fun E(bitstring, bitstring, bitstring): bitstring.\n";
  o += "fun ek(bitstring): bitstring.\n";
  o += "fun dk(bitstring): bitstring.\n";
  o += "fun pair(bitstring, bitstring): bitstring.\n";
  o += "reduc forall t1: bitstring, m: bitstring, t2: bitstring; D(dk(t1), E(ek(t1), m, t2)) = m.\n";
  o += "reduc forall t1: bitstring, t2: bitstring, t3: bitstring; isenc(E(ek(t1), t2, t3)) = E(ek(t1), t2, t3).\n";
  o += "reduc forall t: bitstring; isek(ek(t)) = ek(t).\n";
  o += "reduc forall t1: bitstring, m: bitstring, t2: bitstring; ekof(E(ek(t1), m, t2)) = ek(t1).\n";
  o += "reduc forall x: bitstring, y: bitstring; fst(pair(x, y)) = x.\n";
  o += "reduc forall x: bitstring, y: bitstring; snd(pair(x, y)) = y.\n";
  o += "reduc forall x: bitstring; eq(x, x) = x.\n";

  static const std::set<std::string> fixed{"E", "ek", "dk", "pair", "D", "isenc", "isek", "ekof", "fst", "snd", "eq"};
  std::map<std::string, std::size_t> used;
  for (auto& d : m.defs) pi_ops(d.proc, used);
  std::set<std::string> extracted;
  for (auto& c : m.encoders) extracted.insert(c.name);
  for (auto& q : m.parsers) extracted.insert(q.name);
  std::string opaque;
  for (auto& [name, n] : used)
    if (!fixed.count(name) && !extracted.count(name)) opaque += "fun " + name + "(" + types(n) + "): bitstring.\n";
  if (!opaque.empty()) o += "\n" + opaque;

  if (!m.encoders.empty() || !m.parsers.empty()) o += "\n";
  for (auto& c : m.encoders) {
    o += "(* " + c.name + ": " + print_expr(c.body, p) + " *)\n";
    o += "fun " + c.name + "(" + types(c.params.size()) + "): bitstring.\n";
  }
  for (auto& q : m.parsers) {
    o += "(* " + q.name + ": " + print_expr(q.body, p) + " *)\n";
    const EncoderDef* c = m.encoder(q.encoder);
    if (!c) {
      o += "fun " + q.name + "(bitstring): bitstring.\n";
      continue;
    }
    std::string args;
    for (std::size_t i = 1; i <= c->params.size(); ++i) args += (i > 1 ? ", x" : "x") + std::to_string(i);
    o += "reduc forall " + params_decl(c->params.size(), "x") + "; " + q.name + "(" + c->name + "(" + args +
         ")) = x" + std::to_string(q.index) + ".\n";
  }

  if (!m.events.empty()) o += "\n";
  for (auto& [tag, srcs] : m.events) {
    std::string from;
    for (auto& s : srcs) from += (from.empty() ? "" : ", ") + s;
    o += "event " + tag + ".  (* " + from + " *)\n";
  }

  for (auto& d : m.defs) {
    std::set<std::string> free;
    pi_vars(d.proc, {}, free);
    std::string head = d.name.empty() ? "Main" : d.name;
    std::string ps;
    for (auto& v : free) ps += (ps.empty() ? "" : ", ") + v + ": bitstring";
    PvPrinter pr;
    pr.proc(d.proc, 1);
    o += "\nlet " + head + (ps.empty() ? "" : "(" + ps + ")") + " =\n" + pr.out + ".\n";
  }
  o += "\n(* The environment process and the queries are supplied separately. *)\nprocess 0\n";
  return o;
}

}  // namespace pmx
