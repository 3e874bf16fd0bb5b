#include "pmx/simplify.hpp"

namespace pmx {

namespace {

constexpr int kMaxDepth = 8;

bool is_zero(const ExprP& e) {
  if (e->kind != ExprKind::Const) return false;
  for (std::size_t i = 0; i < e->value.size(); ++i)
    if (e->value[i]) return false;
  return true;
}

bool numeric_op(const std::string& n) {
  return n == "+N" || n == "-N" || n == "=" || n == "<=" || n == "<" || n == ">" || n == ">=";
}

struct Simplifier {
  const Solver& s;
  const FactSet& sigma;
  const WordParams& p;

  Simplifier(const Solver& s_, const FactSet& sigma_) : s(s_), sigma(sigma_), p(s_.params()) {}

  bool proves(const ExprP& f) const { return s.proves(sigma, f); }

  ExprP zero() const { return mk_word(0, p); }

  /// Value-preserving cleanup for terms only read through val().
  ExprP numeric(const ExprP& e) const {
    if (e->kind != ExprKind::Op || e->args.size() != 2) return e;
    const auto& n = e->name;
    const ExprP& a = e->args[0];
    const ExprP& b = e->args[1];
    if (n == "+N" && is_zero(a)) return numeric(b);
    if ((n == "+N" || n == "-N") && is_zero(b)) return numeric(a);
    if (n == "+b" && is_zero(a) && a->value.size() == p.N) return numeric(b);
    if (n == "+b" && is_zero(b) && b->value.size() == p.N) return numeric(a);
    return e;
  }

  ExprP fold(const ExprP& e) const {
    if (e->kind == ExprKind::Const || e->kind == ExprKind::Var || !is_ground(e)) return e;
    if (e->kind == ExprKind::Op) {
      const OpInfo* op = s.ops().find(e->name);
      if (!op || op->crypto || !op->deterministic) return e;
    }
    auto v = eval(e, {}, s.ops(), p);
    return v ? mk_const(*v) : e;
  }

  ExprP merge_consts(const ExprP& e) const {
    if (e->kind != ExprKind::Concat) return e;
    std::vector<ExprP> out;
    for (auto& part : e->args) {
      if (part->kind == ExprKind::Const && !out.empty() && out.back()->kind == ExprKind::Const)
        out.back() = mk_const(concat(out.back()->value, part->value));
      else
        out.push_back(part);
    }
    return mk_concat(out);
  }

  ExprP plus(const ExprP& a, const ExprP& b) const { return numeric(fold(mk_op("+N", {a, b}))); }
  ExprP minus(const ExprP& a, const ExprP& b) const { return numeric(fold(mk_op("-N", {a, b}))); }

  std::vector<ExprP> parts(const ExprP& e) const {
    if (e->kind == ExprKind::Concat) return e->args;
    return {e};
  }

  /// Smallest i with Σ ⊢ l >= l' ∧ l <= l' +N getLen(e_i), along with l'.
  std::optional<std::pair<std::size_t, ExprP>> boundary(const ExprP& l, const std::vector<ExprP>& es) const {
    ExprP prefix = zero();
    for (std::size_t i = 0; i < es.size(); ++i) {
      ExprP upto = plus(prefix, get_len(es[i], p));
      if (proves(mk_op(">=", {l, prefix})) && proves(mk_op("<=", {l, upto}))) return std::make_pair(i, prefix);
      prefix = upto;
    }
    return std::nullopt;
  }

  ExprP cut_left(const ExprP& l, const ExprP& e, int depth) const {
    ExprP fallback = mk_range(e, zero(), l);
    if (e->kind != ExprKind::Concat || depth > kMaxDepth) return fallback;
    auto es = parts(e);
    auto b = boundary(l, es);
    if (!b) return fallback;
    auto [i, prefix] = *b;
    std::vector<ExprP> out(es.begin(), es.begin() + long(i));
    out.push_back(simplify(mk_range(es[i], zero(), minus(l, prefix)), depth + 1));
    return merge_consts(mk_concat(out));
  }

  ExprP cut_right(const ExprP& l, const ExprP& e, int depth) const {
    ExprP fallback = mk_range(e, l, minus(get_len(e, p), l));
    if (e->kind != ExprKind::Concat || depth > kMaxDepth) return fallback;
    auto es = parts(e);
    auto b = boundary(l, es);
    if (!b) return fallback;
    auto [i, prefix] = *b;
    ExprP off = minus(l, prefix);
    std::vector<ExprP> out{simplify(mk_range(es[i], off, minus(get_len(es[i], p), off)), depth + 1)};
    out.insert(out.end(), es.begin() + long(i) + 1, es.end());
    return merge_consts(mk_concat(out));
  }

  ExprP range(const ExprP& e, const ExprP& o, const ExprP& l, int depth) const {
    ExprP literal = mk_range(e, o, l);
    if (depth > kMaxDepth) return literal;
    ExprP len = numeric(fold(get_len(e, p)));
    bool zero_off = is_zero(o) || proves(mk_op("=", {o, zero()}));
    if (zero_off && (same(l, len) || proves(mk_op("=", {l, len})))) return e;
    if (proves(mk_op("=", {l, zero()}))) return mk_const(BitString{});
    if (e->kind == ExprKind::Range)
      return simplify(mk_range(e->args[0], plus(o, e->args[1]), l), depth + 1);
    if (e->kind == ExprKind::Concat) {
      ExprP right = cut_right(o, e, depth + 1);
      ExprP r = cut_left(l, right, depth + 1);
      if (same(right, mk_range(e, o, minus(get_len(e, p), o))) && r->kind == ExprKind::Range) return literal;
      if (r->kind == ExprKind::Range && !same(r, literal)) r = simplify(r, depth + 1);
      if (expr_size(r) > expr_size(literal) + 8) return literal;
      return r;
    }
    return literal;
  }

  ExprP simplify(const ExprP& e, int depth = 0) const {
    switch (e->kind) {
      case ExprKind::Const:
      case ExprKind::Var: return e;
      case ExprKind::Ptr: return mk_ptr(e->base, simplify(e->args[0], depth));
      case ExprKind::Len: return fold(mk_len(simplify(e->args[0], depth)));
      case ExprKind::Concat: {
        std::vector<ExprP> out;
        for (auto& a : e->args) out.push_back(simplify(a, depth));
        return merge_consts(mk_concat(out));
      }
      case ExprKind::Op: {
        std::vector<ExprP> out;
        for (auto& a : e->args) {
          ExprP x = simplify(a, depth);
          out.push_back(numeric_op(e->name) ? numeric(x) : x);
        }
        ExprP r = fold(mk_op(e->name, out));
        if (r->kind == ExprKind::Op && r->name == "+b") {
          if (is_zero(r->args[0]) && r->args[0]->value.size() == p.N) return r->args[1];
          if (is_zero(r->args[1]) && r->args[1]->value.size() == p.N) return r->args[0];
        }
        return r;
      }
      case ExprKind::Range: {
        ExprP base = simplify(e->args[0], depth);
        ExprP o = numeric(simplify(e->args[1], depth));
        ExprP l = numeric(simplify(e->args[2], depth));
        ExprP folded = fold(mk_range(base, o, l));
        if (folded->kind == ExprKind::Const) return folded;
        return range(base, o, l, depth);
      }
    }
    return e;
  }
};

}  // namespace

ExprP cut_left(const Solver& s, const FactSet& sigma, const ExprP& l, const ExprP& e) {
  return Simplifier(s, sigma).cut_left(l, e, 0);
}

ExprP cut_right(const Solver& s, const FactSet& sigma, const ExprP& l, const ExprP& e) {
  return Simplifier(s, sigma).cut_right(l, e, 0);
}

ExprP simplify(const Solver& s, const FactSet& sigma, const ExprP& e) { return Simplifier(s, sigma).simplify(e); }

}  // namespace pmx
