#include "pmx/solver.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <sstream>

namespace pmx {

namespace {

using Int = Nat;

/// Σ c_i x_i + k
struct Lin {
  std::map<int, Int> c;
  Int k = 0;

  static Lin constant(Int v) {
    Lin l;
    l.k = std::move(v);
    return l;
  }
  static Lin var(int i) {
    Lin l;
    l.c[i] = 1;
    return l;
  }
  Lin& add(const Lin& o, const Int& m = 1) {
    for (auto& [i, v] : o.c) {
      Int& slot = c[i];
      slot += m * v;
      if (slot == 0) c.erase(i);
    }
    k += m * o.k;
    return *this;
  }
  bool is_const() const { return c.empty(); }
};

Lin operator+(Lin a, const Lin& b) { return a.add(b); }
Lin operator-(Lin a, const Lin& b) { return a.add(b, -1); }
Lin operator+(Lin a, const Int& v) {
  a.k += v;
  return a;
}
Lin operator-(Lin a, const Int& v) {
  a.k -= v;
  return a;
}

/// e >= 0, or e == 0 when eq.
struct Constraint {
  Lin e;
  bool eq = false;
};

struct Tree {
  enum Kind { Leaf, And, Or } kind = And;
  Constraint c;
  std::vector<Tree> kids;

  static Tree leaf(Lin e, bool eq) { return Tree{Leaf, Constraint{std::move(e), eq}, {}}; }
  static Tree conj(std::vector<Tree> k) { return Tree{And, {}, std::move(k)}; }
  static Tree disj(std::vector<Tree> k) { return Tree{Or, {}, std::move(k)}; }
  static Tree truth() { return conj({}); }
  static Tree falsity() { return disj({}); }
};

Tree ge(const Lin& a, const Lin& b) { return Tree::leaf(a - b, false); }  // a >= b
Tree gt(const Lin& a, const Lin& b) { return Tree::leaf(a - b - Int(1), false); }
Tree eq(const Lin& a, const Lin& b) { return Tree::leaf(a - b, true); }
Tree ne(const Lin& a, const Lin& b) { return Tree::disj({gt(a, b), gt(b, a)}); }

Int gcd(Int a, Int b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    Int t = a % b;
    a = b;
    b = t;
  }
  return a;
}

Int floor_div(const Int& a, const Int& b) {  // b > 0
  Int q = a / b;
  if ((a % b != 0) && (a < 0)) q -= 1;
  return q;
}

/// Normalises in place; returns false if the constraint is infeasible on its own.
bool normalise(Constraint& c) {
  if (c.e.c.empty()) return c.eq ? c.e.k == 0 : c.e.k >= 0;
  Int g = 0;
  for (auto& [i, v] : c.e.c) g = gcd(g, v);
  if (c.eq) {
    if (c.e.k % g != 0) return false;
    for (auto& [i, v] : c.e.c) v /= g;
    c.e.k /= g;
    if (c.e.c.begin()->second < 0) {
      for (auto& [i, v] : c.e.c) v = -v;
      c.e.k = -c.e.k;
    }
  } else if (g != 1) {
    for (auto& [i, v] : c.e.c) v /= g;
    c.e.k = floor_div(c.e.k, g);
  }
  return true;
}

std::string key_of(const Constraint& c) {
  std::string s = c.eq ? "=" : ">";
  for (auto& [i, v] : c.e.c) s += std::to_string(i) + ":" + v.str() + ",";
  return s;
}

enum class Fm { Unsat, Unknown };

/// Fourier-Motzkin over integer-tightened constraints; all variables are naturals.
Fm fm_unsat(std::vector<Constraint> cs, std::size_t nvars, std::size_t limit) {
  std::vector<Constraint> ineq;
  std::vector<Constraint> eqs;
  for (std::size_t i = 0; i < nvars; ++i) cs.push_back({Lin::var(int(i)), false});
  for (auto& c : cs) {
    if (!normalise(c)) return Fm::Unsat;
    if (c.e.c.empty()) continue;
    (c.eq ? eqs : ineq).push_back(c);
  }
  // equality elimination
  while (!eqs.empty()) {
    Constraint E = eqs.back();
    eqs.pop_back();
    if (!normalise(E)) return Fm::Unsat;
    if (E.e.c.empty()) continue;
    auto [x, a] = *std::min_element(E.e.c.begin(), E.e.c.end(), [](auto& l, auto& r) {
      return abs(l.second) < abs(r.second);
    });
    Int absa = abs(a);
    auto elim = [&](Constraint& C) {
      auto it = C.e.c.find(x);
      if (it == C.e.c.end()) return;
      Int b = it->second;
      Lin n = C.e;
      for (auto& [i, v] : n.c) v *= absa;
      n.k *= absa;
      n.add(E.e, a > 0 ? Int(-b) : b);
      C.e = std::move(n);
    };
    for (auto& C : eqs) elim(C);
    for (auto& C : ineq) elim(C);
    // x >= 0 is kept through its substitute: x = -(E - a x)/a
    Lin sub = E.e;
    sub.c.erase(x);
    if (a > 0) {
      Lin neg;
      neg.add(sub, -1);
      ineq.push_back({neg, false});
    } else {
      ineq.push_back({sub, false});
    }
  }
  std::vector<Constraint> work;
  std::map<std::string, std::size_t> seen;
  auto push = [&](Constraint c, std::vector<Constraint>& into, std::map<std::string, std::size_t>& idx) -> bool {
    if (!normalise(c)) return false;
    if (c.e.c.empty()) return true;
    std::string k = key_of(c);
    auto it = idx.find(k);
    if (it != idx.end()) {
      if (c.e.k < into[it->second].e.k) into[it->second].e.k = c.e.k;
      return true;
    }
    idx[k] = into.size();
    into.push_back(std::move(c));
    return true;
  };
  for (auto& c : ineq)
    if (!push(c, work, seen)) return Fm::Unsat;
  for (;;) {
    if (work.empty()) return Fm::Unknown;
    std::map<int, std::pair<std::size_t, std::size_t>> occ;
    for (auto& c : work)
      for (auto& [i, v] : c.e.c) (v > 0 ? occ[i].first : occ[i].second)++;
    int best = -1;
    std::size_t cost = SIZE_MAX;
    for (auto& [i, pn] : occ) {
      std::size_t k = pn.first * pn.second;
      if (pn.first == 0 || pn.second == 0) k = 0;
      if (k < cost) {
        cost = k;
        best = i;
      }
    }
    std::vector<Constraint> pos, neg, rest;
    for (auto& c : work) {
      auto it = c.e.c.find(best);
      if (it == c.e.c.end())
        rest.push_back(c);
      else
        (it->second > 0 ? pos : neg).push_back(c);
    }
    std::vector<Constraint> next;
    std::map<std::string, std::size_t> idx;
    for (auto& c : rest) push(c, next, idx);
    for (auto& P : pos)
      for (auto& Q : neg) {
        Int a = P.e.c.at(best), b = -Q.e.c.at(best);
        Lin n = P.e;
        for (auto& [i, v] : n.c) v *= b;
        n.k *= b;
        n.add(Q.e, a);
        if (!push({n, false}, next, idx)) return Fm::Unsat;
        if (next.size() > limit) return Fm::Unknown;
      }
    work = std::move(next);
  }
}

bool is_cmp(const std::string& n) { return n == "=" || n == "<=" || n == "<" || n == ">" || n == ">="; }
bool is_logic(const std::string& n) { return n == "not" || n == "or" || n == "and"; }
bool is_boolean_op(const std::string& n) {
  return is_cmp(n) || is_logic(n) || n == "slt" || n == "sle" || n == "cmp";
}

void flatten_and(const ExprP& f, std::vector<ExprP>& out) {
  if (f->kind == ExprKind::Op && f->name == "and" && f->args.size() == 2) {
    flatten_and(f->args[0], out);
    flatten_and(f->args[1], out);
  } else {
    out.push_back(f);
  }
}

}  // namespace

// ---------------------------------------------------------------- axioms

ExprP LenAxiom::instantiate(const ExprP& app, const WordParams& p) const {
  if (app->kind != ExprKind::Op || app->name != op) return nullptr;
  ExprP lhs = mk_len(app);
  switch (spec.kind) {
    case LenKind::Fixed: return mk_op("=", {lhs, mk_const(bs(spec.bits, p))});
    case LenKind::Word: return mk_op("=", {lhs, mk_word(p.N, p)});
    case LenKind::SameAsArgs:
      if (app->args.empty()) return nullptr;
      return mk_op("=", {lhs, mk_len(app->args[0])});
    case LenKind::PrefixPlusArgs: {
      ExprP rhs = mk_const(bs(spec.bits, p));
      for (auto& a : app->args) rhs = mk_op("+N", {rhs, mk_len(a)});
      return mk_op("=", {lhs, rhs});
    }
    case LenKind::None: return nullptr;
  }
  return nullptr;
}

std::vector<LenAxiom> length_axioms(const OpSet& ops) {
  std::vector<LenAxiom> out;
  for (auto& [name, info] : ops.all())
    if (info.len.kind != LenKind::None) out.push_back({name, info.len});
  return out;
}

// ---------------------------------------------------------------- context

struct SolverImpl {
  const Solver& s;
  const WordParams& p;
  bool exact;
  std::vector<ExprP> facts;
  ExprSet known_defined;
  std::map<ExprP, std::vector<std::pair<ExprP, int>>, ExprLess> upper_facts;  // t <= R - k
  std::map<ExprP, std::vector<ExprP>, ExprLess> eq_facts;                      // t = R

  // congruence classes
  std::map<ExprP, int, ExprLess> cls_of;
  std::vector<int> parent;
  std::map<std::string, int> sig;
  std::map<int, int> var_of;
  std::vector<std::string> var_names;

  std::vector<Tree> trees;
  ExprSet processed;
  bool vacuous = false;  // Σ unsatisfiable on ground grounds

  SolverImpl(const Solver& s_, const FactSet& sigma) : s(s_), p(s_.p_), exact(s_.opt_.mode == ArithMode::Exact) {
    for (auto& f : sigma.facts) flatten_and(f, facts);
    for (auto& f : facts) subterms(f, [&](const ExprP& t) { known_defined.insert(t); });
    for (auto& f : facts) {
      if (is_ground(f)) {
        auto v = eval(f, {}, s.ops_, p);
        if (!v || *v != bs(1, p)) vacuous = true;
        continue;
      }
      subterms(f, [&](const ExprP& t) {
        if (is_ground(t) && !eval(t, {}, s.ops_, p)) vacuous = true;
      });
      index_fact(f, true);
    }
    if (vacuous) return;
    for (auto& t : known_defined) cls(t);
    for (auto& f : facts)
      if (f->kind == ExprKind::Op && f->name == "=") {
        auto wa = width(f->args[0]), wb = width(f->args[1]);
        if (wa && wb && *wa == *wb) unite(cls(f->args[0]), cls(f->args[1]));
      }
    close();
    for (auto& f : facts) trees.push_back(formula(f, true));
  }

  // ---- fact index for width inference
  void index_fact(const ExprP& f, bool positive) {
    if (f->kind != ExprKind::Op) return;
    const auto& n = f->name;
    if (n == "not" && f->args.size() == 1) return index_fact(f->args[0], !positive);
    if (f->args.size() != 2) return;
    const ExprP& a = f->args[0];
    const ExprP& b = f->args[1];
    if (positive) {
      if (n == "=") {
        eq_facts[a].push_back(b);
        eq_facts[b].push_back(a);
        upper_facts[a].push_back({b, 0});
        upper_facts[b].push_back({a, 0});
      } else if (n == "<=") {
        upper_facts[a].push_back({b, 0});
      } else if (n == "<") {
        upper_facts[a].push_back({b, 1});
      } else if (n == ">=") {
        upper_facts[b].push_back({a, 0});
      } else if (n == ">") {
        upper_facts[b].push_back({a, 1});
      }
    } else {
      if (n == ">") upper_facts[a].push_back({b, 0});
      else if (n == ">=") upper_facts[a].push_back({b, 1});
      else if (n == "<") upper_facts[b].push_back({a, 0});
      else if (n == "<=") upper_facts[b].push_back({a, 1});
    }
  }

  std::optional<BitString> ground_value(const ExprP& t) const {
    if (!is_ground(t)) return std::nullopt;
    return eval(t, {}, s.ops_, p);
  }

  std::optional<Int> upper_val(const ExprP& t, int depth = 0) {
    if (auto g = ground_value(t)) return val(*g, p);
    if (depth > 6) return std::nullopt;
    std::optional<Int> best;
    auto take = [&](std::optional<Int> v) {
      if (v && (!best || *v < *best)) best = v;
    };
    if (auto w = width(t, depth + 1); w && *w <= 4096) take((Int(1) << unsigned(*w)) - 1);
    if (auto it = upper_facts.find(t); it != upper_facts.end())
      for (auto& [r, strict] : it->second)
        if (auto u = upper_val(r, depth + 1)) take(*u - strict);
    if (t->kind == ExprKind::Op && t->args.size() == 2) {
      if (t->name == "+N" || (!exact && t->name == "+b")) {
        auto a = upper_val(t->args[0], depth + 1), b = upper_val(t->args[1], depth + 1);
        if (a && b) take(*a + *b);
      }
      if (t->name == "-N" || (!exact && t->name == "-b")) take(upper_val(t->args[0], depth + 1));
    }
    if (t->kind == ExprKind::Op && is_boolean_op(t->name)) take(Int(1));
    if (t->kind == ExprKind::Len) {
      const ExprP& e = t->args[0];
      if (e->kind == ExprKind::Concat) {
        Int sum = 0;
        bool ok = true;
        for (auto& part : e->args) {
          auto u = upper_val(mk_len(part), depth + 1);
          if (!u) {
            ok = false;
            break;
          }
          sum += *u;
        }
        if (ok) take(sum);
      } else if (e->kind == ExprKind::Range) {
        take(upper_val(e->args[2], depth + 1));
      }
      if (auto w = width(e, depth + 1)) take(Int(*w));
    }
    return best;
  }

  std::optional<Int> width(const ExprP& t, int depth = 0) {
    if (auto g = ground_value(t)) return Int(g->size());
    if (depth > 6) return std::nullopt;
    auto word_if_small = [&](std::optional<Int> u) -> std::optional<Int> {
      if (u && *u < (Int(1) << p.N)) return Int(p.N);
      return std::nullopt;
    };
    if (auto it = eq_facts.find(mk_len(t)); it != eq_facts.end())
      for (auto& r : it->second)
        if (auto g = ground_value(r)) return val(*g, p);
    switch (t->kind) {
      case ExprKind::Op: {
        const OpInfo* op = s.ops_.find(t->name);
        if (!op) return std::nullopt;
        if (t->name == "+N" || t->name == "-N") {
          if (!exact) return Int(p.N);
          return word_if_small(upper_val(t, depth + 1));
        }
        switch (op->len.kind) {
          case LenKind::Fixed: return Int(op->len.bits);
          case LenKind::Word: return Int(p.N);
          case LenKind::SameAsArgs:
            for (auto& a : t->args)
              if (auto w = width(a, depth + 1)) return w;
            return std::nullopt;
          case LenKind::PrefixPlusArgs: {
            Int sum = op->len.bits;
            for (auto& a : t->args) {
              auto w = width(a, depth + 1);
              if (!w) return std::nullopt;
              sum += *w;
            }
            return sum;
          }
          case LenKind::None: return std::nullopt;
        }
        return std::nullopt;
      }
      case ExprKind::Len:
        if (!exact) return Int(p.N);
        return word_if_small(upper_val(t, depth + 1));
      case ExprKind::Range:
        if (auto g = ground_value(t->args[2])) return val(*g, p);
        return std::nullopt;
      case ExprKind::Concat: {
        Int sum = 0;
        for (auto& a : t->args) {
          auto w = width(a, depth + 1);
          if (!w) return std::nullopt;
          sum += *w;
        }
        return sum;
      }
      case ExprKind::Ptr: return Int(p.N);
      default: return std::nullopt;
    }
  }

  // ---- congruence closure
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::string sig_key(const ExprP& t) {
    std::string k = std::to_string(int(t->kind)) + "|" + t->name + "|" + t->base.str() + "|";
    for (std::size_t i = 0; i < t->value.size(); ++i) k.push_back(t->value[i] ? '1' : '0');
    k += "|";
    for (auto& a : t->args) k += std::to_string(cls(a)) + ",";
    return k;
  }
  int cls(const ExprP& t) {
    if (auto it = cls_of.find(t); it != cls_of.end()) return find(it->second);
    std::string k = sig_key(t);
    int id;
    if (auto it = sig.find(k); it != sig.end()) {
      id = find(it->second);
    } else {
      id = int(parent.size());
      parent.push_back(id);
      sig[k] = id;
    }
    cls_of[t] = id;
    return id;
  }
  void close() {
    for (bool changed = true; changed;) {
      changed = false;
      sig.clear();
      for (auto& [t, id] : cls_of) {
        std::string k = sig_key(t);
        auto it = sig.find(k);
        if (it == sig.end())
          sig[k] = find(id);
        else if (find(it->second) != find(id)) {
          unite(it->second, id);
          changed = true;
        }
      }
    }
  }

  // ---- linear views
  Lin V(const ExprP& t) {
    if (auto g = ground_value(t)) return Lin::constant(val(*g, p));
    process(t);
    int c = cls(t);
    auto it = var_of.find(c);
    if (it == var_of.end()) {
      it = var_of.emplace(c, int(var_names.size())).first;
      var_names.push_back(print_expr(t, p));
    }
    return Lin::var(it->second);
  }
  Lin L(const ExprP& t) {
    if (auto w = width(t)) return Lin::constant(*w);
    return V(mk_len(t));
  }

  void add(Tree t) { trees.push_back(std::move(t)); }

  void process(const ExprP& t) {
    if (!processed.insert(t).second) return;
    if (auto w = width(t); w && *w <= 512) add(ge(Lin::constant((Int(1) << unsigned(*w)) - 1), V(t)));
    switch (t->kind) {
      case ExprKind::Len: {
        const ExprP& e = t->args[0];
        process(e);
        if (auto w = width(e)) add(eq(V(t), Lin::constant(*w)));
        break;
      }
      case ExprKind::Concat: {
        Lin sum;
        for (auto& part : t->args) sum = sum + L(part);
        add(eq(L(t), sum));
        Lin value;
        Int shift = 0;
        bool ok = true;
        for (std::size_t i = 0; i < t->args.size() && ok; ++i) {
          value.add(V(t->args[i]), Int(1) << unsigned(shift));
          if (i + 1 < t->args.size()) {
            auto w = width(t->args[i]);
            if (!w || *w > 256) ok = false;
            else shift += *w;
          }
        }
        if (ok) add(eq(V(t), value));
        break;
      }
      case ExprKind::Range: {
        add(eq(L(t), V(t->args[2])));
        add(ge(L(t->args[0]), V(t->args[1]) + V(t->args[2])));
        break;
      }
      case ExprKind::Op: op_constraints(t); break;
      default: break;
    }
  }

  void op_constraints(const ExprP& t) {
    const std::string& n = t->name;
    const OpInfo* info = s.ops_.find(n);
    if (!info || info->arity != t->args.size()) return;
    for (auto& ax : s.axioms_)
      if (ax.op == n)
        if (ExprP inst = ax.instantiate(t, p)) add(formula(inst, true));
    if (is_boolean_op(n)) add(ge(Lin::constant(1), V(t)));
    if (t->args.size() != 2 && n != "castToInt" && n != "isek" && n != "isenc") return;
    auto wrap_width = [&]() -> std::optional<Int> {
      for (const ExprP& x : {t, t->args[0], t->args[1]})
        if (auto w = width(x)) return w;
      return std::nullopt;
    };
    if (n == "castToInt" || n == "isek" || n == "isenc") {
      add(eq(V(t), V(t->args[0])));
      if (n == "castToInt") add(eq(L(t->args[0]), Lin::constant(p.N)));
      return;
    }
    Lin a = V(t->args[0]), b = V(t->args[1]), r = V(t);
    if (n == "+N") {
      add(eq(r, a + b));
    } else if (n == "-N") {
      add(eq(r, a - b));
      add(ge(a, b));
    } else if (n == "+b" || n == "-b") {
      if (!exact) {
        add(eq(r, n == "+b" ? a + b : a - b));
        if (n == "-b") add(ge(a, b));
        return;
      }
      add(eq(L(t->args[0]), L(t->args[1])));
      auto w = wrap_width();
      if (n == "+b") {
        if (w && *w <= 512) {
          Int m = Int(1) << unsigned(*w);
          add(Tree::disj({Tree::conj({eq(r, a + b), ge(Lin::constant(m - 1), a + b)}),
                          Tree::conj({eq(r, a + b - m), ge(a + b, Lin::constant(m))})}));
        } else {
          add(ge(a + b, r));
        }
      } else {
        if (w && *w <= 512) {
          Int m = Int(1) << unsigned(*w);
          add(Tree::disj({Tree::conj({eq(r, a - b), ge(a, b)}), Tree::conj({eq(r, a - b + m), gt(b, a)})}));
        } else {
          add(Tree::disj({Tree::conj({eq(r, a - b), ge(a, b)}), gt(b, a)}));
        }
      }
    } else if (n == "*" || n == "slt" || n == "sle") {
      if (exact) add(eq(L(t->args[0]), L(t->args[1])));
    } else if (n == "eq") {
      add(eq(r, a));
      add(eq(a, b));
      add(eq(L(t->args[0]), L(t->args[1])));
    }
  }

  // ---- formulas
  Tree truth(const ExprP& x, bool positive) {
    if (x->kind == ExprKind::Op && (is_cmp(x->name) || is_logic(x->name))) return formula(x, positive);
    return positive ? ge(V(x), Lin::constant(1)) : eq(V(x), Lin::constant(0));
  }

  Tree formula(const ExprP& f, bool positive) {
    if (auto g = ground_value(f)) {
      bool holds = *g == bs(1, p);
      return holds == positive ? Tree::truth() : Tree::falsity();
    }
    if (f->kind == ExprKind::Op) {
      const auto& n = f->name;
      if (is_cmp(n) && f->args.size() == 2) {
        Lin a = V(f->args[0]), b = V(f->args[1]);
        if (n == "=") return positive ? eq(a, b) : ne(a, b);
        if (n == "<=") return positive ? ge(b, a) : gt(a, b);
        if (n == "<") return positive ? gt(b, a) : ge(a, b);
        if (n == ">=") return positive ? ge(a, b) : gt(b, a);
        if (n == ">") return positive ? gt(a, b) : ge(b, a);
      }
      if (n == "not" && f->args.size() == 1) {
        process(f->args[0]);
        return truth(f->args[0], !positive);
      }
      if ((n == "or" || n == "and") && f->args.size() == 2) {
        bool disj = (n == "or") == positive;
        std::vector<Tree> kids{truth(f->args[0], positive), truth(f->args[1], positive)};
        return disj ? Tree::disj(std::move(kids)) : Tree::conj(std::move(kids));
      }
    }
    Lin v = V(f), l = L(f);
    Lin one = Lin::constant(1), n = Lin::constant(p.N);
    if (positive) return Tree::conj({eq(v, one), eq(l, n)});
    return Tree::disj({ne(v, one), ne(l, n)});
  }

  // ---- search
  std::size_t leaves = 0;

  bool refute(std::vector<Constraint> base, std::vector<const Tree*> pending) {
    std::vector<const Tree*> ors;
    while (!pending.empty()) {
      const Tree* t = pending.back();
      pending.pop_back();
      if (t->kind == Tree::Leaf)
        base.push_back(t->c);
      else if (t->kind == Tree::And)
        for (auto& k : t->kids) pending.push_back(&k);
      else
        ors.push_back(t);
    }
    if (++leaves > s.opt_.max_leaves) return false;
    if (fm_unsat(base, var_names.size(), s.opt_.max_constraints) == Fm::Unsat) return true;
    if (ors.empty()) return false;
    std::size_t pick = 0;
    for (std::size_t i = 1; i < ors.size(); ++i)
      if (ors[i]->kids.size() < ors[pick]->kids.size()) pick = i;
    const Tree* choice = ors[pick];
    ors.erase(ors.begin() + long(pick));
    for (auto& alt : choice->kids) {
      std::vector<const Tree*> next(ors.begin(), ors.end());
      next.push_back(&alt);
      if (!refute(base, next)) return false;
    }
    return true;
  }

  bool unsat_with(const Tree& extra) {
    std::vector<const Tree*> pending;
    pending.push_back(&extra);
    // trees may grow while building `extra`; snapshot after
    for (auto& t : trees) pending.push_back(&t);
    leaves = 0;
    return refute({}, pending);
  }
};

Solver::Solver(const OpSet& ops, WordParams p, SolverOptions opt) : ops_(ops), p_(p), opt_(opt), axioms_(length_axioms(ops)) {}

namespace {

struct Obligation {
  ExprP term;
  std::function<Tree(SolverImpl&)> build;
};

}  // namespace

Verdict Solver::entails(const FactSet& sigma, const ExprP& phi) const {
  ++queries_;
  {
    SolverImpl probe(*this, sigma);
    if (probe.vacuous) return Verdict::Proved;
  }
  if (sigma.contains(phi)) return Verdict::Proved;
  if (auto g = is_ground(phi) ? eval(phi, {}, ops_, p_) : std::nullopt) return *g == bs(1, p_) ? Verdict::Proved : Verdict::Unknown;
  bool exact = opt_.mode == ArithMode::Exact;
  ExprSet known;
  for (auto& f : sigma.facts) subterms(f, [&](const ExprP& t) { known.insert(t); });

  // definedness obligations, children first
  std::vector<ExprP> order;
  ExprSet seen;
  std::function<void(const ExprP&)> post = [&](const ExprP& t) {
    if (seen.count(t)) return;
    seen.insert(t);
    for (auto& a : t->args) post(a);
    order.push_back(t);
  };
  post(phi);
  for (auto& t : order) {
    if (known.count(t)) continue;
    if (is_ground(t)) {
      if (!eval(t, {}, ops_, p_)) return Verdict::Unknown;
      continue;
    }
    std::function<Tree(SolverImpl&)> build;
    if (t->kind == ExprKind::Range) {
      build = [t](SolverImpl& c) { return ge(c.L(t->args[0]), c.V(t->args[1]) + c.V(t->args[2])); };
    } else if (t->kind == ExprKind::Op) {
      const OpInfo* info = ops_.find(t->name);
      if (!info || info->arity != t->args.size()) return Verdict::Unknown;
      const auto& n = t->name;
      if (n == "-N" || (!exact && n == "-b")) {
        build = [t](SolverImpl& c) { return ge(c.V(t->args[0]), c.V(t->args[1])); };
      } else if (n == "+b" || n == "-b" || n == "*" || n == "slt" || n == "sle") {
        if (exact) build = [t](SolverImpl& c) { return eq(c.L(t->args[0]), c.L(t->args[1])); };
      } else if (n == "castToInt") {
        build = [t, this](SolverImpl& c) { return eq(c.L(t->args[0]), Lin::constant(p_.N)); };
      } else if (n == "eq") {
        build = [t](SolverImpl& c) {
          return Tree::conj({eq(c.V(t->args[0]), c.V(t->args[1])), eq(c.L(t->args[0]), c.L(t->args[1]))});
        };
      } else if (!info->total) {
        return Verdict::Unknown;
      }
    }
    if (!build) continue;
    SolverImpl ctx(*this, sigma);
    Tree goal = build(ctx);
    // negate: prove goal by refuting its complement
    std::function<Tree(const Tree&)> neg = [&](const Tree& g) -> Tree {
      if (g.kind == Tree::Leaf) {
        if (g.c.eq) return ne(g.c.e, Lin());
        return gt(Lin(), g.c.e);
      }
      std::vector<Tree> kids;
      for (auto& k : g.kids) kids.push_back(neg(k));
      return g.kind == Tree::And ? Tree::disj(std::move(kids)) : Tree::conj(std::move(kids));
    };
    Tree negated = neg(goal);
    if (!ctx.unsat_with(negated)) return Verdict::Unknown;
  }
  SolverImpl ctx(*this, sigma);
  Tree negated = ctx.formula(phi, false);
  return ctx.unsat_with(negated) ? Verdict::Proved : Verdict::Unknown;
}

namespace {

std::string lin_str(const Lin& l, const std::vector<std::string>& names) {
  std::string out;
  for (auto& [i, v] : l.c) {
    if (!out.empty()) out += " + ";
    out += (v == 1 ? "" : v.str() + "*") + "[" + names[i] + "]";
  }
  if (l.k != 0 || out.empty()) out += (out.empty() ? "" : " + ") + l.k.str();
  return out;
}

void tree_str(const Tree& t, const std::vector<std::string>& names, int indent, std::ostringstream& os) {
  std::string pad(indent * 2, ' ');
  if (t.kind == Tree::Leaf) {
    os << pad << lin_str(t.c.e, names) << (t.c.eq ? " = 0" : " >= 0") << "\n";
    return;
  }
  if (t.kind == Tree::And && indent == 0) {
    for (auto& k : t.kids) tree_str(k, names, 0, os);
    return;
  }
  os << pad << (t.kind == Tree::And ? "and" : "or") << "\n";
  for (auto& k : t.kids) tree_str(k, names, indent + 1, os);
}

std::string smt_lin(const Lin& l) {
  std::string out = "(+";
  for (auto& [i, v] : l.c) out += " (* " + (v < 0 ? "(- " + Int(-v).str() + ")" : v.str()) + " a" + std::to_string(i) + ")";
  out += " " + (l.k < 0 ? "(- " + Int(-l.k).str() + ")" : l.k.str()) + ")";
  return out;
}

std::string smt_tree(const Tree& t) {
  if (t.kind == Tree::Leaf) return std::string(t.c.eq ? "(= " : "(>= ") + smt_lin(t.c.e) + " 0)";
  std::string out = t.kind == Tree::And ? "(and true" : "(or false";
  for (auto& k : t.kids) out += " " + smt_tree(k);
  return out + ")";
}

}  // namespace

std::string Solver::dump(const FactSet& sigma, const ExprP& phi) const {
  SolverImpl ctx(*this, sigma);
  Tree negated = ctx.formula(phi, false);
  std::ostringstream os;
  os << "; atoms\n";
  for (std::size_t i = 0; i < ctx.var_names.size(); ++i) os << ";   a" << i << " = " << ctx.var_names[i] << "\n";
  for (auto& t : ctx.trees) tree_str(t, ctx.var_names, 0, os);
  os << "; negated goal\n";
  tree_str(negated, ctx.var_names, 0, os);
  return os.str();
}

std::string Solver::to_smtlib(const FactSet& sigma, const ExprP& phi) const {
  SolverImpl ctx(*this, sigma);
  Tree negated = ctx.formula(phi, false);
  std::ostringstream os;
  os << "(set-logic QF_LIA)\n";
  for (std::size_t i = 0; i < ctx.var_names.size(); ++i)
    os << "(declare-const a" << i << " Int) ; " << ctx.var_names[i] << "\n(assert (>= a" << i << " 0))\n";
  for (auto& t : ctx.trees) os << "(assert " << smt_tree(t) << ")\n";
  os << "(assert " << smt_tree(negated) << ")\n(check-sat)\n";
  return os.str();
}

bool satisfies(const FactSet& sigma, const Valuation& eta, const OpSet& ops, const WordParams& p) {
  BitString one = bs(1, p);
  for (auto& f : sigma.facts) {
    auto v = eval(f, eta, ops, p);
    if (!v || *v != one) return false;
  }
  return true;
}

std::optional<Valuation> consistent_valuation_sampler(const FactSet& sigma, const std::vector<std::string>& vars,
                                                      const OpSet& ops, const WordParams& p, std::size_t max_len,
                                                      std::size_t random_tries, std::uint64_t seed) {
  std::vector<BitString> domain;
  for (std::size_t len = 0; len <= max_len; ++len)
    for (std::uint64_t v = 0; v < (std::uint64_t(1) << len); ++v) domain.push_back(word_bits(v, len));
  for (unsigned n = 0; n < (1u << p.N) && p.N <= 8; ++n) domain.push_back(bs(n, p));
  double total = 1;
  for (std::size_t i = 0; i < vars.size(); ++i) total *= double(domain.size());
  Valuation eta;
  if (total <= 200000) {
    std::vector<std::size_t> idx(vars.size(), 0);
    for (;;) {
      for (std::size_t i = 0; i < vars.size(); ++i) eta.vars[vars[i]] = domain[idx[i]];
      if (satisfies(sigma, eta, ops, p)) return eta;
      std::size_t i = 0;
      while (i < idx.size() && ++idx[i] == domain.size()) idx[i++] = 0;
      if (i == idx.size()) return std::nullopt;
    }
  }
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < random_tries; ++t) {
    for (auto& v : vars) eta.vars[v] = domain[rng() % domain.size()];
    if (satisfies(sigma, eta, ops, p)) return eta;
  }
  return std::nullopt;
}

}  // namespace pmx
