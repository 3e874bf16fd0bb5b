#include "pmx/symcore.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>

namespace pmx {

// ---------------------------------------------------------------- construction

namespace {

std::size_t mix(std::size_t h, std::size_t v) { return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)); }

ExprP finish(Expr e) {
  std::size_t h = std::size_t(e.kind) * 1315423911u;
  h = mix(h, std::hash<std::string>{}(e.name));
  h = mix(h, e.value.size());
  for (std::size_t i = 0; i < e.value.size(); ++i) h = mix(h, e.value[i]);
  for (auto& a : e.args) h = mix(h, a->hash);
  h = mix(h, std::hash<std::string>{}(e.base.var) + e.base.heap * 31 + unsigned(e.base.kind));
  e.hash = h;
  return std::make_shared<const Expr>(std::move(e));
}

}  // namespace

ExprP mk_const(BitString b) { return finish(Expr{ExprKind::Const, std::move(b), {}, {}, {}}); }
ExprP mk_var(std::string name) { return finish(Expr{ExprKind::Var, {}, std::move(name), {}, {}}); }
ExprP mk_op(std::string name, std::vector<ExprP> args) {
  return finish(Expr{ExprKind::Op, {}, std::move(name), std::move(args), {}});
}

ExprP mk_concat(std::vector<ExprP> parts) {
  std::vector<ExprP> flat;
  for (auto& p : parts) {
    if (p->kind == ExprKind::Concat)
      flat.insert(flat.end(), p->args.begin(), p->args.end());
    else if (!(p->kind == ExprKind::Const && p->value.empty()))
      flat.push_back(p);
  }
  if (flat.empty()) return mk_const({});
  if (flat.size() == 1) return flat[0];
  return finish(Expr{ExprKind::Concat, {}, {}, std::move(flat), {}});
}

ExprP mk_range(ExprP e, ExprP off, ExprP len) {
  return finish(Expr{ExprKind::Range, {}, {}, {std::move(e), std::move(off), std::move(len)}, {}});
}
ExprP mk_len(ExprP e) { return finish(Expr{ExprKind::Len, {}, {}, {std::move(e)}, {}}); }
ExprP mk_ptr(PtrBase base, ExprP off) { return finish(Expr{ExprKind::Ptr, {}, {}, {std::move(off)}, std::move(base)}); }

int compare(const Expr& a, const Expr& b) {
  if (&a == &b) return 0;
  if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
  if (a.hash == b.hash && a.kind == ExprKind::Var && a.name == b.name) return 0;
  if (int c = a.name.compare(b.name)) return c < 0 ? -1 : 1;
  if (a.value != b.value) return a.value < b.value ? -1 : 1;
  if (a.base != b.base) return a.base < b.base ? -1 : 1;
  if (a.args.size() != b.args.size()) return a.args.size() < b.args.size() ? -1 : 1;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (int c = compare(*a.args[i], *b.args[i])) return c;
  return 0;
}

bool ptr_free(const ExprP& e) {
  if (e->kind == ExprKind::Ptr) return false;
  return std::all_of(e->args.begin(), e->args.end(), [](auto& a) { return ptr_free(a); });
}

bool is_ground(const ExprP& e) {
  if (e->kind == ExprKind::Var || e->kind == ExprKind::Ptr) return false;
  return std::all_of(e->args.begin(), e->args.end(), [](auto& a) { return is_ground(a); });
}

void subterms(const ExprP& e, const std::function<void(const ExprP&)>& f) {
  f(e);
  for (auto& a : e->args) subterms(a, f);
}

std::set<std::string> free_vars(const ExprP& e) {
  std::set<std::string> out;
  subterms(e, [&](const ExprP& t) {
    if (t->kind == ExprKind::Var) out.insert(t->name);
  });
  return out;
}

std::vector<std::string> vars_in_order(const ExprP& e) {
  std::vector<std::string> out;
  subterms(e, [&](const ExprP& t) {
    if (t->kind == ExprKind::Var && std::find(out.begin(), out.end(), t->name) == out.end()) out.push_back(t->name);
  });
  return out;
}

static ExprP rebuild(const ExprP& e, std::vector<ExprP> args) {
  switch (e->kind) {
    case ExprKind::Op: return mk_op(e->name, std::move(args));
    case ExprKind::Concat: return mk_concat(std::move(args));
    case ExprKind::Range: return mk_range(args[0], args[1], args[2]);
    case ExprKind::Len: return mk_len(args[0]);
    case ExprKind::Ptr: return mk_ptr(e->base, args[0]);
    default: return e;
  }
}

ExprP subst(const ExprP& e, const std::map<std::string, ExprP>& m) {
  if (e->kind == ExprKind::Var) {
    auto it = m.find(e->name);
    return it == m.end() ? e : it->second;
  }
  if (e->args.empty()) return e;
  std::vector<ExprP> args;
  bool changed = false;
  for (auto& a : e->args) {
    args.push_back(subst(a, m));
    changed |= args.back() != a;
  }
  return changed ? rebuild(e, std::move(args)) : e;
}

ExprP replace(const ExprP& e, const ExprP& from, const ExprP& to) {
  if (same(e, from)) return to;
  if (e->args.empty()) return e;
  std::vector<ExprP> args;
  bool changed = false;
  for (auto& a : e->args) {
    args.push_back(replace(a, from, to));
    changed |= args.back() != a;
  }
  return changed ? rebuild(e, std::move(args)) : e;
}

std::size_t expr_size(const ExprP& e) {
  std::size_t n = 1;
  for (auto& a : e->args) n += expr_size(a);
  return n;
}

// ---------------------------------------------------------------- operations

void OpSet::add(OpInfo info) { ops_[info.name] = std::move(info); }

std::string OpSet::canonical(const std::string& name) const {
  auto it = aliases_.find(name);
  return it == aliases_.end() ? name : it->second;
}

const OpInfo* OpSet::find(const std::string& name) const {
  auto it = ops_.find(canonical(name));
  return it == ops_.end() ? nullptr : &it->second;
}

BitString word_bits(const Nat& n, std::size_t w) {
  std::vector<std::uint8_t> bits(w, 0);
  Nat m = n;
  for (std::size_t i = 0; i < w && m > 0; ++i, m >>= 1) bits[i] = static_cast<std::uint8_t>(m & 1);
  return BitString(std::move(bits));
}

namespace {

using Args = std::vector<BitString>;
using R = std::optional<BitString>;

BitString ascii(std::string_view s) { return BitString::from_bytes(s); }
BitString tag_of(std::string_view name) { return op_tag(name); }

std::uint64_t fnv(const Args& xs, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  auto feed = [&](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  for (auto& x : xs) {
    feed(x.size() + 0x100);
    for (std::size_t i = 0; i < x.size(); ++i) feed(x[i]);
  }
  return h;
}

std::uint64_t splitmix(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

BitString hash_bits(const Args& xs, std::uint64_t seed, std::size_t w) {
  std::uint64_t s = fnv(xs, seed);
  BitString out;
  std::uint64_t cur = 0;
  for (std::size_t i = 0; i < w; ++i) {
    if (i % 64 == 0) cur = splitmix(s);
    out.push_back((cur >> (i % 64)) & 1);
  }
  return out;
}

BitString xor_ks(const BitString& m, const Args& key) {
  BitString ks = hash_bits(key, 0x6b73, m.size());
  BitString out = m;
  for (std::size_t i = 0; i < m.size(); ++i) out.set(i, m[i] != ks[i]);
  return out;
}

BitString lp(const BitString& b) { return concat(word_bits(b.size(), 64), b); }

bool has_prefix(const BitString& b, const BitString& pre) {
  if (b.size() < pre.size()) return false;
  for (std::size_t i = 0; i < pre.size(); ++i)
    if (b[i] != pre[i]) return false;
  return true;
}

BitString drop(const BitString& b, std::size_t n) { return *sub(b, n, b.size() - n); }

/// Reads a length-prefixed field at `pos`; advances pos.
std::optional<BitString> read_lp(const BitString& b, std::size_t& pos) {
  auto hdr = sub(b, pos, 64);
  if (!hdr) return std::nullopt;
  Nat n = val(*hdr, {});
  auto body = sub(b, pos + 64, n);
  if (!body) return std::nullopt;
  pos += 64 + static_cast<std::size_t>(n);
  return body;
}

struct Cipher {
  BitString key, masked, rnd;
};

std::optional<Cipher> parse_cipher(const BitString& c, const BitString& tag) {
  if (!has_prefix(c, tag)) return std::nullopt;
  std::size_t pos = tag.size();
  auto key = read_lp(c, pos);
  if (!key) return std::nullopt;
  auto masked = read_lp(c, pos);
  if (!masked) return std::nullopt;
  return Cipher{*key, *masked, drop(c, pos)};
}

bool truthy(const BitString& b) { return val(b, {}) != 0; }

OpInfo mk(std::string name, unsigned arity, OpFn fn, LenSpec len, bool total, bool builtin, bool crypto = false) {
  OpInfo o;
  o.name = std::move(name);
  o.arity = arity;
  o.fn = std::move(fn);
  o.len = len;
  o.total = total;
  o.builtin = builtin;
  o.crypto = crypto;
  return o;
}

}  // namespace

BitString op_tag(std::string_view name) {
  return concat(BitString::from_bytes(name), BitString::zeros(8));
}

OpSet default_ops() {
  OpSet s;
  const LenSpec same{LenKind::SameAsArgs, 0}, word{LenKind::Word, 0}, none{LenKind::None, 0};
  auto modular = [](auto f) {
    return [f](const Args& a, const WordParams& p) -> R {
      if (a[0].size() != a[1].size()) return std::nullopt;
      Nat m = Nat(1) << a[0].size();
      Nat x = val(a[0], p), y = val(a[1], p);
      return word_bits(((f(x, y, m) % m) + m) % m, a[0].size());
    };
  };
  s.add(mk("+b", 2, modular([](const Nat& x, const Nat& y, const Nat&) { return x + y; }), same, false, true));
  s.add(mk("-b", 2, modular([](const Nat& x, const Nat& y, const Nat& m) { return x + m - y; }), same, false, true));
  s.add(mk("*", 2, modular([](const Nat& x, const Nat& y, const Nat&) { return x * y; }), same, false, true));
  s.add(mk("+N", 2, [](const Args& a, const WordParams& p) -> R { return bs(val(a[0], p) + val(a[1], p), p); },
           none, true, true));
  s.add(mk("-N", 2,
           [](const Args& a, const WordParams& p) -> R {
             Nat x = val(a[0], p), y = val(a[1], p);
             if (x < y) return std::nullopt;
             return bs(x - y, p);
           },
           none, false, true));
  auto cmp = [](auto f) {
    return [f](const Args& a, const WordParams& p) -> R { return bs(f(val(a[0], p), val(a[1], p)) ? 1 : 0, p); };
  };
  s.add(mk("=", 2, cmp([](const Nat& x, const Nat& y) { return x == y; }), word, true, true));
  s.add(mk("<=", 2, cmp([](const Nat& x, const Nat& y) { return x <= y; }), word, true, true));
  s.add(mk("<", 2, cmp([](const Nat& x, const Nat& y) { return x < y; }), word, true, true));
  s.add(mk(">", 2, cmp([](const Nat& x, const Nat& y) { return x > y; }), word, true, true));
  s.add(mk(">=", 2, cmp([](const Nat& x, const Nat& y) { return x >= y; }), word, true, true));
  auto signed_cmp = [](bool strict) {
    return [strict](const Args& a, const WordParams& p) -> R {
      if (a[0].size() != a[1].size() || a[0].empty()) return std::nullopt;
      Nat m = Nat(1) << a[0].size(), half = m >> 1;
      Nat x = val(a[0], p), y = val(a[1], p);
      x = x >= half ? x - half : x + half;
      y = y >= half ? y - half : y + half;
      return bs((strict ? x < y : x <= y) ? 1 : 0, p);
    };
  };
  s.add(mk("slt", 2, signed_cmp(true), word, false, true));
  s.add(mk("sle", 2, signed_cmp(false), word, false, true));
  s.add(mk("not", 1, [](const Args& a, const WordParams& p) -> R { return bs(truthy(a[0]) ? 0 : 1, p); }, word,
           true, true));
  s.add(mk("or", 2, [](const Args& a, const WordParams& p) -> R { return bs(truthy(a[0]) || truthy(a[1]) ? 1 : 0, p); },
           word, true, true));
  s.add(mk("and", 2,
           [](const Args& a, const WordParams& p) -> R { return bs(truthy(a[0]) && truthy(a[1]) ? 1 : 0, p); }, word,
           true, true));
  s.add(mk("castToInt", 1,
           [](const Args& a, const WordParams& p) -> R {
             if (a[0].size() != p.N) return std::nullopt;
             return a[0];
           },
           word, false, true));

  auto tagged = [](std::string name) {
    return [name](const Args& a, const WordParams&) -> R { return concat(tag_of(name), a[0]); };
  };
  auto prefix = [](std::string_view name) { return LenSpec{LenKind::PrefixPlusArgs, unsigned(8 * (name.size() + 1))}; };
  s.add(mk("nonce", 1, tagged("nonce"), prefix("nonce"), true, true, true));
  s.add(mk("eq", 2,
           [](const Args& a, const WordParams&) -> R {
             if (a[0] != a[1]) return std::nullopt;
             return a[0];
           },
           same, false, true, true));
  OpInfo cmpop = mk("cmp", 2, [](const Args& a, const WordParams& p) -> R { return bs(a[0] == a[1] ? 0 : 1, p); },
                    word, true, false);
  cmpop.compare_rewrite = true;
  s.add(cmpop);

  // opaque stubs
  s.add(mk("mac", 2, [](const Args& a, const WordParams&) -> R { return hash_bits(a, 0x6d6163, 20); },
           {LenKind::Fixed, 20}, true, false, true));
  s.add(mk("sha1", 1, [](const Args& a, const WordParams&) -> R { return hash_bits(a, 0x736861, 20); },
           {LenKind::Fixed, 20}, true, false, true));
  for (const char* t : {"ek", "dk", "pk"}) s.add(mk(t, 1, tagged(t), prefix(t), true, false, true));
  for (const char* t : {"acc", "accept", "request"}) s.add(mk(t, 1, tagged(t), prefix(t), true, false));
  s.add(mk("pair", 2, [](const Args& a, const WordParams&) -> R { return concat(concat(tag_of("pair"), lp(a[0])), a[1]); },
           {LenKind::PrefixPlusArgs, 40 + 64}, true, false, true));
  auto proj = [](bool first) {
    return [first](const Args& a, const WordParams&) -> R {
      if (!has_prefix(a[0], tag_of("pair"))) return std::nullopt;
      std::size_t pos = 40;
      auto x = read_lp(a[0], pos);
      if (!x) return std::nullopt;
      return first ? *x : drop(a[0], pos);
    };
  };
  s.add(mk("fst", 1, proj(true), none, false, false, true));
  s.add(mk("snd", 1, proj(false), none, false, false, true));

  s.add(mk("E", 3,
           [](const Args& a, const WordParams&) -> R {
             if (!has_prefix(a[0], tag_of("ek"))) return std::nullopt;
             BitString r0 = drop(a[0], 24);
             return concat(concat(concat(tag_of("E"), lp(a[0])), lp(xor_ks(a[1], {r0, a[2]}))), a[2]);
           },
           {LenKind::PrefixPlusArgs, 16 + 128}, false, false, true));
  s.add(mk("D", 2,
           [](const Args& a, const WordParams&) -> R {
             if (!has_prefix(a[0], tag_of("dk"))) return std::nullopt;
             BitString r0 = drop(a[0], 24);
             auto c = parse_cipher(a[1], tag_of("E"));
             if (!c || c->key != concat(tag_of("ek"), r0)) return std::nullopt;
             return xor_ks(c->masked, {r0, c->rnd});
           },
           none, false, false, true));
  s.add(mk("isek", 1,
           [](const Args& a, const WordParams&) -> R {
             if (!has_prefix(a[0], tag_of("ek"))) return std::nullopt;
             return a[0];
           },
           same, false, false, true));
  s.add(mk("isenc", 1,
           [](const Args& a, const WordParams&) -> R {
             auto c = parse_cipher(a[0], tag_of("E"));
             if (!c || !has_prefix(c->key, tag_of("ek"))) return std::nullopt;
             return a[0];
           },
           same, false, false, true));
  s.add(mk("ekof", 1,
           [](const Args& a, const WordParams&) -> R {
             auto c = parse_cipher(a[0], tag_of("E"));
             if (!c) return std::nullopt;
             return c->key;
           },
           none, false, false, true));
  s.add(mk("encrypt", 2,
           [](const Args& a, const WordParams&) -> R {
             return concat(concat(tag_of("enc"), lp(a[0])), lp(xor_ks(a[1], {a[0]})));
           },
           {LenKind::PrefixPlusArgs, 32 + 128}, true, false, true));
  s.add(mk("decrypt", 2,
           [](const Args& a, const WordParams&) -> R {
             auto c = parse_cipher(a[1], tag_of("enc"));
             if (!c) return std::nullopt;
             if (c->key != a[0] && c->key != concat(tag_of("pk"), a[0])) return std::nullopt;
             if (!c->rnd.empty()) return std::nullopt;
             return xor_ks(c->masked, {c->key});
           },
           none, false, false, true));

  for (auto [from, to] : std::initializer_list<std::pair<const char*, const char*>>{
           {"+", "+b"},          {"-", "-b"},      {"==", "="},   {"\xC2\xAC", "not"}, {"$\\neg$", "not"},
           {"!", "not"},         {"\xE2\x89\xA4", "<="}, {"\xE2\x89\xA5", ">="}, {"\xE2\x88\xA8", "or"},
           {"\xE2\x88\xA7", "and"}, {"+n", "+N"},  {"-n", "-N"},  {"&&", "and"},       {"||", "or"}})
    s.alias(from, to);
  return s;
}

// ---------------------------------------------------------------- evaluation

std::optional<BitString> eval(const ExprP& e, const Valuation& eta, const OpSet& ops, const WordParams& p) {
  switch (e->kind) {
    case ExprKind::Const: return e->value;
    case ExprKind::Var: {
      auto* b = eta.lookup(e->name);
      if (!b) return std::nullopt;
      return *b;
    }
    case ExprKind::Op: {
      const OpInfo* op = ops.find(e->name);
      if (!op || op->arity != e->args.size()) return std::nullopt;
      Args xs;
      for (auto& a : e->args) {
        auto v = eval(a, eta, ops, p);
        if (!v) return std::nullopt;
        xs.push_back(std::move(*v));
      }
      return op->fn(xs, p);
    }
    case ExprKind::Concat: {
      BitString out;
      for (auto& a : e->args) {
        auto v = eval(a, eta, ops, p);
        if (!v) return std::nullopt;
        out = concat(out, *v);
      }
      return out;
    }
    case ExprKind::Range: {
      auto b = eval(e->args[0], eta, ops, p);
      if (!b) return std::nullopt;
      auto o = eval(e->args[1], eta, ops, p);
      if (!o) return std::nullopt;
      auto l = eval(e->args[2], eta, ops, p);
      if (!l) return std::nullopt;
      return sub(*b, val(*o, p), val(*l, p));
    }
    case ExprKind::Len: {
      auto b = eval(e->args[0], eta, ops, p);
      if (!b) return std::nullopt;
      return bs(Nat(b->size()), p);
    }
    case ExprKind::Ptr: {
      auto it = eta.bases.find(e->base);
      if (it == eta.bases.end()) return std::nullopt;
      auto o = eval(e->args[0], eta, ops, p);
      if (!o || o->size() != it->second.size()) return std::nullopt;
      Nat m = Nat(1) << o->size();
      return word_bits((val(it->second, p) + val(*o, p)) % m, o->size());
    }
  }
  return std::nullopt;
}

ExprP get_len(const ExprP& e, const WordParams& p) {
  switch (e->kind) {
    case ExprKind::Ptr:
    case ExprKind::Len: return mk_word(p.N, p);
    case ExprKind::Const: return mk_const(bs(Nat(e->value.size()), p));
    case ExprKind::Var:
    case ExprKind::Op: return mk_len(e);
    case ExprKind::Concat: {
      ExprP acc = get_len(e->args[0], p);
      for (std::size_t i = 1; i < e->args.size(); ++i) acc = mk_op("+N", {acc, get_len(e->args[i], p)});
      return acc;
    }
    case ExprKind::Range: return e->args[2];
  }
  return nullptr;
}

ExprP apply_sym(const std::string& name, const std::vector<ExprP>& args, const OpSet& ops) {
  std::string op = ops.canonical(name);
  bool all_free = std::all_of(args.begin(), args.end(), [](auto& a) { return ptr_free(a); });
  if (all_free) return mk_op(op, args);
  if (args.size() != 2) return nullptr;
  auto& a = args[0];
  auto& b = args[1];
  if (op == "+b") {
    if (a->kind == ExprKind::Ptr && ptr_free(b)) return mk_ptr(a->base, mk_op("+b", {a->args[0], b}));
    if (b->kind == ExprKind::Ptr && ptr_free(a)) return mk_ptr(b->base, mk_op("+b", {b->args[0], a}));
  }
  if (op == "-b" && a->kind == ExprKind::Ptr && b->kind == ExprKind::Ptr && a->base == b->base)
    return mk_op("-b", {a->args[0], b->args[0]});
  return nullptr;
}

bool is_crypto_term(const ExprP& e, const OpSet& ops) {
  if (e->kind == ExprKind::Var) return true;
  if (e->kind != ExprKind::Op) return false;
  const OpInfo* op = ops.find(e->name);
  if (!op || !op->crypto) return false;
  return std::all_of(e->args.begin(), e->args.end(), [&](auto& a) { return is_crypto_term(a, ops); });
}

bool is_crypto_condition(const ExprP& e, const OpSet& ops) {
  return e->kind == ExprKind::Op && e->name == "=" && e->args.size() == 2 && is_crypto_term(e->args[0], ops) &&
         is_crypto_term(e->args[1], ops);
}

// ---------------------------------------------------------------- lexer

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == '~';
}

bool is_literal_word(const std::string& w) {
  if (w == "eps" || w == "iN") return true;
  if (w.size() >= 2 && w[0] == 'i')
    return std::all_of(w.begin() + 1, w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  return false;
}

}  // namespace

Lexer::Lexer(std::string_view s) {
  std::size_t i = 0, line = 1;
  auto push = [&](Token::Kind k, std::string t) { toks_.push_back({k, std::move(t), line}); };
  static const std::pair<const char*, const char*> unicode[] = {
      {"\xE2\x88\x92\xE2\x84\x95", "-N"}, {"+\xE2\x84\x95", "+N"}, {"\xE2\x88\x92", "-"},
      {"\xE2\x89\xA4", "<="},            {"\xE2\x89\xA5", ">="},  {"\xC2\xAC", "!"},
      {"\xE2\x88\xA8", "||"},            {"\xE2\x88\xA7", "&&"},  {"$\\neg$", "!"},
      {"\xE2\x80\x96", "|"}};
  while (i < s.size()) {
    char c = s[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '#' || (c == '/' && i + 1 < s.size() && s[i + 1] == '/')) {
      while (i < s.size() && s[i] != '\n') ++i;
      continue;
    }
    if (s.substr(i, 2) == "\xCE\xB5") {
      push(Token::Kind::Literal, "eps");
      i += 2;
      continue;
    }
    bool matched = false;
    for (auto [u, repl] : unicode) {
      std::size_t n = std::strlen(u);
      if (s.substr(i, n) == u) {
        std::string r = repl;
        i += n;
        if (r == "-" && i < s.size() && (s[i] == 'b' || s[i] == 'N') && (i + 1 >= s.size() || !ident_char(s[i + 1])))
          r += s[i++];
        push(Token::Kind::Sym, r);
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if ((c == 'x' || c == 'b') && i + 1 < s.size() && s[i + 1] == '"') {
      std::size_t j = s.find('"', i + 2);
      if (j == std::string_view::npos) throw ParseError("line " + std::to_string(line) + ": unterminated literal");
      push(Token::Kind::Literal, std::string(s.substr(i, j + 1 - i)));
      i = j + 1;
      continue;
    }
    if (c == '"') {
      std::size_t j = i + 1;
      while (j < s.size() && s[j] != '"') j += (s[j] == '\\') ? 2 : 1;
      if (j >= s.size()) throw ParseError("line " + std::to_string(line) + ": unterminated string");
      push(Token::Kind::Literal, std::string(s.substr(i, j + 1 - i)));
      i = j + 1;
      continue;
    }
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < s.size() && ident_char(s[j])) ++j;
      std::string w(s.substr(i, j - i));
      push(is_literal_word(w) ? Token::Kind::Literal : Token::Kind::Ident, w);
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      push(Token::Kind::Ident, std::string(s.substr(i, j - i)));
      i = j;
      continue;
    }
    if ((c == '+' || c == '-') && i + 1 < s.size() && (s[i + 1] == 'b' || s[i + 1] == 'N') &&
        (i + 2 >= s.size() || !ident_char(s[i + 2]))) {
      push(Token::Kind::Sym, std::string(s.substr(i, 2)));
      i += 2;
      continue;
    }
    static const char* two[] = {"==", "<=", ">=", "&&", "||"};
    bool two_char = false;
    for (auto t : two)
      if (s.substr(i, 2) == t) {
        push(Token::Kind::Sym, t);
        i += 2;
        two_char = true;
        break;
      }
    if (two_char) continue;
    if (std::strchr("+-*=<>@{}(),;|![]._:/", c)) {
      push(Token::Kind::Sym, std::string(1, c));
      ++i;
      continue;
    }
    throw ParseError("line " + std::to_string(line) + ": unexpected character '" + std::string(1, c) + "'");
  }
  toks_.push_back({Token::Kind::End, "", line});
}

const Token& Lexer::peek(std::size_t k) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
Token Lexer::next() {
  Token t = peek();
  if (pos_ < toks_.size() - 1) ++pos_;
  return t;
}
bool Lexer::accept_sym(std::string_view s) {
  if (peek().kind == Token::Kind::Sym && peek().text == s) {
    next();
    return true;
  }
  return false;
}
bool Lexer::accept_ident(std::string_view s) {
  if (peek().kind == Token::Kind::Ident && peek().text == s) {
    next();
    return true;
  }
  return false;
}
void Lexer::fail(const std::string& msg) const {
  throw ParseError("line " + std::to_string(peek().line) + ": " + msg + " (at '" + peek().text + "')");
}
void Lexer::expect_sym(std::string_view s) {
  if (!accept_sym(s)) fail("expected '" + std::string(s) + "'");
}
void Lexer::expect_ident(std::string_view s) {
  if (!accept_ident(s)) fail("expected '" + std::string(s) + "'");
}
std::string Lexer::expect_name() {
  if (peek().kind != Token::Kind::Ident) fail("expected identifier");
  return next().text;
}

// ---------------------------------------------------------------- parser

namespace {

struct ExprParser {
  Lexer& lx;
  const OpSet& ops;
  const WordParams& p;

  ExprP cmp() {
    ExprP l = cat();
    for (const char* s : {"=", "==", "<=", "<", ">=", ">"})
      if (lx.accept_sym(s)) return mk_op(ops.canonical(s), {l, cat()});
    return l;
  }
  ExprP cat() {
    std::vector<ExprP> parts{add()};
    while (lx.accept_sym("@")) parts.push_back(add());
    return parts.size() == 1 ? parts[0] : mk_concat(parts);
  }
  ExprP add() {
    ExprP l = mul();
    for (;;) {
      bool hit = false;
      for (const char* s : {"+b", "-b", "+N", "-N", "+", "-"})
        if (lx.accept_sym(s)) {
          l = mk_op(ops.canonical(s), {l, mul()});
          hit = true;
          break;
        }
      if (!hit) return l;
    }
  }
  ExprP mul() {
    ExprP l = post();
    while (lx.accept_sym("*")) l = mk_op("*", {l, post()});
    return l;
  }
  ExprP post() {
    ExprP e = primary();
    while (lx.accept_sym("{")) {
      ExprP o = cmp();
      lx.expect_sym(",");
      ExprP l = cmp();
      lx.expect_sym("}");
      e = mk_range(e, o, l);
    }
    return e;
  }
  ExprP primary() {
    const Token& t = lx.peek();
    if (t.kind == Token::Kind::Literal) {
      auto b = parse_literal(t.text, p);
      if (!b) lx.fail("bad literal");
      lx.next();
      return mk_const(*b);
    }
    if (lx.accept_sym("(")) {
      ExprP e = cmp();
      lx.expect_sym(")");
      return e;
    }
    if (lx.accept_sym("!")) return mk_op("not", {post()});
    if (t.kind == Token::Kind::Ident) {
      std::string name = lx.next().text;
      if (lx.accept_sym("(")) {
        std::vector<ExprP> args;
        if (!lx.accept_sym(")")) {
          do args.push_back(cmp());
          while (lx.accept_sym(","));
          lx.expect_sym(")");
        }
        if (name == "len") {
          if (args.size() != 1) lx.fail("len takes one argument");
          return mk_len(args[0]);
        }
        return mk_op(ops.canonical(name), std::move(args));
      }
      return mk_var(name);
    }
    lx.fail("expected expression");
  }
};

int infix_prec(const std::string& op) {
  if (op == "=" || op == "<=" || op == "<" || op == ">" || op == ">=") return 1;
  if (op == "+b" || op == "-b" || op == "+N" || op == "-N") return 3;
  if (op == "*") return 4;
  return 0;
}

void print_rec(const ExprP& e, const WordParams& p, int ctx, std::string& out) {
  auto wrap = [&](int prec, auto body) {
    bool paren = prec < ctx;
    if (paren) out += "(";
    body();
    if (paren) out += ")";
  };
  switch (e->kind) {
    case ExprKind::Const: out += format_literal(e->value, p); return;
    case ExprKind::Var: out += e->name; return;
    case ExprKind::Len:
      out += "len(";
      print_rec(e->args[0], p, 0, out);
      out += ")";
      return;
    case ExprKind::Ptr:
      out += "ptr(" + e->base.str() + ", ";
      print_rec(e->args[0], p, 0, out);
      out += ")";
      return;
    case ExprKind::Range:
      wrap(5, [&] {
        print_rec(e->args[0], p, 5, out);
        out += "{";
        print_rec(e->args[1], p, 0, out);
        out += ", ";
        print_rec(e->args[2], p, 0, out);
        out += "}";
      });
      return;
    case ExprKind::Concat:
      wrap(2, [&] {
        for (std::size_t i = 0; i < e->args.size(); ++i) {
          if (i) out += " @ ";
          print_rec(e->args[i], p, 3, out);
        }
      });
      return;
    case ExprKind::Op: {
      int prec = e->args.size() == 2 ? infix_prec(e->name) : 0;
      if (prec) {
        wrap(prec, [&] {
          print_rec(e->args[0], p, prec == 1 ? 2 : prec, out);
          out += " " + e->name + " ";
          print_rec(e->args[1], p, prec + 1, out);
        });
        return;
      }
      out += e->name + "(";
      for (std::size_t i = 0; i < e->args.size(); ++i) {
        if (i) out += ", ";
        print_rec(e->args[i], p, 0, out);
      }
      out += ")";
      return;
    }
  }
}

}  // namespace

ExprP parse_expr(Lexer& lx, const OpSet& ops, const WordParams& p) { return ExprParser{lx, ops, p}.cmp(); }

ExprP parse_expr(std::string_view text, const OpSet& ops, const WordParams& p) {
  Lexer lx(text);
  ExprP e = parse_expr(lx, ops, p);
  if (!lx.at_end()) lx.fail("trailing input");
  return e;
}

std::string print_expr(const ExprP& e, const WordParams& p) {
  std::string out;
  print_rec(e, p, 0, out);
  return out;
}

}  // namespace pmx
