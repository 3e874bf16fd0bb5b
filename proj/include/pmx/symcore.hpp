#pragma once

#include "pmx/bits.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmx {

struct PtrBase {
  enum class Kind { Stack, Heap } kind = Kind::Stack;
  std::string var;
  unsigned heap = 0;

  static PtrBase stack(std::string v) { return {Kind::Stack, std::move(v), 0}; }
  static PtrBase heap_id(unsigned i) { return {Kind::Heap, {}, i}; }
  std::string str() const { return kind == Kind::Stack ? "stack " + var : "heap " + std::to_string(heap); }
  friend bool operator==(const PtrBase&, const PtrBase&) = default;
  friend auto operator<=>(const PtrBase&, const PtrBase&) = default;
};

enum class ExprKind { Const, Var, Op, Concat, Range, Len, Ptr };

struct Expr;
using ExprP = std::shared_ptr<const Expr>;

/// Immutable symbolic expression. Concat is n-ary and flat.
/// Range args: {e, offset, length}; Len args: {e}; Ptr args: {offset}.
struct Expr {
  ExprKind kind;
  BitString value;
  std::string name;
  std::vector<ExprP> args;
  PtrBase base;
  std::size_t hash = 0;
};

ExprP mk_const(BitString b);
ExprP mk_var(std::string name);
ExprP mk_op(std::string name, std::vector<ExprP> args);
/// Flattens nested concatenations and drops ε constants.
ExprP mk_concat(std::vector<ExprP> parts);
ExprP mk_range(ExprP e, ExprP off, ExprP len);
ExprP mk_len(ExprP e);
ExprP mk_ptr(PtrBase base, ExprP off);
inline ExprP mk_word(std::uint64_t n, const WordParams& p) { return mk_const(bs(n, p)); }

int compare(const Expr& a, const Expr& b);
inline bool same(const ExprP& a, const ExprP& b) { return a == b || compare(*a, *b) == 0; }
struct ExprLess {
  bool operator()(const ExprP& a, const ExprP& b) const { return compare(*a, *b) < 0; }
};
using ExprSet = std::set<ExprP, ExprLess>;

bool ptr_free(const ExprP& e);
bool is_ground(const ExprP& e);  // no Var and no Ptr
std::set<std::string> free_vars(const ExprP& e);
std::vector<std::string> vars_in_order(const ExprP& e);
ExprP subst(const ExprP& e, const std::map<std::string, ExprP>& m);
/// Replaces every subterm structurally equal to `from`.
ExprP replace(const ExprP& e, const ExprP& from, const ExprP& to);
void subterms(const ExprP& e, const std::function<void(const ExprP&)>& f);
std::size_t expr_size(const ExprP& e);

// ---------------------------------------------------------------- operations

enum class LenKind { None, Fixed, Word, SameAsArgs, PrefixPlusArgs };

struct LenSpec {
  LenKind kind = LenKind::None;
  unsigned bits = 0;
};

using OpFn = std::function<std::optional<BitString>(const std::vector<BitString>&, const WordParams&)>;

struct OpInfo {
  std::string name;
  unsigned arity = 0;
  OpFn fn;
  bool builtin = false;
  bool deterministic = true;
  bool crypto = false;
  bool total = false;            // defined on every input of the right arity
  bool compare_rewrite = false;  // cmp(a,b) = i0 may be read as a = b
  LenSpec len;
};

class OpSet {
 public:
  void add(OpInfo info);
  void alias(const std::string& from, const std::string& to) { aliases_[from] = to; }
  const OpInfo* find(const std::string& name) const;
  std::string canonical(const std::string& name) const;
  const std::map<std::string, OpInfo>& all() const { return ops_; }

 private:
  std::map<std::string, OpInfo> ops_;
  std::map<std::string, std::string> aliases_;
};

/// Prefix that tagged ops (nonce, acc, ek, ...) put in front of their argument: the name bytes and a NUL.
BitString op_tag(std::string_view name);

/// Builtins plus the opaque stubs used by the fixtures.
OpSet default_ops();

/// Word of exactly `w` bits holding n mod 2^w.
BitString word_bits(const Nat& n, std::size_t w);

struct Valuation {
  std::map<std::string, BitString> vars;
  std::map<PtrBase, BitString> bases;

  const BitString* lookup(const std::string& v) const {
    auto it = vars.find(v);
    return it == vars.end() ? nullptr : &it->second;
  }
};

std::optional<BitString> eval(const ExprP& e, const Valuation& eta, const OpSet& ops, const WordParams& p);
ExprP get_len(const ExprP& e, const WordParams& p);
/// Pointer-aware application; nullptr is ⊥.
ExprP apply_sym(const std::string& op, const std::vector<ExprP>& args, const OpSet& ops);

/// True for `e1 = e2` where both sides are variables or cryptographic applications.
bool is_crypto_condition(const ExprP& e, const OpSet& ops);
bool is_crypto_term(const ExprP& e, const OpSet& ops);

// ---------------------------------------------------------------- text

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Token {
  enum class Kind { Ident, Literal, Sym, End } kind = Kind::End;
  std::string text;
  std::size_t line = 1;
};

/// Tokenizer shared by the expression and IML parsers.
class Lexer {
 public:
  explicit Lexer(std::string_view src);
  const Token& peek(std::size_t k = 0) const;
  Token next();
  bool accept_sym(std::string_view s);
  bool accept_ident(std::string_view s);
  void expect_sym(std::string_view s);
  void expect_ident(std::string_view s);
  std::string expect_name();
  bool at_end() const { return peek().kind == Token::Kind::End; }
  [[noreturn]] void fail(const std::string& msg) const;

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

ExprP parse_expr(Lexer& lx, const OpSet& ops, const WordParams& p);
ExprP parse_expr(std::string_view text, const OpSet& ops, const WordParams& p);
std::string print_expr(const ExprP& e, const WordParams& p);

}  // namespace pmx
