#pragma once

#include "pmx/iml.hpp"
#include "pmx/solver.hpp"

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmx {

struct TranslateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- pi processes

enum class PiKind { Nil, Repl, Par, NuTilde, In, Out, Event, Let };

struct PiProcess;
using PiP = std::shared_ptr<const PiProcess>;

/// Applied pi subset of IML. Let: var = e (variables and operations only); Event: constant tag.
struct PiProcess {
  PiKind kind = PiKind::Nil;
  std::string var;
  ExprP e;
  std::string tag;
  PiP p, q;  // continuation or then-branch; second branch of Par/Let (may be null)
};

PiP pi_nil();
PiP pi_repl(PiP p);
PiP pi_par(PiP p, PiP q);
PiP pi_nu(std::string x, PiP p);
PiP pi_in(std::string x, PiP p);
PiP pi_out(std::string x, PiP p);
PiP pi_event(std::string tag, PiP p);
PiP pi_let(std::string x, ExprP e, PiP then, PiP otherwise = nullptr);

std::string print_pi(const PiP& p, const WordParams& wp);
/// The pi process as IML: new~ for restriction and event(tag) with the constant op_tag(tag).
ImlP pi_to_iml(const PiP& p, const WordParams& wp);

// ---------------------------------------------------------------- translation pieces

enum class IfClass { Cryptographic, Auxiliary };
IfClass classify_if(const ExprP& e, const OpSet& ops);

enum class ExprClass { Cryptographic, Encoding, Parsing, None };
ExprClass classify_expr(const ExprP& e, const OpSet& ops);

/// Lets are introduced so that outputs carry variables, cryptographic ifs compare variables,
/// and every let body is an encoding, parsing or cryptographic expression.
ImlP normalize(const ImlP& proc, const OpSet& ops);

struct EncoderDef {
  std::string name;
  std::vector<std::string> params;  // x1 .. xn, in order of first occurrence in the source
  ExprP body;                       // over params
};

struct ParserDef {
  std::string name;
  std::string var;            // the single variable of the body
  ExprP body;
  std::vector<ExprP> facts;   // auxiliary conditions dominating the parsing let
  ExprP guard;                // φ'_p once matched
  std::string encoder;        // matched encoder
  unsigned index = 0;         // the parser computes this inverse of the encoder
};

struct PiDef {
  std::string name;
  PiP proc;
};

struct Issue {
  std::string check;  // normalize, C1, C2, C3, C4, key-safety
  std::string where;
  std::string message;
  bool warning = false;
};

struct PiModel {
  std::vector<PiDef> defs;
  std::vector<EncoderDef> encoders;
  std::vector<ParserDef> parsers;
  std::map<std::string, std::set<std::string>> events;  // pi tag -> IML event expressions
  std::vector<std::string> stripped;                    // removed castToInt applications
  std::vector<Issue> issues;

  bool ok() const;
  const EncoderDef* encoder(const std::string& name) const;
};

struct Extraction {
  std::vector<PiDef> defs;
  std::vector<EncoderDef> encoders;
  std::vector<ParserDef> parsers;
  std::map<std::string, std::set<std::string>> events;
};

/// Replaces encoding and parsing lets by new operations, drops auxiliary ifs and turns
/// cryptographic ifs into `let _ = eq(x1, x2)`. Input definitions must be normalised.
Extraction extract_encoders_parsers(const ImlModule& normalized, const OpSet& ops, const WordParams& p);

/// Fields of an encoder body split into parameters, length fields and constant tags.
struct EncoderShape {
  enum class Field { Param, Length, Tag };
  std::vector<ExprP> parts;
  std::vector<Field> kinds;
};
std::optional<EncoderShape> encoder_shape(const EncoderDef& c, std::string* why = nullptr);

struct C1Result {
  bool ok = true;
  std::vector<std::string> problems;
};
C1Result check_c1(const std::vector<EncoderDef>& encoders, const OpSet& ops, const WordParams& p);

/// i (1-based) when simplify(e_p[e_c/x]) is the parameter x_i.
std::optional<unsigned> check_c3(const EncoderDef& c, const ParserDef& parser, const Solver& s);

struct C2C4Result {
  bool ok = false;
  std::vector<ExprP> tag_terms;  // φ_tag conjuncts
  ExprP phi_len;
  ExprP guard;                   // φ_tag ∧ φ_len
  bool len_unproved = false;     // φ_p ⊢ φ_len came back Unknown
  std::string error;
};
C2C4Result check_c2_c4(const EncoderDef& c, const ParserDef& parser, const Solver& s);

struct KeySafety {
  std::vector<Issue> violations;
  std::set<std::string> foreign_ops;  // operations outside the key-safe signature
  bool ok() const { return violations.empty(); }
};
/// `tupling` names operations that behave as pairs or projections (encoders and parsers).
KeySafety check_key_safe(const PiP& proc, const std::set<std::string>& tupling, const std::string& where = "");

struct TranslateOptions {
  SolverOptions solver{ArithMode::NoOverflow};
  bool strict_len = false;  // an unproved φ_len is an error instead of a warning
};

PiModel translate(const ImlModule& m, const OpSet& ops, const WordParams& p, const TranslateOptions& opt = {});

/// Adds concrete implementations of the model's encoders and parsers to ops.
void register_ops(const PiModel& m, OpSet& ops);

std::string emit_proverif(const PiModel& m, const WordParams& p);

}  // namespace pmx
