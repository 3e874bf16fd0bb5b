#pragma once

#include "pmx/pts.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace pmx {

enum class ImlKind { Nil, Repl, Par, New, In, Out, Event, If, Let, Hole };

struct Iml;
using ImlP = std::shared_ptr<const Iml>;

/// IML process. New: var, e = length; In: var; Out/Event/If: e; Let: var, e.
/// p is the continuation or then-branch, q the second branch of Par/If/Let (may be null).
struct Iml {
  ImlKind kind = ImlKind::Nil;
  std::string var;
  ExprP e;
  ImlP p, q;
  unsigned hole = 0;
};

ImlP iml_nil();
ImlP iml_repl(ImlP p);
ImlP iml_par(ImlP p, ImlP q);
ImlP iml_new(std::string x, ExprP len, ImlP p);
/// new~ x; P, i.e. new x~[k0]; let x = nonce(x~) in P.
ImlP iml_new_tilde(const std::string& x, ImlP p, const WordParams& wp);
ImlP iml_in(std::string x, ImlP p);
ImlP iml_out(ExprP e, ImlP p);
ImlP iml_event(ExprP e, ImlP p);
ImlP iml_if(ExprP e, ImlP then, ImlP otherwise = nullptr);
ImlP iml_let(std::string x, ExprP e, ImlP then, ImlP otherwise = nullptr);
ImlP iml_hole(unsigned i);

bool iml_equal(const ImlP& a, const ImlP& b);
std::size_t iml_size(const ImlP& p);
/// Hole indices in syntax order.
std::vector<unsigned> holes(const ImlP& p);

/// Named definitions `Name = P`; a bare process is one definition with an empty name.
struct ImlModule {
  std::vector<std::pair<std::string, ImlP>> defs;
  ImlP find(const std::string& name) const;
};

ImlModule parse_iml_module(std::string_view text, const OpSet& ops, const WordParams& p);
/// A single process; throws when the text holds named definitions.
ImlP parse_iml(std::string_view text, const OpSet& ops, const WordParams& p);
std::string print_iml(const ImlP& proc, const WordParams& p);
std::string print_module(const ImlModule& m, const WordParams& p);

/// Executing IML process. Holes are replaced by the initial processes of `parts`
/// (hole i by parts[i-1]) and inherit the environment at the hole.
ProcessP iml_process(ImlP proc, std::shared_ptr<const std::vector<Pts>> parts, const OpSet& ops, const WordParams& p);
Pts iml_pts(ImlP proc, const OpSet& ops, const WordParams& p, Valuation eta0 = {});
/// Throws std::invalid_argument unless the holes of proc are exactly 1..parts.size(), each once.
Pts embed(ImlP proc, std::vector<Pts> parts, const OpSet& ops, const WordParams& p, Valuation eta0 = {});

/// The hole reached along history h, if h is a history of a hole of proc.
std::optional<unsigned> hole_at(const ImlP& proc, const History& h);
inline bool is_hole_history(const ImlP& proc, const History& h) { return hole_at(proc, h).has_value(); }

}  // namespace pmx
