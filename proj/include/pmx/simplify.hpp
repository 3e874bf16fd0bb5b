#pragma once

#include "pmx/solver.hpp"

namespace pmx {

/// Left part of e split at position l, or the literal range e{i0, l}.
ExprP cut_left(const Solver& s, const FactSet& sigma, const ExprP& l, const ExprP& e);
/// Right part of e after dropping a prefix of length l, or e{l, getLen(e) -N l}.
ExprP cut_right(const Solver& s, const FactSet& sigma, const ExprP& l, const ExprP& e);
/// Bottom-up range/concatenation normalisation under sigma.
ExprP simplify(const Solver& s, const FactSet& sigma, const ExprP& e);

}  // namespace pmx
