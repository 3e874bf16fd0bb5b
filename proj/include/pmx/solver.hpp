#pragma once

#include "pmx/symcore.hpp"

#include <string>
#include <vector>

namespace pmx {

enum class Verdict { Proved, Unknown };

/// Exact: +b/-b wrap modulo 2^width (carry case split when the width is known).
/// NoOverflow: +b/-b read as +N/-N, the assumption made for the pi translation checks.
enum class ArithMode { Exact, NoOverflow };

struct SolverOptions {
  ArithMode mode = ArithMode::Exact;
  std::size_t max_leaves = 256;
  std::size_t max_constraints = 3000;
};

/// Path condition Σ plus instantiated length axioms.
struct FactSet {
  std::vector<ExprP> facts;

  void add(ExprP f) {
    for (auto& g : facts)
      if (same(g, f)) return;
    facts.push_back(std::move(f));
  }
  bool contains(const ExprP& f) const {
    for (auto& g : facts)
      if (same(g, f)) return true;
    return false;
  }
};

/// ∀x̄: len(op(x̄)) = rhs(x̄), generated from an op's result-length spec.
struct LenAxiom {
  std::string op;
  LenSpec spec;

  /// The instance for one application `app` of `op`, or nullptr.
  ExprP instantiate(const ExprP& app, const WordParams& p) const;
};

std::vector<LenAxiom> length_axioms(const OpSet& ops);

class Solver {
 public:
  Solver(const OpSet& ops, WordParams p, SolverOptions opt = {});

  Verdict entails(const FactSet& sigma, const ExprP& phi) const;
  bool proves(const FactSet& sigma, const ExprP& phi) const { return entails(sigma, phi) == Verdict::Proved; }

  /// The abstracted linear system for Σ ∧ ¬φ, one constraint per line.
  std::string dump(const FactSet& sigma, const ExprP& phi) const;
  /// SMT-LIB2 rendering of the same abstraction (integer atoms).
  std::string to_smtlib(const FactSet& sigma, const ExprP& phi) const;

  const OpSet& ops() const { return ops_; }
  const WordParams& params() const { return p_; }
  const SolverOptions& options() const { return opt_; }
  std::size_t queries() const { return queries_; }

 private:
  const OpSet& ops_;
  WordParams p_;
  SolverOptions opt_;
  std::vector<LenAxiom> axioms_;
  mutable std::size_t queries_ = 0;

  friend struct SolverImpl;
};

/// Bounded search for η with eval(ψ, η) = i1 for all ψ ∈ Σ.
std::optional<Valuation> consistent_valuation_sampler(const FactSet& sigma, const std::vector<std::string>& vars,
                                                      const OpSet& ops, const WordParams& p, std::size_t max_len = 4,
                                                      std::size_t random_tries = 20000, std::uint64_t seed = 1);

/// True iff eval(ψ, η) = i1 for every ψ ∈ Σ.
bool satisfies(const FactSet& sigma, const Valuation& eta, const OpSet& ops, const WordParams& p);

}  // namespace pmx
