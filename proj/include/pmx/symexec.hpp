#pragma once

#include "pmx/cvm.hpp"
#include "pmx/iml.hpp"
#include "pmx/solver.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pmx {

/// All: every Test emits `if e then`. Crypto: only tests whose condition is `e1 = e2`
/// over variables and cryptographic applications are emitted; the others only extend Σ.
enum class EmitMode { All, Crypto };

struct SymOptions {
  EmitMode emit = EmitMode::All;
  SolverOptions solver;
  bool cmp_rewrite = true;
};

struct SymState {
  bool init = true;
  FactSet sigma;
  std::map<PtrBase, ExprP> alloc;
  std::map<PtrBase, ExprP> mem;
  std::vector<ExprP> stack;  // back is the top
  std::size_t pc = 0;
  unsigned next_heap = 1;
  std::set<std::string> names;  // Env variables and model variables in use
};

struct EmittedLabel {
  enum class Kind { In, Nu, Out, Event, If } kind = Kind::In;
  std::string var;
  ExprP e;

  std::string str(const WordParams& p) const;
};

struct SymFail {
  std::string rule;
  std::size_t index = 0;  // instruction index
  std::string detail;
  ExprP obligation;  // unproved entailment goal, if any
  FactSet sigma;
};

/// Per-instruction record in the layout of the symbolic execution table.
struct TraceRow {
  std::size_t index = 0;  // instruction index, or SIZE_MAX for S-Init
  std::string instr;
  std::string note;
  std::vector<std::pair<PtrBase, ExprP>> mem;
  std::vector<ExprP> facts;  // new facts not already shown as an emitted `if`
  std::vector<EmittedLabel> labels;
};

class SymExec {
 public:
  SymExec(const CvmProgram& prog, const OpSet& ops, const WordParams& p, SymOptions opt = {});

  /// One rule of the symbolic semantics; returns false when the program is finished.
  bool step();
  bool done() const { return !s_.init && s_.pc >= prog_.instrs.size(); }
  const SymState& state() const { return s_; }
  const std::vector<EmittedLabel>& labels() const { return labels_; }
  const std::vector<TraceRow>& trace() const { return trace_; }
  const std::optional<SymFail>& failure() const { return fail_; }
  const Solver& solver() const { return solver_; }

 private:
  bool fail(const std::string& rule, std::string detail, ExprP obligation = nullptr);
  bool prove(const ExprP& phi);
  std::optional<ExprP> pop();
  std::string fresh(const std::string& v);
  ExprP rewrite_test(const ExprP& e);

  const CvmProgram& prog_;
  const OpSet& ops_;
  WordParams p_;
  SymOptions opt_;
  Solver solver_;
  SymState s_;
  std::vector<EmittedLabel> labels_;
  std::vector<TraceRow> trace_;
  std::optional<SymFail> fail_;
};

struct SymResult {
  ImlP model;  // null on failure
  std::optional<SymFail> fail;
  std::vector<EmittedLabel> labels;
  std::vector<TraceRow> trace;
  SymState final_state;
};

ImlP model_from_labels(const std::vector<EmittedLabel>& labels);
SymResult extract_model(const CvmProgram& prog, const OpSet& ops, const WordParams& p, SymOptions opt = {});

/// Consecutive instructions sharing a note form one row; memory updates keep the last value per
/// base in order of first update, and writes to the `dummy` scratch variable are dropped.
std::vector<TraceRow> group_rows(const std::vector<TraceRow>& trace);
/// Tab-separated: index, instruction or note, memory updates, new facts, IML.
std::string format_trace(const std::vector<TraceRow>& rows, const WordParams& p);

}  // namespace pmx
