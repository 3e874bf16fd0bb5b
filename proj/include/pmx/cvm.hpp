#pragma once

#include "pmx/pts.hpp"

#include <map>
#include <string>
#include <vector>

namespace pmx {

enum class InstrKind { Const, Ref, Malloc, Load, In, Env, Apply, Out, Test, Store };

struct Instr {
  InstrKind kind;
  BitString value;   // Const
  std::string var;   // Ref, In, Env
  bool rnd = false;  // In: rnd instead of read
  bool event = false;  // Out: event instead of write
  std::string op;    // Apply, canonical name
  int line = 0;
  std::string note;  // nearest preceding `//` comment block

  std::string str(const WordParams& p) const;
};

struct CvmProgram {
  std::vector<Instr> instrs;

  /// Variables used in Ref instructions, in order of first use.
  std::vector<std::string> ref_vars() const;
  /// Ref, In and Env variables.
  std::vector<std::string> all_vars() const;
};

/// `;`-terminated instructions with `//` comments. Expands Clear, Env', Apply', Varsize
/// and accepts `Event` for `Out event`.
CvmProgram parse_cvm(std::string_view text, const OpSet& ops, const WordParams& p);
std::string print_cvm(const CvmProgram& prog, const WordParams& p);

struct AddrMap {
  std::map<std::string, std::uint64_t> addr;

  /// Packs ref_vars at 1, 1+N, 1+2N, ...
  static AddrMap pack(const CvmProgram& prog, const WordParams& p);
  /// Disjoint N-bit ranges inside 1 .. 2^N-1.
  bool valid(const WordParams& p) const;
};

/// Half-open address intervals.
class Intervals {
 public:
  bool intersects(std::uint64_t a, std::uint64_t n) const;
  bool covers(std::uint64_t a, std::uint64_t n) const;
  void add(std::uint64_t a, std::uint64_t n);
  const std::map<std::uint64_t, std::uint64_t>& raw() const { return iv_; }

 private:
  std::map<std::uint64_t, std::uint64_t> iv_;  // start -> end
};

struct ConcState {
  bool init = true;
  Intervals alloc;
  std::map<std::uint64_t, bool> mem;
  std::vector<BitString> stack;  // back is the top
  std::size_t pc = 0;
};

struct CvmContext {
  CvmProgram prog;
  AddrMap addr;
  const OpSet* ops = nullptr;
  WordParams p;
};

using CvmStep = std::variant<std::tuple<Label, Valuation, ConcState>, Stuck>;

/// One rule of the concrete semantics. `input` is the attacker's label payload for
/// Malloc/Load/In read and the sampled payload for In rnd.
CvmStep cvm_step(const CvmContext& ctx, const Valuation& eta, const ConcState& s, const BitString& input);
ProcKind cvm_kind(const CvmContext& ctx, const ConcState& s);

ProcessP cvm_process(std::shared_ptr<const CvmContext> ctx, ConcState s = {});
Pts cvm_pts(const CvmProgram& prog, const AddrMap& addr, const OpSet& ops, const WordParams& p);

}  // namespace pmx
