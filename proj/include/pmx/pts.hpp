#pragma once

#include "pmx/symcore.hpp"

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace pmx {

enum class LabelKind { Read, Ctr, Rnd, Write, Event };

struct Label {
  LabelKind kind = LabelKind::Ctr;
  BitString payload;

  static Label ctr_eps() { return {LabelKind::Ctr, {}}; }
  static Label ctr_bit(bool b) { return {LabelKind::Ctr, BitString(std::vector<std::uint8_t>{std::uint8_t(b)})}; }
  /// read, ctr and write labels are observations; rnd and event are not.
  bool observable() const { return kind == LabelKind::Read || kind == LabelKind::Ctr || kind == LabelKind::Write; }
  std::string str(const WordParams& p) const;
  friend bool operator==(const Label&, const Label&) = default;
};

const char* label_kind_name(LabelKind k);

enum class ProcKind { Reading, Control, Randomising, Writing, Event, Done };

class Process;
using ProcessP = std::shared_ptr<const Process>;

struct Successor {
  Valuation eta;
  ProcessP proc;
};

struct Transition {
  Label label;
  std::vector<Successor> succ;
};

struct Stuck {
  std::string rule;
  std::string detail;
};

using StepResult = std::variant<Transition, Stuck>;

/// One executing-process state of a PTS.
class Process {
 public:
  virtual ~Process() = default;
  virtual ProcKind kind(const Valuation& eta) const = 0;
  /// Reading and control processes take the attacker's label, randomising ones the sampled rnd label;
  /// writing and event processes ignore it.
  virtual StepResult step(const Valuation& eta, const Label& label) const = 0;
  /// Payload length of a randomising process.
  virtual std::optional<std::size_t> rnd_length(const Valuation&) const { return std::nullopt; }
  /// Label of a control step the process can take without attacker choice.
  virtual std::optional<Label> forced(const Valuation&) const { return std::nullopt; }
  virtual std::string describe() const = 0;
};

struct Pts {
  ProcessP initial;
  Valuation eta0;
};

// ---------------------------------------------------------------- histories

struct Observation {
  std::optional<Label> label;  // empty for a replica index
  std::size_t index = 0;

  std::string str(const WordParams& p) const;
  friend bool operator==(const Observation&, const Observation&) = default;
};

using History = std::vector<Observation>;
std::string history_str(const History& h, const WordParams& p);

struct ExecutingProcess {
  History history;
  std::string key;
  Valuation eta;
  ProcessP proc;
};

struct Action {
  LabelKind kind;
  BitString payload;
  friend bool operator==(const Action&, const Action&) = default;
};

/// A protocol state together with the actions it has produced so far.
class ProtocolRun {
 public:
  ProtocolRun(const Pts& t, const WordParams& p, std::uint64_t seed = 0);

  const std::vector<ExecutingProcess>& state() const { return live_; }
  const ExecutingProcess* find(const std::string& key) const;
  /// Keys of live processes matching a glob and able to take a label of the given kind.
  std::vector<std::string> match(const std::string& glob, LabelKind kind) const;

  /// Applies command (key, label); Stuck when no transition exists.
  std::optional<Stuck> command(const std::string& key, const Label& label);
  /// Runs randomising, writing, event and forced control steps in FIFO order.
  std::size_t auto_run(std::size_t budget);

  const std::vector<Action>& actions() const { return actions_; }
  std::vector<BitString> events() const;
  std::vector<BitString> outputs() const;
  const std::vector<std::pair<std::string, Stuck>>& stuck() const { return stuck_; }
  std::size_t steps() const { return steps_; }
  const WordParams& params() const { return p_; }

 private:
  std::optional<Stuck> apply(std::size_t i, const Label& label);
  bool autonomous(const ExecutingProcess& e, Label& label);

  WordParams p_;
  std::vector<ExecutingProcess> live_;
  std::vector<Action> actions_;
  std::vector<std::pair<std::string, Stuck>> stuck_;
  std::mt19937_64 rng_;
  std::size_t steps_ = 0;
};

// ---------------------------------------------------------------- attacker scripts

struct ScriptEntry {
  enum class Kind { Deliver, Expect } kind = Kind::Deliver;
  std::string selector;
  LabelKind label = LabelKind::Read;
  BitString payload;
  int line = 0;
};

struct AttackerScript {
  std::vector<ScriptEntry> entries;
  std::uint64_t seed = 0;
};

/// Lines: `deliver <selector> read|ctr <literal>` (`ctr 0` and `ctr 1` are single bits), `expect <literal>`, `seed <u64>`, `# comment`.
/// A selector containing spaces is written in single quotes.
AttackerScript parse_script(std::string_view text, const WordParams& p);

enum class StopReason { ScriptEnd, Bound, Malformed, Stuck };
const char* stop_reason_name(StopReason r);

struct ExecResult {
  std::vector<BitString> events;
  std::vector<BitString> outputs;
  std::vector<Action> actions;
  std::vector<ExecutingProcess> final_state;
  std::vector<std::pair<std::string, Stuck>> stuck;
  StopReason reason = StopReason::ScriptEnd;
  std::string detail;
  std::size_t steps = 0;
};

ExecResult execute(const Pts& t, const AttackerScript& script, const WordParams& p, std::size_t bound = 100000);

// ---------------------------------------------------------------- trace properties

/// Splits an event payload into (tag, body).
using Tagging = std::function<std::optional<std::pair<std::string, BitString>>(const BitString&)>;
Tagging tagging_for(std::vector<std::string> tags);

struct Prec {
  std::string head;
  std::string body;
};
/// Must be prefix-closed.
using TracePredicate = std::function<bool(const std::vector<BitString>&)>;
using TraceProperty = std::variant<Prec, TracePredicate>;

bool check_trace(const std::vector<BitString>& trace, const TraceProperty& rho, const Tagging& tagging);

}  // namespace pmx
