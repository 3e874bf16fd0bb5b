#include "pmx/pts.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <set>
#include <sstream>

namespace pmx {

const char* label_kind_name(LabelKind k) {
  switch (k) {
    case LabelKind::Read: return "read";
    case LabelKind::Ctr: return "ctr";
    case LabelKind::Rnd: return "rnd";
    case LabelKind::Write: return "write";
    case LabelKind::Event: return "event";
  }
  return "?";
}

namespace {

std::string payload_str(const Label& l, const WordParams& p) {
  if (l.kind == LabelKind::Ctr && l.payload.size() == 1) return l.payload[0] ? "1" : "0";
  return format_literal(l.payload, p);
}

}  // namespace

std::string Label::str(const WordParams& p) const {
  return std::string(label_kind_name(kind)) + " " + payload_str(*this, p);
}

std::string Observation::str(const WordParams& p) const {
  if (!label) return std::to_string(index);
  return std::string(label_kind_name(label->kind)) + ":" + payload_str(*label, p);
}

std::string history_str(const History& h, const WordParams& p) {
  std::string out;
  for (auto& o : h) {
    if (!out.empty()) out += ' ';
    out += o.str(p);
  }
  return out;
}

// ---------------------------------------------------------------- protocol run

ProtocolRun::ProtocolRun(const Pts& t, const WordParams& p, std::uint64_t seed) : p_(p), rng_(seed) {
  live_.push_back({{}, "", t.eta0, t.initial});
}

const ExecutingProcess* ProtocolRun::find(const std::string& key) const {
  for (auto& e : live_)
    if (e.key == key) return &e;
  return nullptr;
}

std::vector<std::string> ProtocolRun::match(const std::string& glob, LabelKind kind) const {
  std::vector<std::string> out;
  for (auto& e : live_) {
    ProcKind k = e.proc->kind(e.eta);
    bool fits = (kind == LabelKind::Read && k == ProcKind::Reading) || (kind == LabelKind::Ctr && k == ProcKind::Control);
    if (fits && fnmatch(glob.c_str(), e.key.c_str(), 0) == 0) out.push_back(e.key);
  }
  return out;
}

std::optional<Stuck> ProtocolRun::apply(std::size_t i, const Label& label) {
  ExecutingProcess e = live_[i];
  StepResult r = e.proc->step(e.eta, label);
  if (auto* s = std::get_if<Stuck>(&r)) return *s;
  auto& t = std::get<Transition>(r);
  ++steps_;
  if (t.label.kind == LabelKind::Rnd || t.label.kind == LabelKind::Write || t.label.kind == LabelKind::Event)
    actions_.push_back({t.label.kind, t.label.payload});
  std::vector<ExecutingProcess> next;
  for (std::size_t j = 0; j < t.succ.size(); ++j) {
    History h = e.history;
    if (t.label.observable()) h.push_back({t.label, 0});
    h.push_back({std::nullopt, j + 1});
    std::string key = history_str(h, p_);
    next.push_back({std::move(h), std::move(key), t.succ[j].eta, t.succ[j].proc});
  }
  live_.erase(live_.begin() + long(i));
  live_.insert(live_.begin() + long(i), next.begin(), next.end());
  return std::nullopt;
}

std::optional<Stuck> ProtocolRun::command(const std::string& key, const Label& label) {
  for (std::size_t i = 0; i < live_.size(); ++i)
    if (live_[i].key == key) return apply(i, label);
  return Stuck{"command", "no process with history '" + key + "'"};
}

bool ProtocolRun::autonomous(const ExecutingProcess& e, Label& label) {
  switch (e.proc->kind(e.eta)) {
    case ProcKind::Randomising: {
      auto n = e.proc->rnd_length(e.eta);
      BitString b;
      if (n)
        for (std::size_t i = 0; i < *n; ++i) b.push_back(rng_() & 1);
      label = {LabelKind::Rnd, b};
      return true;
    }
    case ProcKind::Writing: label = {LabelKind::Write, {}}; return true;
    case ProcKind::Event: label = {LabelKind::Event, {}}; return true;
    case ProcKind::Control:
      if (auto f = e.proc->forced(e.eta)) {
        label = *f;
        return true;
      }
      return false;
    default: return false;
  }
}

std::size_t ProtocolRun::auto_run(std::size_t budget) {
  std::size_t n = 0;
  while (n < budget) {
    bool progressed = false;
    for (std::size_t i = 0; i < live_.size(); ++i) {
      Label label;
      if (!autonomous(live_[i], label)) continue;
      std::string key = live_[i].key;
      if (auto s = apply(i, label)) {
        stuck_.push_back({key, *s});
        live_.erase(live_.begin() + long(i));
      }
      ++n;
      progressed = true;
      break;
    }
    if (!progressed) break;
  }
  return n;
}

std::vector<BitString> ProtocolRun::events() const {
  std::vector<BitString> out;
  for (auto& a : actions_)
    if (a.kind == LabelKind::Event) out.push_back(a.payload);
  return out;
}

std::vector<BitString> ProtocolRun::outputs() const {
  std::vector<BitString> out;
  for (auto& a : actions_)
    if (a.kind == LabelKind::Write) out.push_back(a.payload);
  return out;
}

// ---------------------------------------------------------------- scripts

AttackerScript parse_script(std::string_view text, const WordParams& p) {
  AttackerScript s;
  std::istringstream in{std::string(text)};
  std::string line;
  int no = 0;
  auto fail = [&](const std::string& msg) { throw ParseError("script line " + std::to_string(no) + ": " + msg); };
  while (std::getline(in, line)) {
    ++no;
    auto hash = line.find('#');
    if (hash != std::string::npos && (line.find('"') == std::string::npos || line.find_first_not_of(" \t") == hash))
      line.resize(hash);
    std::size_t pos = 0;
    auto skip = [&] {
      while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    };
    auto word = [&]() -> std::string {
      skip();
      if (pos < line.size() && line[pos] == '\'') {
        auto end = line.find('\'', pos + 1);
        if (end == std::string::npos) fail("unterminated selector");
        std::string w = line.substr(pos + 1, end - pos - 1);
        pos = end + 1;
        return w;
      }
      std::size_t start = pos;
      while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
      return line.substr(start, pos - start);
    };
    auto rest = [&]() {
      skip();
      std::string r = line.substr(pos);
      while (!r.empty() && std::isspace(static_cast<unsigned char>(r.back()))) r.pop_back();
      return r;
    };
    auto literal = [&](const std::string& t) {
      auto b = parse_literal(t, p);
      if (!b) fail("bad literal '" + t + "'");
      return *b;
    };
    std::string cmd = word();
    if (cmd.empty()) continue;
    ScriptEntry e;
    e.line = no;
    if (cmd == "seed") {
      s.seed = std::stoull(word());
      continue;
    } else if (cmd == "expect") {
      e.kind = ScriptEntry::Kind::Expect;
      e.payload = literal(rest());
    } else if (cmd == "deliver") {
      e.selector = word();
      std::string k = word();
      if (k == "read") e.label = LabelKind::Read;
      else if (k == "ctr") e.label = LabelKind::Ctr;
      else fail("expected read or ctr, got '" + k + "'");
      std::string t = rest();
      if (e.label == LabelKind::Ctr && (t == "0" || t == "1")) e.payload = Label::ctr_bit(t == "1").payload;
      else e.payload = literal(t);
    } else {
      fail("unknown command '" + cmd + "'");
    }
    s.entries.push_back(std::move(e));
  }
  return s;
}

const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::ScriptEnd: return "scriptEnd";
    case StopReason::Bound: return "bound";
    case StopReason::Malformed: return "malformed";
    case StopReason::Stuck: return "stuck";
  }
  return "?";
}

ExecResult execute(const Pts& t, const AttackerScript& script, const WordParams& p, std::size_t bound) {
  ProtocolRun run(t, p, script.seed);
  ExecResult r;
  std::size_t seen_outputs = 0;
  auto finish = [&](StopReason why, std::string detail) {
    r.reason = why;
    r.detail = std::move(detail);
    r.actions = run.actions();
    r.events = run.events();
    r.outputs = run.outputs();
    r.final_state = run.state();
    r.stuck = run.stuck();
    r.steps = run.steps();
    return r;
  };
  auto budget = [&] { return bound > run.steps() ? bound - run.steps() : 0; };
  run.auto_run(budget());
  for (auto& e : script.entries) {
    if (run.steps() >= bound) return finish(StopReason::Bound, "");
    std::string where = "line " + std::to_string(e.line) + ": ";
    if (e.kind == ScriptEntry::Kind::Expect) {
      auto outs = run.outputs();
      if (seen_outputs >= outs.size()) return finish(StopReason::Malformed, where + "expected output not produced");
      if (outs[seen_outputs] != e.payload)
        return finish(StopReason::Malformed, where + "output " + format_literal(outs[seen_outputs], p) + " differs");
      ++seen_outputs;
      continue;
    }
    auto keys = run.match(e.selector, e.label);
    if (keys.size() != 1)
      return finish(StopReason::Malformed, where + "selector '" + e.selector + "' matches " +
                                               std::to_string(keys.size()) + " waiting processes");
    if (auto s = run.command(keys[0], {e.label, e.payload}))
      return finish(StopReason::Stuck, where + s->rule + ": " + s->detail);
    run.auto_run(budget());
  }
  if (run.steps() >= bound) return finish(StopReason::Bound, "");
  return finish(StopReason::ScriptEnd, "");
}

// ---------------------------------------------------------------- properties

Tagging tagging_for(std::vector<std::string> tags) {
  return [tags = std::move(tags)](const BitString& b) -> std::optional<std::pair<std::string, BitString>> {
    for (auto& t : tags) {
      BitString prefix = op_tag(t);
      if (b.size() < prefix.size()) continue;
      bool ok = true;
      for (std::size_t i = 0; i < prefix.size() && ok; ++i) ok = b[i] == prefix[i];
      if (!ok) continue;
      BitString body;
      for (std::size_t i = prefix.size(); i < b.size(); ++i) body.push_back(b[i]);
      return std::make_pair(t, body);
    }
    return std::nullopt;
  };
}

bool check_trace(const std::vector<BitString>& trace, const TraceProperty& rho, const Tagging& tagging) {
  if (auto* pred = std::get_if<TracePredicate>(&rho)) return (*pred)(trace);
  const Prec& prec = std::get<Prec>(rho);
  std::set<BitString> heads;
  for (auto& ev : trace) {
    auto t = tagging(ev);
    if (!t) continue;
    if (t->first == prec.head) heads.insert(t->second);
    if (t->first == prec.body && !heads.count(t->second)) return false;
  }
  return true;
}

}  // namespace pmx
