#include "pmx/cli.hpp"

#include "pmx/difftest.hpp"
#include "pmx/pitrans.hpp"
#include "pmx/simplify.hpp"
#include "pmx/symexec.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

namespace pmx {

namespace {

using json = nlohmann::json;

constexpr int kJsonVersion = 1;

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  unsigned width = 32;
  unsigned k0 = 20;
  std::string ops = "default";
  std::string format = "text";

  WordParams params() const {
    if (width != 4 && width != 8 && width != 16 && width != 32 && width != 64)
      throw CliError("--width must be one of 4, 8, 16, 32, 64");
    if (k0 == 0) throw CliError("--k0 must be positive");
    WordParams p;
    p.N = width;
    p.k0 = k0;
    return p;
  }

  OpSet opset() const {
    OpSet full = default_ops();
    if (ops == "default") return full;
    if (ops == "builtin") {
      OpSet s;
      for (auto& [name, info] : full.all())
        if (info.builtin || name == "nonce") s.add(info);
      for (auto [from, to] : std::initializer_list<std::pair<const char*, const char*>>{
               {"+", "+b"}, {"-", "-b"}, {"==", "="}, {"!", "not"}, {"&&", "and"}, {"||", "or"}})
        s.alias(from, to);
      return s;
    }
    throw CliError("unknown --ops profile " + ops + " (default, builtin)");
  }

  bool as_json() const { return format == "json"; }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Valuation parse_env(const std::vector<std::string>& items, const WordParams& p) {
  Valuation eta;
  for (auto& item : items) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw CliError("--env expects name=literal, got " + item);
    auto v = parse_literal(item.substr(eq + 1), p);
    if (!v) throw CliError("bad literal in --env " + item);
    eta.vars[item.substr(0, eq)] = *v;
  }
  return eta;
}

Pts load_pts(const std::string& path, const OpSet& ops, const WordParams& p, const Valuation& env) {
  std::string text = read_file(path);
  if (ends_with(path, ".cvm")) {
    CvmProgram prog = parse_cvm(text, ops, p);
    Pts t = cvm_pts(prog, AddrMap::pack(prog, p), ops, p);
    for (auto& [k, v] : env.vars) t.eta0.vars[k] = v;
    return t;
  }
  return iml_pts(parse_iml(text, ops, p), ops, p, env);
}

ImlModule load_module(const std::string& path, const OpSet& ops, const WordParams& p) {
  std::string text = read_file(path);
  try {
    return parse_iml_module(text, ops, p);
  } catch (const ParseError&) {
    ImlModule m;
    m.defs.push_back({"", parse_iml(text, ops, p)});
    return m;
  }
}

std::optional<Prec> parse_property(const std::string& s) {
  static const std::regex re(R"(\s*prec\s*\(\s*([A-Za-z_][A-Za-z0-9_]*)\s*,\s*([A-Za-z_][A-Za-z0-9_]*)\s*\)\s*)");
  std::smatch m;
  if (!std::regex_match(s, m, re)) return std::nullopt;
  return Prec{m[1], m[2]};
}

// ---------------------------------------------------------------- run

struct RunArgs {
  std::string file;
  std::string script;
  std::size_t bound = 100000;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string property;
  std::vector<std::string> embed;
  std::vector<std::string> env;
};

int cmd_run(const Common& c, const RunArgs& a, std::ostream& out, std::ostream& err) {
  WordParams p = c.params();
  OpSet ops = c.opset();
  Valuation env = parse_env(a.env, p);
  std::optional<Prec> prop;
  if (!a.property.empty()) {
    prop = parse_property(a.property);
    if (!prop) throw CliError("--property expects prec(a,b), got " + a.property);
  }
  Pts t;
  if (!a.embed.empty()) {
    if (ends_with(a.file, ".cvm")) throw CliError("--embed needs an IML context");
    std::vector<Pts> parts;
    for (auto& e : a.embed) parts.push_back(load_pts(e, ops, p, env));
    t = embed(parse_iml(read_file(a.file), ops, p), std::move(parts), ops, p, env);
  } else {
    t = load_pts(a.file, ops, p, env);
  }
  AttackerScript script;
  if (!a.script.empty()) script = parse_script(read_file(a.script), p);
  if (a.seed_set) script.seed = a.seed;
  ExecResult r = execute(t, script, p, a.bound);

  std::optional<bool> holds;
  std::vector<std::string> tags{"acc", "accept", "request"};
  if (prop) {
    tags.insert(tags.begin(), {prop->head, prop->body});
    holds = check_trace(r.events, *prop, tagging_for({prop->head, prop->body}));
  }
  Tagging tagging = tagging_for(tags);
  auto show_event = [&](const BitString& e) {
    if (auto tb = tagging(e)) return tb->first + "(" + format_literal(tb->second, p) + ")";
    return format_literal(e, p);
  };
  bool stuck = !r.stuck.empty() || r.reason == StopReason::Malformed || r.reason == StopReason::Stuck;
  int code = holds && !*holds ? kExitViolated : stuck ? kExitStuck : kExitOk;

  if (c.as_json()) {
    json j{{"version", kJsonVersion}, {"command", "run"}, {"stop", stop_reason_name(r.reason)},
           {"detail", r.detail},      {"steps", r.steps},  {"exit", code}};
    j["events"] = json::array();
    for (auto& e : r.events) j["events"].push_back(show_event(e));
    j["outputs"] = json::array();
    for (auto& o : r.outputs) j["outputs"].push_back(format_literal(o, p));
    j["stuck"] = json::array();
    for (auto& [key, s] : r.stuck) j["stuck"].push_back({{"process", key}, {"rule", s.rule}, {"detail", s.detail}});
    if (holds) j["property"] = {{"formula", a.property}, {"holds", *holds}};
    out << j.dump(2) << "\n";
  } else {
    for (auto& a2 : r.actions) {
      if (a2.kind == LabelKind::Event) out << "event " << show_event(a2.payload) << "\n";
      else if (a2.kind == LabelKind::Write) out << "out " << format_literal(a2.payload, p) << "\n";
    }
    if (holds) out << "property " << a.property << ": " << (*holds ? "holds" : "violated") << "\n";
  }
  err << "stopped: " << stop_reason_name(r.reason) << (r.detail.empty() ? "" : " (" + r.detail + ")") << "\n";
  for (auto& [key, s] : r.stuck) {
    std::string k = key.size() > 60 ? "..." + key.substr(key.size() - 57) : key;
    err << "stuck [" << k << "] " << s.rule << ": " << s.detail << "\n";
  }
  return code;
}

// ---------------------------------------------------------------- symex

struct SymexArgs {
  std::string file;
  bool trace = false;
  bool raw = false;
  std::string emit = "crypto";
  std::string mode = "exact";
};

ArithMode parse_mode(const std::string& m) {
  if (m == "exact") return ArithMode::Exact;
  if (m == "nooverflow") return ArithMode::NoOverflow;
  throw CliError("--mode must be exact or nooverflow");
}

int cmd_symex(const Common& c, const SymexArgs& a, std::ostream& out, std::ostream& err) {
  WordParams p = c.params();
  OpSet ops = c.opset();
  CvmProgram prog = parse_cvm(read_file(a.file), ops, p);
  SymOptions opt;
  if (a.emit == "crypto") opt.emit = EmitMode::Crypto;
  else if (a.emit == "all") opt.emit = EmitMode::All;
  else throw CliError("--emit must be crypto or all");
  opt.solver.mode = parse_mode(a.mode);
  SymResult r = extract_model(prog, ops, p, opt);
  std::vector<TraceRow> rows = a.raw ? r.trace : group_rows(r.trace);

  if (c.as_json()) {
    json j{{"version", kJsonVersion}, {"command", "symex"}};
    j["model"] = r.model ? json(print_iml(r.model, p)) : json(nullptr);
    if (r.fail) {
      j["failure"] = {{"rule", r.fail->rule},
                      {"index", r.fail->index},
                      {"detail", r.fail->detail},
                      {"obligation", r.fail->obligation ? print_expr(r.fail->obligation, p) : ""}};
      json sigma = json::array();
      for (auto& f : r.fail->sigma.facts) sigma.push_back(print_expr(f, p));
      j["failure"]["sigma"] = sigma;
    }
    if (a.trace) {
      j["trace"] = json::array();
      for (auto& row : rows) {
        json mem = json::array(), facts = json::array(), iml = json::array();
        for (auto& [b, e] : row.mem) mem.push_back({{"base", b.str()}, {"value", print_expr(e, p)}});
        for (auto& f : row.facts) facts.push_back(print_expr(f, p));
        for (auto& l : row.labels) iml.push_back(l.str(p));
        j["trace"].push_back({{"index", row.index == SIZE_MAX ? -1 : long(row.index)},
                              {"instr", row.note.empty() ? row.instr : row.note},
                              {"memory", mem},
                              {"facts", facts},
                              {"iml", iml}});
      }
    }
    out << j.dump(2) << "\n";
  } else {
    if (a.trace) out << format_trace(rows, p);
    if (r.model) out << print_iml(r.model, p) << "\n";
  }
  if (!r.fail) return kExitOk;
  err << "symbolic execution failed: " << r.fail->rule << " at instruction " << r.fail->index << ": "
      << r.fail->detail << "\n";
  if (r.fail->obligation) {
    err << "obligation: ";
    for (std::size_t i = 0; i < r.fail->sigma.facts.size(); ++i)
      err << (i ? ", " : "{") << print_expr(r.fail->sigma.facts[i], p);
    err << (r.fail->sigma.facts.empty() ? "{}" : "}") << " |- " << print_expr(r.fail->obligation, p) << "\n";
  }
  return kExitStuck;
}

// ---------------------------------------------------------------- simplify

struct SimplifyArgs {
  std::string expr;
  std::vector<std::string> facts;
  std::string mode = "exact";
  bool prove = false;
};

int cmd_simplify(const Common& c, const SimplifyArgs& a, std::ostream& out, std::ostream&) {
  WordParams p = c.params();
  OpSet ops = c.opset();
  SolverOptions so;
  so.mode = parse_mode(a.mode);
  Solver s(ops, p, so);
  FactSet sigma;
  for (auto& f : a.facts) sigma.add(parse_expr(f, ops, p));
  ExprP e = parse_expr(a.expr, ops, p);
  if (a.prove) {
    bool proved = s.proves(sigma, e);
    if (c.as_json())
      out << json{{"version", kJsonVersion}, {"command", "simplify"}, {"goal", print_expr(e, p)}, {"proved", proved}}.dump(2)
          << "\n";
    else out << (proved ? "proved" : "unknown") << "\n";
    return proved ? kExitOk : kExitViolated;
  }
  ExprP r = simplify(s, sigma, e);
  if (c.as_json())
    out << json{{"version", kJsonVersion}, {"command", "simplify"}, {"input", print_expr(e, p)}, {"result", print_expr(r, p)}}
               .dump(2)
        << "\n";
  else out << print_expr(r, p) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- translate / check

struct TranslateArgs {
  std::string file;
  std::string output;
  std::string report;
  bool force = false;
  bool strict_len = false;
};

json report_json(const PiModel& m, const WordParams& p) {
  json j{{"version", kJsonVersion}, {"ok", m.ok()}};
  j["issues"] = json::array();
  for (auto& i : m.issues)
    j["issues"].push_back({{"check", i.check}, {"where", i.where}, {"message", i.message}, {"warning", i.warning}});
  j["encoders"] = json::array();
  for (auto& c : m.encoders) j["encoders"].push_back({{"name", c.name}, {"params", c.params}, {"body", print_expr(c.body, p)}});
  j["parsers"] = json::array();
  for (auto& q : m.parsers) {
    json facts = json::array();
    for (auto& f : q.facts) facts.push_back(print_expr(f, p));
    j["parsers"].push_back({{"name", q.name},
                            {"var", q.var},
                            {"body", print_expr(q.body, p)},
                            {"facts", facts},
                            {"encoder", q.encoder},
                            {"index", q.index},
                            {"guard", q.guard ? print_expr(q.guard, p) : ""}});
  }
  j["events"] = json::object();
  for (auto& [tag, srcs] : m.events) j["events"][tag] = srcs;
  j["stripped"] = m.stripped;
  j["processes"] = json::object();
  for (auto& d : m.defs) j["processes"][d.name.empty() ? "main" : d.name] = print_pi(d.proc, p);
  return j;
}

void print_issues(const PiModel& m, std::ostream& os) {
  for (auto& i : m.issues)
    os << (i.warning ? "warning " : "error ") << i.check << (i.where.empty() ? "" : " [" + i.where + "]") << ": "
       << i.message << "\n";
}

PiModel run_translate(const Common& c, const TranslateArgs& a, WordParams& p) {
  p = c.params();
  OpSet ops = c.opset();
  TranslateOptions opt;
  opt.strict_len = a.strict_len;
  return translate(load_module(a.file, ops, p), ops, p, opt);
}

int cmd_translate(const Common& c, const TranslateArgs& a, std::ostream& out, std::ostream& err) {
  WordParams p;
  PiModel m = run_translate(c, a, p);
  print_issues(m, err);
  if (!a.report.empty()) {
    std::ofstream rep(a.report);
    if (!rep) throw CliError("cannot write " + a.report);
    rep << report_json(m, p).dump(2) << "\n";
  }
  if (!m.ok() && !a.force) {
    err << "translation checks failed; use --force to emit anyway\n";
    return kExitViolated;
  }
  std::string pv = emit_proverif(m, p);
  if (a.output.empty() || a.output == "-") out << pv;
  else {
    std::ofstream o(a.output);
    if (!o) throw CliError("cannot write " + a.output);
    o << pv;
  }
  return m.ok() ? kExitOk : kExitViolated;
}

int cmd_check(const Common& c, const TranslateArgs& a, std::ostream& out, std::ostream&) {
  WordParams p;
  PiModel m = run_translate(c, a, p);
  if (c.as_json()) {
    json j = report_json(m, p);
    j["command"] = "check";
    out << j.dump(2) << "\n";
  } else {
    for (auto& d : m.defs) out << (d.name.empty() ? "main" : d.name) << " = " << print_pi(d.proc, p) << "\n";
    for (auto& q : m.parsers)
      if (!q.encoder.empty())
        out << q.name << ": inverse " << q.index << " of " << q.encoder << ", guard " << print_expr(q.guard, p) << "\n";
    print_issues(m, out);
    out << (m.ok() ? "all checks passed" : "checks failed") << "\n";
  }
  return m.ok() ? kExitOk : kExitViolated;
}

// ---------------------------------------------------------------- difftest

int cmd_difftest(const Common& c, DiffOptions opt, bool width_set, std::ostream& out, std::ostream& err) {
  if (width_set) opt.width = c.params().N;
  DiffReport r = run_difftest(opt);
  if (c.as_json()) {
    json j{{"version", kJsonVersion}, {"command", "difftest"}, {"generated", r.generated}, {"extracted", r.extracted},
           {"runs", r.runs},          {"concrete_stuck", r.concrete_stuck}, {"compared", r.compared},
           {"actions", r.actions},    {"mismatches", r.mismatches}, {"inconsistent", r.inconsistent},
           {"seconds", r.seconds}};
    j["samples"] = json::array();
    for (auto& s : r.samples)
      j["samples"].push_back(
          {{"program", s.program}, {"model", s.model}, {"script_seed", s.script_seed}, {"detail", s.detail}});
    out << j.dump(2) << "\n";
  } else {
    out << "generated " << r.generated << ", extracted " << r.extracted << ", runs " << r.runs << ", concrete stuck "
        << r.concrete_stuck << ", compared " << r.compared << ", actions " << r.actions << "\n";
    out << "mismatches " << r.mismatches << ", inconsistent " << r.inconsistent << ", " << r.seconds << " s\n";
    for (auto& s : r.samples)
      err << "mismatch (script seed " << s.script_seed << "): " << s.detail << "\n" << s.program << "\n" << s.model << "\n";
  }
  return r.mismatches || r.inconsistent ? kExitViolated : kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"pmx: protocol model extraction from CVM programs"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file; command line flags take precedence");

  Common c;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--width", c.width, "word width N (4, 8, 16, 32, 64)");
    sub->add_option("--k0", c.k0, "security parameter: nonce length of new~");
    sub->add_option("--ops", c.ops, "operation profile (default, builtin)");
    sub->add_option("--format", c.format, "output format")->check(CLI::IsMember({"text", "json"}));
  };

  RunArgs ra;
  auto* run = app.add_subcommand("run", "execute a CVM or IML file against an attacker script");
  add_common(run);
  run->add_option("file", ra.file, "program (.cvm) or IML process")->required();
  run->add_option("--script", ra.script, "attacker script");
  run->add_option("--bound", ra.bound, "step bound");
  run->add_option("--seed", ra.seed, "randomness seed (overrides the script)")->each([&](const std::string&) {
    ra.seed_set = true;
  });
  run->add_option("--property", ra.property, "trace property prec(a,b)");
  run->add_option("--embed", ra.embed, "program filling the next hole of an IML context");
  run->add_option("--env", ra.env, "environment entry name=literal");

  SymexArgs sa;
  auto* symex = app.add_subcommand("symex", "extract an IML model from a CVM program");
  add_common(symex);
  symex->add_option("file", sa.file, "CVM program")->required();
  symex->add_flag("--trace", sa.trace, "print the symbolic execution table");
  symex->add_flag("--raw", sa.raw, "one table row per instruction");
  symex->add_option("--emit", sa.emit, "tests emitted as if: crypto or all");
  symex->add_option("--mode", sa.mode, "arithmetic mode: exact or nooverflow");

  SimplifyArgs sia;
  auto* simp = app.add_subcommand("simplify", "simplify an expression under facts");
  add_common(simp);
  simp->add_option("expr", sia.expr, "expression")->required();
  simp->add_option("--fact", sia.facts, "fact of the path condition");
  simp->add_option("--mode", sia.mode, "arithmetic mode: exact or nooverflow");
  simp->add_flag("--prove", sia.prove, "decide the facts entail the expression");

  TranslateArgs ta;
  auto* trans = app.add_subcommand("translate", "translate an IML model to a ProVerif file");
  add_common(trans);
  trans->add_option("file", ta.file, "IML module or process")->required();
  trans->add_option("-o,--output", ta.output, "output .pv file (default: standard output)");
  trans->add_option("--report", ta.report, "write the check report as JSON");
  trans->add_flag("--force", ta.force, "emit despite failed checks");
  trans->add_flag("--strict-len", ta.strict_len, "an unproved length condition is an error");

  TranslateArgs ca;
  auto* check = app.add_subcommand("check", "report the translation checks of an IML model");
  add_common(check);
  check->add_option("file", ca.file, "IML module or process")->required();
  check->add_flag("--strict-len", ca.strict_len, "an unproved length condition is an error");

  DiffOptions da;
  auto* diff = app.add_subcommand("difftest", "compare concrete runs and extracted models of random programs");
  add_common(diff);
  diff->add_option("--programs", da.programs, "programs with a successful extraction");
  diff->add_option("--scripts", da.scripts, "attacker scripts per program");
  diff->add_option("--max-instrs", da.max_instrs, "instructions per program");
  diff->add_option("--seed", da.seed, "generator seed");
  diff->add_option("--threads", da.threads, "worker threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitStuck;
  }

  try {
    if (*run) return cmd_run(c, ra, out, err);
    if (*symex) return cmd_symex(c, sa, out, err);
    if (*simp) return cmd_simplify(c, sia, out, err);
    if (*trans) return cmd_translate(c, ta, out, err);
    if (*check) return cmd_check(c, ca, out, err);
    if (*diff) return cmd_difftest(c, da, diff->count("--width") > 0, out, err);
  } catch (const CliError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitStuck;
}

}  // namespace pmx
