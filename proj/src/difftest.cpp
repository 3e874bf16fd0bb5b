#include "pmx/difftest.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

namespace pmx {

std::vector<std::string> diff_stub_ops() { return {"mac", "sha1", "pair"}; }

namespace {

std::string num(std::uint64_t n) { return "i" + std::to_string(n); }

struct Buf {
  std::string var;
  std::uint64_t size = 0;
  std::uint64_t filled = 0;
  bool dynamic = false;  // filled by a read of a variable length
};

class Gen {
 public:
  Gen(std::mt19937_64& rng, const WordParams& p) : rng_(rng), p_(p) {}

  struct Shape {
    std::vector<std::string> words;
    std::vector<Buf> bufs;
    bool noisy = false;
  };
  Shape shape() const { return sh_; }
  void restore(Shape s) { sh_ = std::move(s); }

  std::string snippet() {
    static const std::vector<int> weights{3, 3, 4, 2, 2, 3, 3, 2, 2, 3, 2, 2, 1, 3, 3, 1};
    for (;;) {
      std::size_t k = std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng_);
      if (bufs_.empty() && k < 13 && pick(2)) k = 1;
      switch (k) {
        case 0: return read_word();
        case 1: return malloc_buf();
        case 2: return append_read();
        case 3: return append_word();
        case 4: return append_mac();
        case 5: return out_slice();
        case 6: return event_crypto();
        case 7: return out_arith();
        case 8: return test_word();
        case 9: return test_slices();
        case 10: return dynamic_read();
        case 11: return rnd();
        case 12: return "Env' k; Out write;\n";
        case 13: return mac_read();
        case 14: return cmp_reads();
        default:
          if (sh_.noisy || pick(4)) continue;
          sh_.noisy = true;
          return noise();
      }
    }
  }

 private:
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  std::uint64_t range(std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng_);
  }

  std::string load(const std::string& v) { return "Ref " + v + "; Varsize; Load; "; }
  std::string word() { return words_.empty() ? "" : words_[pick(words_.size())]; }
  Buf* static_buf(std::uint64_t room) {
    std::vector<Buf*> c;
    for (auto& b : bufs_)
      if (!b.dynamic && b.size - b.filled >= room) c.push_back(&b);
    return c.empty() ? nullptr : c[pick(c.size())];
  }
  Buf* filled_buf(std::uint64_t min) {
    std::vector<Buf*> c;
    for (auto& b : bufs_)
      if (!b.dynamic && b.filled >= min) c.push_back(&b);
    return c.empty() ? nullptr : c[pick(c.size())];
  }
  std::string slice(const Buf& b, std::uint64_t& len) {
    std::uint64_t o = range(0, b.filled - 1);
    len = range(1, b.filled - o);
    return load(b.var) + "Const " + num(o) + "; Apply' +/2; Const " + num(len) + "; Load; ";
  }

  std::string read_word() {
    std::string v = "v" + std::to_string(pick(4));
    if (std::find(words_.begin(), words_.end(), v) == words_.end()) words_.push_back(v);
    return "Varsize; In w read; Ref " + v + "; Store;\n";
  }
  std::string malloc_buf() {
    if (bufs_.size() >= 3) return "";
    Buf b{"b" + std::to_string(bufs_.size()), range(8, 48)};
    bufs_.push_back(b);
    return "Const " + num(b.size) + "; Malloc; Ref " + b.var + "; Store;\n";
  }
  std::string append_read() {
    Buf* b = static_buf(1);
    if (!b) return "";
    std::uint64_t l = range(1, std::min<std::uint64_t>(b->size - b->filled, 24));
    std::string s = "Const " + num(l) + "; In x read; " + load(b->var) + "Const " + num(b->filled) +
                    "; Apply' +/2; Store;\n";
    b->filled += l;
    return s;
  }
  std::string append_word() {
    std::string v = word();
    Buf* b = static_buf(p_.N);
    if (v.empty() || !b) return "";
    std::string s = load(v) + load(b->var) + "Const " + num(b->filled) + "; Apply' +/2; Store;\n";
    b->filled += p_.N;
    return s;
  }
  std::string append_mac() {
    Buf* b = static_buf(20);
    if (!b || b->filled == 0) return "";
    std::string s = load(b->var) + "Const " + num(b->filled) + "; Load; Env' k; Apply' mac/2; " + load(b->var) +
                    "Const " + num(b->filled) + "; Apply' +/2; Store;\n";
    b->filled += 20;
    return s;
  }
  std::string out_slice() {
    Buf* b = filled_buf(1);
    if (!b) return "";
    std::uint64_t l;
    return slice(*b, l) + "Out write;\n";
  }
  std::string event_crypto() {
    Buf* b = filled_buf(1);
    if (!b) return "";
    std::uint64_t l;
    std::string s = slice(*b, l);
    if (pick(2)) return s + "Apply' sha1/1; Apply' acc/1; Event;\n";
    return s + slice(*b, l) + "Apply' pair/2; Apply' acc/1; Event;\n";
  }
  std::string out_arith() {
    static const char* ops[] = {"+", "-", "*", "<", "<=", ">", ">=", "=="};
    std::string a = word(), b = word();
    if (a.empty()) return "";
    return load(a) + load(b) + "Apply' " + ops[pick(8)] + "/2; Out write;\n";
  }
  std::string test_word() {
    static const char* ops[] = {"<", "<=", ">", ">=", "=="};
    std::string v = word();
    if (v.empty()) return "";
    std::string s = "Const " + num(range(0, 64)) + "; " + load(v) + "Apply' " + ops[pick(5)] + "/2; ";
    if (pick(3) == 0) s += "Apply' not/1; ";
    return s + "Test;\n";
  }
  std::string test_slices() {
    Buf* b = filled_buf(1);
    if (!b) return "";
    std::uint64_t o1 = range(0, b->filled - 1), o2 = pick(2) ? o1 : range(0, b->filled - 1);
    std::uint64_t l = range(1, b->filled - std::max(o1, o2));
    auto sl = [&](std::uint64_t o) {
      return load(b->var) + "Const " + num(o) + "; Apply' +/2; Const " + num(l) + "; Load; ";
    };
    return sl(o1) + sl(o2) + "Apply' cmp/2; Const 0; Apply' ==/2; Test;\n";
  }
  std::string dynamic_read() {
    std::string v = word();
    Buf* b = static_buf(0);
    if (v.empty() || !b || b->filled != 0) return "";
    std::string s = "Const " + num(b->size) + "; " + load(v) + "Apply' <=/2; Test; " + load(v) + "In y read; " +
                    load(b->var) + "Store;\n";
    b->dynamic = true;
    if (pick(2)) s += load(b->var) + load(v) + "Load; Out write;\n";
    return s;
  }
  std::string rnd() {
    std::uint64_t l = range(1, 16);
    std::string s = "Const " + num(l) + "; In r rnd; ";
    Buf* b = static_buf(l);
    if (b && pick(2)) {
      s += load(b->var) + "Const " + num(b->filled) + "; Apply' +/2; Store;\n";
      b->filled += l;
      return s;
    }
    return s + "Out write;\n";
  }
  std::string mac_read() {
    std::string s = "Const " + num(range(1, 24)) + "; In x read; Env' k; Apply' mac/2; ";
    switch (pick(3)) {
      case 0: return s + "Out write;\n";
      case 1: return s + "Apply' acc/1; Event;\n";
      default: return s + "Apply' sha1/1; Out write;\n";
    }
  }
  std::string cmp_reads() {
    std::string l = num(range(1, 2));
    return "Const " + l + "; In x read; Const " + l + "; In z read; Apply' cmp/2; Const 0; Apply' ==/2; Test;\n";
  }
  std::string noise() {
    switch (pick(6)) {
      case 0: return "Const " + num(range(0, 255)) + ";\n";
      case 1: return "Apply' not/1;\n";
      case 2: return "Test;\n";
      case 3: return "Out write;\n";
      case 4: return "Ref v0; Store;\n";
      default: return "Load;\n";
    }
  }

  std::mt19937_64& rng_;
  WordParams p_;
  Shape sh_;
  std::vector<std::string>& words_ = sh_.words;
  std::vector<Buf>& bufs_ = sh_.bufs;
};

BitString random_bits(std::mt19937_64& rng, std::size_t n) {
  BitString b;
  for (std::size_t i = 0; i < n; ++i) b.push_back(rng() & 1);
  return b;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::seed_seq s{std::uint32_t(a), std::uint32_t(a >> 32), std::uint32_t(b), std::uint32_t(b >> 32)};
  return std::mt19937_64(s)();
}

}  // namespace

std::string random_cvm_program(std::mt19937_64& rng, std::size_t max_instrs, const WordParams& p) {
  OpSet ops = default_ops();
  Gen g(rng, p);
  std::string text;
  for (int attempt = 0; attempt < 64; ++attempt) {
    auto before = g.shape();
    std::string s = g.snippet();
    if (s.empty()) continue;
    if (parse_cvm(text + s, ops, p).instrs.size() > max_instrs) {
      g.restore(std::move(before));
      continue;
    }
    text += s;
  }
  return text;
}

ConcreteRun run_concrete(const CvmProgram& prog, const OpSet& ops, const WordParams& p, const Valuation& env,
                         std::mt19937_64& rng) {
  ConcreteRun out;
  CvmContext ctx{prog, AddrMap::pack(prog, p), &ops, p};
  ConcState s;
  Valuation eta = env;
  for (std::size_t guard = 0; guard < 10000; ++guard) {
    ProcKind k = cvm_kind(ctx, s);
    if (k == ProcKind::Done) return out;
    BitString input;
    std::uint64_t top = 0;
    if (!s.stack.empty() && s.stack.back().size() == p.N) top = to_u64(val(s.stack.back(), p));
    if (k == ProcKind::Reading) {
      if (top == p.N && rng() % 2) input = bs(rng() % 49, p);
      else input = random_bits(rng, top);
      out.reads.push_back(input);
    } else if (k == ProcKind::Randomising) {
      input = random_bits(rng, top);
      out.rnds.push_back(input);
    } else if (k == ProcKind::Control && !s.init) {
      const Instr& i = prog.instrs[s.pc];
      if (i.kind == InstrKind::Malloc) {
        std::uint64_t a = 1 + rng() % 8;
        while (a + top <= to_u64(p.word_limit()) && s.alloc.intersects(a, top)) ++a;
        input = bs(a, p);
      } else if (i.kind == InstrKind::Load) {
        input = random_bits(rng, top);
      }
    }
    auto r = cvm_step(ctx, eta, s, input);
    if (auto* st = std::get_if<Stuck>(&r)) {
      out.stuck = true;
      out.detail = st->rule + ": " + st->detail;
      return out;
    }
    auto& [l, e, n] = std::get<0>(r);
    if (l.kind == LabelKind::Write || l.kind == LabelKind::Event) out.actions.push_back({l.kind, l.payload});
    eta = std::move(e);
    s = std::move(n);
  }
  out.stuck = true;
  out.detail = "step bound";
  return out;
}

ModelRun run_model(const ImlP& model, const OpSet& ops, const WordParams& p, const Valuation& env,
                   const std::vector<BitString>& reads, const std::vector<BitString>& rnds) {
  ModelRun out;
  Pts t = iml_pts(model, ops, p, env);
  ProcessP proc = t.initial;
  Valuation eta = t.eta0;
  std::size_t ri = 0, ni = 0;
  auto stop = [&](std::string why) {
    out.stuck = true;
    out.detail = std::move(why);
    out.eta = eta;
    return out;
  };
  for (std::size_t guard = 0; guard < 10000; ++guard) {
    Label l;
    switch (proc->kind(eta)) {
      case ProcKind::Done: out.eta = eta; return out;
      case ProcKind::Reading:
        if (ri >= reads.size()) return stop("no read payload left");
        l = {LabelKind::Read, reads[ri++]};
        break;
      case ProcKind::Randomising: {
        if (ni >= rnds.size()) return stop("no rnd payload left");
        auto n = proc->rnd_length(eta);
        if (!n || *n != rnds[ni].size()) return stop("rnd length differs");
        l = {LabelKind::Rnd, rnds[ni++]};
        break;
      }
      case ProcKind::Control: {
        auto f = proc->forced(eta);
        if (!f) return stop("control step needs an attacker label");
        l = *f;
        break;
      }
      case ProcKind::Writing: l = {LabelKind::Write, {}}; break;
      case ProcKind::Event: l = {LabelKind::Event, {}}; break;
    }
    auto r = proc->step(eta, l);
    if (auto* st = std::get_if<Stuck>(&r)) return stop(st->rule + ": " + st->detail);
    auto& tr = std::get<Transition>(r);
    if (tr.label.kind == LabelKind::Write || tr.label.kind == LabelKind::Event)
      out.actions.push_back({tr.label.kind, tr.label.payload});
    if (tr.succ.size() != 1) return stop("model is not straight-line");
    eta = tr.succ[0].eta;
    proc = tr.succ[0].proc;
  }
  return stop("step bound");
}

namespace {

struct ProgramResult {
  bool extracted = false;
  DiffReport r;  // counters for this program only
};

ProgramResult check_program(const DiffOptions& opt, std::size_t index) {
  ProgramResult out;
  WordParams p;
  p.N = opt.width;
  OpSet ops = default_ops();
  std::mt19937_64 rng(mix(opt.seed, index));
  std::string text = random_cvm_program(rng, opt.max_instrs, p);
  CvmProgram prog = parse_cvm(text, ops, p);
  SymResult sym = extract_model(prog, ops, p, opt.sym);
  if (sym.fail) return out;
  out.extracted = true;
  for (std::size_t j = 0; j < opt.scripts; ++j) {
    std::uint64_t sseed = mix(index, j + 1);
    std::mt19937_64 srng(sseed);
    Valuation env;
    env.vars["k"] = random_bits(srng, 8 + srng() % 25);
    ConcreteRun c = run_concrete(prog, ops, p, env, srng);
    ++out.r.runs;
    if (c.stuck) {
      ++out.r.concrete_stuck;
      continue;
    }
    ++out.r.compared;
    out.r.actions += c.actions.size();
    ModelRun m = run_model(sym.model, ops, p, env, c.reads, c.rnds);
    std::string detail;
    if (m.stuck) detail = "model stuck: " + m.detail;
    else if (m.actions != c.actions) detail = "action sequences differ";
    if (!detail.empty()) {
      ++out.r.mismatches;
      if (out.r.samples.size() < 3) out.r.samples.push_back({text, print_iml(sym.model, p), sseed, detail});
      continue;
    }
    if (!satisfies(sym.final_state.sigma, m.eta, ops, p)) {
      ++out.r.inconsistent;
      if (out.r.samples.size() < 3)
        out.r.samples.push_back({text, print_iml(sym.model, p), sseed, "final facts not satisfied"});
    }
  }
  return out;
}

}  // namespace

DiffReport run_difftest(const DiffOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  DiffReport rep;
  std::size_t next = 0;
  const std::size_t batch = std::max<std::size_t>(64, threads * 8);
  while (rep.extracted < opt.programs && next < opt.programs * 50) {
    std::vector<ProgramResult> res(batch);
    std::atomic<std::size_t> cursor{0};
    auto work = [&] {
      for (std::size_t i; (i = cursor++) < batch;) res[i] = check_program(opt, next + i);
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    for (auto& r : res) {
      if (rep.extracted >= opt.programs) break;
      ++rep.generated;
      if (!r.extracted) continue;
      ++rep.extracted;
      rep.runs += r.r.runs;
      rep.concrete_stuck += r.r.concrete_stuck;
      rep.compared += r.r.compared;
      rep.actions += r.r.actions;
      rep.mismatches += r.r.mismatches;
      rep.inconsistent += r.r.inconsistent;
      for (auto& s : r.r.samples)
        if (rep.samples.size() < 5) rep.samples.push_back(s);
    }
    next += batch;
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace pmx
