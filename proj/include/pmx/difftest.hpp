#pragma once

#include "pmx/cvm.hpp"
#include "pmx/symexec.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pmx {

struct DiffOptions {
  std::size_t programs = 500;  // programs with a successful extraction
  std::size_t scripts = 10;    // attacker scripts per program
  std::size_t max_instrs = 30;
  unsigned width = 8;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  SymOptions sym;
};

struct DiffMismatch {
  std::string program;
  std::string model;
  std::uint64_t script_seed = 0;
  std::string detail;
};

struct DiffReport {
  std::size_t generated = 0;
  std::size_t extracted = 0;
  std::size_t runs = 0;
  std::size_t concrete_stuck = 0;
  std::size_t compared = 0;
  std::size_t actions = 0;  // write/event actions compared
  std::size_t mismatches = 0;
  std::size_t inconsistent = 0;  // final Σ not satisfied by the model valuation
  std::vector<DiffMismatch> samples;
  double seconds = 0;
};

/// Opaque operations added to the builtins: mac, sha1, pair.
std::vector<std::string> diff_stub_ops();

/// Straight-line CVM text assembled from snippets over word variables and heap buffers.
std::string random_cvm_program(std::mt19937_64& rng, std::size_t max_instrs, const WordParams& p);

struct ConcreteRun {
  bool stuck = false;
  std::string detail;
  std::vector<Action> actions;  // write and event actions
  std::vector<BitString> reads;
  std::vector<BitString> rnds;
};

/// Concrete run of `prog` with attacker choices drawn from `rng`.
ConcreteRun run_concrete(const CvmProgram& prog, const OpSet& ops, const WordParams& p, const Valuation& env,
                         std::mt19937_64& rng);

struct ModelRun {
  bool stuck = false;
  std::string detail;
  std::vector<Action> actions;
  Valuation eta;
};

/// Runs an IML model feeding the given read and rnd payloads in order.
ModelRun run_model(const ImlP& model, const OpSet& ops, const WordParams& p, const Valuation& env,
                   const std::vector<BitString>& reads, const std::vector<BitString>& rnds);

DiffReport run_difftest(const DiffOptions& opt);

}  // namespace pmx
