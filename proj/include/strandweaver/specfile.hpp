#pragma once

#include "strandweaver/backwards.hpp"
#include "strandweaver/bisim.hpp"

#include <string>
#include <vector>

// The textual specification language: THEORY / PROCESSES / STRANDS / DOMAINS /
// ATTACKS sections, a location-aware parser, and the loader that produces a
// runnable Protocol.

namespace strandweaver {

class SyntaxError : public Error {
public:
  SyntaxError(int line, int col, const std::string& what)
      : Error("syntax error at " + std::to_string(line) + ":" + std::to_string(col) + ": " +
              what),
        line(line),
        col(col) {}
  int line, col;
};

class ResolutionError : public Error {
public:
  using Error::Error;
};

struct LiteralStrand {
  std::string role;
  std::vector<StrandItem> items;
};

// A parsed and resolved specification. The Protocol handed to the engines
// holds pointers into this object; keep it alive while running.
struct LoadedSpec {
  std::string name;
  Signature sig;
  ConvergentTheory theory;
  std::vector<std::pair<std::string, std::string>> var_decls;  // name, sort
  ProcessConfiguration processes;                              // kind-annotated
  std::vector<LiteralStrand> literal_strands;                  // kind-annotated
  ChoiceDomain domain;
  std::vector<AttackPattern> attacks;
  Classification classification;
  StrandSpec strand_spec;  // translation of processes plus literal strands

  // Roles that exist only in strand form cannot drive the process-algebra
  // semantics (translate output round-trips through here).
  bool pa_runnable = true;
  std::string pa_block_reason;
};

LoadedSpec parse_spec(const std::string& text);

// Re-translates with the given mutation flags and returns the engine view.
Protocol make_protocol(const LoadedSpec& spec, const MutationFlags& mutations = {});

// Canonical spec rendering with the processes replaced by their strand
// translation; parse_spec on the output yields an equal StrandSpec.
std::string print_translated(const LoadedSpec& spec);

bool strand_specs_equal(const StrandSpec& a, const StrandSpec& b);

}  // namespace strandweaver
