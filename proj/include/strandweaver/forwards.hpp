#pragma once

#include "strandweaver/strand.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

// Ground forwards execution under both semantics: the process-algebra rules
// over PA-states and the constrained forwards strand rules over FW-states.
// Both emit the same (ro, i, j, a, n) transition labels.

namespace strandweaver {

struct TransitionLabel {
  enum class Action : uint8_t { send_learn, send_silent, recv, cstr, question };

  std::string role;
  int session = 0;
  int step = 0;
  Action action = Action::send_learn;
  Term msg;         // send/recv actions
  Constraint cstr;  // cstr actions
  int branch = 0;   // 0 unless an explicit choice was taken

  std::string to_string() const;
  bool operator==(const TransitionLabel& o) const;
  bool operator<(const TransitionLabel& o) const;
};

// Ground values per sort used to instantiate choice variables during
// exploration.
struct ChoiceDomain {
  std::map<SortId, std::vector<Term>> values;

  const std::vector<Term>* for_sort(SortId s) const;
};

class IntruderKnowledge {
public:
  bool contains(const Term& ground_normalized) const;
  void add(const Term& ground_normalized);
  const std::vector<Term>& facts() const { return facts_; }
  bool operator==(const IntruderKnowledge& o) const;
  std::string to_string() const;

private:
  std::vector<Term> facts_;  // kept sorted and duplicate-free
};

struct PAState {
  ProcessConfiguration procs;
  IntruderKnowledge ik;
};

struct FWState {
  std::vector<ConstrainedStrand> strands;
  IntruderKnowledge ik;
};

struct MutationFlags {
  bool skip_pa_ik_guard = false;   // drop the PA++ "not already known" premise
  bool drop_else_branch = false;   // translation drops the {not T,2} family
  bool skip_diseq_check = false;   // backwards Bif!= without satisfiability
};

// Everything the two semantics need to step a protocol.
struct Protocol {
  const Signature* sig = nullptr;
  const ConvergentTheory* theory = nullptr;
  ProcessConfiguration processes;  // kind-annotated
  StrandSpec strand_spec;
  ChoiceDomain domain;
  MutationFlags mutations;
};

std::string canonical_state(const PAState& st);
std::string canonical_state(const FWState& st);

std::vector<std::pair<TransitionLabel, PAState>> pa_enabled(const Protocol& p,
                                                            const PAState& st);
std::vector<std::pair<TransitionLabel, FWState>> fw_enabled(const Protocol& p,
                                                            const FWState& st);

enum class Semantics { pa, fw };

struct ReplayResult {
  bool ok = true;
  size_t stuck_index = 0;  // first label with no matching enabled transition
  PAState pa;
  FWState fw;
};

ReplayResult run_trace(const Protocol& p, Semantics sem,
                       const std::vector<TransitionLabel>& schedule);

enum class Strategy { bfs, random_walk };

struct Trace {
  std::vector<TransitionLabel> labels;
  IntruderKnowledge final_ik;
};

struct ExploreResult {
  std::vector<Trace> traces;
  long states_expanded = 0;
  long duplicate_states = 0;
};

// Bounded deterministic exploration. bfs returns all maximal traces of the
// deduplicated state graph up to `depth`; random samples `samples` walks.
ExploreResult explore(const Protocol& p, Semantics sem, int depth, Strategy strategy,
                      uint64_t seed, int samples = 32);

// Deterministic, platform-stable bounded integer from an RNG state.
uint64_t next_rand(uint64_t& state);
size_t rand_below(uint64_t& state, size_t n);

}  // namespace strandweaver
