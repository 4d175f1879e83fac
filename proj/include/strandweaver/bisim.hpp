#pragma once

#include "strandweaver/forwards.hpp"

#include <string>
#include <vector>

// Executable check of the bisimulation between the process-algebra semantics
// and the constrained forwards strand semantics: paired execution, the
// process/strand duality, and the shared-intruder-knowledge lemma.

namespace strandweaver {

struct PairedState {
  PAState pa;
  FWState fw;
  std::vector<TransitionLabel> history;
};

struct PairedStepResult {
  enum class Status { ok, not_enabled, violation };
  Status status = Status::ok;
  std::string detail;        // violation: which side failed
  PairedState next;
};

PairedStepResult step_paired(const Protocol& p, const PairedState& ps,
                             const TransitionLabel& label);

struct DualityReport {
  bool ok = true;
  std::vector<std::string> mismatches;
};

// For every residual process, its translation must equal the partner
// strand's continuations, and conversely.
DualityReport check_duality(const Protocol& p, const PairedState& ps);

struct BisimCounterexample {
  std::vector<TransitionLabel> history;  // prefix-minimal violating trace
  std::string reason;
};

struct BisimVerdict {
  bool ok = true;
  int trials_run = 0;
  long states_checked = 0;
  std::vector<BisimCounterexample> counterexamples;  // first one found per trial order
};

// Random paired walks asserting, at every state: equal enabled-label sets,
// syntactically equal intruder knowledge, and duality. Trials are independent
// and may run on several threads; the verdict is thread-count independent.
BisimVerdict fuzz_bisim(const Protocol& p, int depth, int trials, uint64_t seed,
                        int threads = 1);

}  // namespace strandweaver
