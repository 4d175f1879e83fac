#pragma once

#include "strandweaver/forwards.hpp"

#include <optional>
#include <string>
#include <vector>

// Symbolic backwards narrowing over constrained symbolic states <St, Psi>,
// attack patterns with never patterns, the lifting relation, and the
// executable one-step soundness/completeness lemmas.

namespace strandweaver {

struct SymbolicStrand {
  std::string role;
  int session = 0;
  std::vector<Term> fresh_vars;  // the ::r1,...,rm:: prefix
  std::vector<StrandItem> past, future;
};

struct SymbolicIK {
  std::vector<Term> pos;  // inI facts
  std::vector<Term> neg;  // nI facts
};

// Conjunction of disequalities; satisfiable while no member's sides share a
// normal form. Re-checked after every substitution.
struct DisequalityStore {
  std::vector<Constraint> cs;  // all neq
};

struct SymbolicState {
  std::vector<SymbolicStrand> strands;
  SymbolicIK ik;
  DisequalityStore store;

  bool is_initial() const;
  std::string to_string() const;
};

std::string canonical_state(const SymbolicState& st);

struct AttackStrand {
  std::string role;
  std::vector<StrandItem> items;  // executed partial run
};

struct NeverConfig {
  std::vector<AttackStrand> strands;
};

struct AttackPattern {
  int id = 0;
  std::string comment;
  std::vector<AttackStrand> strands;
  std::vector<Term> goals;  // terms required inI
  std::vector<NeverConfig> nevers;
};

class PatternError : public Error {
public:
  using Error::Error;
};

struct BackStep {
  std::string rule;  // B-, B+, B++, B&, B?, Bif=, Bif!=
  Subst mu;
  SymbolicState state;
};

enum class SearchVerdict { found, not_found_within_depth, exhausted_no_attack };

struct Solution {
  SymbolicState initial_state;
  Subst attack_binding;  // composed substitution restricted to attack variables
  std::vector<std::string> path;  // "rule substitution digest" from attack to initial
  std::vector<TransitionLabel> schedule;  // replayable forwards run, when groundable
};

struct SearchResult {
  SearchVerdict verdict = SearchVerdict::not_found_within_depth;
  std::vector<Solution> solutions;
  long states_explored = 0;
  long states_pruned_never = 0;
  long states_pruned_inconsistent = 0;
  int depth_reached = 0;
};

class BackwardsEngine {
public:
  explicit BackwardsEngine(const Protocol& p) : p_(p) {}

  // Attack pattern -> initial symbolic search state. Throws PatternError when
  // the pattern does not instantiate the specification or a constraint is
  // reducible as written.
  SymbolicState state_of_attack(const AttackPattern& a) const;

  // All one-step backwards narrowing successors (bars move left, strands may
  // be consumed into the state by reversed introduction).
  std::vector<BackStep> step(const SymbolicState& s);

  SearchResult search(const AttackPattern& a, int depth, bool collect_all = false);

  bool never_matches(const AttackPattern& a, const SymbolicState& s) const;

private:
  const Protocol& p_;
  long rename_counter_ = 0;

  std::optional<SymbolicState> normalize_and_check(SymbolicState st) const;
  // Grounds the initial symbolic state and walks the path forwards, choosing
  // at each step a ground successor that lifts to the next symbolic state.
  // Empty when no grounding exists.
  std::vector<TransitionLabel> replay_states(const std::vector<SymbolicState>& states) const;
};

// A ground FW-state seen as the trivial strand state of the lifting relation.
bool lift_check(const Protocol& p, const SymbolicState& sym, const FWState& ground,
                const Subst& theta);

// Search for a witnessing theta; free variables are grounded over the domain.
std::optional<Subst> lift_search(const Protocol& p, const SymbolicState& sym,
                                 const FWState& ground);

struct LemmaVerdict {
  bool ok = true;
  long completeness_checked = 0;
  long soundness_checked = 0;
  std::string counterexample;
};

// Executable one-step lemmas: sampled ground steps lift to backwards steps
// (completeness) and sampled backwards steps project to ground steps
// (soundness). Also asserts store satisfiability of every backwards step
// against brute-force domain grounding.
LemmaVerdict one_step_lemmas_test(const Protocol& p, const std::vector<AttackPattern>& attacks,
                                  int trials, int depth, uint64_t seed);

// Domain groundings of the attack variables that satisfy the store.
std::vector<Subst> ground_solutions(const Protocol& p, const std::set<std::string>& attack_vars,
                                    const Solution& sol);

}  // namespace strandweaver
