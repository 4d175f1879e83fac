#pragma once

#include "strandweaver/term.hpp"

#include <memory>
#include <set>
#include <string>
#include <vector>

// The protocol process algebra: AST with structural normalization, the
// shared-variable function, the well-formedness checker and the
// fresh/choice/pattern variable classification.

namespace strandweaver {

struct Constraint {
  enum class Kind { eq, neq };
  Kind kind = Kind::eq;
  Term lhs, rhs;

  Constraint() = default;
  Constraint(Kind k, Term l, Term r) : kind(k), lhs(std::move(l)), rhs(std::move(r)) {}
  Constraint negated() const {
    return Constraint(kind == Kind::eq ? Kind::neq : Kind::eq, lhs, rhs);
  }
  std::string to_string() const;
  std::string canonical(std::map<std::string, int>& renaming) const;
};

bool equal(const Constraint& a, const Constraint& b);
int compare(const Constraint& a, const Constraint& b);

struct Action;

// A process is a sequence of actions; nilP is the empty sequence. Sequential
// composition is kept flat and right-associated, with nilP eliminated, so the
// structural axioms for `.` hold by construction.
class Process {
public:
  Process() = default;
  explicit Process(std::vector<Action> actions);

  bool is_nil() const { return actions_.empty(); }
  const std::vector<Action>& actions() const { return actions_; }
  size_t size() const { return actions_.size(); }

  static Process nil() { return Process(); }
  static Process seq(const Process& a, const Process& b);
  Process tail() const;  // all but the first action

  std::string to_string() const;

private:
  std::vector<Action> actions_;
};

struct Action {
  enum class Kind { send, recv, choice, branch };
  Kind kind;
  Term msg;             // send/recv
  Constraint cond;      // branch
  Process left, right;  // choice: the two alternatives; branch: then/else

  static Action send(Term m);
  static Action recv(Term m);
  static Action choice(Process l, Process r);
  static Action branch(Constraint c, Process then_p, Process else_p);
};

std::set<std::string> vars_of(const Process& p);
// The shVar function: variables occurring on every path.
std::set<std::string> sh_var(const Process& p);

struct WfResult {
  bool ok = true;
  std::string diagnostic;
  std::set<std::string> offending_vars;
};

// The wf well-formedness discipline; on failure the diagnostic names the
// leftmost-innermost offence.
WfResult well_formed(const Process& p);

struct LabeledProcess {
  std::string role;
  int session = 0;
  int step = 0;
  Process body;
};

class ProcessConfiguration {
public:
  ProcessConfiguration() = default;

  // Rejects duplicate (role, session) labels.
  void add(LabeledProcess lp);
  const std::vector<LabeledProcess>& processes() const { return procs_; }
  const LabeledProcess* find(const std::string& role, int session) const;

private:
  std::vector<LabeledProcess> procs_;
};

struct Classification {
  // role -> variable -> kind
  std::map<std::string, std::map<std::string, VarKind>> kinds;
  bool ok = true;
  std::string diagnostic;
};

// Tags every variable fresh/choice/pattern by sort and first occurrence.
// Conflicting first occurrences across paths, or sort-Fresh variables first
// seen in a receive, are reported as KindConflict.
Classification classify_variables(const ProcessConfiguration& config, const Signature& sig);

// Rebuilds the configuration with variable kinds annotated into the terms.
ProcessConfiguration annotate_kinds(const ProcessConfiguration& config,
                                    const Classification& cls);
Process annotate_process_kinds(const Process& p, const std::map<std::string, VarKind>& kinds);

Process apply_subst(const Process& p, const Subst& s);

}  // namespace strandweaver
