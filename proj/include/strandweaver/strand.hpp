#pragma once

#include "strandweaver/proc.hpp"
#include "strandweaver/rewrite.hpp"

#include <string>
#include <vector>

// Constrained strands: strand items (including {Cstr,Num} messages), the
// strand-set specification, and the translation from process configurations.

namespace strandweaver {

struct StrandItem {
  enum class Kind { send, recv, cstr, question };
  Kind kind;
  Term msg;        // send/recv
  Constraint cstr; // cstr items
  int num = 0;     // 1|2 for cstr/question items

  static StrandItem send(Term m);
  static StrandItem recv(Term m);
  static StrandItem constraint(Constraint c, int num);
  static StrandItem question(int num);

  std::string to_string() const;
  std::string canonical(std::map<std::string, int>& renaming) const;
};

bool equal(const StrandItem& a, const StrandItem& b);
StrandItem apply_subst(const StrandItem& it, const Subst& s);
StrandItem normalize_item(const StrandItem& it, const ConvergentTheory& th, const Signature& sig);
void collect_vars(const StrandItem& it, std::set<std::string>& out);

std::string items_to_string(const std::vector<StrandItem>& items);
std::string items_canonical(const std::vector<StrandItem>& items,
                            std::map<std::string, int>& renaming);

// One specification strand: all items ahead of the bar. branch_path keeps
// strands from symmetric branches distinct.
struct SpecStrand {
  std::string role;
  std::vector<StrandItem> items;
  std::string branch_path;
  std::vector<Term> fresh_vars;  // sort-Fresh variables occurring in items
};

struct StrandSpec {
  std::vector<SpecStrand> strands;

  std::vector<const SpecStrand*> of_role(const std::string& role) const;
  std::string to_string() const;
};

struct TranslateOptions {
  // Fault-injection for the mutation tests: drop the {not T, 2} strand family
  // of every if-then-else.
  bool drop_else_branch = false;
};

// The toCstrSS mapping. Requires a well-formed configuration.
StrandSpec to_cstr_ss(const ProcessConfiguration& config, const Signature& sig,
                      const TranslateOptions& opts = {});
std::vector<SpecStrand> translate_process(const std::string& role, int session,
                                          const Process& body, const Signature& sig,
                                          const TranslateOptions& opts = {});

// A strand in a ground forwards state: only the executed past is stored.
struct ConstrainedStrand {
  std::string role;
  int session = 0;
  std::vector<StrandItem> past;
};

struct Continuation {
  const SpecStrand* spec = nullptr;
  Subst binding;                   // prefix-matching substitution (rho applied)
  std::vector<StrandItem> suffix;  // items after the matched prefix, instantiated
};

// All spec-strand continuations whose instantiated prefix matches `past`
// modulo the theory; rho_{ro,i} is applied to spec fresh variables first.
std::vector<Continuation> strand_continuations(const StrandSpec& spec, const Signature& sig,
                                               const ConvergentTheory& th,
                                               const std::string& role, int session,
                                               const std::vector<StrandItem>& past);

}  // namespace strandweaver
