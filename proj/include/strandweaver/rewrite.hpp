#pragma once

#include "strandweaver/term.hpp"

#include <vector>

// Rewriting to normal form modulo a convergent user theory, and equational
// unification by variant narrowing. Convergence of the user theory is the
// user's obligation; the step budget catches runaways.

namespace strandweaver {

class StepBudgetExceeded : public Error {
public:
  using Error::Error;
};

struct RewriteRule {
  Term lhs;
  Term rhs;
};

class ConvergentTheory {
public:
  ConvergentTheory() = default;

  // Requires a non-variable lhs and var(rhs) subset of var(lhs).
  void add_rule(Term lhs, Term rhs);
  const std::vector<RewriteRule>& rules() const { return rules_; }
  bool empty() const { return rules_.empty(); }

private:
  std::vector<RewriteRule> rules_;
};

// Leftmost-innermost rewriting to the unique normal form.
Term normalize(const Term& t, const ConvergentTheory& th, const Signature& sig,
               long budget = 100000);

bool eq_modulo(const Term& a, const Term& b, const ConvergentTheory& th, const Signature& sig);

struct VariantUnifyResult {
  std::vector<Subst> unifiers;
  bool bound_exhausted = false;
};

// E-unifiers computed by folding-variant-style narrowing of both sides and
// syntactic unification of the variant pairs. Complete for subterm-convergent
// theories whose variant trees are exhausted within `bound` narrowing steps.
VariantUnifyResult variant_unify(const Term& t1, const Term& t2, const ConvergentTheory& th,
                                 const Signature& sig, long bound = 64);

// All sigma over var(pattern) with pattern*sigma =E target; target variables
// are treated as constants. Substitutions may leave pattern variables open
// when the match is parametric.
VariantUnifyResult match_modulo(const Term& pattern, const Term& target,
                                const ConvergentTheory& th, const Signature& sig,
                                long bound = 64);

// rho_{ro,i}: maps each sort-Fresh variable to its unique name r.ro.i.
Subst fresh_rename(const Signature& sig, const std::string& role, int session,
                   const std::vector<Term>& fresh_vars);

}  // namespace strandweaver
