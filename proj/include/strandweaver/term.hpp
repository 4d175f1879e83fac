#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

// Order-sorted signatures, terms and substitutions. Everything here is
// immutable after construction and safe to share across threads.

namespace strandweaver {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class IllSortedError : public Error {
public:
  using Error::Error;
};

using SortId = int;

// Subsort poset plus operator declarations. The two sorts every
// specification gets for free are `Msg` and `Fresh`.
class Signature {
public:
  struct OpDecl {
    std::string name;
    std::vector<SortId> args;
    SortId result;
  };

  Signature();

  SortId add_sort(const std::string& name);
  void add_subsort(const std::string& sub, const std::string& super);
  void add_op(const std::string& name, const std::vector<std::string>& args,
              const std::string& result);

  // Computes the transitive closure of the subsort relation and validates
  // the global invariants (acyclicity, Msg present, all sorts inhabited).
  // Must be called once after all declarations.
  void finalize();

  bool has_sort(const std::string& name) const;
  SortId sort(const std::string& name) const;  // throws on unknown sort
  const std::string& sort_name(SortId s) const;
  SortId msg_sort() const { return msg_; }
  SortId fresh_sort() const { return fresh_; }

  // s1 <= s2 in the subsort order (reflexive).
  bool leq(SortId s1, SortId s2) const;
  // Unique greatest common subsort, if any. The corpus signatures are
  // forests, where this is well defined whenever a common subsort exists.
  std::optional<SortId> glb(SortId s1, SortId s2) const;

  const OpDecl* find_op(const std::string& name) const;
  const OpDecl& op(const std::string& name) const;  // throws UnknownOperator
  const std::vector<OpDecl>& ops() const { return ops_; }
  int sort_count() const { return static_cast<int>(names_.size()); }
  bool finalized() const { return finalized_; }

private:
  std::vector<std::string> names_;
  std::map<std::string, SortId> by_name_;
  std::vector<std::pair<SortId, SortId>> subsort_decls_;
  std::vector<std::vector<bool>> leq_;  // closed relation, filled by finalize
  std::vector<OpDecl> ops_;
  std::map<std::string, int> op_index_;
  SortId msg_ = -1;
  SortId fresh_ = -1;
  bool finalized_ = false;
};

enum class VarKind : uint8_t { plain, fresh, choice, pattern };

const char* to_string(VarKind k);

struct TermNode;
using Term = std::shared_ptr<const TermNode>;

// A term is a variable, an operator application, or one of the dedicated
// fresh-name constants r.ro.i that instantiate sort-Fresh variables.
struct TermNode {
  enum class Tag : uint8_t { variable, application, fresh_name };

  Tag tag;
  SortId sort;
  VarKind kind = VarKind::plain;  // variables only
  std::string name;               // variable / operator / fresh base name
  std::vector<Term> args;
  std::string role;  // fresh_name only
  int session = 0;   // fresh_name only
  size_t hash = 0;

  bool is_var() const { return tag == Tag::variable; }
  bool is_app() const { return tag == Tag::application; }
  bool is_fresh_name() const { return tag == Tag::fresh_name; }
};

Term mk_var(const std::string& name, SortId sort, VarKind kind = VarKind::plain);
// Sort-checks the application against the signature.
Term mk_app(const Signature& sig, const std::string& op, std::vector<Term> args);
// Unchecked constructor for internal rebuilding where the operator is known good.
Term mk_app_raw(const std::string& op, SortId result, std::vector<Term> args);
Term mk_fresh_name(const Signature& sig, const std::string& base,
                   const std::string& role, int session);

bool equal(const Term& a, const Term& b);
// Total order used for canonical multiset forms: applications by
// (operator name, arity, arguments), variables by name.
int compare(const Term& a, const Term& b);

SortId sort_of(const Term& t);
bool is_ground(const Term& t);
void collect_vars(const Term& t, std::set<std::string>& out);
std::set<std::string> vars_of(const Term& t);
void collect_var_terms(const Term& t, std::map<std::string, Term>& out);

// Pretty form: `;` is rendered infix, fresh names as r.ro.i.
std::string to_string(const Term& t);

// Prefix form with variables renumbered in traversal order via `renaming`.
// Feeding several terms the same map yields a digest of the whole group
// modulo consistent variable renaming.
std::string canonical(const Term& t, std::map<std::string, int>& renaming);

// An idempotent, sort-preserving substitution.
class Subst {
public:
  Subst() = default;

  static Subst singleton(const std::string& var, Term t);

  bool empty() const { return map_.empty(); }
  size_t size() const { return map_.size(); }
  const std::map<std::string, Term>& bindings() const { return map_; }
  const Term* lookup(const std::string& var) const;

  Term apply(const Term& t) const;

  // Adds var |-> t, applying the new binding across existing ranges so the
  // result stays idempotent. `t` must not contain `var`.
  void bind(const std::string& var, const Term& t);

  // this, then other. Bindings of `other` on fresh variables are kept.
  Subst compose(const Subst& other) const;
  Subst restricted(const std::set<std::string>& vars) const;

  bool is_ground_on(const std::set<std::string>& vars) const;
  std::string to_string() const;
  bool operator==(const Subst& o) const;

private:
  std::map<std::string, Term> map_;
};

// Most general syntactic order-sorted unifier; occurs check always on.
// Variable-variable conflicts at incomparable sorts are resolved through the
// unique glb when it exists. `counter` names any glb variables introduced.
std::optional<Subst> unify(const Signature& sig, const Term& a, const Term& b,
                           long* counter = nullptr);

// Syntactic match: pattern variables bind, target variables are opaque
// constants. Result is restricted to var(pattern).
std::optional<Subst> match(const Signature& sig, const Term& pattern, const Term& target);

}  // namespace strandweaver
