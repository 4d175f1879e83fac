#include "strandweaver/term.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace strandweaver {

const char* to_string(VarKind k) {
  switch (k) {
    case VarKind::plain: return "plain";
    case VarKind::fresh: return "fresh";
    case VarKind::choice: return "choice";
    case VarKind::pattern: return "pattern";
  }
  return "?";
}

Signature::Signature() {
  msg_ = add_sort("Msg");
  fresh_ = add_sort("Fresh");
}

SortId Signature::add_sort(const std::string& name) {
  auto it = by_name_.find(name);
  if (it != by_name_.end()) return it->second;
  SortId id = static_cast<SortId>(names_.size());
  names_.push_back(name);
  by_name_[name] = id;
  return id;
}

void Signature::add_subsort(const std::string& sub, const std::string& super) {
  subsort_decls_.emplace_back(sort(sub), sort(super));
}

void Signature::add_op(const std::string& name, const std::vector<std::string>& args,
                       const std::string& result) {
  if (op_index_.count(name))
    throw Error("operator redeclared: " + name);
  OpDecl d;
  d.name = name;
  for (const auto& a : args) d.args.push_back(sort(a));
  d.result = sort(result);
  op_index_[name] = static_cast<int>(ops_.size());
  ops_.push_back(std::move(d));
}

bool Signature::has_sort(const std::string& name) const {
  return by_name_.count(name) != 0;
}

SortId Signature::sort(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error("unknown sort: " + name);
  return it->second;
}

const std::string& Signature::sort_name(SortId s) const { return names_.at(s); }

void Signature::finalize() {
  size_t n = names_.size();
  leq_.assign(n, std::vector<bool>(n, false));
  for (size_t i = 0; i < n; ++i) leq_[i][i] = true;
  for (auto& [sub, super] : subsort_decls_) leq_[sub][super] = true;
  // Warshall closure.
  for (size_t k = 0; k < n; ++k)
    for (size_t i = 0; i < n; ++i)
      if (leq_[i][k])
        for (size_t j = 0; j < n; ++j)
          if (leq_[k][j]) leq_[i][j] = true;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      if (i != j && leq_[i][j] && leq_[j][i])
        throw Error("subsort relation is cyclic between " + names_[i] + " and " + names_[j]);

  // Every sort must be inhabited by some ground term. Fresh is inhabited by
  // the r.ro.i name family; other sorts need a constructor path.
  std::vector<bool> inhabited(n, false);
  inhabited[fresh_] = true;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& op : ops_) {
      bool all = true;
      for (SortId a : op.args) {
        bool ok = false;
        for (size_t s = 0; s < n; ++s)
          if (inhabited[s] && leq_[s][a]) { ok = true; break; }
        if (!ok) { all = false; break; }
      }
      if (all && !inhabited[op.result]) {
        inhabited[op.result] = true;
        changed = true;
      }
    }
    for (size_t s = 0; s < n; ++s) {
      if (inhabited[s]) continue;
      for (size_t sub = 0; sub < n; ++sub)
        if (sub != s && inhabited[sub] && leq_[sub][s]) {
          inhabited[s] = true;
          changed = true;
          break;
        }
    }
  }
  for (size_t s = 0; s < n; ++s)
    if (!inhabited[s])
      throw Error("sort " + names_[s] + " has no ground terms");
  finalized_ = true;
}

bool Signature::leq(SortId s1, SortId s2) const {
  return leq_.at(s1).at(s2);
}

std::optional<SortId> Signature::glb(SortId s1, SortId s2) const {
  if (leq(s1, s2)) return s1;
  if (leq(s2, s1)) return s2;
  std::vector<SortId> common;
  for (SortId s = 0; s < sort_count(); ++s)
    if (leq(s, s1) && leq(s, s2)) common.push_back(s);
  if (common.empty()) return std::nullopt;
  // Keep only maximal elements; a unique one is the glb.
  std::vector<SortId> maximal;
  for (SortId c : common) {
    bool dominated = false;
    for (SortId d : common)
      if (d != c && leq(c, d)) { dominated = true; break; }
    if (!dominated) maximal.push_back(c);
  }
  if (maximal.size() == 1) return maximal[0];
  return std::nullopt;
}

const Signature::OpDecl* Signature::find_op(const std::string& name) const {
  auto it = op_index_.find(name);
  if (it == op_index_.end()) return nullptr;
  return &ops_[it->second];
}

const Signature::OpDecl& Signature::op(const std::string& name) const {
  const OpDecl* d = find_op(name);
  if (!d) throw Error("unknown operator: " + name);
  return *d;
}

namespace {

size_t combine(size_t h, size_t v) {
  return h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
}

size_t node_hash(const TermNode& n) {
  size_t h = static_cast<size_t>(n.tag);
  h = combine(h, std::hash<std::string>{}(n.name));
  h = combine(h, static_cast<size_t>(n.sort));
  h = combine(h, std::hash<std::string>{}(n.role));
  h = combine(h, static_cast<size_t>(n.session));
  for (const auto& a : n.args) h = combine(h, a->hash);
  return h;
}

}  // namespace

Term mk_var(const std::string& name, SortId sort, VarKind kind) {
  auto n = std::make_shared<TermNode>();
  n->tag = TermNode::Tag::variable;
  n->sort = sort;
  n->kind = kind;
  n->name = name;
  n->hash = node_hash(*n);
  return n;
}

Term mk_app(const Signature& sig, const std::string& op, std::vector<Term> args) {
  const Signature::OpDecl& d = sig.op(op);
  if (d.args.size() != args.size())
    throw IllSortedError("operator " + op + " expects " + std::to_string(d.args.size()) +
                         " arguments, got " + std::to_string(args.size()));
  for (size_t i = 0; i < args.size(); ++i) {
    if (!sig.leq(sort_of(args[i]), d.args[i]))
      throw IllSortedError("argument " + std::to_string(i + 1) + " of " + op + " has sort " +
                           sig.sort_name(sort_of(args[i])) + ", expected <= " +
                           sig.sort_name(d.args[i]));
  }
  return mk_app_raw(op, d.result, std::move(args));
}

Term mk_app_raw(const std::string& op, SortId result, std::vector<Term> args) {
  auto n = std::make_shared<TermNode>();
  n->tag = TermNode::Tag::application;
  n->sort = result;
  n->name = op;
  n->args = std::move(args);
  n->hash = node_hash(*n);
  return n;
}

Term mk_fresh_name(const Signature& sig, const std::string& base,
                   const std::string& role, int session) {
  auto n = std::make_shared<TermNode>();
  n->tag = TermNode::Tag::fresh_name;
  n->sort = sig.fresh_sort();
  n->name = base;
  n->role = role;
  n->session = session;
  n->hash = node_hash(*n);
  return n;
}

bool equal(const Term& a, const Term& b) {
  if (a.get() == b.get()) return true;
  if (a->hash != b->hash) return false;
  return compare(a, b) == 0;
}

int compare(const Term& a, const Term& b) {
  if (a.get() == b.get()) return 0;
  if (a->tag != b->tag) return a->tag < b->tag ? -1 : 1;
  if (int c = a->name.compare(b->name)) return c;
  if (a->is_var()) return 0;
  if (a->is_fresh_name()) {
    if (int c = a->role.compare(b->role)) return c;
    if (a->session != b->session) return a->session < b->session ? -1 : 1;
    return 0;
  }
  if (a->args.size() != b->args.size())
    return a->args.size() < b->args.size() ? -1 : 1;
  for (size_t i = 0; i < a->args.size(); ++i)
    if (int c = compare(a->args[i], b->args[i])) return c;
  return 0;
}

SortId sort_of(const Term& t) { return t->sort; }

bool is_ground(const Term& t) {
  if (t->is_var()) return false;
  for (const auto& a : t->args)
    if (!is_ground(a)) return false;
  return true;
}

void collect_vars(const Term& t, std::set<std::string>& out) {
  if (t->is_var()) {
    out.insert(t->name);
    return;
  }
  for (const auto& a : t->args) collect_vars(a, out);
}

std::set<std::string> vars_of(const Term& t) {
  std::set<std::string> s;
  collect_vars(t, s);
  return s;
}

void collect_var_terms(const Term& t, std::map<std::string, Term>& out) {
  if (t->is_var()) {
    out.emplace(t->name, t);
    return;
  }
  for (const auto& a : t->args) collect_var_terms(a, out);
}

std::string to_string(const Term& t) {
  std::ostringstream os;
  std::function<void(const Term&, bool)> pr = [&](const Term& u, bool parens) {
    if (u->is_var()) {
      os << u->name;
      return;
    }
    if (u->is_fresh_name()) {
      os << u->name << "." << u->role << "." << u->session;
      return;
    }
    if (u->name == ";" && u->args.size() == 2) {
      if (parens) os << "(";
      pr(u->args[0], true);
      os << " ; ";
      pr(u->args[1], false);
      if (parens) os << ")";
      return;
    }
    os << u->name;
    if (!u->args.empty()) {
      os << "(";
      for (size_t i = 0; i < u->args.size(); ++i) {
        if (i) os << ", ";
        pr(u->args[i], false);
      }
      os << ")";
    }
  };
  pr(t, false);
  return os.str();
}

std::string canonical(const Term& t, std::map<std::string, int>& renaming) {
  std::ostringstream os;
  std::function<void(const Term&)> pr = [&](const Term& u) {
    if (u->is_var()) {
      auto it = renaming.find(u->name);
      int id;
      if (it == renaming.end()) {
        id = static_cast<int>(renaming.size());
        renaming.emplace(u->name, id);
      } else {
        id = it->second;
      }
      os << "_" << id << ":" << u->sort;
      return;
    }
    if (u->is_fresh_name()) {
      os << u->name << "." << u->role << "." << u->session;
      return;
    }
    os << u->name;
    if (!u->args.empty()) {
      os << "(";
      for (size_t i = 0; i < u->args.size(); ++i) {
        if (i) os << ",";
        pr(u->args[i]);
      }
      os << ")";
    }
  };
  pr(t);
  return os.str();
}

Subst Subst::singleton(const std::string& var, Term t) {
  Subst s;
  s.map_.emplace(var, std::move(t));
  return s;
}

const Term* Subst::lookup(const std::string& var) const {
  auto it = map_.find(var);
  return it == map_.end() ? nullptr : &it->second;
}

Term Subst::apply(const Term& t) const {
  if (map_.empty()) return t;
  if (t->is_var()) {
    auto it = map_.find(t->name);
    return it == map_.end() ? t : it->second;
  }
  if (t->is_fresh_name() || t->args.empty()) return t;
  std::vector<Term> args;
  args.reserve(t->args.size());
  bool changed = false;
  for (const auto& a : t->args) {
    Term a2 = apply(a);
    changed = changed || a2.get() != a.get();
    args.push_back(std::move(a2));
  }
  if (!changed) return t;
  return mk_app_raw(t->name, t->sort, std::move(args));
}

void Subst::bind(const std::string& var, const Term& t) {
  Subst unit = Subst::singleton(var, t);
  for (auto& [v, range] : map_) range = unit.apply(range);
  map_[var] = t;
}

Subst Subst::compose(const Subst& other) const {
  Subst out;
  for (const auto& [v, t] : map_) out.map_[v] = other.apply(t);
  for (const auto& [v, t] : other.map_)
    if (!out.map_.count(v)) out.map_[v] = t;
  return out;
}

Subst Subst::restricted(const std::set<std::string>& vars) const {
  Subst out;
  for (const auto& [v, t] : map_)
    if (vars.count(v)) out.map_.emplace(v, t);
  return out;
}

bool Subst::is_ground_on(const std::set<std::string>& vars) const {
  for (const auto& v : vars) {
    auto it = map_.find(v);
    if (it == map_.end() || !is_ground(it->second)) return false;
  }
  return true;
}

std::string Subst::to_string() const {
  std::ostringstream os;
  os << "{";
  bool first = true;
  for (const auto& [v, t] : map_) {
    if (!first) os << ", ";
    first = false;
    os << v << " |-> " << strandweaver::to_string(t);
  }
  os << "}";
  return os.str();
}

bool Subst::operator==(const Subst& o) const {
  if (map_.size() != o.map_.size()) return false;
  auto it = o.map_.begin();
  for (const auto& [v, t] : map_) {
    if (v != it->first || !equal(t, it->second)) return false;
    ++it;
  }
  return true;
}

namespace {

bool occurs(const std::string& var, const Term& t) {
  if (t->is_var()) return t->name == var;
  for (const auto& a : t->args)
    if (occurs(var, a)) return true;
  return false;
}

// The signature is not threaded through unification; sort comparisons use
// the ids baked into terms. All terms in one problem share one signature.
struct Unifier {
  Subst s;
  long* counter;
  const Signature* sig = nullptr;

  bool bind_var(const Term& v, const Term& t) {
    if (t->is_var() && t->name == v->name) return true;
    if (occurs(v->name, t)) return false;
    s.bind(v->name, t);
    return true;
  }

  bool go(Term a, Term b) {
    a = s.apply(a);
    b = s.apply(b);
    if (a->is_var() && b->is_var()) {
      if (a->name == b->name) return true;
      if (sig->leq(b->sort, a->sort)) return bind_var(a, b);
      if (sig->leq(a->sort, b->sort)) return bind_var(b, a);
      auto g = sig->glb(a->sort, b->sort);
      if (!g) return false;
      long id = counter ? ++*counter : 0;
      Term z = mk_var("#g" + std::to_string(id), *g);
      return bind_var(a, z) && bind_var(b, z);
    }
    if (a->is_var()) {
      if (!sig->leq(sort_of(b), a->sort)) return false;
      return bind_var(a, b);
    }
    if (b->is_var()) {
      if (!sig->leq(sort_of(a), b->sort)) return false;
      return bind_var(b, a);
    }
    if (a->tag != b->tag) return false;
    if (a->is_fresh_name())
      return a->name == b->name && a->role == b->role && a->session == b->session;
    if (a->name != b->name || a->args.size() != b->args.size()) return false;
    for (size_t i = 0; i < a->args.size(); ++i)
      if (!go(a->args[i], b->args[i])) return false;
    return true;
  }
};

}  // namespace

std::optional<Subst> unify(const Signature& sig, const Term& a, const Term& b,
                           long* counter) {
  Unifier u;
  u.counter = counter;
  u.sig = &sig;
  if (!u.go(a, b)) return std::nullopt;
  return u.s;
}

namespace {

bool match_rec(const Signature& sig, const Term& pattern, const Term& target, Subst& s) {
  if (pattern->is_var()) {
    if (const Term* bound = s.lookup(pattern->name))
      return equal(*bound, target);
    if (!sig.leq(sort_of(target), pattern->sort)) return false;
    s.bind(pattern->name, target);
    return true;
  }
  if (pattern->tag != target->tag) return false;
  if (pattern->is_fresh_name())
    return pattern->name == target->name && pattern->role == target->role &&
           pattern->session == target->session;
  if (pattern->name != target->name || pattern->args.size() != target->args.size())
    return false;
  for (size_t i = 0; i < pattern->args.size(); ++i)
    if (!match_rec(sig, pattern->args[i], target->args[i], s)) return false;
  return true;
}

}  // namespace

std::optional<Subst> match(const Signature& sig, const Term& pattern, const Term& target) {
  Subst s;
  if (!match_rec(sig, pattern, target, s)) return std::nullopt;
  return s;
}

}  // namespace strandweaver
