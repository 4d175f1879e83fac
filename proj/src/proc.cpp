#include "strandweaver/proc.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace strandweaver {

std::string Constraint::to_string() const {
  return strandweaver::to_string(lhs) + (kind == Kind::eq ? " eq " : " neq ") +
         strandweaver::to_string(rhs);
}

std::string Constraint::canonical(std::map<std::string, int>& renaming) const {
  return strandweaver::canonical(lhs, renaming) + (kind == Kind::eq ? "=" : "!=") +
         strandweaver::canonical(rhs, renaming);
}

bool equal(const Constraint& a, const Constraint& b) { return compare(a, b) == 0; }

int compare(const Constraint& a, const Constraint& b) {
  if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
  if (int c = compare(a.lhs, b.lhs)) return c;
  return compare(a.rhs, b.rhs);
}

Process::Process(std::vector<Action> actions) : actions_(std::move(actions)) {}

Process Process::seq(const Process& a, const Process& b) {
  std::vector<Action> acts = a.actions_;
  acts.insert(acts.end(), b.actions_.begin(), b.actions_.end());
  return Process(std::move(acts));
}

Process Process::tail() const {
  if (actions_.empty()) return Process();
  return Process(std::vector<Action>(actions_.begin() + 1, actions_.end()));
}

Action Action::send(Term m) {
  Action a;
  a.kind = Kind::send;
  a.msg = std::move(m);
  return a;
}

Action Action::recv(Term m) {
  Action a;
  a.kind = Kind::recv;
  a.msg = std::move(m);
  return a;
}

Action Action::choice(Process l, Process r) {
  Action a;
  a.kind = Kind::choice;
  a.left = std::move(l);
  a.right = std::move(r);
  return a;
}

Action Action::branch(Constraint c, Process then_p, Process else_p) {
  Action a;
  a.kind = Kind::branch;
  a.cond = std::move(c);
  a.left = std::move(then_p);
  a.right = std::move(else_p);
  return a;
}

std::string Process::to_string() const {
  if (is_nil()) return "nilP";
  std::ostringstream os;
  for (size_t i = 0; i < actions_.size(); ++i) {
    if (i) os << " . ";
    const Action& a = actions_[i];
    switch (a.kind) {
      case Action::Kind::send: os << "+(" << strandweaver::to_string(a.msg) << ")"; break;
      case Action::Kind::recv: os << "-(" << strandweaver::to_string(a.msg) << ")"; break;
      case Action::Kind::choice:
        os << "(" << a.left.to_string() << " ? " << a.right.to_string() << ")";
        break;
      case Action::Kind::branch:
        os << "(if " << a.cond.to_string() << " then (" << a.left.to_string() << ") else ("
           << a.right.to_string() << "))";
        break;
    }
  }
  return os.str();
}

std::set<std::string> vars_of(const Process& p) {
  std::set<std::string> out;
  for (const Action& a : p.actions()) {
    switch (a.kind) {
      case Action::Kind::send:
      case Action::Kind::recv:
        collect_vars(a.msg, out);
        break;
      case Action::Kind::choice: {
        for (const auto& v : vars_of(a.left)) out.insert(v);
        for (const auto& v : vars_of(a.right)) out.insert(v);
        break;
      }
      case Action::Kind::branch: {
        collect_vars(a.cond.lhs, out);
        collect_vars(a.cond.rhs, out);
        for (const auto& v : vars_of(a.left)) out.insert(v);
        for (const auto& v : vars_of(a.right)) out.insert(v);
        break;
      }
    }
  }
  return out;
}

namespace {

std::set<std::string> intersect(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::set<std::string> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::inserter(out, out.begin()));
  return out;
}

}  // namespace

std::set<std::string> sh_var(const Process& p) {
  std::set<std::string> out;
  const auto& acts = p.actions();
  for (size_t i = 0; i < acts.size(); ++i) {
    const Action& a = acts[i];
    switch (a.kind) {
      case Action::Kind::send:
      case Action::Kind::recv:
        collect_vars(a.msg, out);
        break;
      case Action::Kind::choice: {
        auto both = intersect(sh_var(a.left), sh_var(a.right));
        out.insert(both.begin(), both.end());
        break;
      }
      case Action::Kind::branch: {
        collect_vars(a.cond.lhs, out);
        collect_vars(a.cond.rhs, out);
        auto both = intersect(sh_var(a.left), sh_var(a.right));
        out.insert(both.begin(), both.end());
        break;
      }
    }
  }
  return out;
}

namespace {

std::string join_vars(const std::set<std::string>& vs) {
  std::string out;
  for (const auto& v : vs) {
    if (!out.empty()) out += ", ";
    out += v;
  }
  return out;
}

// wf decomposes a process from the right, peeling the last element.
WfResult wf_rec(const std::vector<Action>& acts) {
  if (acts.empty()) return {};
  const Action& last = acts.back();
  std::vector<Action> prefix(acts.begin(), acts.end() - 1);
  Process prefix_p(prefix);

  switch (last.kind) {
    case Action::Kind::send:
    case Action::Kind::recv: {
      WfResult pre = wf_rec(prefix);
      if (!pre.ok) return pre;
      std::set<std::string> mv = vars_of(last.msg);
      std::set<std::string> pv = vars_of(prefix_p);
      std::set<std::string> shared = sh_var(prefix_p);
      std::set<std::string> bad;
      for (const auto& v : intersect(mv, pv))
        if (!shared.count(v)) bad.insert(v);
      if (!bad.empty()) {
        WfResult r;
        r.ok = false;
        r.offending_vars = bad;
        r.diagnostic = "variable " + join_vars(bad) + " in " +
                       (last.kind == Action::Kind::send ? "+(" : "-(") +
                       to_string(last.msg) + ") is not shared by all prior branches";
        return r;
      }
      return {};
    }
    case Action::Kind::branch: {
      if (prefix.empty()) {
        WfResult r;
        r.ok = false;
        r.diagnostic = "process begins with an if-then-else; its condition cannot be bound";
        return r;
      }
      if (last.left.is_nil()) {
        WfResult r;
        r.ok = false;
        r.diagnostic = "if-then-else with nilP then-branch";
        return r;
      }
      std::set<std::string> tv = vars_of(last.cond.lhs);
      collect_vars(last.cond.rhs, tv);
      std::set<std::string> shared = sh_var(prefix_p);
      std::set<std::string> bad;
      for (const auto& v : tv)
        if (!shared.count(v)) bad.insert(v);
      if (!bad.empty()) {
        WfResult r;
        r.ok = false;
        r.offending_vars = bad;
        r.diagnostic = "condition (" + last.cond.to_string() + ") uses variable " +
                       join_vars(bad) + " not shared by all prior branches";
        return r;
      }
      std::vector<Action> with_then = prefix;
      for (const Action& a : last.left.actions()) with_then.push_back(a);
      WfResult t = wf_rec(with_then);
      if (!t.ok) return t;
      std::vector<Action> with_else = prefix;
      for (const Action& a : last.right.actions()) with_else.push_back(a);
      return wf_rec(with_else);
    }
    case Action::Kind::choice: {
      if (last.left.is_nil() && last.right.is_nil()) {
        WfResult r;
        r.ok = false;
        r.diagnostic = "explicit choice with both branches nilP";
        return r;
      }
      std::vector<Action> with_left = prefix;
      for (const Action& a : last.left.actions()) with_left.push_back(a);
      WfResult l = wf_rec(with_left);
      if (!l.ok) return l;
      std::vector<Action> with_right = prefix;
      for (const Action& a : last.right.actions()) with_right.push_back(a);
      return wf_rec(with_right);
    }
  }
  return {};
}

}  // namespace

WfResult well_formed(const Process& p) { return wf_rec(p.actions()); }

void ProcessConfiguration::add(LabeledProcess lp) {
  if (find(lp.role, lp.session))
    throw Error("duplicate labeled process (" + lp.role + "," + std::to_string(lp.session) +
                ") in configuration");
  procs_.push_back(std::move(lp));
}

const LabeledProcess* ProcessConfiguration::find(const std::string& role, int session) const {
  for (const auto& lp : procs_)
    if (lp.role == role && lp.session == session) return &lp;
  return nullptr;
}

namespace {

enum class Occurrence { sent, received, condition };

// Walks every root-to-leaf path, reporting the polarity of each variable's
// first occurrence on that path.
void first_occurrences(const std::vector<Action>& acts, size_t idx,
                       std::map<std::string, Occurrence> seen,
                       std::vector<std::map<std::string, Occurrence>>& paths) {
  if (idx == acts.size()) {
    paths.push_back(std::move(seen));
    return;
  }
  const Action& a = acts[idx];
  auto note = [&](const Term& t, Occurrence o) {
    for (const auto& v : vars_of(t))
      if (!seen.count(v)) seen.emplace(v, o);
  };
  switch (a.kind) {
    case Action::Kind::send:
      note(a.msg, Occurrence::sent);
      first_occurrences(acts, idx + 1, std::move(seen), paths);
      break;
    case Action::Kind::recv:
      note(a.msg, Occurrence::received);
      first_occurrences(acts, idx + 1, std::move(seen), paths);
      break;
    case Action::Kind::branch: {
      note(a.cond.lhs, Occurrence::condition);
      note(a.cond.rhs, Occurrence::condition);
      std::vector<Action> rest(acts.begin() + idx + 1, acts.end());
      std::vector<Action> left = a.left.actions();
      left.insert(left.end(), rest.begin(), rest.end());
      first_occurrences(left, 0, seen, paths);
      std::vector<Action> right = a.right.actions();
      right.insert(right.end(), rest.begin(), rest.end());
      first_occurrences(right, 0, std::move(seen), paths);
      break;
    }
    case Action::Kind::choice: {
      std::vector<Action> rest(acts.begin() + idx + 1, acts.end());
      std::vector<Action> left = a.left.actions();
      left.insert(left.end(), rest.begin(), rest.end());
      first_occurrences(left, 0, seen, paths);
      std::vector<Action> right = a.right.actions();
      right.insert(right.end(), rest.begin(), rest.end());
      first_occurrences(right, 0, std::move(seen), paths);
      break;
    }
  }
}

}  // namespace

Classification classify_variables(const ProcessConfiguration& config, const Signature& sig) {
  Classification out;
  for (const auto& lp : config.processes()) {
    // Variable terms carry the declared sorts.
    std::map<std::string, Term> var_terms;
    std::function<void(const Process&)> collect = [&](const Process& p) {
      for (const Action& a : p.actions()) {
        switch (a.kind) {
          case Action::Kind::send:
          case Action::Kind::recv:
            collect_var_terms(a.msg, var_terms);
            break;
          case Action::Kind::branch:
            collect_var_terms(a.cond.lhs, var_terms);
            collect_var_terms(a.cond.rhs, var_terms);
            collect(a.left);
            collect(a.right);
            break;
          case Action::Kind::choice:
            collect(a.left);
            collect(a.right);
            break;
        }
      }
    };
    collect(lp.body);

    std::vector<std::map<std::string, Occurrence>> paths;
    first_occurrences(lp.body.actions(), 0, {}, paths);

    auto& kinds = out.kinds[lp.role];
    for (const auto& [name, vt] : var_terms) {
      bool is_fresh_sort = vt->sort == sig.fresh_sort();
      std::set<Occurrence> firsts;
      for (const auto& path : paths) {
        auto it = path.find(name);
        if (it != path.end()) firsts.insert(it->second);
      }
      if (is_fresh_sort) {
        if (firsts.count(Occurrence::received)) {
          out.ok = false;
          out.diagnostic = "KindConflict: sort-Fresh variable " + name + " of role " + lp.role +
                           " first appears in a received message";
          continue;
        }
        kinds[name] = VarKind::fresh;
        continue;
      }
      if (firsts.count(Occurrence::sent) && firsts.count(Occurrence::received)) {
        out.ok = false;
        out.diagnostic = "KindConflict: variable " + name + " of role " + lp.role +
                         " first appears in a sent message on one path and a received "
                         "message on another";
        continue;
      }
      if (firsts.count(Occurrence::sent))
        kinds[name] = VarKind::choice;
      else if (firsts.count(Occurrence::received))
        kinds[name] = VarKind::pattern;
      else
        kinds[name] = VarKind::pattern;  // condition-only use; wf flags it separately
    }
  }
  return out;
}

namespace {

Term annotate_term(const Term& t, const std::map<std::string, VarKind>& kinds) {
  if (t->is_var()) {
    auto it = kinds.find(t->name);
    VarKind k = it == kinds.end() ? t->kind : it->second;
    if (k == t->kind) return t;
    return mk_var(t->name, t->sort, k);
  }
  if (t->is_fresh_name() || t->args.empty()) return t;
  std::vector<Term> args;
  args.reserve(t->args.size());
  for (const auto& a : t->args) args.push_back(annotate_term(a, kinds));
  return mk_app_raw(t->name, t->sort, std::move(args));
}

}  // namespace

Process annotate_process_kinds(const Process& p, const std::map<std::string, VarKind>& kinds) {
  std::vector<Action> acts;
  for (const Action& a : p.actions()) {
    Action b = a;
    switch (a.kind) {
      case Action::Kind::send:
      case Action::Kind::recv:
        b.msg = annotate_term(a.msg, kinds);
        break;
      case Action::Kind::branch:
        b.cond.lhs = annotate_term(a.cond.lhs, kinds);
        b.cond.rhs = annotate_term(a.cond.rhs, kinds);
        b.left = annotate_process_kinds(a.left, kinds);
        b.right = annotate_process_kinds(a.right, kinds);
        break;
      case Action::Kind::choice:
        b.left = annotate_process_kinds(a.left, kinds);
        b.right = annotate_process_kinds(a.right, kinds);
        break;
    }
    acts.push_back(std::move(b));
  }
  return Process(std::move(acts));
}

ProcessConfiguration annotate_kinds(const ProcessConfiguration& config,
                                    const Classification& cls) {
  ProcessConfiguration out;
  for (const auto& lp : config.processes()) {
    LabeledProcess nlp = lp;
    auto it = cls.kinds.find(lp.role);
    if (it != cls.kinds.end()) nlp.body = annotate_process_kinds(lp.body, it->second);
    out.add(std::move(nlp));
  }
  return out;
}

Process apply_subst(const Process& p, const Subst& s) {
  if (s.empty()) return p;
  std::vector<Action> acts;
  for (const Action& a : p.actions()) {
    Action b = a;
    switch (a.kind) {
      case Action::Kind::send:
      case Action::Kind::recv:
        b.msg = s.apply(a.msg);
        break;
      case Action::Kind::branch:
        b.cond.lhs = s.apply(a.cond.lhs);
        b.cond.rhs = s.apply(a.cond.rhs);
        b.left = apply_subst(a.left, s);
        b.right = apply_subst(a.right, s);
        break;
      case Action::Kind::choice:
        b.left = apply_subst(a.left, s);
        b.right = apply_subst(a.right, s);
        break;
    }
    acts.push_back(std::move(b));
  }
  return Process(std::move(acts));
}

}  // namespace strandweaver
