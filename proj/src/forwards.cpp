#include "strandweaver/forwards.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <sstream>

namespace strandweaver {

std::string TransitionLabel::to_string() const {
  std::ostringstream os;
  os << "(" << role << "," << session << "," << step << ",";
  switch (action) {
    case Action::send_learn: os << "+(" << strandweaver::to_string(msg) << ")"; break;
    case Action::send_silent: os << strandweaver::to_string(msg); break;
    case Action::recv: os << "-(" << strandweaver::to_string(msg) << ")"; break;
    case Action::cstr: os << cstr.to_string(); break;
    case Action::question: os << "?"; break;
  }
  os << "," << branch << ")";
  return os.str();
}

bool TransitionLabel::operator==(const TransitionLabel& o) const {
  if (role != o.role || session != o.session || step != o.step || action != o.action ||
      branch != o.branch)
    return false;
  switch (action) {
    case Action::send_learn:
    case Action::send_silent:
    case Action::recv:
      return equal(msg, o.msg);
    case Action::cstr:
      return equal(cstr, o.cstr);
    case Action::question:
      return true;
  }
  return true;
}

bool TransitionLabel::operator<(const TransitionLabel& o) const {
  if (role != o.role) return role < o.role;
  if (session != o.session) return session < o.session;
  if (step != o.step) return step < o.step;
  if (action != o.action) return action < o.action;
  if (branch != o.branch) return branch < o.branch;
  switch (action) {
    case Action::send_learn:
    case Action::send_silent:
    case Action::recv:
      return compare(msg, o.msg) < 0;
    case Action::cstr:
      return compare(cstr, o.cstr) < 0;
    case Action::question:
      return false;
  }
  return false;
}

const std::vector<Term>* ChoiceDomain::for_sort(SortId s) const {
  auto it = values.find(s);
  return it == values.end() ? nullptr : &it->second;
}

bool IntruderKnowledge::contains(const Term& t) const {
  auto it = std::lower_bound(facts_.begin(), facts_.end(), t,
                             [](const Term& a, const Term& b) { return compare(a, b) < 0; });
  return it != facts_.end() && equal(*it, t);
}

void IntruderKnowledge::add(const Term& t) {
  auto it = std::lower_bound(facts_.begin(), facts_.end(), t,
                             [](const Term& a, const Term& b) { return compare(a, b) < 0; });
  if (it != facts_.end() && equal(*it, t)) return;
  facts_.insert(it, t);
}

bool IntruderKnowledge::operator==(const IntruderKnowledge& o) const {
  if (facts_.size() != o.facts_.size()) return false;
  for (size_t i = 0; i < facts_.size(); ++i)
    if (!equal(facts_[i], o.facts_[i])) return false;
  return true;
}

std::string IntruderKnowledge::to_string() const {
  std::string out = "{";
  for (size_t i = 0; i < facts_.size(); ++i) {
    if (i) out += ", ";
    out += strandweaver::to_string(facts_[i]);
  }
  return out + "}";
}

namespace {

std::string canon_process(const Process& p, std::map<std::string, int>& ren) {
  std::string out;
  for (const Action& a : p.actions()) {
    switch (a.kind) {
      case Action::Kind::send: out += "+" + canonical(a.msg, ren) + "."; break;
      case Action::Kind::recv: out += "-" + canonical(a.msg, ren) + "."; break;
      case Action::Kind::choice:
        out += "(" + canon_process(a.left, ren) + "?" + canon_process(a.right, ren) + ").";
        break;
      case Action::Kind::branch:
        out += "(if " + a.cond.canonical(ren) + " then " + canon_process(a.left, ren) +
               " else " + canon_process(a.right, ren) + ").";
        break;
    }
  }
  return out.empty() ? "nilP" : out;
}

}  // namespace

std::string canonical_state(const PAState& st) {
  std::vector<std::string> entries;
  for (const auto& lp : st.procs.processes()) {
    std::map<std::string, int> ren;
    entries.push_back("(" + lp.role + "," + std::to_string(lp.session) + "," +
                      std::to_string(lp.step) + ")" + canon_process(lp.body, ren));
  }
  std::sort(entries.begin(), entries.end());
  std::string out;
  for (const auto& e : entries) out += e + "&";
  out += "|" + st.ik.to_string();
  return out;
}

std::string canonical_state(const FWState& st) {
  std::vector<std::string> entries;
  for (const auto& s : st.strands) {
    std::map<std::string, int> ren;
    entries.push_back("(" + s.role + "," + std::to_string(s.session) + ")" +
                      items_canonical(s.past, ren));
  }
  std::sort(entries.begin(), entries.end());
  std::string out;
  for (const auto& e : entries) out += e + "&";
  out += "|" + st.ik.to_string();
  return out;
}

namespace {

std::vector<Term> domain_values(const Protocol& p, SortId sort) {
  std::vector<Term> out;
  for (const auto& [s, vals] : p.domain.values)
    if (p.sig->leq(s, sort))
      for (const auto& v : vals) out.push_back(v);
  std::sort(out.begin(), out.end(), [](const Term& a, const Term& b) { return compare(a, b) < 0; });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const Term& a, const Term& b) { return equal(a, b); }),
            out.end());
  return out;
}

// All ground substitutions over the given variables, drawn from the domain.
void enumerate_groundings(const Protocol& p, const std::vector<Term>& vars, size_t idx,
                          Subst acc, const std::function<void(const Subst&)>& fn) {
  if (idx == vars.size()) {
    fn(acc);
    return;
  }
  std::vector<Term> vals = domain_values(p, vars[idx]->sort);
  if (vals.empty())
    throw Error("no choice domain covers sort " + p.sig->sort_name(vars[idx]->sort) +
                " needed for variable " + vars[idx]->name);
  for (const auto& v : vals) {
    Subst next = acc;
    next.bind(vars[idx]->name, v);
    enumerate_groundings(p, vars, idx + 1, std::move(next), fn);
  }
}

std::vector<Term> unbound_vars(const Term& t) {
  std::map<std::string, Term> m;
  collect_var_terms(t, m);
  std::vector<Term> out;
  for (const auto& [n, v] : m) out.push_back(v);
  return out;
}

// Matching substitutions of `pattern` against fact `w`, completed to ground
// over the choice domain when a match is parametric.
std::vector<Subst> ground_matches(const Protocol& p, const Term& pattern, const Term& w) {
  std::vector<Subst> out;
  auto res = match_modulo(pattern, w, *p.theory, *p.sig);
  for (const auto& s : res.unifiers) {
    Term inst = s.apply(pattern);
    std::vector<Term> open = unbound_vars(inst);
    if (open.empty()) {
      out.push_back(s);
      continue;
    }
    enumerate_groundings(p, open, 0, s, [&](const Subst& g) {
      if (eq_modulo(g.apply(pattern), w, *p.theory, *p.sig)) out.push_back(g);
    });
  }
  return out;
}

bool constraint_holds(const Protocol& p, const Constraint& c) {
  std::set<std::string> vs = vars_of(c.lhs);
  collect_vars(c.rhs, vs);
  if (!vs.empty())
    throw Error("UnboundConstraint: constraint " + c.to_string() +
                " evaluated with unbound variables (well-formedness bug)");
  bool eq = eq_modulo(c.lhs, c.rhs, *p.theory, *p.sig);
  return c.kind == Constraint::Kind::eq ? eq : !eq;
}

Constraint normalize_cstr(const Protocol& p, const Constraint& c) {
  return Constraint(c.kind, normalize(c.lhs, *p.theory, *p.sig),
                    normalize(c.rhs, *p.theory, *p.sig));
}

int max_proc_id(const ProcessConfiguration& procs, const std::string& role) {
  int m = 0;
  for (const auto& lp : procs.processes())
    if (lp.role == role) m = std::max(m, lp.session);
  return m;
}

int max_str_id(const std::vector<ConstrainedStrand>& strands, const std::string& role) {
  int m = 0;
  for (const auto& s : strands)
    if (s.role == role) m = std::max(m, s.session);
  return m;
}

std::vector<Term> choice_vars_of(const Term& t) {
  std::map<std::string, Term> m;
  collect_var_terms(t, m);
  std::vector<Term> out;
  for (const auto& [n, v] : m)
    if (v->kind == VarKind::choice) out.push_back(v);
  return out;
}

// Steps the head action of one labeled process; `base` is the configuration
// the successor starts from (with `lp` removed when it was already present).
void pa_step_process(const Protocol& p, const PAState& st, const LabeledProcess& lp,
                     std::vector<std::pair<TransitionLabel, PAState>>& out) {
  if (lp.body.is_nil()) return;
  const Action& head = lp.body.actions().front();
  Process rest = lp.body.tail();

  auto make_succ = [&](const Process& residual, const Subst& s,
                       const IntruderKnowledge& ik) {
    PAState next;
    next.ik = ik;
    for (const auto& other : st.procs.processes())
      if (!(other.role == lp.role && other.session == lp.session)) next.procs.add(other);
    next.procs.add({lp.role, lp.session, lp.step + 1, apply_subst(residual, s)});
    return next;
  };

  switch (head.kind) {
    case Action::Kind::send: {
      std::vector<Term> cvars = choice_vars_of(head.msg);
      std::set<std::string> leftover;
      collect_vars(head.msg, leftover);
      for (const auto& v : cvars) leftover.erase(v->name);
      if (!leftover.empty())
        throw Error("send message " + to_string(head.msg) +
                    " has unbound non-choice variables (classification bug)");
      enumerate_groundings(p, cvars, 0, Subst{}, [&](const Subst& s) {
        Term m = normalize(s.apply(head.msg), *p.theory, *p.sig);
        TransitionLabel l;
        l.role = lp.role;
        l.session = lp.session;
        l.step = lp.step;
        l.msg = m;
        if (p.mutations.skip_pa_ik_guard || !st.ik.contains(m)) {
          l.action = TransitionLabel::Action::send_learn;
          IntruderKnowledge ik = st.ik;
          ik.add(m);
          out.emplace_back(l, make_succ(rest, s, ik));
        }
        l.action = TransitionLabel::Action::send_silent;
        out.emplace_back(l, make_succ(rest, s, st.ik));
      });
      break;
    }
    case Action::Kind::recv: {
      for (const Term& w : st.ik.facts()) {
        for (const Subst& s : ground_matches(p, head.msg, w)) {
          Term m = normalize(s.apply(head.msg), *p.theory, *p.sig);
          TransitionLabel l;
          l.role = lp.role;
          l.session = lp.session;
          l.step = lp.step;
          l.action = TransitionLabel::Action::recv;
          l.msg = m;
          out.emplace_back(l, make_succ(rest, s, st.ik));
        }
      }
      break;
    }
    case Action::Kind::branch: {
      bool holds = constraint_holds(p, head.cond);
      TransitionLabel l;
      l.role = lp.role;
      l.session = lp.session;
      l.step = lp.step;
      l.action = TransitionLabel::Action::cstr;
      if (holds) {
        l.cstr = normalize_cstr(p, head.cond);
        l.branch = 1;
        out.emplace_back(l, make_succ(Process::seq(head.left, rest), Subst{}, st.ik));
      } else {
        l.cstr = normalize_cstr(p, head.cond.negated());
        l.branch = 2;
        out.emplace_back(l, make_succ(Process::seq(head.right, rest), Subst{}, st.ik));
      }
      break;
    }
    case Action::Kind::choice: {
      TransitionLabel l;
      l.role = lp.role;
      l.session = lp.session;
      l.step = lp.step;
      l.action = TransitionLabel::Action::question;
      l.branch = 1;
      out.emplace_back(l, make_succ(Process::seq(head.left, rest), Subst{}, st.ik));
      l.branch = 2;
      out.emplace_back(l, make_succ(Process::seq(head.right, rest), Subst{}, st.ik));
      break;
    }
  }
}

std::vector<Term> fresh_vars_of_process(const Protocol& p, const Process& body) {
  std::map<std::string, Term> m;
  std::function<void(const Process&)> walk = [&](const Process& pr) {
    for (const Action& a : pr.actions()) {
      switch (a.kind) {
        case Action::Kind::send:
        case Action::Kind::recv:
          collect_var_terms(a.msg, m);
          break;
        case Action::Kind::branch:
          collect_var_terms(a.cond.lhs, m);
          collect_var_terms(a.cond.rhs, m);
          walk(a.left);
          walk(a.right);
          break;
        case Action::Kind::choice:
          walk(a.left);
          walk(a.right);
          break;
      }
    }
  };
  walk(body);
  std::vector<Term> out;
  for (const auto& [n, v] : m)
    if (v->sort == p.sig->fresh_sort()) out.push_back(v);
  return out;
}

template <typename Pair>
void sort_and_dedup(std::vector<Pair>& out,
                    const std::function<std::string(const typename Pair::second_type&)>& canon) {
  std::vector<std::pair<std::string, size_t>> keys;
  keys.reserve(out.size());
  for (size_t i = 0; i < out.size(); ++i)
    keys.emplace_back(out[i].first.to_string() + "##" + canon(out[i].second), i);
  std::sort(keys.begin(), keys.end());
  std::vector<Pair> result;
  result.reserve(out.size());
  std::string last;
  for (auto& [k, i] : keys) {
    if (k == last) continue;
    last = k;
    result.push_back(std::move(out[i]));
  }
  out = std::move(result);
}

}  // namespace

std::vector<std::pair<TransitionLabel, PAState>> pa_enabled(const Protocol& p,
                                                            const PAState& st) {
  std::vector<std::pair<TransitionLabel, PAState>> out;
  for (const auto& lp : st.procs.processes()) pa_step_process(p, st, lp, out);
  // PA&: introduce a fresh instance of every specification process and fire
  // its first action in the same step.
  for (const auto& spec_lp : p.processes.processes()) {
    int i = max_proc_id(st.procs, spec_lp.role) + 1;
    Subst rho = fresh_rename(*p.sig, spec_lp.role, i, fresh_vars_of_process(p, spec_lp.body));
    LabeledProcess intro{spec_lp.role, i, 1, apply_subst(spec_lp.body, rho)};
    pa_step_process(p, st, intro, out);
  }
  sort_and_dedup(out, static_cast<std::function<std::string(const PAState&)>>(
                          [](const PAState& s) { return canonical_state(s); }));
  return out;
}

namespace {

void fw_step_item(const Protocol& p, const FWState& st, const std::string& role, int session,
                  const std::vector<StrandItem>& past, const StrandItem& item, int step,
                  std::vector<std::pair<TransitionLabel, FWState>>& out) {
  auto make_succ = [&](const StrandItem& executed, const IntruderKnowledge& ik) {
    FWState next;
    next.ik = ik;
    bool replaced = false;
    for (const auto& s : st.strands) {
      if (s.role == role && s.session == session) {
        ConstrainedStrand ns = s;
        ns.past.push_back(executed);
        next.strands.push_back(std::move(ns));
        replaced = true;
      } else {
        next.strands.push_back(s);
      }
    }
    if (!replaced) {
      ConstrainedStrand ns;
      ns.role = role;
      ns.session = session;
      ns.past = past;
      ns.past.push_back(executed);
      next.strands.push_back(std::move(ns));
    }
    return next;
  };

  TransitionLabel l;
  l.role = role;
  l.session = session;
  l.step = step;

  switch (item.kind) {
    case StrandItem::Kind::send: {
      std::vector<Term> cvars = choice_vars_of(item.msg);
      std::set<std::string> leftover;
      collect_vars(item.msg, leftover);
      for (const auto& v : cvars) leftover.erase(v->name);
      if (!leftover.empty())
        throw Error("strand send " + to_string(item.msg) +
                    " has unbound non-choice variables");
      enumerate_groundings(p, cvars, 0, Subst{}, [&](const Subst& s) {
        Term m = normalize(s.apply(item.msg), *p.theory, *p.sig);
        l.msg = m;
        if (!st.ik.contains(m)) {
          l.action = TransitionLabel::Action::send_learn;
          IntruderKnowledge ik = st.ik;
          ik.add(m);
          out.emplace_back(l, make_succ(StrandItem::send(m), ik));
        }
        l.action = TransitionLabel::Action::send_silent;
        out.emplace_back(l, make_succ(StrandItem::send(m), st.ik));
      });
      break;
    }
    case StrandItem::Kind::recv: {
      for (const Term& w : st.ik.facts()) {
        for (const Subst& s : ground_matches(p, item.msg, w)) {
          Term m = normalize(s.apply(item.msg), *p.theory, *p.sig);
          l.action = TransitionLabel::Action::recv;
          l.msg = m;
          out.emplace_back(l, make_succ(StrandItem::recv(m), st.ik));
        }
      }
      break;
    }
    case StrandItem::Kind::cstr: {
      if (!constraint_holds(p, item.cstr)) break;
      Constraint c = normalize_cstr(p, item.cstr);
      l.action = TransitionLabel::Action::cstr;
      l.cstr = c;
      l.branch = item.num;
      out.emplace_back(l, make_succ(StrandItem::constraint(c, item.num), st.ik));
      break;
    }
    case StrandItem::Kind::question: {
      l.action = TransitionLabel::Action::question;
      l.branch = item.num;
      out.emplace_back(l, make_succ(item, st.ik));
      break;
    }
  }
}

}  // namespace

std::vector<std::pair<TransitionLabel, FWState>> fw_enabled(const Protocol& p,
                                                            const FWState& st) {
  std::vector<std::pair<TransitionLabel, FWState>> out;
  for (const auto& s : st.strands) {
    auto conts = strand_continuations(p.strand_spec, *p.sig, *p.theory, s.role, s.session,
                                      s.past);
    for (const auto& c : conts) {
      if (c.suffix.empty()) continue;
      fw_step_item(p, st, s.role, s.session, s.past, c.suffix.front(),
                   static_cast<int>(s.past.size()) + 1, out);
    }
  }
  // The & rules: a new strand enters through its first item. Constraint-first
  // strands cannot exist for well-formed specifications.
  for (const auto& spec : p.strand_spec.strands) {
    if (spec.items.empty()) continue;
    int i = max_str_id(st.strands, spec.role) + 1;
    Subst rho = fresh_rename(*p.sig, spec.role, i, spec.fresh_vars);
    StrandItem first = apply_subst(spec.items.front(), rho);
    if (first.kind == StrandItem::Kind::cstr) continue;
    fw_step_item(p, st, spec.role, i, {}, first, 1, out);
  }
  sort_and_dedup(out, static_cast<std::function<std::string(const FWState&)>>(
                          [](const FWState& s) { return canonical_state(s); }));
  return out;
}

ReplayResult run_trace(const Protocol& p, Semantics sem,
                       const std::vector<TransitionLabel>& schedule) {
  ReplayResult r;
  for (size_t i = 0; i < schedule.size(); ++i) {
    bool stepped = false;
    if (sem == Semantics::pa) {
      auto succ = pa_enabled(p, r.pa);
      for (auto& [l, s] : succ)
        if (l == schedule[i]) {
          r.pa = std::move(s);
          stepped = true;
          break;
        }
    } else {
      auto succ = fw_enabled(p, r.fw);
      for (auto& [l, s] : succ)
        if (l == schedule[i]) {
          r.fw = std::move(s);
          stepped = true;
          break;
        }
    }
    if (!stepped) {
      r.ok = false;
      r.stuck_index = i;
      return r;
    }
  }
  return r;
}

uint64_t next_rand(uint64_t& state) {
  // splitmix64: identical streams on every platform.
  state += 0x9e3779b97f4a7c15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

size_t rand_below(uint64_t& state, size_t n) {
  return n == 0 ? 0 : static_cast<size_t>(next_rand(state) % n);
}

namespace {

template <typename State>
ExploreResult explore_impl(const State& initial, int depth, Strategy strategy, uint64_t seed,
                           int samples,
                           const std::function<std::vector<std::pair<TransitionLabel, State>>(
                               const State&)>& enabled) {
  ExploreResult result;
  if (strategy == Strategy::bfs) {
    struct Node {
      State state;
      std::vector<TransitionLabel> trace;
      int depth;
    };
    std::deque<Node> queue;
    queue.push_back({initial, {}, 0});
    std::set<std::string> seen;
    seen.insert(canonical_state(initial));
    while (!queue.empty()) {
      Node n = std::move(queue.front());
      queue.pop_front();
      bool leaf = n.depth == depth;
      if (!leaf) {
        auto succ = enabled(n.state);
        result.states_expanded++;
        bool any_new = false;
        for (auto& [l, s] : succ) {
          std::string key = canonical_state(s);
          if (!seen.insert(key).second) {
            result.duplicate_states++;
            continue;
          }
          any_new = true;
          Node next;
          next.state = std::move(s);
          next.trace = n.trace;
          next.trace.push_back(l);
          next.depth = n.depth + 1;
          queue.push_back(std::move(next));
        }
        leaf = !any_new;
      }
      if (leaf) {
        Trace t;
        t.labels = std::move(n.trace);
        t.final_ik = n.state.ik;
        result.traces.push_back(std::move(t));
      }
    }
  } else {
    std::set<std::string> seen_traces;
    for (int k = 0; k < samples; ++k) {
      uint64_t rng = seed * 0x100000001b3ull + static_cast<uint64_t>(k) + 1;
      State cur = initial;
      Trace t;
      for (int d = 0; d < depth; ++d) {
        auto succ = enabled(cur);
        result.states_expanded++;
        if (succ.empty()) break;
        size_t pick = rand_below(rng, succ.size());
        t.labels.push_back(succ[pick].first);
        cur = std::move(succ[pick].second);
      }
      t.final_ik = cur.ik;
      std::string key;
      for (const auto& l : t.labels) key += l.to_string() + ";";
      if (seen_traces.insert(key).second) result.traces.push_back(std::move(t));
    }
  }
  return result;
}

}  // namespace

ExploreResult explore(const Protocol& p, Semantics sem, int depth, Strategy strategy,
                      uint64_t seed, int samples) {
  if (sem == Semantics::pa) {
    PAState init;
    return explore_impl<PAState>(init, depth, strategy, seed, samples,
                                 [&](const PAState& s) { return pa_enabled(p, s); });
  }
  FWState init;
  return explore_impl<FWState>(init, depth, strategy, seed, samples,
                               [&](const FWState& s) { return fw_enabled(p, s); });
}

}  // namespace strandweaver
