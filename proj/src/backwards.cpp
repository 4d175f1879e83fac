#include "strandweaver/backwards.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <sstream>

namespace strandweaver {

bool SymbolicState::is_initial() const {
  for (const auto& s : strands)
    if (!s.past.empty()) return false;
  return ik.pos.empty();
}

std::string SymbolicState::to_string() const {
  std::ostringstream os;
  for (const auto& s : strands) {
    os << "(" << s.role << "," << s.session << ") ";
    if (!s.fresh_vars.empty()) {
      os << "::";
      for (size_t i = 0; i < s.fresh_vars.size(); ++i) {
        if (i) os << ",";
        os << strandweaver::to_string(s.fresh_vars[i]);
      }
      os << ":: ";
    }
    os << items_to_string(s.past) << " | " << items_to_string(s.future) << "  ";
  }
  os << "IK: ";
  for (const auto& w : ik.pos) os << "inI(" << strandweaver::to_string(w) << ") ";
  for (const auto& w : ik.neg) os << "nI(" << strandweaver::to_string(w) << ") ";
  if (!store.cs.empty()) {
    os << " Psi: ";
    for (size_t i = 0; i < store.cs.size(); ++i) {
      if (i) os << " /\\ ";
      os << store.cs[i].to_string();
    }
  }
  return os.str();
}

std::string canonical_state(const SymbolicState& st) {
  // Strands are ordered by a variable-erased digest first, then the whole
  // state is printed with one consistent renaming.
  std::vector<size_t> order(st.strands.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto erased = [&](const SymbolicStrand& s) {
    std::map<std::string, int> ren;
    std::string k = s.role + items_canonical(s.past, ren) + "|";
    std::map<std::string, int> ren2;
    return k + items_canonical(s.future, ren2);
  };
  std::vector<std::string> keys;
  keys.reserve(st.strands.size());
  for (const auto& s : st.strands) keys.push_back(erased(s));
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    return a < b;
  });

  std::map<std::string, int> ren;
  std::ostringstream os;
  for (size_t i : order) {
    const auto& s = st.strands[i];
    os << "(" << s.role << ")" << items_canonical(s.past, ren) << "|"
       << items_canonical(s.future, ren) << "&";
  }
  std::vector<std::string> pos, neg;
  for (const auto& w : st.ik.pos) {
    std::map<std::string, int> local = ren;
    pos.push_back(canonical(w, local));
  }
  std::sort(pos.begin(), pos.end());
  for (const auto& w : st.ik.neg) {
    std::map<std::string, int> local = ren;
    neg.push_back(canonical(w, local));
  }
  std::sort(neg.begin(), neg.end());
  os << "IK+";
  for (auto& x : pos) os << x << ",";
  os << "IK-";
  for (auto& x : neg) os << x << ",";
  std::vector<std::string> cs;
  for (const auto& c : st.store.cs) {
    std::map<std::string, int> local = ren;
    cs.push_back(c.canonical(local));
  }
  std::sort(cs.begin(), cs.end());
  os << "PSI";
  for (auto& x : cs) os << x << ",";
  return os.str();
}

namespace {

Term rename_vars_tagged(const Term& t, long tag) {
  if (t->is_var())
    return mk_var(t->name + "#" + std::to_string(tag), t->sort, t->kind);
  if (t->is_fresh_name() || t->args.empty()) return t;
  std::vector<Term> args;
  args.reserve(t->args.size());
  for (const auto& a : t->args) args.push_back(rename_vars_tagged(a, tag));
  return mk_app_raw(t->name, t->sort, std::move(args));
}

StrandItem rename_item_tagged(const StrandItem& it, long tag) {
  StrandItem out = it;
  switch (it.kind) {
    case StrandItem::Kind::send:
    case StrandItem::Kind::recv:
      out.msg = rename_vars_tagged(it.msg, tag);
      break;
    case StrandItem::Kind::cstr:
      out.cstr.lhs = rename_vars_tagged(it.cstr.lhs, tag);
      out.cstr.rhs = rename_vars_tagged(it.cstr.rhs, tag);
      break;
    case StrandItem::Kind::question:
      break;
  }
  return out;
}

SymbolicState apply_subst_state(const SymbolicState& st, const Subst& mu) {
  if (mu.empty()) return st;
  SymbolicState out;
  out.strands.reserve(st.strands.size());
  for (const auto& s : st.strands) {
    SymbolicStrand ns;
    ns.role = s.role;
    ns.session = s.session;
    for (const auto& v : s.fresh_vars) {
      Term image = mu.apply(v);
      if (image->is_var()) ns.fresh_vars.push_back(image);
    }
    for (const auto& it : s.past) ns.past.push_back(apply_subst(it, mu));
    for (const auto& it : s.future) ns.future.push_back(apply_subst(it, mu));
    out.strands.push_back(std::move(ns));
  }
  for (const auto& w : st.ik.pos) out.ik.pos.push_back(mu.apply(w));
  for (const auto& w : st.ik.neg) out.ik.neg.push_back(mu.apply(w));
  for (const auto& c : st.store.cs)
    out.store.cs.emplace_back(c.kind, mu.apply(c.lhs), mu.apply(c.rhs));
  return out;
}

int max_session(const std::vector<SymbolicStrand>& strands, const std::string& role) {
  int m = 0;
  for (const auto& s : strands)
    if (s.role == role) m = std::max(m, s.session);
  return m;
}

}  // namespace

std::optional<SymbolicState> BackwardsEngine::normalize_and_check(SymbolicState st) const {
  const ConvergentTheory& th = *p_.theory;
  const Signature& sig = *p_.sig;
  for (auto& s : st.strands) {
    for (auto& it : s.past) it = normalize_item(it, th, sig);
    for (auto& it : s.future) it = normalize_item(it, th, sig);
  }
  for (auto& w : st.ik.pos) w = normalize(w, th, sig);
  for (auto& w : st.ik.neg) w = normalize(w, th, sig);
  for (auto& c : st.store.cs) {
    c.lhs = normalize(c.lhs, th, sig);
    c.rhs = normalize(c.rhs, th, sig);
  }

  auto dedup = [](std::vector<Term>& v) {
    std::sort(v.begin(), v.end(), [](const Term& a, const Term& b) { return compare(a, b) < 0; });
    v.erase(std::unique(v.begin(), v.end(),
                        [](const Term& a, const Term& b) { return equal(a, b); }),
            v.end());
  };
  dedup(st.ik.pos);
  dedup(st.ik.neg);

  // A term may not be both known and not-yet-known.
  for (const auto& p : st.ik.pos)
    for (const auto& n : st.ik.neg)
      if (equal(p, n)) return std::nullopt;

  if (!p_.mutations.skip_diseq_check) {
    for (const auto& c : st.store.cs)
      if (equal(c.lhs, c.rhs)) return std::nullopt;
  }
  // Drop duplicate store entries.
  std::sort(st.store.cs.begin(), st.store.cs.end(),
            [](const Constraint& a, const Constraint& b) { return compare(a, b) < 0; });
  st.store.cs.erase(std::unique(st.store.cs.begin(), st.store.cs.end(),
                                [](const Constraint& a, const Constraint& b) {
                                  return equal(a, b);
                                }),
                    st.store.cs.end());
  return st;
}

std::vector<BackStep> BackwardsEngine::step(const SymbolicState& st) {
  const ConvergentTheory& th = *p_.theory;
  const Signature& sig = *p_.sig;
  std::vector<BackStep> out;

  auto emit = [&](const std::string& rule, const Subst& mu, SymbolicState next) {
    if (auto checked = normalize_and_check(apply_subst_state(next, mu))) {
      BackStep bs;
      bs.rule = rule;
      bs.mu = mu;
      bs.state = std::move(*checked);
      out.push_back(std::move(bs));
    }
  };

  for (size_t si = 0; si < st.strands.size(); ++si) {
    const SymbolicStrand& s = st.strands[si];
    if (s.past.empty()) continue;
    const StrandItem u = s.past.back();

    auto with_bar_left = [&](const SymbolicState& base) {
      SymbolicState next = base;
      SymbolicStrand& ns = next.strands[si];
      ns.past.pop_back();
      ns.future.insert(ns.future.begin(), u);
      return next;
    };

    switch (u.kind) {
      case StrandItem::Kind::recv: {
        // Reversed (B-): the received message was already known. Either it is
        // one of the explicit facts, or it comes from the knowledge remainder.
        for (const auto& w : st.ik.pos) {
          auto res = variant_unify(u.msg, w, th, sig);
          for (const auto& mu : res.unifiers) emit("B-", mu, with_bar_left(st));
        }
        SymbolicState added = st;
        added.ik.pos.push_back(u.msg);
        emit("B-", Subst{}, with_bar_left(added));
        break;
      }
      case StrandItem::Kind::send: {
        // Reversed (B+): sent without the intruder learning it.
        emit("B+", Subst{}, with_bar_left(st));
        // Reversed (B++): this send is where fact w was learnt.
        for (size_t fi = 0; fi < st.ik.pos.size(); ++fi) {
          auto res = variant_unify(u.msg, st.ik.pos[fi], th, sig);
          for (const auto& mu : res.unifiers) {
            SymbolicState base = st;
            Term w = base.ik.pos[fi];
            base.ik.pos.erase(base.ik.pos.begin() + fi);
            base.ik.neg.push_back(w);
            emit("B++", mu, with_bar_left(base));
          }
        }
        break;
      }
      case StrandItem::Kind::question:
        emit("B?", Subst{}, with_bar_left(st));
        break;
      case StrandItem::Kind::cstr: {
        if (u.cstr.kind == Constraint::Kind::eq) {
          auto res = variant_unify(u.cstr.lhs, u.cstr.rhs, th, sig);
          for (const auto& mu : res.unifiers) emit("Bif=", mu, with_bar_left(st));
        } else {
          SymbolicState base = st;
          base.store.cs.push_back(u.cstr);
          emit("Bif!=", Subst{}, with_bar_left(base));
        }
        break;
      }
    }
  }

  // Reversed (B&): a fact is explained by introducing the strand that sent
  // it, positioned just before the send.
  for (size_t fi = 0; fi < st.ik.pos.size(); ++fi) {
    for (const auto& sp : p_.strand_spec.strands) {
      for (size_t k = 0; k < sp.items.size(); ++k) {
        if (sp.items[k].kind != StrandItem::Kind::send) continue;
        long tag = ++rename_counter_;
        std::vector<StrandItem> items;
        items.reserve(sp.items.size());
        for (const auto& it : sp.items) items.push_back(rename_item_tagged(it, tag));
        auto res = variant_unify(items[k].msg, st.ik.pos[fi], th, sig);
        for (const auto& mu : res.unifiers) {
          SymbolicState base = st;
          Term w = base.ik.pos[fi];
          base.ik.pos.erase(base.ik.pos.begin() + fi);
          base.ik.neg.push_back(w);
          SymbolicStrand ns;
          ns.role = sp.role;
          ns.session = max_session(base.strands, sp.role) + 1;
          for (const auto& fv : sp.fresh_vars)
            ns.fresh_vars.push_back(rename_vars_tagged(fv, tag));
          ns.past.assign(items.begin(), items.begin() + static_cast<long>(k));
          ns.future.assign(items.begin() + static_cast<long>(k), items.end());
          base.strands.push_back(std::move(ns));
          emit("B&", mu, base);
        }
      }
    }
  }

  // Deterministic order and structural dedup.
  std::vector<std::pair<std::string, size_t>> keys;
  keys.reserve(out.size());
  for (size_t i = 0; i < out.size(); ++i)
    keys.emplace_back(out[i].rule + "|" + canonical_state(out[i].state), i);
  std::sort(keys.begin(), keys.end());
  std::vector<BackStep> result;
  std::string last;
  for (auto& [k, i] : keys) {
    if (k == last) continue;
    last = k;
    result.push_back(std::move(out[i]));
  }
  return result;
}

namespace {

// E-matches `pattern` item against `target` item (target variables rigid),
// extending `acc`. Calls `fn` for every solution.
void match_item_modulo(const Protocol& p, const StrandItem& pattern, const StrandItem& target,
                       const Subst& acc, const std::function<void(const Subst&)>& fn) {
  StrandItem pat = apply_subst(pattern, acc);
  if (pat.kind != target.kind || pat.num != target.num) return;
  switch (pat.kind) {
    case StrandItem::Kind::question:
      fn(acc);
      break;
    case StrandItem::Kind::send:
    case StrandItem::Kind::recv: {
      auto res = match_modulo(pat.msg, target.msg, *p.theory, *p.sig);
      for (const auto& s : res.unifiers) fn(acc.compose(s));
      break;
    }
    case StrandItem::Kind::cstr: {
      if (pat.cstr.kind != target.cstr.kind) return;
      auto l = match_modulo(pat.cstr.lhs, target.cstr.lhs, *p.theory, *p.sig);
      for (const auto& sl : l.unifiers) {
        Term rhs = sl.apply(pat.cstr.rhs);
        auto r = match_modulo(rhs, target.cstr.rhs, *p.theory, *p.sig);
        for (const auto& sr : r.unifiers) fn(acc.compose(sl).compose(sr));
      }
      break;
    }
  }
}

void match_items_modulo(const Protocol& p, const std::vector<StrandItem>& pattern,
                        const std::vector<StrandItem>& target, size_t idx, const Subst& acc,
                        const std::function<void(const Subst&)>& fn) {
  if (idx == pattern.size()) {
    fn(acc);
    return;
  }
  if (idx >= target.size()) return;
  match_item_modulo(p, pattern[idx], target[idx], acc, [&](const Subst& next) {
    match_items_modulo(p, pattern, target, idx + 1, next, fn);
  });
}

void require_irreducible_constraints(const Protocol& p, const std::vector<StrandItem>& items,
                                     const std::string& what) {
  for (const auto& it : items) {
    if (it.kind != StrandItem::Kind::cstr) continue;
    Term nl = normalize(it.cstr.lhs, *p.theory, *p.sig);
    Term nr = normalize(it.cstr.rhs, *p.theory, *p.sig);
    if (!equal(nl, it.cstr.lhs) || !equal(nr, it.cstr.rhs))
      throw PatternError(what + ": constraint " + it.cstr.to_string() +
                         " is reducible; patterns must use irreducible constraints");
  }
}

}  // namespace

SymbolicState BackwardsEngine::state_of_attack(const AttackPattern& a) const {
  SymbolicState st;
  for (const auto& as : a.strands) {
    require_irreducible_constraints(p_, as.items, "attack " + std::to_string(a.id));
    std::vector<StrandItem> past;
    past.reserve(as.items.size());
    for (const auto& it : as.items) past.push_back(normalize_item(it, *p_.theory, *p_.sig));

    bool placed = false;
    for (const auto& sp : p_.strand_spec.strands) {
      if (sp.role != as.role || sp.items.size() < past.size()) continue;
      long tag = const_cast<BackwardsEngine*>(this)->rename_counter_ += 1;
      std::vector<StrandItem> items;
      items.reserve(sp.items.size());
      for (const auto& it : sp.items) items.push_back(rename_item_tagged(it, tag));
      std::vector<Subst> matches;
      match_items_modulo(p_, items, past, 0, Subst{},
                         [&](const Subst& s) { matches.push_back(s); });
      if (matches.empty()) continue;
      const Subst& s = matches.front();
      SymbolicStrand ns;
      ns.role = as.role;
      ns.session = max_session(st.strands, as.role) + 1;
      ns.past = past;
      for (size_t i = past.size(); i < items.size(); ++i)
        ns.future.push_back(apply_subst(items[i], s));
      std::map<std::string, Term> vt;
      for (const auto& it : ns.past) {
        if (it.kind == StrandItem::Kind::send || it.kind == StrandItem::Kind::recv)
          collect_var_terms(it.msg, vt);
        else if (it.kind == StrandItem::Kind::cstr) {
          collect_var_terms(it.cstr.lhs, vt);
          collect_var_terms(it.cstr.rhs, vt);
        }
      }
      for (const auto& it : ns.future) {
        if (it.kind == StrandItem::Kind::send || it.kind == StrandItem::Kind::recv)
          collect_var_terms(it.msg, vt);
        else if (it.kind == StrandItem::Kind::cstr) {
          collect_var_terms(it.cstr.lhs, vt);
          collect_var_terms(it.cstr.rhs, vt);
        }
      }
      for (const auto& [n, v] : vt)
        if (v->sort == p_.sig->fresh_sort()) ns.fresh_vars.push_back(v);
      st.strands.push_back(std::move(ns));
      placed = true;
      break;
    }
    if (!placed)
      throw PatternError("attack " + std::to_string(a.id) + ": strand of role " + as.role +
                         " does not instantiate any specification strand");
  }
  for (const auto& g : a.goals)
    st.ik.pos.push_back(normalize(g, *p_.theory, *p_.sig));
  for (const auto& nc : a.nevers)
    for (const auto& ns : nc.strands) {
      require_irreducible_constraints(p_, ns.items, "never pattern");
      for (const auto& it : ns.items) {
        if (it.kind == StrandItem::Kind::send || it.kind == StrandItem::Kind::recv) {
          Term n = normalize(it.msg, *p_.theory, *p_.sig);
          if (!equal(n, it.msg))
            throw PatternError("never pattern message " + to_string(it.msg) +
                               " is reducible; never patterns must be irreducible");
        }
      }
    }
  auto checked = normalize_and_check(std::move(st));
  if (!checked)
    throw PatternError("attack " + std::to_string(a.id) + " is inconsistent as specified");
  return *checked;
}

bool BackwardsEngine::never_matches(const AttackPattern& a, const SymbolicState& st) const {
  for (const auto& nc : a.nevers) {
    // All strands of one never configuration must match simultaneously under
    // a shared substitution; the bar position of the state strand is ignored.
    std::function<bool(size_t, const Subst&)> assign = [&](size_t idx, const Subst& acc) {
      if (idx == nc.strands.size()) return true;
      const AttackStrand& ns = nc.strands[idx];
      for (const auto& s : st.strands) {
        if (s.role != ns.role) continue;
        std::vector<StrandItem> all = s.past;
        all.insert(all.end(), s.future.begin(), s.future.end());
        if (all.size() < ns.items.size()) continue;
        bool matched = false;
        match_items_modulo(p_, ns.items, all, 0, acc, [&](const Subst& next) {
          if (!matched && assign(idx + 1, next)) matched = true;
        });
        if (matched) return true;
      }
      return false;
    };
    if (assign(0, Subst{})) return true;
  }
  return false;
}

SearchResult BackwardsEngine::search(const AttackPattern& a, int depth, bool collect_all) {
  SearchResult result;
  SymbolicState start = state_of_attack(a);

  std::set<std::string> attack_vars;
  for (const auto& as : a.strands)
    for (const auto& it : as.items) collect_vars(it, attack_vars);
  for (const auto& g : a.goals) collect_vars(g, attack_vars);

  struct Node {
    SymbolicState state;
    Subst acc;  // restricted to attack variables
    int parent = -1;
    std::string rule;
    std::string mu;
    int depth = 0;
  };
  std::vector<Node> nodes;
  auto acc_key = [&](const Subst& acc) {
    std::map<std::string, int> ren;
    std::string k;
    for (const auto& v : attack_vars) {
      k += v + ":";
      if (const Term* t = acc.lookup(v)) k += canonical(*t, ren);
      k += ";";
    }
    return k;
  };

  if (never_matches(a, start)) {
    result.verdict = SearchVerdict::exhausted_no_attack;
    return result;
  }

  std::deque<int> queue;
  std::set<std::string> seen;
  nodes.push_back({start, Subst{}, -1, "", "", 0});
  seen.insert(canonical_state(start) + "@" + acc_key(Subst{}));
  queue.push_back(0);
  bool truncated = false;

  auto record_solution = [&](int idx) {
    Solution sol;
    sol.initial_state = nodes[idx].state;
    sol.attack_binding = nodes[idx].acc;
    std::vector<std::string> path;
    std::vector<int> chain;
    for (int k = idx; k >= 0; k = nodes[k].parent) chain.push_back(k);
    std::reverse(chain.begin(), chain.end());
    for (int k : chain) {
      std::string line = nodes[k].rule.empty() ? "attack" : nodes[k].rule;
      line += " " + (nodes[k].mu.empty() ? std::string("{}") : nodes[k].mu);
      std::string digest = canonical_state(nodes[k].state);
      line += " state:" + std::to_string(std::hash<std::string>{}(digest));
      path.push_back(line);
    }
    sol.path = std::move(path);
    // State sequence attack -> initial, used for forwards replay.
    std::vector<SymbolicState> states;
    for (int k : chain) states.push_back(nodes[k].state);
    sol.schedule = replay_states(states);
    result.solutions.push_back(std::move(sol));
  };

  if (start.is_initial()) {
    record_solution(0);
    result.verdict = SearchVerdict::found;
    if (!collect_all) return result;
  }

  while (!queue.empty()) {
    int idx = queue.front();
    queue.pop_front();
    if (nodes[idx].depth == depth) {
      truncated = true;
      continue;
    }
    result.states_explored++;
    result.depth_reached = std::max(result.depth_reached, nodes[idx].depth);
    auto steps = step(nodes[idx].state);
    for (auto& bs : steps) {
      if (never_matches(a, bs.state)) {
        result.states_pruned_never++;
        continue;
      }
      Subst acc;
      for (const auto& v : attack_vars) {
        Term cur = nodes[idx].acc.lookup(v) ? *nodes[idx].acc.lookup(v)
                                            : Term{};
        Term image;
        if (cur)
          image = bs.mu.apply(cur);
        else if (const Term* direct = bs.mu.lookup(v))
          image = *direct;
        if (image && !(image->is_var() && image->name == v)) acc.bind(v, image);
      }
      std::string key = canonical_state(bs.state) + "@" + acc_key(acc);
      if (!seen.insert(key).second) continue;
      Node n;
      n.state = std::move(bs.state);
      n.acc = std::move(acc);
      n.parent = idx;
      n.rule = bs.rule;
      n.mu = bs.mu.to_string();
      n.depth = nodes[idx].depth + 1;
      nodes.push_back(std::move(n));
      int nidx = static_cast<int>(nodes.size()) - 1;
      if (nodes[nidx].state.is_initial()) {
        record_solution(nidx);
        if (!collect_all) {
          result.verdict = SearchVerdict::found;
          return result;
        }
      } else {
        queue.push_back(nidx);
      }
    }
  }

  if (!result.solutions.empty())
    result.verdict = SearchVerdict::found;
  else
    result.verdict = truncated ? SearchVerdict::not_found_within_depth
                               : SearchVerdict::exhausted_no_attack;
  return result;
}

namespace {

bool item_eq_modulo(const Protocol& p, const StrandItem& a, const StrandItem& b) {
  if (a.kind != b.kind || a.num != b.num) return false;
  switch (a.kind) {
    case StrandItem::Kind::send:
    case StrandItem::Kind::recv:
      return eq_modulo(a.msg, b.msg, *p.theory, *p.sig);
    case StrandItem::Kind::cstr:
      return a.cstr.kind == b.cstr.kind &&
             eq_modulo(a.cstr.lhs, b.cstr.lhs, *p.theory, *p.sig) &&
             eq_modulo(a.cstr.rhs, b.cstr.rhs, *p.theory, *p.sig);
    case StrandItem::Kind::question:
      return true;
  }
  return false;
}

bool item_ground(const StrandItem& it) {
  switch (it.kind) {
    case StrandItem::Kind::send:
    case StrandItem::Kind::recv:
      return is_ground(it.msg);
    case StrandItem::Kind::cstr:
      return is_ground(it.cstr.lhs) && is_ground(it.cstr.rhs);
    case StrandItem::Kind::question:
      return true;
  }
  return true;
}

std::vector<Term> sorted_domain_values(const Protocol& p, SortId sort) {
  std::vector<Term> out;
  for (const auto& [s, vals] : p.domain.values)
    if (p.sig->leq(s, sort))
      for (const auto& v : vals) out.push_back(v);
  std::sort(out.begin(), out.end(),
            [](const Term& a, const Term& b) { return compare(a, b) < 0; });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const Term& a, const Term& b) { return equal(a, b); }),
            out.end());
  return out;
}

void domain_groundings(const Protocol& p, const std::vector<Term>& vars, size_t idx, Subst acc,
                       const std::function<bool(const Subst&)>& fn, bool& stop) {
  if (stop) return;
  if (idx == vars.size()) {
    if (fn(acc)) stop = true;
    return;
  }
  std::vector<Term> vals = sorted_domain_values(p, vars[idx]->sort);
  if (vals.empty()) return;  // no grounding available for this variable
  for (const auto& v : vals) {
    Subst next = acc;
    next.bind(vars[idx]->name, v);
    domain_groundings(p, vars, idx + 1, std::move(next), fn, stop);
    if (stop) return;
  }
}

}  // namespace

bool lift_check(const Protocol& p, const SymbolicState& sym, const FWState& ground,
                const Subst& theta) {
  for (const auto& s : sym.strands) {
    if (s.past.empty()) continue;
    bool found = false;
    for (const auto& gs : ground.strands) {
      if (gs.role != s.role || gs.past.size() != s.past.size()) continue;
      bool all = true;
      for (size_t i = 0; i < s.past.size() && all; ++i) {
        StrandItem inst = apply_subst(s.past[i], theta);
        if (!item_ground(inst) || !item_eq_modulo(p, inst, gs.past[i])) all = false;
      }
      if (all) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  for (const auto& w : sym.ik.pos) {
    Term inst = theta.apply(w);
    if (!is_ground(inst)) return false;
    bool found = false;
    for (const auto& f : ground.ik.facts())
      if (eq_modulo(inst, f, *p.theory, *p.sig)) {
        found = true;
        break;
      }
    if (!found) return false;
  }
  for (const auto& w : sym.ik.neg) {
    Term inst = theta.apply(w);
    if (!is_ground(inst)) return false;
    for (const auto& f : ground.ik.facts())
      if (eq_modulo(inst, f, *p.theory, *p.sig)) return false;
  }
  for (const auto& c : sym.store.cs) {
    Term l = theta.apply(c.lhs);
    Term r = theta.apply(c.rhs);
    if (!is_ground(l) || !is_ground(r)) return false;
    if (eq_modulo(l, r, *p.theory, *p.sig)) return false;
  }
  return true;
}

std::optional<Subst> lift_search(const Protocol& p, const SymbolicState& sym,
                                 const FWState& ground) {
  std::optional<Subst> result;

  std::vector<const SymbolicStrand*> pending;
  for (const auto& s : sym.strands)
    if (!s.past.empty()) pending.push_back(&s);

  std::function<void(size_t, const Subst&)> assign_strands = [&](size_t idx, const Subst& acc) {
    if (result) return;
    if (idx == pending.size()) {
      // Positive facts next.
      std::function<void(size_t, const Subst&)> assign_facts = [&](size_t fi,
                                                                   const Subst& acc2) {
        if (result) return;
        if (fi == sym.ik.pos.size()) {
          // Ground leftover variables of negative facts and store over the
          // domain, then check the remaining clauses.
          std::map<std::string, Term> open;
          auto note_open = [&](const Term& t) {
            Term inst = acc2.apply(t);
            collect_var_terms(inst, open);
          };
          for (const auto& w : sym.ik.neg) note_open(w);
          for (const auto& c : sym.store.cs) {
            note_open(c.lhs);
            note_open(c.rhs);
          }
          std::vector<Term> vars;
          for (const auto& [n, v] : open)
            if (v->sort != p.sig->fresh_sort()) vars.push_back(v);
          if (vars.size() != open.size()) return;  // unbound fresh variable: give up
          bool stop = false;
          domain_groundings(p, vars, 0, acc2,
                            [&](const Subst& full) {
                              if (lift_check(p, sym, ground, full)) {
                                result = full;
                                return true;
                              }
                              return false;
                            },
                            stop);
          return;
        }
        Term pat = acc2.apply(sym.ik.pos[fi]);
        for (const auto& f : ground.ik.facts()) {
          auto res = match_modulo(pat, f, *p.theory, *p.sig);
          for (const auto& s : res.unifiers) {
            assign_facts(fi + 1, acc2.compose(s));
            if (result) return;
          }
        }
      };
      assign_facts(0, acc);
      return;
    }
    const SymbolicStrand& s = *pending[idx];
    for (const auto& gs : ground.strands) {
      if (gs.role != s.role || gs.past.size() != s.past.size()) continue;
      match_items_modulo(p, s.past, gs.past, 0, acc, [&](const Subst& next) {
        if (!result) assign_strands(idx + 1, next);
      });
      if (result) return;
    }
  };
  assign_strands(0, Subst{});
  return result;
}

std::vector<TransitionLabel> BackwardsEngine::replay_states(
    const std::vector<SymbolicState>& states) const {
  std::vector<TransitionLabel> schedule;
  if (states.empty()) return schedule;
  // states run attack -> initial; replay forwards from the initial end.
  FWState ground;  // the empty initial FW-state
  for (size_t k = states.size(); k-- > 1;) {
    const SymbolicState& target = states[k - 1];
    auto succ = fw_enabled(p_, ground);
    bool stepped = false;
    for (auto& [label, next] : succ) {
      if (lift_search(p_, target, next)) {
        schedule.push_back(label);
        ground = std::move(next);
        stepped = true;
        break;
      }
    }
    if (!stepped) return {};
  }
  return schedule;
}

std::vector<Subst> ground_solutions(const Protocol& p, const std::set<std::string>& attack_vars,
                                    const Solution& sol) {
  std::vector<Subst> out;
  // Variables to ground: the attack variables as mapped by the composed
  // substitution, plus whatever else the store mentions (existential).
  std::map<std::string, Term> image_vars;
  std::vector<std::pair<std::string, Term>> images;
  for (const auto& v : attack_vars) {
    const Term* t = sol.attack_binding.lookup(v);
    Term img = t ? *t : Term{};
    if (!img) {
      // Unbound attack variable: need its sort; recover from the state.
      images.emplace_back(v, Term{});
    } else {
      images.emplace_back(v, img);
      collect_var_terms(img, image_vars);
    }
  }
  std::map<std::string, Term> state_vars;
  for (const auto& s : sol.initial_state.strands)
    for (const auto& it : s.future) {
      if (it.kind == StrandItem::Kind::send || it.kind == StrandItem::Kind::recv)
        collect_var_terms(it.msg, state_vars);
      else if (it.kind == StrandItem::Kind::cstr) {
        collect_var_terms(it.cstr.lhs, state_vars);
        collect_var_terms(it.cstr.rhs, state_vars);
      }
    }
  for (auto& [v, img] : images) {
    if (img) continue;
    auto it = state_vars.find(v);
    if (it != state_vars.end()) {
      img = it->second;
      image_vars.emplace(v, it->second);
    }
  }
  std::map<std::string, Term> store_vars;
  for (const auto& c : sol.initial_state.store.cs) {
    collect_var_terms(c.lhs, store_vars);
    collect_var_terms(c.rhs, store_vars);
  }
  for (const auto& [n, v] : store_vars) image_vars.emplace(n, v);

  std::vector<Term> to_ground;
  for (const auto& [n, v] : image_vars)
    if (v->sort != p.sig->fresh_sort()) to_ground.push_back(v);

  std::set<std::string> seen;
  bool stop = false;
  domain_groundings(p, to_ground, 0, Subst{},
                    [&](const Subst& g) {
                      for (const auto& c : sol.initial_state.store.cs)
                        if (eq_modulo(g.apply(c.lhs), g.apply(c.rhs), *p.theory, *p.sig))
                          return false;
                      Subst binding;
                      for (const auto& [v, img] : images) {
                        if (!img) continue;
                        Term t = g.apply(img);
                        binding.bind(v, t);
                      }
                      std::map<std::string, int> ren;
                      std::string key;
                      for (const auto& [v, t] : binding.bindings())
                        key += v + "=" + canonical(t, ren) + ";";
                      if (seen.insert(key).second) out.push_back(binding);
                      return false;  // enumerate all
                    },
                    stop);
  return out;
}

LemmaVerdict one_step_lemmas_test(const Protocol& p, const std::vector<AttackPattern>& attacks,
                                  int trials, int depth, uint64_t seed) {
  LemmaVerdict v;
  BackwardsEngine engine(p);

  // Completeness direction: a sampled ground forwards step s -> s' together
  // with a lifting of s' admits a backwards step (or stutter) whose result
  // lifts s.
  for (int t = 0; t < trials && v.ok; ++t) {
    uint64_t rng = seed ^ (0x9e3779b97f4a7c15ull * static_cast<uint64_t>(t + 1));
    int len = 1 + static_cast<int>(rand_below(rng, static_cast<size_t>(depth)));
    FWState prev, cur;
    bool have_step = false;
    for (int d = 0; d < len; ++d) {
      auto succ = fw_enabled(p, cur);
      if (succ.empty()) break;
      size_t pick = rand_below(rng, succ.size());
      prev = cur;
      cur = succ[pick].second;
      have_step = true;
    }
    if (!have_step) continue;
    v.completeness_checked++;

    // Identity lift of s'.
    SymbolicState lifted;
    bool liftable = true;
    for (const auto& gs : cur.strands) {
      auto conts = strand_continuations(p.strand_spec, *p.sig, *p.theory, gs.role, gs.session,
                                        gs.past);
      if (conts.empty()) {
        liftable = false;
        break;
      }
      SymbolicStrand ss;
      ss.role = gs.role;
      ss.session = gs.session;
      ss.past = gs.past;
      ss.future = conts.front().suffix;
      for (const auto& it : ss.future)
        if (it.kind == StrandItem::Kind::send || it.kind == StrandItem::Kind::recv) {
          std::map<std::string, Term> vt;
          collect_var_terms(it.msg, vt);
          for (const auto& [n, var] : vt)
            if (var->sort == p.sig->fresh_sort()) ss.fresh_vars.push_back(var);
        }
      lifted.strands.push_back(std::move(ss));
    }
    if (!liftable) continue;
    for (const auto& f : cur.ik.facts()) lifted.ik.pos.push_back(f);

    if (!lift_check(p, lifted, cur, Subst{})) {
      v.ok = false;
      v.counterexample = "identity lift of a reachable state failed lift_check";
      break;
    }
    auto steps = engine.step(lifted);
    bool ok = lift_search(p, lifted, prev).has_value();
    for (const auto& bs : steps) {
      if (ok) break;
      if (lift_search(p, bs.state, prev)) ok = true;
    }
    if (!ok) {
      v.ok = false;
      v.counterexample =
          "completeness: no backwards step from a lifting of the successor lifts the "
          "predecessor; state " + lifted.to_string();
      break;
    }
    // Store-satisfiability invariant over the produced steps.
    for (const auto& bs : steps) {
      std::map<std::string, Term> svars;
      for (const auto& c : bs.state.store.cs) {
        collect_var_terms(c.lhs, svars);
        collect_var_terms(c.rhs, svars);
      }
      std::vector<Term> vars;
      for (const auto& [n, var] : svars)
        if (var->sort != p.sig->fresh_sort()) vars.push_back(var);
      bool sat = bs.state.store.cs.empty();
      if (!sat) {
        bool stop = false;
        domain_groundings(p, vars, 0, Subst{},
                          [&](const Subst& g) {
                            for (const auto& c : bs.state.store.cs)
                              if (eq_modulo(g.apply(c.lhs), g.apply(c.rhs), *p.theory, *p.sig))
                                return false;
                            return true;
                          },
                          stop);
        sat = stop;
      }
      if (!sat) {
        v.ok = false;
        v.counterexample = "backwards step " + bs.rule +
                           " produced a ground-unsatisfiable store: " + bs.state.to_string();
        break;
      }
    }
  }

  // Soundness direction: a sampled backwards step, grounded at its result,
  // projects to a ground forwards step lifting its source.
  for (size_t ai = 0; ai < attacks.size() && v.ok; ++ai) {
    SymbolicState start;
    try {
      start = engine.state_of_attack(attacks[ai]);
    } catch (const PatternError&) {
      continue;
    }
    int per_attack = std::max(1, trials / static_cast<int>(attacks.size()));
    for (int t = 0; t < per_attack && v.ok; ++t) {
      uint64_t rng = seed ^ (0xbf58476d1ce4e5b9ull * static_cast<uint64_t>(t + 1) + ai);
      SymbolicState parent = start;
      int len = 1 + static_cast<int>(rand_below(rng, static_cast<size_t>(depth)));
      for (int d = 0; d < len; ++d) {
        auto steps = engine.step(parent);
        if (steps.empty()) break;
        size_t pick = rand_below(rng, steps.size());
        const BackStep& bs = steps[pick];
        const SymbolicState& child = bs.state;

        // Ground the child: fresh prefix variables become r.ro.i names, the
        // remaining past/fact variables are drawn from the domain.
        Subst theta;
        for (const auto& s : child.strands)
          for (const auto& fv : s.fresh_vars) {
            std::string base = fv->name.substr(0, fv->name.find('#'));
            theta.bind(fv->name, mk_fresh_name(*p.sig, base, s.role, s.session));
          }
        std::map<std::string, Term> open;
        auto note = [&](const Term& term) {
          Term inst = theta.apply(term);
          collect_var_terms(inst, open);
        };
        for (const auto& s : child.strands)
          for (const auto& it : s.past) {
            if (it.kind == StrandItem::Kind::send || it.kind == StrandItem::Kind::recv)
              note(it.msg);
            else if (it.kind == StrandItem::Kind::cstr) {
              note(it.cstr.lhs);
              note(it.cstr.rhs);
            }
          }
        for (const auto& w : child.ik.pos) note(w);
        for (const auto& w : child.ik.neg) note(w);
        std::vector<Term> vars;
        bool fresh_open = false;
        for (const auto& [n, var] : open) {
          if (var->sort == p.sig->fresh_sort())
            fresh_open = true;
          else
            vars.push_back(var);
        }
        if (fresh_open) {
          parent = child;
          continue;
        }

        std::optional<Subst> grounding;
        bool stop = false;
        domain_groundings(p, vars, 0, theta,
                          [&](const Subst& g) {
                            // The grounding must satisfy the store and keep
                            // negative facts out of the positive set.
                            for (const auto& c : child.store.cs)
                              if (eq_modulo(g.apply(c.lhs), g.apply(c.rhs), *p.theory, *p.sig))
                                return false;
                            for (const auto& nw : child.ik.neg)
                              for (const auto& pw : child.ik.pos)
                                if (eq_modulo(g.apply(nw), g.apply(pw), *p.theory, *p.sig))
                                  return false;
                            grounding = g;
                            return true;
                          },
                          stop);
        if (!grounding) {
          parent = child;
          continue;
        }
        FWState s;
        for (const auto& ss : child.strands) {
          if (ss.past.empty()) continue;
          ConstrainedStrand gs;
          gs.role = ss.role;
          gs.session = ss.session;
          for (const auto& it : ss.past)
            gs.past.push_back(normalize_item(apply_subst(it, *grounding), *p.theory, *p.sig));
          s.strands.push_back(std::move(gs));
        }
        for (const auto& w : child.ik.pos)
          s.ik.add(normalize(grounding->apply(w), *p.theory, *p.sig));

        if (!lift_check(p, child, s, *grounding)) {
          parent = child;
          continue;  // grounding failed a side condition; not a counterexample
        }
        v.soundness_checked++;
        auto succ = fw_enabled(p, s);
        bool ok = false;
        for (auto& [label, next] : succ) {
          if (lift_search(p, parent, next)) {
            ok = true;
            break;
          }
        }
        if (!ok) {
          v.ok = false;
          v.counterexample = "soundness: backwards step " + bs.rule +
                             " has no matching ground forwards step from " + s.ik.to_string();
          break;
        }
        parent = child;
      }
    }
  }
  return v;
}

}  // namespace strandweaver

