#include "strandweaver/rewrite.hpp"

#include <deque>
#include <functional>
#include <set>
#include <sstream>

namespace strandweaver {

void ConvergentTheory::add_rule(Term lhs, Term rhs) {
  if (lhs->is_var())
    throw Error("rewrite rule with variable left-hand side");
  std::set<std::string> lv = vars_of(lhs);
  for (const auto& v : vars_of(rhs))
    if (!lv.count(v))
      throw Error("rewrite rule introduces variable " + v + " on the right-hand side");
  rules_.push_back({std::move(lhs), std::move(rhs)});
}

namespace {

Term normalize_rec(const Term& t, const ConvergentTheory& th, const Signature& sig,
                   long& budget) {
  if (t->is_var() || t->is_fresh_name()) return t;
  std::vector<Term> args;
  args.reserve(t->args.size());
  bool changed = false;
  for (const auto& a : t->args) {
    Term a2 = normalize_rec(a, th, sig, budget);
    changed = changed || a2.get() != a.get();
    args.push_back(std::move(a2));
  }
  Term cur = changed ? mk_app_raw(t->name, t->sort, std::move(args)) : t;
  for (const auto& rule : th.rules()) {
    if (auto s = match(sig, rule.lhs, cur)) {
      if (--budget < 0)
        throw StepBudgetExceeded("rewrite step budget exhausted (non-terminating theory?)");
      return normalize_rec(s->apply(rule.rhs), th, sig, budget);
    }
  }
  return cur;
}

}  // namespace

Term normalize(const Term& t, const ConvergentTheory& th, const Signature& sig, long budget) {
  if (th.empty()) return t;
  return normalize_rec(t, th, sig, budget);
}

bool eq_modulo(const Term& a, const Term& b, const ConvergentTheory& th, const Signature& sig) {
  return equal(normalize(a, th, sig), normalize(b, th, sig));
}

namespace {

Term rename_apart(const Term& t, long tag) {
  if (t->is_var())
    return mk_var(t->name + "#" + std::to_string(tag), t->sort, t->kind);
  if (t->is_fresh_name() || t->args.empty()) return t;
  std::vector<Term> args;
  args.reserve(t->args.size());
  for (const auto& a : t->args) args.push_back(rename_apart(a, tag));
  return mk_app_raw(t->name, t->sort, std::move(args));
}

// One-step narrowings of `t` at non-variable positions, as pairs of
// (narrowed term, unifier over var(t)).
void narrowings(const Term& t, const ConvergentTheory& th, const Signature& sig,
                long& rename_counter, std::vector<std::pair<Term, Subst>>& out) {
  std::function<void(const Term&, const std::function<Term(Term)>&)> walk =
      [&](const Term& sub, const std::function<Term(Term)>& rebuild) {
        if (sub->is_var()) return;
        if (sub->is_app()) {
          for (const auto& rule : th.rules()) {
            long tag = ++rename_counter;
            Term l = rename_apart(rule.lhs, tag);
            Term r = rename_apart(rule.rhs, tag);
            long glb_counter = rename_counter * 1000;
            if (auto s = unify(sig, sub, l, &glb_counter)) {
              // (t[p := r]) sigma: the unifier reaches the whole context.
              Term replaced = s->apply(rebuild(r));
              out.emplace_back(replaced, *s);
            }
          }
          for (size_t i = 0; i < sub->args.size(); ++i) {
            auto rebuild_i = [&, i](Term inner) {
              std::vector<Term> args = sub->args;
              args[i] = std::move(inner);
              return rebuild(mk_app_raw(sub->name, sub->sort, std::move(args)));
            };
            walk(sub->args[i], rebuild_i);
          }
        }
      };
  walk(t, [](Term x) { return x; });
}

std::string canon_pair(const Term& a, const Term& b, const Subst& sigma,
                       const std::set<std::string>& w) {
  std::map<std::string, int> ren;
  std::ostringstream os;
  os << canonical(a, ren) << "=" << canonical(b, ren) << "|";
  for (const auto& v : w) {
    os << v << ":";
    if (const Term* t = sigma.lookup(v))
      os << canonical(*t, ren);
    else
      os << "*";
    os << ";";
  }
  return os.str();
}

std::string canon_subst(const Subst& s, const std::set<std::string>& w) {
  std::map<std::string, int> ren;
  std::ostringstream os;
  for (const auto& v : w) {
    os << v << ":";
    if (const Term* t = s.lookup(v))
      os << canonical(*t, ren);
    else
      os << "*";
    os << ";";
  }
  return os.str();
}

}  // namespace

VariantUnifyResult variant_unify(const Term& t1, const Term& t2, const ConvergentTheory& th,
                                 const Signature& sig, long bound) {
  VariantUnifyResult result;
  std::set<std::string> w = vars_of(t1);
  for (const auto& v : vars_of(t2)) w.insert(v);

  struct Node {
    Term a, b;
    Subst sigma;
  };
  std::deque<Node> queue;
  queue.push_back({normalize(t1, th, sig), normalize(t2, th, sig), Subst{}});
  std::set<std::string> seen;
  seen.insert(canon_pair(queue.front().a, queue.front().b, Subst{}, w));
  std::set<std::string> unifier_keys;
  long rename_counter = 0;
  long steps = 0;

  while (!queue.empty()) {
    Node node = std::move(queue.front());
    queue.pop_front();

    long glb_counter = ++rename_counter * 1000;
    if (auto tau = unify(sig, node.a, node.b, &glb_counter)) {
      Subst full = node.sigma.compose(*tau);
      Subst cand;
      for (const auto& v : w)
        if (const Term* t = full.lookup(v)) {
          Term nt = normalize(*t, th, sig);
          if (!(nt->is_var() && nt->name == v)) cand.bind(v, nt);
        }
      std::string key = canon_subst(cand, w);
      if (unifier_keys.insert(key).second) result.unifiers.push_back(cand);
    }

    if (th.empty()) continue;

    std::vector<std::pair<Term, Subst>> steps_a, steps_b;
    narrowings(node.a, th, sig, rename_counter, steps_a);
    narrowings(node.b, th, sig, rename_counter, steps_b);
    auto push = [&](const Term& na, const Term& nb, const Subst& mu) {
      if (++steps > bound) {
        result.bound_exhausted = true;
        return;
      }
      Node next;
      next.a = normalize(na, th, sig);
      next.b = normalize(nb, th, sig);
      next.sigma = node.sigma.compose(mu);
      std::string key = canon_pair(next.a, next.b, next.sigma.restricted(w), w);
      if (seen.insert(key).second) queue.push_back(std::move(next));
    };
    for (const auto& [na, mu] : steps_a) {
      if (result.bound_exhausted) break;
      push(na, mu.apply(node.b), mu);
    }
    for (const auto& [nb, mu] : steps_b) {
      if (result.bound_exhausted) break;
      push(mu.apply(node.a), nb, mu);
    }
    if (result.bound_exhausted) break;
  }
  return result;
}

VariantUnifyResult match_modulo(const Term& pattern, const Term& target,
                                const ConvergentTheory& th, const Signature& sig,
                                long bound) {
  VariantUnifyResult result;
  std::set<std::string> w = vars_of(pattern);
  Term tgt = normalize(target, th, sig);

  struct Node {
    Term pat;
    Subst sigma;
  };
  std::deque<Node> queue;
  queue.push_back({normalize(pattern, th, sig), Subst{}});
  std::set<std::string> seen;
  {
    std::map<std::string, int> ren;
    seen.insert(canonical(queue.front().pat, ren));
  }
  std::set<std::string> unifier_keys;
  long rename_counter = 0;
  long steps = 0;

  while (!queue.empty()) {
    Node node = std::move(queue.front());
    queue.pop_front();

    if (auto tau = match(sig, node.pat, tgt)) {
      Subst full = node.sigma.compose(*tau);
      Subst cand;
      for (const auto& v : w)
        if (const Term* t = full.lookup(v)) {
          Term nt = normalize(*t, th, sig);
          if (!(nt->is_var() && nt->name == v)) cand.bind(v, nt);
        }
      std::string key = canon_subst(cand, w);
      if (unifier_keys.insert(key).second) result.unifiers.push_back(cand);
    }

    if (th.empty()) continue;

    std::vector<std::pair<Term, Subst>> next_steps;
    narrowings(node.pat, th, sig, rename_counter, next_steps);
    for (const auto& [np, mu] : next_steps) {
      if (++steps > bound) {
        result.bound_exhausted = true;
        break;
      }
      Node next;
      next.pat = normalize(np, th, sig);
      next.sigma = node.sigma.compose(mu);
      std::string key;
      {
        std::map<std::string, int> ren;
        key = canonical(next.pat, ren) + "|" + canon_subst(next.sigma.restricted(w), w);
      }
      if (seen.insert(key).second) queue.push_back(std::move(next));
    }
    if (result.bound_exhausted) break;
  }
  return result;
}

Subst fresh_rename(const Signature& sig, const std::string& role, int session,
                   const std::vector<Term>& fresh_vars) {
  Subst s;
  for (const auto& v : fresh_vars) {
    if (!v->is_var() || v->sort != sig.fresh_sort())
      throw Error("fresh_rename: " + to_string(v) + " is not a sort-Fresh variable");
    s.bind(v->name, mk_fresh_name(sig, v->name, role, session));
  }
  return s;
}

}  // namespace strandweaver
