#include "strandweaver/strand.hpp"

#include <functional>
#include <sstream>

namespace strandweaver {

StrandItem StrandItem::send(Term m) {
  StrandItem it;
  it.kind = Kind::send;
  it.msg = std::move(m);
  return it;
}

StrandItem StrandItem::recv(Term m) {
  StrandItem it;
  it.kind = Kind::recv;
  it.msg = std::move(m);
  return it;
}

StrandItem StrandItem::constraint(Constraint c, int num) {
  StrandItem it;
  it.kind = Kind::cstr;
  it.cstr = std::move(c);
  it.num = num;
  return it;
}

StrandItem StrandItem::question(int num) {
  StrandItem it;
  it.kind = Kind::question;
  it.num = num;
  return it;
}

std::string StrandItem::to_string() const {
  switch (kind) {
    case Kind::send: return "+(" + strandweaver::to_string(msg) + ")";
    case Kind::recv: return "-(" + strandweaver::to_string(msg) + ")";
    case Kind::cstr: return "{" + cstr.to_string() + ", " + std::to_string(num) + "}";
    case Kind::question: return "{?, " + std::to_string(num) + "}";
  }
  return "?";
}

std::string StrandItem::canonical(std::map<std::string, int>& renaming) const {
  switch (kind) {
    case Kind::send: return "+" + strandweaver::canonical(msg, renaming);
    case Kind::recv: return "-" + strandweaver::canonical(msg, renaming);
    case Kind::cstr: return "{" + cstr.canonical(renaming) + "," + std::to_string(num) + "}";
    case Kind::question: return "{?," + std::to_string(num) + "}";
  }
  return "?";
}

bool equal(const StrandItem& a, const StrandItem& b) {
  if (a.kind != b.kind || a.num != b.num) return false;
  switch (a.kind) {
    case StrandItem::Kind::send:
    case StrandItem::Kind::recv:
      return equal(a.msg, b.msg);
    case StrandItem::Kind::cstr:
      return equal(a.cstr, b.cstr);
    case StrandItem::Kind::question:
      return true;
  }
  return false;
}

StrandItem apply_subst(const StrandItem& it, const Subst& s) {
  StrandItem out = it;
  switch (it.kind) {
    case StrandItem::Kind::send:
    case StrandItem::Kind::recv:
      out.msg = s.apply(it.msg);
      break;
    case StrandItem::Kind::cstr:
      out.cstr.lhs = s.apply(it.cstr.lhs);
      out.cstr.rhs = s.apply(it.cstr.rhs);
      break;
    case StrandItem::Kind::question:
      break;
  }
  return out;
}

StrandItem normalize_item(const StrandItem& it, const ConvergentTheory& th,
                          const Signature& sig) {
  StrandItem out = it;
  switch (it.kind) {
    case StrandItem::Kind::send:
    case StrandItem::Kind::recv:
      out.msg = normalize(it.msg, th, sig);
      break;
    case StrandItem::Kind::cstr:
      out.cstr.lhs = normalize(it.cstr.lhs, th, sig);
      out.cstr.rhs = normalize(it.cstr.rhs, th, sig);
      break;
    case StrandItem::Kind::question:
      break;
  }
  return out;
}

void collect_vars(const StrandItem& it, std::set<std::string>& out) {
  switch (it.kind) {
    case StrandItem::Kind::send:
    case StrandItem::Kind::recv:
      collect_vars(it.msg, out);
      break;
    case StrandItem::Kind::cstr:
      collect_vars(it.cstr.lhs, out);
      collect_vars(it.cstr.rhs, out);
      break;
    case StrandItem::Kind::question:
      break;
  }
}

std::string items_to_string(const std::vector<StrandItem>& items) {
  std::string out = "[";
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i].to_string();
  }
  return out + "]";
}

std::string items_canonical(const std::vector<StrandItem>& items,
                            std::map<std::string, int>& renaming) {
  std::string out = "[";
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += items[i].canonical(renaming);
  }
  return out + "]";
}

std::vector<const SpecStrand*> StrandSpec::of_role(const std::string& role) const {
  std::vector<const SpecStrand*> out;
  for (const auto& s : strands)
    if (s.role == role) out.push_back(&s);
  return out;
}

std::string StrandSpec::to_string() const {
  std::ostringstream os;
  for (const auto& s : strands)
    os << "(" << s.role << ") " << items_to_string(s.items) << "\n";
  return os.str();
}

namespace {

void collect_fresh_vars(const std::vector<StrandItem>& items, const Signature& sig,
                        std::vector<Term>& out) {
  std::map<std::string, Term> vars;
  for (const auto& it : items) {
    switch (it.kind) {
      case StrandItem::Kind::send:
      case StrandItem::Kind::recv:
        collect_var_terms(it.msg, vars);
        break;
      case StrandItem::Kind::cstr:
        collect_var_terms(it.cstr.lhs, vars);
        collect_var_terms(it.cstr.rhs, vars);
        break;
      case StrandItem::Kind::question:
        break;
    }
  }
  for (const auto& [name, t] : vars)
    if (t->sort == sig.fresh_sort()) out.push_back(t);
}

// toCstrSS*: walks the process, appending to the accumulator and splitting
// at every explicit choice.
void translate_rec(const std::string& role, const std::vector<Action>& acts, size_t idx,
                   std::vector<StrandItem> acc, std::string path,
                   const TranslateOptions& opts, std::vector<SpecStrand>& out) {
  if (idx == acts.size()) {
    SpecStrand s;
    s.role = role;
    s.items = std::move(acc);
    s.branch_path = std::move(path);
    out.push_back(std::move(s));
    return;
  }
  const Action& a = acts[idx];
  switch (a.kind) {
    case Action::Kind::send: {
      acc.push_back(StrandItem::send(a.msg));
      translate_rec(role, acts, idx + 1, std::move(acc), std::move(path), opts, out);
      break;
    }
    case Action::Kind::recv: {
      acc.push_back(StrandItem::recv(a.msg));
      translate_rec(role, acts, idx + 1, std::move(acc), std::move(path), opts, out);
      break;
    }
    case Action::Kind::branch: {
      std::vector<Action> rest(acts.begin() + idx + 1, acts.end());
      {
        std::vector<Action> cont = a.left.actions();
        cont.insert(cont.end(), rest.begin(), rest.end());
        std::vector<StrandItem> acc1 = acc;
        acc1.push_back(StrandItem::constraint(a.cond, 1));
        translate_rec(role, cont, 0, std::move(acc1), path + "1", opts, out);
      }
      if (!opts.drop_else_branch) {
        std::vector<Action> cont = a.right.actions();
        cont.insert(cont.end(), rest.begin(), rest.end());
        std::vector<StrandItem> acc2 = std::move(acc);
        acc2.push_back(StrandItem::constraint(a.cond.negated(), 2));
        translate_rec(role, cont, 0, std::move(acc2), path + "2", opts, out);
      }
      break;
    }
    case Action::Kind::choice: {
      std::vector<Action> rest(acts.begin() + idx + 1, acts.end());
      {
        std::vector<Action> cont = a.left.actions();
        cont.insert(cont.end(), rest.begin(), rest.end());
        std::vector<StrandItem> acc1 = acc;
        acc1.push_back(StrandItem::question(1));
        translate_rec(role, cont, 0, std::move(acc1), path + "1", opts, out);
      }
      {
        std::vector<Action> cont = a.right.actions();
        cont.insert(cont.end(), rest.begin(), rest.end());
        std::vector<StrandItem> acc2 = std::move(acc);
        acc2.push_back(StrandItem::question(2));
        translate_rec(role, cont, 0, std::move(acc2), path + "2", opts, out);
      }
      break;
    }
  }
}

}  // namespace

std::vector<SpecStrand> translate_process(const std::string& role, int /*session*/,
                                          const Process& body, const Signature& sig,
                                          const TranslateOptions& opts) {
  std::vector<SpecStrand> out;
  translate_rec(role, body.actions(), 0, {}, "", opts, out);
  for (auto& s : out) collect_fresh_vars(s.items, sig, s.fresh_vars);
  return out;
}

StrandSpec to_cstr_ss(const ProcessConfiguration& config, const Signature& sig,
                      const TranslateOptions& opts) {
  StrandSpec spec;
  for (const auto& lp : config.processes()) {
    WfResult wf = well_formed(lp.body);
    if (!wf.ok)
      throw Error("to_cstr_ss: process " + lp.role + " is not well-formed: " + wf.diagnostic);
    for (auto& s : translate_process(lp.role, lp.session, lp.body, sig, opts))
      spec.strands.push_back(std::move(s));
  }
  return spec;
}

namespace {

// Itemwise prefix matching modulo the theory, with backtracking across the
// finitely many matches each item admits.
void match_prefix(const std::vector<StrandItem>& spec_items, const std::vector<StrandItem>& past,
                  size_t idx, const Subst& acc, const ConvergentTheory& th, const Signature& sig,
                  std::vector<Subst>& out) {
  if (idx == past.size()) {
    out.push_back(acc);
    return;
  }
  const StrandItem spec_it = apply_subst(spec_items[idx], acc);
  const StrandItem& got = past[idx];
  if (spec_it.kind != got.kind || spec_it.num != got.num) return;
  switch (spec_it.kind) {
    case StrandItem::Kind::question:
      match_prefix(spec_items, past, idx + 1, acc, th, sig, out);
      break;
    case StrandItem::Kind::send:
    case StrandItem::Kind::recv: {
      auto res = match_modulo(spec_it.msg, got.msg, th, sig);
      for (const auto& s : res.unifiers)
        match_prefix(spec_items, past, idx + 1, acc.compose(s), th, sig, out);
      break;
    }
    case StrandItem::Kind::cstr: {
      if (spec_it.cstr.kind != got.cstr.kind) return;
      auto l = match_modulo(spec_it.cstr.lhs, got.cstr.lhs, th, sig);
      for (const auto& sl : l.unifiers) {
        Term rhs = sl.apply(spec_it.cstr.rhs);
        auto r = match_modulo(rhs, got.cstr.rhs, th, sig);
        for (const auto& sr : r.unifiers)
          match_prefix(spec_items, past, idx + 1, acc.compose(sl).compose(sr), th, sig, out);
      }
      break;
    }
  }
}

}  // namespace

std::vector<Continuation> strand_continuations(const StrandSpec& spec, const Signature& sig,
                                               const ConvergentTheory& th,
                                               const std::string& role, int session,
                                               const std::vector<StrandItem>& past) {
  std::vector<Continuation> out;
  std::set<std::string> seen;
  for (const auto& s : spec.strands) {
    if (s.role != role || s.items.size() < past.size()) continue;
    Subst rho = fresh_rename(sig, role, session, s.fresh_vars);
    std::vector<StrandItem> items;
    items.reserve(s.items.size());
    for (const auto& it : s.items) items.push_back(apply_subst(it, rho));

    std::vector<Subst> matches;
    match_prefix(items, past, 0, Subst{}, th, sig, matches);
    for (const auto& m : matches) {
      Continuation c;
      c.spec = &s;
      c.binding = m;
      for (size_t i = past.size(); i < items.size(); ++i)
        c.suffix.push_back(apply_subst(items[i], m));
      std::map<std::string, int> ren;
      std::string key = items_canonical(c.suffix, ren);
      if (seen.insert(key).second) out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace strandweaver
