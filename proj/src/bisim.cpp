#include "strandweaver/bisim.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <sstream>
#include <thread>

namespace strandweaver {

PairedStepResult step_paired(const Protocol& p, const PairedState& ps,
                             const TransitionLabel& label) {
  PairedStepResult r;
  auto pa_succ = pa_enabled(p, ps.pa);
  auto fw_succ = fw_enabled(p, ps.fw);
  const PAState* pa_next = nullptr;
  const FWState* fw_next = nullptr;
  for (const auto& [l, s] : pa_succ)
    if (l == label) {
      pa_next = &s;
      break;
    }
  for (const auto& [l, s] : fw_succ)
    if (l == label) {
      fw_next = &s;
      break;
    }
  if (!pa_next && !fw_next) {
    r.status = PairedStepResult::Status::not_enabled;
    r.detail = "label " + label.to_string() + " enabled on neither side";
    return r;
  }
  if (!pa_next || !fw_next) {
    r.status = PairedStepResult::Status::violation;
    r.detail = "label " + label.to_string() + " enabled only in the " +
               (pa_next ? "process-algebra" : "strand") + " semantics";
    return r;
  }
  r.next.pa = *pa_next;
  r.next.fw = *fw_next;
  r.next.history = ps.history;
  r.next.history.push_back(label);
  return r;
}

namespace {

std::set<std::string> translation_of_residual(const Protocol& p, const LabeledProcess& lp) {
  std::set<std::string> out;
  for (const auto& s : translate_process(lp.role, lp.session, lp.body, *p.sig)) {
    std::vector<StrandItem> items;
    items.reserve(s.items.size());
    for (const auto& it : s.items)
      items.push_back(normalize_item(it, *p.theory, *p.sig));
    std::map<std::string, int> ren;
    out.insert(items_canonical(items, ren));
  }
  return out;
}

std::set<std::string> continuations_of_strand(const Protocol& p, const ConstrainedStrand& s) {
  std::set<std::string> out;
  for (const auto& c : strand_continuations(p.strand_spec, *p.sig, *p.theory, s.role,
                                            s.session, s.past)) {
    std::vector<StrandItem> items;
    items.reserve(c.suffix.size());
    for (const auto& it : c.suffix)
      items.push_back(normalize_item(it, *p.theory, *p.sig));
    std::map<std::string, int> ren;
    out.insert(items_canonical(items, ren));
  }
  return out;
}

std::string set_to_string(const std::set<std::string>& s) {
  std::string out = "{";
  bool first = true;
  for (const auto& e : s) {
    if (!first) out += " ; ";
    first = false;
    out += e;
  }
  return out + "}";
}

}  // namespace

DualityReport check_duality(const Protocol& p, const PairedState& ps) {
  DualityReport rep;
  for (const auto& lp : ps.pa.procs.processes()) {
    const ConstrainedStrand* partner = nullptr;
    for (const auto& s : ps.fw.strands)
      if (s.role == lp.role && s.session == lp.session) {
        partner = &s;
        break;
      }
    if (!partner) {
      rep.ok = false;
      rep.mismatches.push_back("process (" + lp.role + "," + std::to_string(lp.session) +
                               ") has no partner strand");
      continue;
    }
    auto lhs = translation_of_residual(p, lp);
    auto rhs = continuations_of_strand(p, *partner);
    if (lhs != rhs) {
      rep.ok = false;
      rep.mismatches.push_back("duality mismatch at (" + lp.role + "," +
                               std::to_string(lp.session) + "): translation " +
                               set_to_string(lhs) + " vs continuations " + set_to_string(rhs));
    }
  }
  for (const auto& s : ps.fw.strands) {
    if (!ps.pa.procs.find(s.role, s.session)) {
      rep.ok = false;
      rep.mismatches.push_back("strand (" + s.role + "," + std::to_string(s.session) +
                               ") has no partner process");
    }
  }
  return rep;
}

namespace {

struct TrialResult {
  bool ok = true;
  long states = 0;
  BisimCounterexample cex;
};

TrialResult run_trial(const Protocol& p, int depth, uint64_t seed, int trial) {
  TrialResult res;
  uint64_t rng = seed ^ (0x9e3779b97f4a7c15ull * static_cast<uint64_t>(trial + 1));
  PairedState ps;
  for (int d = 0; d <= depth; ++d) {
    res.states++;
    auto pa_succ = pa_enabled(p, ps.pa);
    auto fw_succ = fw_enabled(p, ps.fw);
    std::vector<TransitionLabel> pa_labels, fw_labels;
    for (const auto& [l, s] : pa_succ)
      if (pa_labels.empty() || !(pa_labels.back() == l)) pa_labels.push_back(l);
    for (const auto& [l, s] : fw_succ)
      if (fw_labels.empty() || !(fw_labels.back() == l)) fw_labels.push_back(l);

    if (!(pa_labels == fw_labels)) {
      res.ok = false;
      res.cex.history = ps.history;
      std::string diff;
      for (const auto& l : pa_labels)
        if (std::find(fw_labels.begin(), fw_labels.end(), l) == fw_labels.end())
          diff += " pa-only:" + l.to_string();
      for (const auto& l : fw_labels)
        if (std::find(pa_labels.begin(), pa_labels.end(), l) == pa_labels.end())
          diff += " fw-only:" + l.to_string();
      res.cex.reason = "enabled-label sets differ:" + diff;
      return res;
    }
    if (!(ps.pa.ik == ps.fw.ik)) {
      res.ok = false;
      res.cex.history = ps.history;
      res.cex.reason = "intruder knowledge differs: PA " + ps.pa.ik.to_string() + " vs FW " +
                       ps.fw.ik.to_string();
      return res;
    }
    DualityReport dual = check_duality(p, ps);
    if (!dual.ok) {
      res.ok = false;
      res.cex.history = ps.history;
      res.cex.reason = dual.mismatches.front();
      return res;
    }

    if (d == depth || pa_labels.empty()) break;
    size_t pick = rand_below(rng, pa_labels.size());
    const TransitionLabel& chosen = pa_labels[pick];
    const PAState* pa_next = nullptr;
    const FWState* fw_next = nullptr;
    for (const auto& [l, s] : pa_succ)
      if (l == chosen) {
        pa_next = &s;
        break;
      }
    for (const auto& [l, s] : fw_succ)
      if (l == chosen) {
        fw_next = &s;
        break;
      }
    ps.pa = *pa_next;
    ps.fw = *fw_next;
    ps.history.push_back(chosen);
  }
  return res;
}

}  // namespace

BisimVerdict fuzz_bisim(const Protocol& p, int depth, int trials, uint64_t seed, int threads) {
  BisimVerdict verdict;
  verdict.trials_run = trials;
  std::vector<TrialResult> results(trials);
  if (threads <= 1) {
    for (int t = 0; t < trials; ++t) results[t] = run_trial(p, depth, seed, t);
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        int t = next.fetch_add(1);
        if (t >= trials) return;
        results[t] = run_trial(p, depth, seed, t);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (int t = 0; t < trials; ++t) {
    verdict.states_checked += results[t].states;
    if (!results[t].ok && verdict.counterexamples.empty()) {
      verdict.ok = false;
      verdict.counterexamples.push_back(results[t].cex);
    }
  }
  return verdict;
}

}  // namespace strandweaver
