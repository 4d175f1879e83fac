#include "strandweaver/specfile.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using json = nlohmann::ordered_json;
using namespace strandweaver;

namespace {

constexpr int kFormatVersion = 1;

constexpr int kExitOk = 0;
constexpr int kExitAttackFound = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

int env_threads() {
  const char* v = std::getenv("STRANDWEAVER_THREADS");
  if (!v) return 1;
  int n = std::atoi(v);
  return n < 1 ? 1 : n;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json label_json(const TransitionLabel& l) {
  json j;
  j["role"] = l.role;
  j["session"] = l.session;
  j["step"] = l.step;
  j["action"] = l.to_string();
  j["branch"] = l.branch;
  return j;
}

int cmd_check(const std::string& path, bool as_json) {
  LoadedSpec spec = parse_spec(slurp(path));
  json out;
  out["format_version"] = kFormatVersion;
  out["file"] = path;
  bool all_ok = true;
  json procs = json::array();
  for (const auto& lp : spec.processes.processes()) {
    json pj;
    pj["role"] = lp.role;
    WfResult wf = well_formed(lp.body);
    pj["well_formed"] = wf.ok;
    if (!wf.ok) {
      pj["diagnostic"] = wf.diagnostic;
      json vars = json::array();
      for (const auto& v : wf.offending_vars) vars.push_back(v);
      pj["offending_variables"] = vars;
      all_ok = false;
    }
    auto kit = spec.classification.kinds.find(lp.role);
    if (kit != spec.classification.kinds.end()) {
      json kinds;
      for (const auto& [v, k] : kit->second) kinds[v] = to_string(k);
      pj["variables"] = kinds;
    }
    procs.push_back(pj);
  }
  out["processes"] = procs;

  // Choice variables need domain coverage for ground exploration.
  json missing = json::array();
  for (const auto& [role, kinds] : spec.classification.kinds) {
    for (const auto& [v, k] : kinds) {
      if (k != VarKind::choice) continue;
      SortId sort = -1;
      for (const auto& lp : spec.processes.processes()) {
        if (lp.role != role) continue;
        std::map<std::string, Term> vt;
        std::function<void(const Process&)> walk = [&](const Process& p) {
          for (const Action& a : p.actions()) {
            switch (a.kind) {
              case Action::Kind::send:
              case Action::Kind::recv:
                collect_var_terms(a.msg, vt);
                break;
              default:
                if (a.kind == Action::Kind::branch) {
                  collect_var_terms(a.cond.lhs, vt);
                  collect_var_terms(a.cond.rhs, vt);
                }
                walk(a.left);
                walk(a.right);
            }
          }
        };
        walk(lp.body);
        auto tit = vt.find(v);
        if (tit != vt.end()) sort = tit->second->sort;
      }
      if (sort < 0) continue;
      bool covered = false;
      for (const auto& [s, vals] : spec.domain.values)
        if (spec.sig.leq(s, sort) && !vals.empty()) covered = true;
      if (!covered) {
        missing.push_back(role + "." + v + " : " + spec.sig.sort_name(sort));
        all_ok = false;
      }
    }
  }
  if (!missing.empty()) out["missing_choice_domains"] = missing;
  out["ok"] = all_ok;

  if (as_json)
    std::cout << out.dump(2) << "\n";
  else {
    for (const auto& pj : out["processes"]) {
      std::cout << pj["role"].get<std::string>() << ": "
                << (pj["well_formed"].get<bool>() ? "well-formed" : "NOT well-formed");
      if (pj.contains("diagnostic")) std::cout << " -- " << pj["diagnostic"].get<std::string>();
      std::cout << "\n";
    }
    for (const auto& m : missing)
      std::cout << "missing choice domain: " << m.get<std::string>() << "\n";
  }
  return all_ok ? kExitOk : kExitUsage;
}

int cmd_translate(const std::string& path, bool as_json) {
  LoadedSpec spec = parse_spec(slurp(path));
  if (as_json) {
    json out;
    out["format_version"] = kFormatVersion;
    json strands = json::array();
    for (const auto& s : spec.strand_spec.strands) {
      json sj;
      sj["role"] = s.role;
      json items = json::array();
      for (const auto& it : s.items) items.push_back(it.to_string());
      sj["items"] = items;
      strands.push_back(sj);
    }
    out["strands"] = strands;
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << print_translated(spec);
  }
  return kExitOk;
}

int cmd_simulate(const std::string& path, const std::string& semantics, int depth,
                 uint64_t seed, const std::string& strategy, int samples, bool as_json) {
  LoadedSpec spec = parse_spec(slurp(path));
  Protocol p = make_protocol(spec);
  Semantics sem = semantics == "fw" ? Semantics::fw : Semantics::pa;
  if (sem == Semantics::pa && !spec.pa_runnable) {
    std::cerr << "error: " << spec.pa_block_reason << "\n";
    return kExitUsage;
  }
  Strategy strat = strategy == "random" ? Strategy::random_walk : Strategy::bfs;
  ExploreResult res = explore(p, sem, depth, strat, seed, samples);
  if (as_json) {
    json out;
    out["format_version"] = kFormatVersion;
    out["semantics"] = semantics;
    out["depth"] = depth;
    out["strategy"] = strategy;
    out["seed"] = seed;
    out["states_expanded"] = res.states_expanded;
    json traces = json::array();
    for (const auto& t : res.traces) {
      json tj;
      json labels = json::array();
      for (const auto& l : t.labels) labels.push_back(label_json(l));
      tj["labels"] = labels;
      json ik = json::array();
      for (const auto& f : t.final_ik.facts()) ik.push_back(to_string(f));
      tj["final_ik"] = ik;
      traces.push_back(tj);
    }
    out["traces"] = traces;
    std::cout << out.dump(2) << "\n";
  } else {
    for (const auto& t : res.traces) {
      for (const auto& l : t.labels) std::cout << l.to_string() << " ";
      std::cout << "| IK " << t.final_ik.to_string() << "\n";
    }
    std::cout << "traces: " << res.traces.size() << " states: " << res.states_expanded
              << "\n";
  }
  return kExitOk;
}

int cmd_bisim(const std::string& path, int depth, int trials, uint64_t seed, bool as_json) {
  LoadedSpec spec = parse_spec(slurp(path));
  if (!spec.pa_runnable) {
    std::cerr << "error: " << spec.pa_block_reason << "\n";
    return kExitUsage;
  }
  Protocol p = make_protocol(spec);
  BisimVerdict v = fuzz_bisim(p, depth, trials, seed, env_threads());
  json out;
  out["format_version"] = kFormatVersion;
  out["verdict"] = v.ok ? "pass" : "counterexample";
  out["trials"] = v.trials_run;
  out["depth"] = depth;
  out["seed"] = seed;
  out["states_checked"] = v.states_checked;
  if (!v.ok) {
    json cex;
    json hist = json::array();
    for (const auto& l : v.counterexamples.front().history) hist.push_back(l.to_string());
    cex["history"] = hist;
    cex["reason"] = v.counterexamples.front().reason;
    out["counterexample"] = cex;
  }
  if (as_json)
    std::cout << out.dump(2) << "\n";
  else
    std::cout << (v.ok ? "bisimulation: pass" : "bisimulation: COUNTEREXAMPLE\n" +
                                                    v.counterexamples.front().reason)
              << " (trials " << v.trials_run << ", states " << v.states_checked << ")\n";
  return v.ok ? kExitOk : kExitAttackFound;
}

int cmd_analyze(const std::string& path, int attack_id, int depth, bool all, bool as_json) {
  LoadedSpec spec = parse_spec(slurp(path));
  Protocol p = make_protocol(spec);
  BackwardsEngine engine(p);
  bool any_found = false;
  json out;
  out["format_version"] = kFormatVersion;
  json results = json::array();
  for (const auto& a : spec.attacks) {
    if (attack_id != 0 && a.id != attack_id) continue;
    SearchResult res = engine.search(a, depth, all);
    json rj;
    rj["attack"] = a.id;
    if (!a.comment.empty()) rj["comment"] = a.comment;
    switch (res.verdict) {
      case SearchVerdict::found: rj["verdict"] = "Found"; break;
      case SearchVerdict::not_found_within_depth: rj["verdict"] = "NotFoundWithinDepth"; break;
      case SearchVerdict::exhausted_no_attack: rj["verdict"] = "ExhaustedNoAttack"; break;
    }
    rj["states_explored"] = res.states_explored;
    rj["pruned_by_never"] = res.states_pruned_never;
    if (res.verdict == SearchVerdict::found) {
      any_found = true;
      json sols = json::array();
      for (const auto& sol : res.solutions) {
        json sj;
        json steps = json::array();
        for (const auto& line : sol.path) steps.push_back(line);
        sj["path"] = steps;
        sj["binding"] = sol.attack_binding.to_string();
        if (!sol.schedule.empty()) {
          json sched = json::array();
          for (const auto& l : sol.schedule) sched.push_back(l.to_string());
          sj["forwards_schedule"] = sched;
        }
        sols.push_back(sj);
      }
      rj["solutions"] = sols;
    }
    results.push_back(rj);
  }
  out["results"] = results;
  if (as_json)
    std::cout << out.dump(2) << "\n";
  else
    for (const auto& rj : results)
      std::cout << "attack " << rj["attack"].get<int>() << ": "
                << rj["verdict"].get<std::string>() << " (states "
                << rj["states_explored"].get<long>() << ")\n";
  return any_found ? kExitAttackFound : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"strandweaver: protocol analysis for strand spaces with choice"};
  app.require_subcommand(1);

  std::string file;
  bool as_json = false;

  auto* check = app.add_subcommand("check", "well-formedness and classification diagnostics");
  check->add_option("file", file)->required();
  check->add_flag("--json", as_json);

  auto* translate = app.add_subcommand("translate", "dump the constrained strand translation");
  translate->add_option("file", file)->required();
  translate->add_flag("--json", as_json);

  std::string semantics = "pa";
  int depth = 5;
  uint64_t seed = 1;
  std::string strategy = "bfs";
  int samples = 32;
  auto* simulate = app.add_subcommand("simulate", "bounded forwards exploration");
  simulate->add_option("file", file)->required();
  simulate->add_option("--semantics", semantics)->check(CLI::IsMember({"pa", "fw"}));
  simulate->add_option("--depth", depth);
  simulate->add_option("--seed", seed);
  simulate->add_option("--strategy", strategy)->check(CLI::IsMember({"bfs", "random"}));
  simulate->add_option("--samples", samples);
  simulate->add_flag("--json", as_json);

  int trials = 100;
  auto* bisim = app.add_subcommand("bisim", "paired-execution bisimulation fuzzing");
  bisim->add_option("file", file)->required();
  bisim->add_option("--depth", depth);
  bisim->add_option("--trials", trials);
  bisim->add_option("--seed", seed);
  bisim->add_flag("--json", as_json);

  int attack_id = 0;
  bool all = false;
  auto* analyze = app.add_subcommand("analyze", "backwards reachability per attack pattern");
  analyze->add_option("file", file)->required();
  analyze->add_option("--attack", attack_id);
  analyze->add_option("--depth", depth);
  analyze->add_flag("--all", all, "collect every solution within depth");
  analyze->add_flag("--json", as_json);

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return cmd_check(file, as_json);
    if (translate->parsed()) return cmd_translate(file, as_json);
    if (simulate->parsed())
      return cmd_simulate(file, semantics, depth, seed, strategy, samples, as_json);
    if (bisim->parsed()) return cmd_bisim(file, depth, trials, seed, as_json);
    if (analyze->parsed()) return cmd_analyze(file, attack_id, depth, all, as_json);
  } catch (const SyntaxError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ResolutionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PatternError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
