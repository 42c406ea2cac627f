// Command-line front end for the probabilistic session workbench.
//
//   check     type-check every system declaration in a protocol file
//   project   print one participant's view of a global type
//   simplify  print a global type's normal form
//   step      list the enabled reductions of a process
//   graph     summarize the reduction graph, optionally exporting DOT
//   prob      exact probability of a trace predicate
//   mc        Monte Carlo estimate of a trace predicate
//   meta      run the soundness harnesses over a file's systems
//
// Exit codes: 0 success, 1 failed check or query, 2 unreadable or unparsable
// input. Human-readable report on standard output; `--format records` swaps
// it for one JSON object per line.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pmps/metatheory.hpp"
#include "pmps/parser.hpp"
#include "pmps/printer.hpp"
#include "pmps/projection.hpp"
#include "pmps/query.hpp"
#include "pmps/semantics.hpp"
#include "pmps/typing.hpp"

namespace {

using nlohmann::json;

struct Report {
  bool records = false;

  void line(const std::string& s) {
    if (!records) std::cout << s << "\n";
  }
  void record(const json& j) {
    if (records) std::cout << j.dump() << "\n";
  }
};

size_t env_depth_default() {
  if (const char* s = std::getenv("PMPS_DEPTH")) {
    char* end = nullptr;
    long v = std::strtol(s, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<size_t>(v);
  }
  return 20;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dec(const pmps::Rational& r) {
  std::ostringstream ss;
  ss << pmps::to_double(r);
  return ss.str();
}

// The first system declaration is the default subject of step/graph/prob/mc.
const pmps::ProcPtr* pick_target(const pmps::SourceFile& f, const std::string& name,
                                 std::string& label, std::string& err) {
  if (!name.empty()) {
    if (const auto* p = f.find_system(name)) return label = name, p;
    if (const auto* p = f.find_process(name)) return label = name, p;
    err = "no process or system named '" + name + "'";
    return nullptr;
  }
  if (!f.systems.empty()) {
    label = f.systems.front().first;
    return &f.systems.front().second;
  }
  err = "the file declares no system; pass --process";
  return nullptr;
}

const pmps::GlobalPtr* pick_global(const pmps::SourceFile& f, const std::string& name,
                                   std::string& label, std::string& err) {
  if (!name.empty()) {
    if (const auto* g = f.find_global(name)) return label = name, g;
    err = "no global type named '" + name + "'";
    return nullptr;
  }
  if (!f.globals.empty()) {
    label = f.globals.front().first;
    return &f.globals.front().second;
  }
  err = "the file declares no global type";
  return nullptr;
}

std::string action_text(const pmps::ActionInfo& a) {
  switch (a.rule) {
    case pmps::Rule::Com:
      return a.chan + "!<" + a.text + ">";
    case pmps::Rule::Label:
      return a.chan + " <+ " + a.text;
    case pmps::Rule::Deleg:
      return a.chan + "!!";
    case pmps::Rule::Link:
      return "link " + a.chan;
    case pmps::Rule::ECom:
    case pmps::Rule::ELabel:
      return a.chan + " branch probabilities sum to " + a.text;
    default:
      return "";
  }
}

std::string actions_text(const pmps::StepLabel& l) {
  std::string out;
  for (const auto& a : l.actions) {
    std::string t = action_text(a);
    if (t.empty()) continue;
    if (!out.empty()) out += ", ";
    out += t;
  }
  return out;
}

int run_check(const pmps::SourceFile& file, Report& rep) {
  bool all_ok = true;
  for (const auto& [name, g] : file.globals) {
    auto wf = pmps::well_formed(g);
    if (wf.ok) {
      rep.line("global " + name + ": well-formed");
    } else {
      all_ok = false;
      rep.line("global " + name + ": FAIL: " + wf.errors.front());
    }
    json r{{"cmd", "check"}, {"kind", "global"}, {"name", name}, {"ok", wf.ok}};
    if (!wf.ok) r["errors"] = wf.errors;
    rep.record(r);
  }
  pmps::SortEnv gamma;
  gamma.names = file.name_env();
  for (const auto& [name, p] : file.systems) {
    json r{{"cmd", "check"}, {"kind", "system"}, {"name", name}};
    try {
      pmps::TypeCheck tc = pmps::typecheck(gamma, p);
      size_t open = pmps::normalize(tc.env).entries.size();
      std::string suffix = open == 0 ? "no open sessions"
                                     : std::to_string(open) + " open session" +
                                           (open == 1 ? "" : "s");
      rep.line("system " + name + ": ok (" + suffix + ")");
      for (const auto& w : tc.warnings) rep.line("  warning: " + w);
      r["ok"] = true;
      r["open_sessions"] = open;
      r["warnings"] = tc.warnings;
    } catch (const pmps::TypeError& e) {
      all_ok = false;
      rep.line("system " + name + ": FAIL: " + std::string(e.what()));
      r["ok"] = false;
      r["error"] = e.what();
    }
    rep.record(r);
  }
  return all_ok ? 0 : 1;
}

int run_project(const pmps::SourceFile& file, const std::string& gname,
                const std::string& role_arg, Report& rep) {
  std::string label, err;
  const auto* g = pick_global(file, gname, label, err);
  if (!g) {
    std::cerr << "pmps: " << err << "\n";
    return 2;
  }
  int role = 0;
  if (auto r = file.roles.find(role_arg)) {
    role = *r;
  } else {
    try {
      role = std::stoi(role_arg);
    } catch (...) {
      std::cerr << "pmps: '" << role_arg << "' is neither a role number nor a declared role\n";
      return 2;
    }
  }
  auto proj = pmps::project(*g, role);
  json r{{"cmd", "project"}, {"global", label}, {"role", role}, {"ok", proj.ok()}};
  if (!proj.ok()) {
    rep.line("projection of " + label + " onto " + file.roles.show(role) +
             " is undefined: " + proj.error);
    r["error"] = proj.error;
    rep.record(r);
    return 1;
  }
  rep.line(pmps::print_local(proj.type, &file.roles));
  r["type"] = pmps::print_local(proj.type);
  rep.record(r);
  return 0;
}

int run_simplify(const pmps::SourceFile& file, const std::string& gname, Report& rep) {
  std::string label, err;
  const auto* g = pick_global(file, gname, label, err);
  if (!g) {
    std::cerr << "pmps: " << err << "\n";
    return 2;
  }
  pmps::GlobalPtr s = pmps::simplify_global(*g);
  rep.line(pmps::print_global(s, &file.roles));
  rep.record(json{{"cmd", "simplify"}, {"global", label}, {"type", pmps::print_global(s)}});
  return 0;
}

int run_step(const pmps::SourceFile& file, const std::string& pname, Report& rep) {
  std::string label, err;
  const auto* p = pick_target(file, pname, label, err);
  if (!p) {
    std::cerr << "pmps: " << err << "\n";
    return 2;
  }
  auto dists = pmps::step_distributions(pmps::canonicalize(*p));
  if (dists.empty()) rep.line(label + ": no enabled steps");
  for (size_t d = 0; d < dists.size(); ++d) {
    for (const auto& st : dists[d].steps) {
      std::string acts = actions_text(st.label);
      rep.line("[" + std::to_string(d) + "] (" + pmps::to_string(st.label.rule) + ") " +
               pmps::to_fraction_string(st.label.probability) +
               (acts.empty() ? "" : "  " + acts));
      rep.record(json{{"cmd", "step"},
                      {"process", label},
                      {"family", d},
                      {"rule", pmps::to_string(st.label.rule)},
                      {"probability", pmps::to_fraction_string(st.label.probability)},
                      {"decimal", pmps::to_double(st.label.probability)},
                      {"action", acts},
                      {"target", pmps::print_process(st.target)}});
    }
  }
  return 0;
}

int run_graph(const pmps::SourceFile& file, const std::string& pname, size_t depth,
              const std::string& dot_path, bool full_labels, Report& rep) {
  std::string label, err;
  const auto* p = pick_target(file, pname, label, err);
  if (!p) {
    std::cerr << "pmps: " << err << "\n";
    return 2;
  }
  pmps::ReductionGraph g = pmps::build_graph(*p, depth);
  size_t errors = 0, nondet = 0;
  for (const auto& e : g.edges)
    if (pmps::is_error_rule(e.label.rule)) ++errors;
  for (const auto& n : g.nodes)
    if (n.families > 1) ++nondet;
  rep.line(label + ": " + std::to_string(g.nodes.size()) + " nodes, " +
           std::to_string(g.edges.size()) + " edges, depth bound " + std::to_string(depth) +
           ", " + std::to_string(errors) + " error edges, " + std::to_string(nondet) +
           " nondeterministic nodes");
  json r{{"cmd", "graph"},       {"process", label},
         {"nodes", g.nodes.size()}, {"edges", g.edges.size()},
         {"depth", depth},       {"error_edges", errors},
         {"nondeterministic_nodes", nondet}};
  if (!dot_path.empty()) {
    std::ofstream out(dot_path, std::ios::binary);
    if (!out) {
      std::cerr << "pmps: cannot write " << dot_path << "\n";
      return 2;
    }
    out << pmps::to_dot(g, full_labels);
    rep.line("wrote " + dot_path);
    r["dot"] = dot_path;
  }
  rep.record(r);
  return 0;
}

int run_prob(const pmps::SourceFile& file, const std::string& pname, size_t depth,
             const std::string& query, Report& rep) {
  std::string label, err;
  const auto* p = pick_target(file, pname, label, err);
  if (!p) {
    std::cerr << "pmps: " << err << "\n";
    return 2;
  }
  pmps::TracePredicate pred = pmps::parse_predicate(query);
  pmps::ReductionGraph g = pmps::build_graph(*p, depth);
  pmps::QueryResult res = pmps::event_probability(g, pred);
  if (res.is_exact) {
    rep.line(pmps::to_fraction_string(res.lo) + " (" + dec(res.lo) + ")");
  } else {
    rep.line("min " + pmps::to_fraction_string(res.lo) + " (" + dec(res.lo) + "), max " +
             pmps::to_fraction_string(res.hi) + " (" + dec(res.hi) + ")");
  }
  rep.record(json{{"cmd", "prob"},
                  {"process", label},
                  {"query", query},
                  {"depth", depth},
                  {"exact", res.is_exact},
                  {"lo", pmps::to_fraction_string(res.lo)},
                  {"hi", pmps::to_fraction_string(res.hi)},
                  {"lo_decimal", pmps::to_double(res.lo)},
                  {"hi_decimal", pmps::to_double(res.hi)},
                  {"paths", res.paths_counted},
                  {"nondeterministic_nodes", res.nondeterministic_nodes}});
  return 0;
}

int run_mc(const pmps::SourceFile& file, const std::string& pname, const std::string& query,
           size_t runs, uint64_t seed, size_t budget, Report& rep) {
  std::string label, err;
  const auto* p = pick_target(file, pname, label, err);
  if (!p) {
    std::cerr << "pmps: " << err << "\n";
    return 2;
  }
  pmps::TracePredicate pred = pmps::parse_predicate(query);
  pmps::MonteCarlo mc = pmps::monte_carlo(*p, pred, runs, seed, budget);
  std::ostringstream ss;
  ss << mc.estimate << " +/- " << mc.stderr_ << " (" << mc.runs << " runs, " << mc.divergent
     << " divergent, seed " << seed << ")";
  rep.line(ss.str());
  rep.record(json{{"cmd", "mc"},
                  {"process", label},
                  {"query", query},
                  {"estimate", mc.estimate},
                  {"stderr", mc.stderr_},
                  {"runs", mc.runs},
                  {"divergent", mc.divergent},
                  {"seed", seed}});
  return 0;
}

int run_meta(const pmps::SourceFile& file, const std::string& pname, size_t depth, Report& rep) {
  pmps::SortEnv gamma;
  gamma.names = file.name_env();
  std::vector<std::pair<std::string, pmps::ProcPtr>> subjects;
  if (!pname.empty()) {
    std::string label, err;
    const auto* p = pick_target(file, pname, label, err);
    if (!p) {
      std::cerr << "pmps: " << err << "\n";
      return 2;
    }
    subjects.emplace_back(label, *p);
  } else {
    subjects = file.systems;
    if (subjects.empty()) {
      std::cerr << "pmps: the file declares no system; pass --process\n";
      return 2;
    }
  }
  bool all_ok = true;
  auto emit = [&](const std::string& sys, const std::string& prop, const pmps::MetaReport& m) {
    std::ostringstream ss;
    ss << sys << ": " << prop << ": " << (m.ok() ? "ok" : "FAIL") << " (" << m.checked
       << " checks";
    if (m.nodes) ss << ", " << m.nodes << " nodes, " << m.edges << " edges";
    ss << ")";
    if (!m.ok()) ss << "\n  first violation: " << m.first;
    rep.line(ss.str());
    json r{{"cmd", "meta"},     {"system", sys},       {"property", prop},
           {"ok", m.ok()},      {"checked", m.checked}, {"violations", m.violations},
           {"nodes", m.nodes},  {"edges", m.edges}};
    if (!m.ok()) r["first"] = m.first;
    rep.record(r);
    all_ok = all_ok && m.ok();
  };
  for (const auto& [name, p] : subjects) {
    emit(name, "rewrites preserve typing", pmps::check_equiv_preservation(gamma, p));
    emit(name, "reduction preserves typing", pmps::check_subject_reduction(gamma, p, depth));
    emit(name, "error freedom", pmps::check_error_freedom(p, depth));
    emit(name, "substitution and weakening", pmps::check_substitution_weakening(gamma, p));
  }
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"workbench for probabilistic multiparty session protocols"};
  app.require_subcommand(1);
  std::string format = "human";
  app.add_option("--format", format, "output format")
      ->check(CLI::IsMember({"human", "records"}));

  std::string path, pname, gname, role_arg, query, dot_path;
  size_t depth = env_depth_default();
  size_t runs = 10000, budget = 4096;
  uint64_t seed = 1;
  bool full_labels = false;

  auto add_file = [&](CLI::App* sub) {
    sub->add_option("file", path, "protocol file")->required();
  };
  auto add_process = [&](CLI::App* sub) {
    sub->add_option("--process", pname, "process or system declaration to use");
  };
  auto add_depth = [&](CLI::App* sub) {
    sub->add_option("--depth", depth, "exploration depth bound")->capture_default_str();
  };

  CLI::App* c_check = app.add_subcommand("check", "type-check the file's systems");
  add_file(c_check);

  CLI::App* c_project = app.add_subcommand("project", "project a global type onto a role");
  add_file(c_project);
  c_project->add_option("--role", role_arg, "participant number or declared role name")
      ->required();
  c_project->add_option("--global", gname, "global type declaration to use");

  CLI::App* c_simplify = app.add_subcommand("simplify", "print a global type's normal form");
  add_file(c_simplify);
  c_simplify->add_option("--global", gname, "global type declaration to use");

  CLI::App* c_step = app.add_subcommand("step", "list enabled reductions");
  add_file(c_step);
  add_process(c_step);

  CLI::App* c_graph = app.add_subcommand("graph", "summarize the reduction graph");
  add_file(c_graph);
  add_process(c_graph);
  add_depth(c_graph);
  c_graph->add_option("--dot", dot_path, "write the graph in DOT format to this path");
  c_graph->add_flag("--labels", full_labels, "label DOT nodes with full process text");

  CLI::App* c_prob = app.add_subcommand("prob", "exact probability of a trace predicate");
  add_file(c_prob);
  add_process(c_prob);
  add_depth(c_prob);
  c_prob->add_option("--query", query, "trace predicate")->required();

  CLI::App* c_mc = app.add_subcommand("mc", "Monte Carlo estimate of a trace predicate");
  add_file(c_mc);
  add_process(c_mc);
  c_mc->add_option("--query", query, "trace predicate")->required();
  c_mc->add_option("--runs", runs, "number of simulation runs")->capture_default_str();
  c_mc->add_option("--seed", seed, "random seed")->capture_default_str();
  c_mc->add_option("--budget", budget, "step budget per run")->capture_default_str();

  CLI::App* c_meta = app.add_subcommand("meta", "run the soundness harnesses");
  add_file(c_meta);
  add_process(c_meta);
  add_depth(c_meta);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  Report rep{format == "records"};
  try {
    pmps::SourceFile file = pmps::parse_file(slurp(path));
    if (c_check->parsed()) return run_check(file, rep);
    if (c_project->parsed()) return run_project(file, gname, role_arg, rep);
    if (c_simplify->parsed()) return run_simplify(file, gname, rep);
    if (c_step->parsed()) return run_step(file, pname, rep);
    if (c_graph->parsed()) return run_graph(file, pname, depth, dot_path, full_labels, rep);
    if (c_prob->parsed()) return run_prob(file, pname, depth, query, rep);
    if (c_mc->parsed()) return run_mc(file, pname, query, runs, seed, budget, rep);
    if (c_meta->parsed()) return run_meta(file, pname, depth, rep);
  } catch (const pmps::ParseError& e) {
    std::cerr << "pmps: parse error: " << e.what() << "\n";
    return 2;
  } catch (const pmps::QueryError& e) {
    std::cerr << "pmps: " << e.what() << "\n";
    return 1;
  } catch (const pmps::TypeError& e) {
    std::cerr << "pmps: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "pmps: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
