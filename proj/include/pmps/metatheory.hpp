#ifndef PMPS_METATHEORY_HPP
#define PMPS_METATHEORY_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pmps/ast.hpp"
#include "pmps/canonical.hpp"
#include "pmps/interval.hpp"
#include "pmps/printer.hpp"
#include "pmps/semantics.hpp"
#include "pmps/typing.hpp"

namespace pmps {

// Outcome of one machine-checked property run. `checked` counts discharged
// obligations; `first` describes the earliest violation, if any.
struct MetaReport {
  size_t nodes = 0;
  size_t edges = 0;
  size_t checked = 0;
  size_t violations = 0;
  std::string first;

  bool ok() const { return violations == 0; }

  void flag(const std::string& why) {
    if (violations == 0) first = why;
    ++violations;
  }
};

namespace detail {

// Whether some reduction sequence of at most `steps` steps takes `from` to an
// environment with key `target`, with the edge probability inside the product
// of the traversed intervals. Multi-step sequences cover transitions that
// resolve several simultaneous synchronizations at once.
inline bool env_reaches(const SessionEnv& from, const std::string& target, const Rational& p,
                        size_t steps) {
  if (steps == 0) return false;
  std::function<bool(const SessionEnv&, const ProbInterval&, size_t)> dfs =
      [&](const SessionEnv& env, const ProbInterval& acc, size_t left) -> bool {
    for (auto& [delta, next] : type_reduce(env)) {
      ProbInterval prod = interval_mul(acc, delta);
      SessionEnv nn = normalize(next);
      if (env_key(nn) == target && prod.contains(p)) return true;
      if (left > 1 && dfs(nn, prod, left - 1)) return true;
    }
    return false;
  };
  return dfs(from, ProbInterval::point(Rational(1)), steps);
}

}  // namespace detail

// Subject reduction over every state reachable within `depth`: each state
// must stay typable, and each non-error transition must either leave the
// session environment unchanged or be matched by reduction of the environment
// itself, with the transition probability inside the admitted interval.
inline MetaReport check_subject_reduction(const SortEnv& gamma, const ProcPtr& p,
                                          size_t depth = 24) {
  MetaReport rep;
  ReductionGraph g = build_graph(p, depth);
  rep.nodes = g.nodes.size();

  std::vector<std::optional<SessionEnv>> envs(g.nodes.size());
  std::vector<std::string> keys(g.nodes.size());
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].is_error) continue;
    try {
      envs[i] = normalize(typecheck(gamma, g.nodes[i].proc).env);
      keys[i] = env_key(*envs[i]);
      ++rep.checked;
    } catch (const TypeError& e) {
      rep.flag("reachable state is untypable (" + std::string(e.what()) +
               "): " + print_process(g.nodes[i].proc));
    }
  }

  for (const GraphEdge& e : g.edges) {
    if (e.label.rule == Rule::ECom || e.label.rule == Rule::ELabel) continue;
    if (!envs[e.from] || !envs[e.to]) continue;
    ++rep.edges;
    if (keys[e.from] == keys[e.to]) {
      ++rep.checked;
      continue;
    }
    size_t comms = 0;
    for (const auto& a : e.label.actions)
      if (a.rule == Rule::Com || a.rule == Rule::Label || a.rule == Rule::Deleg) ++comms;
    if (detail::env_reaches(*envs[e.from], keys[e.to], e.label.probability, comms)) {
      ++rep.checked;
    } else {
      rep.flag("no typed reduction matches the step of probability " +
               to_fraction_string(e.label.probability) + " from " +
               print_process(g.nodes[e.from].proc) + " to " + print_process(g.nodes[e.to].proc));
    }
  }
  return rep;
}

// A well-typed system must never reach an error transition or the error state.
inline MetaReport check_error_freedom(const ProcPtr& p, size_t depth = 24) {
  MetaReport rep;
  ReductionGraph g = build_graph(p, depth);
  rep.nodes = g.nodes.size();
  rep.edges = g.edges.size();
  for (const GraphEdge& e : g.edges) {
    ++rep.checked;
    if (e.label.rule == Rule::ECom || e.label.rule == Rule::ELabel)
      rep.flag("error transition out of " + print_process(g.nodes[e.from].proc));
  }
  for (const GraphNode& n : g.nodes) {
    ++rep.checked;
    if (n.is_error) rep.flag("the error state is reachable");
  }
  return rep;
}

// Every one-equation structural rewrite, in either direction, must leave the
// synthesized session environment literally identical.
inline MetaReport check_equiv_preservation(const SortEnv& gamma, const ProcPtr& p) {
  MetaReport rep;
  std::string base = env_key(typecheck(gamma, p).env);
  for (const ProcPtr& r : equiv_rewrites(p)) {
    ++rep.checked;
    try {
      if (env_key(typecheck(gamma, r).env) != base)
        rep.flag("rewrite changed the typing: " + print_process(r));
    } catch (const TypeError& e) {
      rep.flag("rewrite became untypable (" + std::string(e.what()) +
               "): " + print_process(r));
    }
  }
  return rep;
}

namespace detail {

inline Value sample_value(Sort s) {
  switch (s) {
    case Sort::Bool: return Value{true};
    case Sort::Nat: return Value{Int(4)};
    case Sort::Int: return Value{Int(7)};
    case Sort::String: return Value{std::string("wv")};
  }
  return Value{false};
}

// Replaces every receive binder with a literal of its declared sort inside
// the branch continuation, leaving the binder in place. Typability must
// survive any such well-sorted instantiation.
inline ProcPtr saturate_receives(const ProcPtr& p) {
  return std::visit(
      overloaded{
          [&](const PRecv& n) -> ProcPtr {
            PRecv out = n;
            for (auto& b : out.branches) {
              ValueSubst sub;
              for (const auto& [x, s] : b.binders) sub[x] = sample_value(s);
              b.cont = saturate_receives(subst_values(b.cont, sub));
            }
            return mk(out);
          },
          [&](const PSend& n) -> ProcPtr {
            PSend out = n;
            for (auto& b : out.branches) b.cont = saturate_receives(b.cont);
            return mk(out);
          },
          [&](const PSelect& n) -> ProcPtr {
            PSelect out = n;
            for (auto& b : out.branches) b.cont = saturate_receives(b.cont);
            return mk(out);
          },
          [&](const PBranch& n) -> ProcPtr {
            PBranch out = n;
            for (auto& a : out.arms) a.cont = saturate_receives(a.cont);
            return mk(out);
          },
          [&](const PDeleg& n) -> ProcPtr {
            PDeleg out = n;
            out.cont = saturate_receives(out.cont);
            return mk(out);
          },
          [&](const PSessRecv& n) -> ProcPtr {
            PSessRecv out = n;
            out.cont = saturate_receives(out.cont);
            return mk(out);
          },
          [&](const PIf& n) -> ProcPtr {
            PIf out = n;
            out.then_p = saturate_receives(out.then_p);
            out.else_p = saturate_receives(out.else_p);
            return mk(out);
          },
          [&](const PPar& n) -> ProcPtr {
            return mk_par(saturate_receives(n.left), saturate_receives(n.right));
          },
          [&](const PHide& n) -> ProcPtr {
            PHide out = n;
            out.body = saturate_receives(out.body);
            return mk(out);
          },
          [&](const PRec& n) -> ProcPtr {
            PRec out = n;
            out.body = saturate_receives(out.body);
            return mk(out);
          },
          [&](const PRequest& n) -> ProcPtr {
            PRequest out = n;
            out.body = saturate_receives(out.body);
            return mk(out);
          },
          [&](const PAccept& n) -> ProcPtr {
            PAccept out = n;
            out.body = saturate_receives(out.body);
            return mk(out);
          },
          [&](const PVar&) -> ProcPtr { return p; },
          [&](const PInact&) -> ProcPtr { return p; },
          [&](const PError&) -> ProcPtr { return p; },
      },
      p->node);
}

}  // namespace detail

// Substitution: literals of the declared sorts can replace receive binders
// without changing the typing. Weakening: declaring an extra finished session
// that the process never touches cannot break the check against it.
inline MetaReport check_substitution_weakening(const SortEnv& gamma, const ProcPtr& p) {
  MetaReport rep;

  std::string base = env_key(typecheck(gamma, p).env);
  ++rep.checked;
  try {
    if (env_key(typecheck(gamma, detail::saturate_receives(p)).env) != base)
      rep.flag("substituting received values changed the typing");
  } catch (const TypeError& e) {
    rep.flag("substituting received values broke typability: " + std::string(e.what()));
  }

  ++rep.checked;
  try {
    SessionEnv widened = typecheck(gamma, p).env;
    widened.entries[{"zzweak"}] = {LocatedType{lend(), 1}};
    check_against(gamma, p, widened);
  } catch (const TypeError& e) {
    rep.flag("an unused finished session broke the declared check: " + std::string(e.what()));
  }
  return rep;
}

}  // namespace pmps

#endif
