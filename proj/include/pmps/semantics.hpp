#ifndef PMPS_SEMANTICS_HPP
#define PMPS_SEMANTICS_HPP

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pmps/ast.hpp"
#include "pmps/canonical.hpp"
#include "pmps/printer.hpp"
#include "pmps/rational.hpp"

namespace pmps {

// Names of the reduction rules, used as edge labels. Congruence bookkeeping
// (rewriting to canonical form, lifting under hiding, carrying idle parallel
// components) happens before and after the interaction itself, so the labels
// that actually reach edges are the interactions: session starts,
// communications, conditionals, unfoldings, the two error verdicts, and Par2
// for simultaneous synchronizations. Scope, Par1 and Struct are listed for
// completeness; canonicalization makes them silent.
enum class Rule {
  Link,
  Com,
  Deleg,
  Label,
  IfT,
  IfF,
  Call,
  Scope,
  Par1,
  Par2,
  Struct,
  ECom,
  ELabel,
};

inline std::string to_string(Rule r) {
  switch (r) {
    case Rule::Link: return "Link";
    case Rule::Com: return "Com";
    case Rule::Deleg: return "Deleg";
    case Rule::Label: return "Label";
    case Rule::IfT: return "IfT";
    case Rule::IfF: return "IfF";
    case Rule::Call: return "Call";
    case Rule::Scope: return "Scope";
    case Rule::Par1: return "Par1";
    case Rule::Par2: return "Par2";
    case Rule::Struct: return "Struct";
    case Rule::ECom: return "ECom";
    case Rule::ELabel: return "ELabel";
  }
  return "?";
}

inline bool is_error_rule(Rule r) { return r == Rule::ECom || r == Rule::ELabel; }

// What one interaction communicated. Queries match against these fields, so
// `text` records the branch as written in the source (the payload before
// substitution, the label, the condition), while `values` records what was
// actually transmitted.
struct ActionInfo {
  Rule rule = Rule::Com;
  int sender = 0;  // participant role when derivable from the syntax, else 0
  std::string chan;
  int branch = -1;  // position in the canonical sum, -1 when not a sum
  std::string text;
  std::vector<Value> values;
};

// Label of one edge. Simultaneous synchronizations carry one ActionInfo per
// interaction and the rule Par2; single interactions carry their own rule.
// Error edges carry the achieved probability sum in their action's text.
struct StepLabel {
  Rule rule = Rule::Com;
  Rational probability{1};
  std::vector<ActionInfo> actions;
};

struct Step {
  StepLabel label;
  ProcPtr target;  // canonical form
};

// All outcomes of resolving one set of simultaneously firing redexes. The
// probabilities of the non-error steps sum to 1 exactly when every involved
// branch family does; the error step, when present, carries probability 1 on
// its own.
struct Distribution {
  std::vector<Step> steps;
};

namespace detail {

// One way a single redex can resolve: its probability, what it communicates,
// and the replacement for each parallel component it consumes. Session starts
// additionally introduce fresh hidden channels.
struct Outcome {
  Rational prob{1};
  ActionInfo action;
  std::vector<std::pair<size_t, ProcPtr>> replace;
  std::vector<std::string> fresh_hidden;
};

// One redex: the components it consumes and its possible resolutions.
// `error` is set when the redex's declared branch probabilities do not sum
// to 1; such a redex can also resolve to the error process with probability 1.
struct Group {
  Rule base = Rule::Com;
  std::vector<size_t> members;
  std::vector<Outcome> outcomes;
  std::optional<ActionInfo> error;
};

// Splits a canonical process into its outermost hidden names and the parallel
// components under them. Canonical forms keep hidings outermost and parallel
// composition right-nested, so this is a spine walk.
inline void split_composition(const ProcPtr& p, std::vector<std::string>& hidden,
                              std::vector<ProcPtr>& comps) {
  ProcPtr cur = p;
  while (const auto* h = as<PHide>(cur)) {
    hidden.push_back(h->name);
    cur = h->body;
  }
  while (const auto* pp = as<PPar>(cur)) {
    comps.push_back(pp->left);
    cur = pp->right;
  }
  if (!as<PInact>(cur)) comps.push_back(std::move(cur));
}

// The receive branch a value tuple selects: an exact sort match wins, then a
// branch the values merely inhabit (naturals flowing into int binders). -1
// when no branch accepts the tuple.
inline int match_receive(const std::vector<RecvBranch>& branches,
                         const std::vector<Value>& vals) {
  auto fits = [&](const RecvBranch& rb, bool exact) {
    if (rb.binders.size() != vals.size()) return false;
    for (size_t k = 0; k < vals.size(); ++k) {
      auto p = primary_sort(vals[k]);
      if (!p) return false;
      if (exact ? *p != rb.binders[k].second : !value_inhabits(vals[k], rb.binders[k].second))
        return false;
    }
    return true;
  };
  for (int pass = 0; pass < 2; ++pass)
    for (size_t r = 0; r < branches.size(); ++r)
      if (fits(branches[r], pass == 0)) return static_cast<int>(r);
  return -1;
}

struct Stepper {
  // Fresh-channel counter for session starts, scoped to one graph build so
  // graphs are reproducible. The names are placeholders: canonicalization of
  // the target renames them into the canonical hidden-name sequence.
  int fresh = 0;

  std::string fresh_chan() { return "#l" + std::to_string(fresh++); }

  Group com_group(size_t i, const PSend& snd, size_t j, const PRecv& rcv) {
    Group g{Rule::Com, {i, j}, {}, std::nullopt};
    Rational total{0};
    for (const auto& b : snd.branches) total = total + b.prob;
    for (size_t bi = 0; bi < snd.branches.size(); ++bi) {
      const auto& b = snd.branches[bi];
      std::vector<Value> vals;
      bool evaluable = true;
      try {
        for (const auto& e : b.payload) vals.push_back(eval_expr(e, {}));
      } catch (const EvalError&) {
        evaluable = false;
      }
      if (!evaluable) continue;
      int ri = match_receive(rcv.branches, vals);
      if (ri < 0) continue;
      const auto& rb = rcv.branches[static_cast<size_t>(ri)];
      ValueSubst sub;
      for (size_t k = 0; k < vals.size(); ++k) sub[rb.binders[k].first] = vals[k];
      ActionInfo act{Rule::Com, 0, snd.chan, static_cast<int>(bi),
                     b.payload_src.empty() ? render_payload(b.payload) : b.payload_src, vals};
      g.outcomes.push_back(
          {b.prob, std::move(act), {{i, b.cont}, {j, subst_values(rb.cont, sub)}}, {}});
    }
    if (total != Rational{1})
      g.error = ActionInfo{Rule::ECom, 0, snd.chan, -1, to_fraction_string(total), {}};
    return g;
  }

  Group label_group(size_t i, const PSelect& sel, size_t j, const PBranch& br) {
    Group g{Rule::Label, {i, j}, {}, std::nullopt};
    Rational total{0};
    for (const auto& b : sel.branches) total = total + b.prob;
    for (size_t bi = 0; bi < sel.branches.size(); ++bi) {
      const auto& b = sel.branches[bi];
      for (const auto& arm : br.arms) {
        if (arm.label != b.label) continue;
        ActionInfo act{Rule::Label, 0, sel.chan, static_cast<int>(bi), b.label, {}};
        g.outcomes.push_back({b.prob, std::move(act), {{i, b.cont}, {j, arm.cont}}, {}});
        break;
      }
    }
    if (total != Rational{1})
      g.error = ActionInfo{Rule::ELabel, 0, sel.chan, -1, to_fraction_string(total), {}};
    return g;
  }

  std::optional<Group> deleg_group(size_t i, const PDeleg& d, size_t j, const PSessRecv& sr) {
    if (d.sent.size() != sr.bound.size()) return std::nullopt;
    NameSubst ns;
    std::string text;
    std::vector<Value> vals;
    for (size_t k = 0; k < d.sent.size(); ++k) {
      ns[sr.bound[k]] = d.sent[k];
      if (k) text += ", ";
      text += d.sent[k];
      vals.push_back(SharedName{d.sent[k]});
    }
    ActionInfo act{Rule::Deleg, 0, d.chan, -1, std::move(text), std::move(vals)};
    Group g{Rule::Deleg, {i, j}, {}, std::nullopt};
    g.outcomes.push_back(
        {Rational{1}, std::move(act), {{i, d.cont}, {j, subst_names(sr.cont, ns)}}, {}});
    return g;
  }

  // Session starts: one group per way of picking an acceptor for every role
  // 2..n. Distinct picks conflict on the request component, so at most one
  // fires per matching.
  void link_groups(const std::vector<ProcPtr>& comps, size_t i, const PRequest& req,
                   std::vector<Group>& out) {
    size_t arity = req.chans.size();
    int n = req.parties;
    std::vector<std::vector<size_t>> cand(static_cast<size_t>(n) + 1);
    for (size_t j = 0; j < comps.size(); ++j) {
      if (j == i) continue;
      const auto* acc = as<PAccept>(comps[j]);
      if (!acc || acc->shared != req.shared || acc->chans.size() != arity) continue;
      if (acc->role < 2 || acc->role > n) continue;
      cand[static_cast<size_t>(acc->role)].push_back(j);
    }
    for (int q = 2; q <= n; ++q)
      if (cand[static_cast<size_t>(q)].empty()) return;

    std::vector<size_t> pick;
    auto emit = [&]() {
      std::vector<std::string> chans;
      for (size_t k = 0; k < arity; ++k) chans.push_back(fresh_chan());
      Outcome oc;
      oc.prob = Rational{1};
      oc.action = ActionInfo{Rule::Link, 1, req.shared, -1, "", {}};
      oc.fresh_hidden = chans;
      NameSubst rn;
      for (size_t k = 0; k < arity; ++k) rn[req.chans[k]] = chans[k];
      oc.replace.emplace_back(i, subst_names(req.body, rn));
      for (size_t r = 0; r < pick.size(); ++r) {
        const auto* acc = as<PAccept>(comps[pick[r]]);
        NameSubst an;
        for (size_t k = 0; k < arity; ++k) an[acc->chans[k]] = chans[k];
        oc.replace.emplace_back(pick[r], subst_names(acc->body, an));
      }
      Group g{Rule::Link, {i}, {}, std::nullopt};
      g.members.insert(g.members.end(), pick.begin(), pick.end());
      std::sort(g.members.begin(), g.members.end());
      g.outcomes.push_back(std::move(oc));
      out.push_back(std::move(g));
    };
    auto rec = [&](auto&& self, int q) -> void {
      if (q > n) {
        emit();
        return;
      }
      for (size_t j : cand[static_cast<size_t>(q)]) {
        pick.push_back(j);
        self(self, q + 1);
        pick.pop_back();
      }
    };
    rec(rec, 2);
  }

  std::vector<Group> collect_groups(const std::vector<ProcPtr>& comps) {
    std::vector<Group> gs;
    for (size_t i = 0; i < comps.size(); ++i) {
      for (size_t j = 0; j < comps.size(); ++j) {
        if (i == j) continue;
        if (const auto* snd = as<PSend>(comps[i])) {
          if (const auto* rcv = as<PRecv>(comps[j]); rcv && rcv->chan == snd->chan) {
            Group g = com_group(i, *snd, j, *rcv);
            if (!g.outcomes.empty() || g.error) gs.push_back(std::move(g));
          }
        } else if (const auto* sel = as<PSelect>(comps[i])) {
          if (const auto* br = as<PBranch>(comps[j]); br && br->chan == sel->chan) {
            Group g = label_group(i, *sel, j, *br);
            if (!g.outcomes.empty() || g.error) gs.push_back(std::move(g));
          }
        } else if (const auto* d = as<PDeleg>(comps[i])) {
          if (const auto* sr = as<PSessRecv>(comps[j]); sr && sr->chan == d->chan) {
            if (auto g = deleg_group(i, *d, j, *sr)) gs.push_back(std::move(*g));
          }
        }
      }
    }
    for (size_t i = 0; i < comps.size(); ++i)
      if (const auto* req = as<PRequest>(comps[i])) link_groups(comps, i, *req, gs);
    for (size_t i = 0; i < comps.size(); ++i) {
      if (const auto* cond = as<PIf>(comps[i])) {
        try {
          Value v = eval_expr(cond->cond, {});
          if (const bool* b = std::get_if<bool>(&v)) {
            Rule r = *b ? Rule::IfT : Rule::IfF;
            ActionInfo act{r, 0, "", -1, print_expr(cond->cond), {v}};
            Group g{r, {i}, {}, std::nullopt};
            g.outcomes.push_back(
                {Rational{1}, std::move(act), {{i, *b ? cond->then_p : cond->else_p}}, {}});
            gs.push_back(std::move(g));
          }
        } catch (const EvalError&) {
          // open or ill-sorted condition: the component cannot move
        }
      } else if (const auto* rec = as<PRec>(comps[i])) {
        ActionInfo act{Rule::Call, 0, "", -1, rec->var, {}};
        Group g{Rule::Call, {i}, {}, std::nullopt};
        g.outcomes.push_back(
            {Rational{1}, std::move(act), {{i, subst_proc_var(rec->body, rec->var, comps[i])}},
             {}});
        gs.push_back(std::move(g));
      }
    }
    return gs;
  }

  // Every maximal set of pairwise component-disjoint redexes, in lexicographic
  // order of group indices. Simultaneity is mandatory: a set that leaves a
  // fireable redex untouched is not emitted.
  std::vector<std::vector<size_t>> matchings(const std::vector<Group>& gs) {
    std::vector<std::vector<size_t>> result;
    std::vector<size_t> chosen;
    std::set<size_t> used;
    auto disjoint = [&](const Group& g) {
      for (size_t m : g.members)
        if (used.count(m)) return false;
      return true;
    };
    auto rec = [&](auto&& self, size_t idx) -> void {
      if (idx == gs.size()) {
        if (chosen.empty()) return;
        for (size_t k = 0; k < gs.size(); ++k) {
          if (std::find(chosen.begin(), chosen.end(), k) == chosen.end() && disjoint(gs[k]))
            return;
        }
        result.push_back(chosen);
        return;
      }
      if (disjoint(gs[idx])) {
        chosen.push_back(idx);
        for (size_t m : gs[idx].members) used.insert(m);
        self(self, idx + 1);
        for (size_t m : gs[idx].members) used.erase(m);
        chosen.pop_back();
      }
      self(self, idx + 1);
      return;
    };
    rec(rec, 0);
    return result;
  }

  static ProcPtr assemble(const std::vector<std::string>& hidden,
                          const std::vector<std::string>& extra,
                          const std::vector<ProcPtr>& comps) {
    ProcPtr body;
    for (auto it = comps.rbegin(); it != comps.rend(); ++it)
      body = body ? mk_par(*it, body) : *it;
    if (!body) body = mk_inact();
    for (auto it = extra.rbegin(); it != extra.rend(); ++it) body = mk(PHide{*it, body});
    for (auto it = hidden.rbegin(); it != hidden.rend(); ++it) body = mk(PHide{*it, body});
    return body;
  }

  Distribution resolve(const std::vector<std::string>& hidden,
                       const std::vector<ProcPtr>& comps, const std::vector<Group>& gs,
                       const std::vector<size_t>& matching) {
    struct Partial {
      Rational prob{1};
      std::vector<const Outcome*> picks;
    };
    std::vector<Partial> parts{Partial{}};
    for (size_t gi : matching) {
      std::vector<Partial> next;
      for (const auto& pt : parts)
        for (const auto& oc : gs[gi].outcomes) {
          Partial np = pt;
          np.prob = np.prob * oc.prob;
          np.picks.push_back(&oc);
          next.push_back(std::move(np));
        }
      parts = std::move(next);
    }
    Distribution dist;
    for (const auto& pt : parts) {
      std::vector<ProcPtr> after = comps;
      std::vector<std::string> extra;
      std::vector<ActionInfo> acts;
      for (const Outcome* oc : pt.picks) {
        for (const auto& [idx, np] : oc->replace) after[idx] = np;
        extra.insert(extra.end(), oc->fresh_hidden.begin(), oc->fresh_hidden.end());
        acts.push_back(oc->action);
      }
      Rule rule = matching.size() == 1 ? gs[matching[0]].base : Rule::Par2;
      dist.steps.push_back(
          {{rule, pt.prob, std::move(acts)}, canonicalize(assemble(hidden, extra, after))});
    }
    std::vector<ActionInfo> errs;
    for (size_t gi : matching)
      if (gs[gi].error) errs.push_back(*gs[gi].error);
    if (!errs.empty()) {
      Rule rule = errs.front().rule;
      dist.steps.push_back({{rule, Rational{1}, std::move(errs)}, mk_error()});
    }
    return dist;
  }

  std::vector<Distribution> run(const ProcPtr& p) {
    ProcPtr q = canonicalize(p);
    std::vector<std::string> hidden;
    std::vector<ProcPtr> comps;
    split_composition(q, hidden, comps);
    std::vector<Group> gs = collect_groups(comps);
    std::vector<Distribution> out;
    for (const auto& m : matchings(gs)) out.push_back(resolve(hidden, comps, gs, m));
    return out;
  }
};

}  // namespace detail

// All resolutions of the process's enabled redex sets, one Distribution per
// maximal set of simultaneously firing redexes. Two or more distributions
// mean the environment gets a nondeterministic choice.
inline std::vector<Distribution> step_distributions(const ProcPtr& p) {
  detail::Stepper st;
  return st.run(p);
}

// The enabled steps as a flat list, in distribution order.
inline std::vector<Step> enabled_steps(const ProcPtr& p) {
  std::vector<Step> out;
  for (auto& d : step_distributions(p))
    for (auto& s : d.steps) out.push_back(std::move(s));
  return out;
}

// Error steps count: a redex whose branch probabilities missum can still move.
inline bool is_stuck(const ProcPtr& p) { return step_distributions(p).empty(); }

struct GraphEdge {
  size_t from = 0;
  size_t to = 0;
  StepLabel label;
  size_t family = 0;  // distribution index within the source node
};

struct GraphNode {
  ProcPtr proc;  // canonical form
  std::string key;
  size_t depth = 0;
  bool expanded = false;  // false on frontier nodes cut off by the depth bound
  bool is_error = false;
  size_t families = 0;
  std::vector<size_t> out;  // edge ids, grouped contiguously by family

  // A node with no steps at all; distinct from an unexpanded frontier node.
  bool terminal() const { return expanded && out.empty(); }
};

struct ReductionGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  size_t root = 0;
  size_t max_depth = 0;
  bool has_error_edge = false;
};

// Breadth-first exploration of reachable canonical forms. Nodes are
// deduplicated by canonical form; every step, unfoldings included, counts one
// level of depth, so the graph is finite even for recursive processes. Nodes
// sitting at the depth bound are kept but not expanded.
inline ReductionGraph build_graph(const ProcPtr& p, size_t max_depth) {
  ReductionGraph g;
  g.max_depth = max_depth;
  detail::Stepper st;
  std::map<std::string, size_t> ids;
  auto intern = [&](ProcPtr cp, size_t depth) {
    std::string key = canonical_key(cp);
    auto it = ids.find(key);
    if (it != ids.end()) return it->second;
    size_t id = g.nodes.size();
    GraphNode n;
    n.proc = std::move(cp);
    n.key = key;
    n.depth = depth;
    n.is_error = as<PError>(n.proc) != nullptr;
    g.nodes.push_back(std::move(n));
    ids.emplace(std::move(key), id);
    return id;
  };
  g.root = intern(canonicalize(p), 0);
  std::deque<size_t> todo{g.root};
  while (!todo.empty()) {
    size_t id = todo.front();
    todo.pop_front();
    if (g.nodes[id].depth >= max_depth) continue;
    std::vector<Distribution> dists = st.run(g.nodes[id].proc);
    g.nodes[id].expanded = true;
    g.nodes[id].families = dists.size();
    for (size_t f = 0; f < dists.size(); ++f) {
      for (auto& s : dists[f].steps) {
        size_t before = g.nodes.size();
        size_t tid = intern(std::move(s.target), g.nodes[id].depth + 1);
        if (g.nodes.size() > before) todo.push_back(tid);
        if (is_error_rule(s.label.rule)) g.has_error_edge = true;
        g.nodes[id].out.push_back(g.edges.size());
        g.edges.push_back({id, tid, std::move(s.label), f});
      }
    }
  }
  return g;
}

namespace detail {

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

}  // namespace detail

// Stable eight-digit fingerprint of a canonical form, for compact node labels.
inline std::string short_hash(std::string_view key) {
  static const char* hex = "0123456789abcdef";
  uint64_t h = detail::fnv1a64(key);
  std::string out(8, '0');
  for (int i = 0; i < 8; ++i) out[static_cast<size_t>(i)] = hex[(h >> (60 - 4 * i)) & 0xf];
  return out;
}

inline std::string to_dot(const ReductionGraph& g, bool full_text = false) {
  std::string out = "digraph reduction {\n  rankdir=LR;\n  node [shape=box];\n";
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    const GraphNode& n = g.nodes[i];
    std::string label = short_hash(n.key);
    if (full_text) label += "\\n" + detail::dot_escape(print_process(n.proc));
    out += "  n" + std::to_string(i) + " [label=\"" + label + "\"";
    if (i == g.root) out += ", penwidth=2";
    if (n.is_error) out += ", color=red";
    out += "];\n";
  }
  for (const GraphEdge& e : g.edges) {
    out += "  n" + std::to_string(e.from) + " -> n" + std::to_string(e.to) + " [label=\"" +
           to_string(e.label.rule) + " p=" + to_fraction_string(e.label.probability) + "\"];\n";
  }
  out += "}\n";
  return out;
}

}  // namespace pmps

#endif
