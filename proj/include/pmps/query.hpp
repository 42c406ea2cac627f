#ifndef PMPS_QUERY_HPP
#define PMPS_QUERY_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pmps/ast.hpp"
#include "pmps/canonical.hpp"
#include "pmps/parser.hpp"
#include "pmps/printer.hpp"
#include "pmps/rational.hpp"
#include "pmps/semantics.hpp"

namespace pmps {

class QueryError : public std::runtime_error {
 public:
  explicit QueryError(const std::string& msg) : std::runtime_error(msg) {}
};

// An atom observes one kind of event somewhere along a run. Values compare
// after evaluation, branch identities by their printed source.
enum class AtomKind { Sent, Chose, Label, On, From };

struct Atom {
  AtomKind kind;
  std::string chan;
  Value value{false};
  std::string text;
  int participant = 0;

  bool matches(const ActionInfo& a) const {
    switch (kind) {
      case AtomKind::Sent:
        if (a.rule != Rule::Com || a.chan != chan) return false;
        for (const auto& v : a.values)
          if (v == value) return true;
        return false;
      case AtomKind::Chose:
        return a.rule == Rule::Com && a.chan == chan && a.text == text;
      case AtomKind::Label:
        return a.rule == Rule::Label && a.chan == chan && a.text == text;
      case AtomKind::On:
        return a.chan == chan;
      case AtomKind::From:
        return a.sender == participant;
    }
    return false;
  }
};

// Boolean combination over atoms, evaluated against the set of atoms a run
// has matched. & and | bind equally and associate to the left.
struct TracePredicate {
  enum class Op { And, Or, Not, Atom, Const };
  struct Node {
    Op op;
    size_t atom = 0;     // Atom
    bool truth = false;  // Const
    std::unique_ptr<Node> left, right;
  };

  std::vector<Atom> atoms;
  std::unique_ptr<Node> root;

  uint64_t match(const StepLabel& label) const {
    uint64_t mask = 0;
    for (size_t i = 0; i < atoms.size(); ++i)
      for (const auto& a : label.actions)
        if (atoms[i].matches(a)) {
          mask |= uint64_t{1} << i;
          break;
        }
    return mask;
  }

  bool eval(uint64_t mask) const { return eval_node(root.get(), mask); }

 private:
  static bool eval_node(const Node* n, uint64_t mask) {
    switch (n->op) {
      case Op::And:
        return eval_node(n->left.get(), mask) && eval_node(n->right.get(), mask);
      case Op::Or:
        return eval_node(n->left.get(), mask) || eval_node(n->right.get(), mask);
      case Op::Not:
        return !eval_node(n->left.get(), mask);
      case Op::Atom:
        return (mask >> n->atom) & 1;
      case Op::Const:
        return n->truth;
    }
    return false;
  }
};

namespace detail {

struct PredicateParser {
  std::string_view src;
  size_t pos = 0;
  TracePredicate* out;

  [[noreturn]] static void fail(const std::string& msg) { throw QueryError(msg); }

  void skip() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
  }

  bool eat(char c) {
    skip();
    if (pos < src.size() && src[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  std::string ident() {
    skip();
    size_t start = pos;
    while (pos < src.size() &&
           (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
      ++pos;
    if (start == pos) fail("expected a name in the query at offset " + std::to_string(pos));
    return std::string(src.substr(start, pos - start));
  }

  // Splits the parenthesized argument list at top-level commas, honoring
  // nested parentheses and string literals.
  std::vector<std::string> args() {
    skip();
    if (!eat('(')) fail("expected '(' after a query atom");
    std::vector<std::string> parts;
    std::string cur;
    int depth = 0;
    bool instr = false;
    for (; pos < src.size(); ++pos) {
      char c = src[pos];
      if (instr) {
        cur += c;
        if (c == '\\' && pos + 1 < src.size()) {
          cur += src[++pos];
        } else if (c == '"') {
          instr = false;
        }
        continue;
      }
      if (c == '"') {
        instr = true;
        cur += c;
      } else if (c == '(') {
        ++depth;
        cur += c;
      } else if (c == ')') {
        if (depth == 0) {
          ++pos;
          parts.push_back(trim(cur));
          return parts;
        }
        --depth;
        cur += c;
      } else if (c == ',' && depth == 0) {
        parts.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    fail("unbalanced parentheses in a query atom");
  }

  static std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  // A payload argument is normalized through the same parser and printer that
  // froze the branch's identity, so spacing differences cannot break a match.
  static const SendBranch& payload_of(const std::string& text, ProcPtr& keepalive) {
    try {
      keepalive = parse_process("q!<" + text + ">; 0");
    } catch (const ParseError& e) {
      fail("cannot read the payload '" + text + "': " + e.what());
    }
    return std::get_if<PSend>(&keepalive->node)->branches.front();
  }

  size_t add_atom(Atom a) {
    if (out->atoms.size() >= 64) fail("a query is limited to 64 atoms");
    out->atoms.push_back(std::move(a));
    return out->atoms.size() - 1;
  }

  std::unique_ptr<TracePredicate::Node> atom_node(const std::string& name) {
    auto node = std::make_unique<TracePredicate::Node>();
    if (name == "true" || name == "false") {
      node->op = TracePredicate::Op::Const;
      node->truth = name == "true";
      return node;
    }
    std::vector<std::string> as = args();
    auto want = [&](size_t n) {
      if (as.size() != n)
        fail(name + " takes " + std::to_string(n) + " argument" + (n == 1 ? "" : "s"));
    };
    node->op = TracePredicate::Op::Atom;
    Atom a{};
    if (name == "sent") {
      want(2);
      ProcPtr keep;
      const SendBranch& b = payload_of(as[1], keep);
      if (b.payload.size() != 1) fail("sent expects a single value");
      auto* val = std::get_if<EVal>(&b.payload.front()->node);
      if (!val) fail("sent expects a literal value, not the expression '" + as[1] + "'");
      a = {AtomKind::Sent, as[0], val->v, "", 0};
    } else if (name == "chose") {
      want(2);
      ProcPtr keep;
      const SendBranch& b = payload_of(as[1], keep);
      a = {AtomKind::Chose, as[0], false, b.payload_src, 0};
    } else if (name == "label") {
      want(2);
      a = {AtomKind::Label, as[0], false, as[1], 0};
    } else if (name == "on") {
      want(1);
      a = {AtomKind::On, as[0], false, "", 0};
    } else if (name == "from") {
      want(1);
      try {
        a = {AtomKind::From, "", false, "", std::stoi(as[0])};
      } catch (const std::exception&) {
        fail("from expects a participant number, not '" + as[0] + "'");
      }
    } else {
      fail("unknown query atom " + name);
    }
    node->atom = add_atom(std::move(a));
    return node;
  }

  std::unique_ptr<TracePredicate::Node> term() {
    skip();
    if (eat('!')) {
      auto node = std::make_unique<TracePredicate::Node>();
      node->op = TracePredicate::Op::Not;
      node->left = term();
      return node;
    }
    if (eat('(')) {
      auto inner = pred();
      if (!eat(')')) fail("expected ')' in the query");
      return inner;
    }
    return atom_node(ident());
  }

  std::unique_ptr<TracePredicate::Node> pred() {
    auto left = term();
    for (;;) {
      skip();
      if (pos >= src.size()) return left;
      char c = src[pos];
      if (c != '&' && c != '|') return left;
      ++pos;
      auto node = std::make_unique<TracePredicate::Node>();
      node->op = c == '&' ? TracePredicate::Op::And : TracePredicate::Op::Or;
      node->left = std::move(left);
      node->right = term();
      left = std::move(node);
    }
  }
};

}  // namespace detail

inline TracePredicate parse_predicate(const std::string& text) {
  TracePredicate p;
  detail::PredicateParser pp{text, 0, &p};
  p.root = pp.pred();
  pp.skip();
  if (pp.pos != text.size())
    throw QueryError("unexpected '" + std::string(1, text[pp.pos]) + "' at offset " +
                     std::to_string(pp.pos) + " in the query");
  return p;
}

struct QueryResult {
  bool is_exact = true;  // no nondeterministic node is reachable
  Rational lo{0};
  Rational hi{0};
  size_t paths_counted = 0;
  size_t nondeterministic_nodes = 0;

  const Rational& value() const { return lo; }
};

namespace detail {

inline void require_clean(const ReductionGraph& g) {
  if (g.has_error_edge)
    throw QueryError("the graph contains error transitions; queries need an error-free system");
  for (const auto& n : g.nodes)
    if (n.is_error)
      throw QueryError("the graph contains an error node; queries need an error-free system");
  // Iterative three-color depth-first search; a back edge means a cycle.
  std::vector<int> color(g.nodes.size(), 0);
  std::vector<std::pair<size_t, size_t>> stack{{g.root, 0}};
  color[g.root] = 1;
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i == g.nodes[n].out.size()) {
      color[n] = 2;
      stack.pop_back();
      continue;
    }
    size_t to = g.edges[g.nodes[n].out[i++]].to;
    if (color[to] == 1)
      throw QueryError("the graph is cyclic; rebuild it with a depth bound to query it");
    if (color[to] == 0) {
      color[to] = 1;
      stack.emplace_back(to, 0);
    }
  }
}

}  // namespace detail

// Exact probability that a maximal run satisfies the predicate. Nodes whose
// edges come from several redex families are nondeterministic: the result is
// then the [min, max] across all per-node resolutions.
inline QueryResult event_probability(const ReductionGraph& g, const TracePredicate& pred) {
  detail::require_clean(g);

  QueryResult res;
  std::vector<std::vector<std::vector<size_t>>> families(g.nodes.size());
  for (size_t n = 0; n < g.nodes.size(); ++n) {
    std::map<size_t, size_t> index;
    for (size_t e : g.nodes[n].out) {
      auto [it, fresh] = index.emplace(g.edges[e].family, families[n].size());
      if (fresh) families[n].emplace_back();
      families[n][it->second].push_back(e);
    }
    if (families[n].size() > 1) ++res.nondeterministic_nodes;
  }
  res.is_exact = res.nondeterministic_nodes == 0;

  std::map<std::pair<size_t, uint64_t>, std::pair<Rational, Rational>> memo;
  std::function<std::pair<Rational, Rational>(size_t, uint64_t)> value =
      [&](size_t n, uint64_t mask) -> std::pair<Rational, Rational> {
    auto key = std::make_pair(n, mask);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    std::pair<Rational, Rational> out;
    if (g.nodes[n].out.empty()) {
      Rational v{pred.eval(mask) ? 1 : 0};
      out = {v, v};
    } else {
      bool first = true;
      for (const auto& fam : families[n]) {
        Rational lo{0}, hi{0};
        for (size_t e : fam) {
          const GraphEdge& edge = g.edges[e];
          auto sub = value(edge.to, mask | pred.match(edge.label));
          lo = lo + edge.label.probability * sub.first;
          hi = hi + edge.label.probability * sub.second;
        }
        if (first || lo < out.first) out.first = lo;
        if (first || hi > out.second) out.second = hi;
        first = false;
      }
    }
    memo.emplace(key, out);
    return out;
  };
  auto [lo, hi] = value(g.root, 0);
  res.lo = lo;
  res.hi = hi;

  std::vector<size_t> paths(g.nodes.size(), 0);
  std::vector<size_t> order;  // reverse topological, via exit times
  {
    std::vector<int> seen(g.nodes.size(), 0);
    std::vector<std::pair<size_t, size_t>> stack{{g.root, 0}};
    seen[g.root] = 1;
    while (!stack.empty()) {
      auto& [n, i] = stack.back();
      if (i == g.nodes[n].out.size()) {
        order.push_back(n);
        stack.pop_back();
        continue;
      }
      size_t to = g.edges[g.nodes[n].out[i++]].to;
      if (!seen[to]) {
        seen[to] = 1;
        stack.emplace_back(to, 0);
      }
    }
  }
  for (size_t n : order) {
    if (g.nodes[n].out.empty()) {
      paths[n] = 1;
      continue;
    }
    size_t total = 0;
    for (size_t e : g.nodes[n].out) {
      size_t t = paths[g.edges[e].to];
      total = (total > SIZE_MAX - t) ? SIZE_MAX : total + t;
    }
    paths[n] = total;
  }
  res.paths_counted = paths[g.root];
  return res;
}

struct MostProbable {
  size_t winner = 0;
  Rational probability{0};
  std::vector<size_t> ties;              // every class at the maximum
  std::vector<Rational> probabilities;   // one per class, declaration order
};

// The classifier must partition the run space exactly; ties are reported and
// broken by declaration order.
inline MostProbable most_probable(const ReductionGraph& g,
                                  const std::vector<TracePredicate>& classes) {
  if (classes.empty()) throw QueryError("the classifier has no classes");
  MostProbable out;
  Rational total{0};
  for (const auto& c : classes) {
    QueryResult r = event_probability(g, c);
    if (!r.is_exact)
      throw QueryError("the classifier needs a fully probabilistic graph");
    out.probabilities.push_back(r.value());
    total = total + r.value();
  }
  if (total != Rational{1})
    throw QueryError("the classes do not partition the runs: their probabilities sum to " +
                     to_fraction_string(total));
  for (size_t i = 0; i < out.probabilities.size(); ++i) {
    if (out.probabilities[i] > out.probabilities[out.winner]) out.winner = i;
  }
  out.probability = out.probabilities[out.winner];
  for (size_t i = 0; i < out.probabilities.size(); ++i)
    if (out.probabilities[i] == out.probability) out.ties.push_back(i);
  return out;
}

struct MonteCarlo {
  double estimate = 0.0;
  double stderr_ = 0.0;
  size_t runs = 0;
  size_t divergent = 0;  // runs cut off by the step budget, excluded from the mean
};

namespace detail {

inline uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double uniform01(uint64_t& x) {
  return static_cast<double>(splitmix64(x) >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Statistical cross-check: samples maximal runs of the process itself.
// Probabilistic choices follow their distribution, nondeterministic ones are
// resolved uniformly. Each run draws from its own (seed, index) stream, so
// results are reproducible independently of any batching. Reachable states
// repeat across runs, so each canonical form is expanded once and the walk
// itself only touches precomputed tables.
inline MonteCarlo monte_carlo(const ProcPtr& p, const TracePredicate& pred, size_t runs,
                              uint64_t seed, size_t step_budget = 4096) {
  if (runs == 0) throw QueryError("monte carlo needs at least one run");

  struct CachedStep {
    double cum;  // cumulative probability within the distribution
    uint64_t mask;
    size_t next;
  };
  struct CachedState {
    ProcPtr proc;
    bool expanded = false;
    std::vector<std::vector<CachedStep>> dists;
  };
  std::vector<CachedState> states;
  std::map<std::string, size_t> ids;
  auto intern = [&](const ProcPtr& q) {
    auto [it, fresh] = ids.emplace(print_process(q), states.size());
    if (fresh) states.push_back({q, false, {}});
    return it->second;
  };
  auto expand = [&](size_t id) {
    if (states[id].expanded) return;
    // Interning targets may grow the state table, so no reference into it can
    // be held across the loop.
    std::vector<Distribution> dists = step_distributions(states[id].proc);
    std::vector<std::vector<CachedStep>> table;
    table.reserve(dists.size());
    for (const auto& d : dists) {
      std::vector<CachedStep> steps;
      double cum = 0.0;
      for (const auto& s : d.steps) {
        cum += to_double(s.label.probability);
        steps.push_back({cum, pred.match(s.label), intern(s.target)});
      }
      table.push_back(std::move(steps));
    }
    states[id].dists = std::move(table);
    states[id].expanded = true;
  };

  MonteCarlo out;
  out.runs = runs;
  size_t hits = 0;
  size_t root = intern(canonicalize(p));
  for (size_t run = 0; run < runs; ++run) {
    uint64_t rng = seed + 0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(run + 1);
    size_t state = root;
    uint64_t mask = 0;
    size_t steps = 0;
    bool diverged = false;
    for (;;) {
      expand(state);
      const auto& dists = states[state].dists;
      if (dists.empty()) break;
      if (++steps > step_budget) {
        diverged = true;
        break;
      }
      const auto& d =
          dists.size() == 1
              ? dists.front()
              : dists[static_cast<size_t>(detail::uniform01(rng) *
                                          static_cast<double>(dists.size())) %
                      dists.size()];
      double u = detail::uniform01(rng);
      const CachedStep* chosen = &d.back();
      for (const auto& s : d) {
        if (u < s.cum) {
          chosen = &s;
          break;
        }
      }
      mask |= chosen->mask;
      state = chosen->next;
    }
    if (diverged) {
      ++out.divergent;
      continue;
    }
    if (pred.eval(mask)) ++hits;
  }
  size_t n = runs - out.divergent;
  if (n > 0) {
    out.estimate = static_cast<double>(hits) / static_cast<double>(n);
    out.stderr_ = std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(n));
  }
  return out;
}

}  // namespace pmps

#endif
