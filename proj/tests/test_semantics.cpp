#include "pmps/semantics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "pmps/canonical.hpp"
#include "pmps/parser.hpp"
#include "pmps/printer.hpp"

using namespace pmps;

namespace {

// Open forms of the two-buyers participants: session channels free, so the
// composition reduces by plain synchronization without a session start.
const char* kAliceOpen =
    "0.3: as!<\"War and Peace\">; as?(quote: nat);"
    "  (0.5: ab!<quote/2>; 0 + 0.5: ab!<quote/3>; 0)"
    "+ 0.5: as!<\"The Art of War\">; as?(quote: nat);"
    "  (0.4: ab!<quote/2>; 0 + 0.2: ab!<quote/3>; 0 + 0.4: ab!<quote/4>; 0)"
    "+ 0.2: as!<0195014766>; as?(quote: nat);"
    "  (0.4: ab!<quote/2>; 0 + 0.2: ab!<quote/3>; 0 + 0.4: ab!<quote/4>; 0)";

const char* kSellerTail =
    "bs >> { ok1: bs?(addr: string); bs!<\"2026-09-01\">; 0,"
    "        ok2: bs?(addr: string); bs!<\"2026-09-01\">; 0,"
    "        quit: 0 }";

std::string seller_quote() {
  return std::string("(0.6: as!<100>; bs!<100>; ") + kSellerTail +
         " + 0.4: as!<80>; bs!<80>; " + kSellerTail + ")";
}

std::string seller_open() {
  return "as?(title: string); " + seller_quote() + " + as?(ISBN: nat); " + seller_quote();
}

std::string bob_open() {
  return std::string("bs?(quote: int); ab?(contrib: int);") +
         " (0.2: bs <+ ok1; bs!<\"Paris\">; bs?(d: date); 0" +
         " + 0.3: bs <+ ok2; bs!<\"London\">; bs?(d: date); 0" + " + 0.5: bs <+ quit; 0)";
}

std::string open_system() {
  return "(" + std::string(kAliceOpen) + ") | (" + seller_open() + ") | (" + bob_open() + ")";
}

Value nat(long long n) { return Value{Int(n)}; }

}  // namespace

TEST(Steps, GoldenFirstStepRoutesIsbnToNatBranch) {
  ProcPtr sys = parse_process(open_system());
  auto dists = step_distributions(sys);
  ASSERT_EQ(dists.size(), 1u) << "only the title exchange is ready";
  ASSERT_EQ(dists[0].steps.size(), 3u);

  Rational sum{0};
  for (const auto& s : dists[0].steps) sum = sum + s.label.probability;
  EXPECT_EQ(sum, Rational(1));

  const Step* isbn = nullptr;
  for (const auto& s : dists[0].steps)
    if (s.label.probability == Rational(1, 5)) isbn = &s;
  ASSERT_NE(isbn, nullptr);
  EXPECT_EQ(isbn->label.rule, Rule::Com);
  ASSERT_EQ(isbn->label.actions.size(), 1u);
  EXPECT_EQ(isbn->label.actions[0].chan, "as");
  ASSERT_EQ(isbn->label.actions[0].values.size(), 1u);
  EXPECT_EQ(isbn->label.actions[0].values[0], nat(195014766));

  // The receiver continues on its nat branch with the ISBN substituted; the
  // idle third component rides along unchanged.
  std::string expected = "(as?(quote: nat); (0.4: ab!<quote/2>; 0 + 0.2: ab!<quote/3>; 0 "
                         "+ 0.4: ab!<quote/4>; 0)) | " +
                         seller_quote() + " | (" + bob_open() + ")";
  EXPECT_TRUE(struct_equiv(isbn->target, parse_process(expected)))
      << print_process(isbn->target);
}

TEST(Steps, SimultaneousPairsMultiplyProbabilities) {
  ProcPtr sys = parse_process(
      "(0.5: s!<1>; 0 + 0.5: s!<2>; 0) | s?(x: nat); 0 | t!<\"a\">; 0 | t?(y: string); 0");
  auto dists = step_distributions(sys);
  ASSERT_EQ(dists.size(), 1u) << "disjoint redexes must fire together";
  ASSERT_EQ(dists[0].steps.size(), 2u);
  for (const auto& s : dists[0].steps) {
    EXPECT_EQ(s.label.rule, Rule::Par2);
    EXPECT_EQ(s.label.probability, Rational(1, 2));
    EXPECT_EQ(s.label.actions.size(), 2u);
  }
}

TEST(Steps, SynchronyIsMandatory) {
  // A conditional that could fire alone must not: the ready pair moves with it.
  ProcPtr sys = parse_process("s!<1>; 0 | s?(x: nat); 0 | if true then 0 else 0");
  auto dists = step_distributions(sys);
  ASSERT_EQ(dists.size(), 1u);
  ASSERT_EQ(dists[0].steps.size(), 1u);
  EXPECT_EQ(dists[0].steps[0].label.rule, Rule::Par2);
  EXPECT_EQ(dists[0].steps[0].label.actions.size(), 2u);
  EXPECT_EQ(dists[0].steps[0].label.probability, Rational(1));
  EXPECT_TRUE(struct_equiv(dists[0].steps[0].target, mk_inact()));
}

TEST(Steps, CompetingReceiversAreSeparateResolutions) {
  ProcPtr sys = parse_process("s!<1>; 0 | s?(x: nat); t!<1>; 0 | s?(y: nat); u!<1>; 0");
  auto dists = step_distributions(sys);
  ASSERT_EQ(dists.size(), 2u) << "the environment picks the receiver";
  std::set<std::string> targets;
  for (const auto& d : dists) {
    ASSERT_EQ(d.steps.size(), 1u);
    EXPECT_EQ(d.steps[0].label.probability, Rational(1));
    targets.insert(canonical_key(d.steps[0].target));
  }
  EXPECT_EQ(targets.size(), 2u);
}

TEST(Steps, MissummingSendAddsErrorEdge) {
  ProcPtr sys = parse_process("(0.4: s!<1>; 0 + 0.4: s!<2>; 0) | s?(x: nat); 0");
  auto dists = step_distributions(sys);
  ASSERT_EQ(dists.size(), 1u);
  ASSERT_EQ(dists[0].steps.size(), 3u);
  int errors = 0;
  for (const auto& s : dists[0].steps) {
    if (is_error_rule(s.label.rule)) {
      ++errors;
      EXPECT_EQ(s.label.rule, Rule::ECom);
      EXPECT_EQ(s.label.probability, Rational(1));
      EXPECT_EQ(s.label.actions[0].text, "4/5");
      EXPECT_TRUE(as<PError>(s.target));
    } else {
      EXPECT_EQ(s.label.probability, Rational(2, 5));
    }
  }
  EXPECT_EQ(errors, 1);
  EXPECT_FALSE(is_stuck(sys));
}

TEST(Steps, MissummingSelectAddsErrorEdge) {
  ProcPtr sys = parse_process("0.5: s <+ ok; 0 | s >> { ok: 0 }");
  auto dists = step_distributions(sys);
  ASSERT_EQ(dists.size(), 1u);
  ASSERT_EQ(dists[0].steps.size(), 2u);
  EXPECT_EQ(dists[0].steps[0].label.rule, Rule::Label);
  EXPECT_EQ(dists[0].steps[0].label.probability, Rational(1, 2));
  EXPECT_EQ(dists[0].steps[0].label.actions[0].text, "ok");
  EXPECT_EQ(dists[0].steps[1].label.rule, Rule::ELabel);
  EXPECT_EQ(dists[0].steps[1].label.probability, Rational(1));
}

TEST(Steps, SessionStartHidesFreshChannels) {
  ProcPtr sys =
      parse_process("(request a[2](c). c!<5>; 0) | (accept a[2](c). c?(x: nat); 0)");
  auto dists = step_distributions(sys);
  ASSERT_EQ(dists.size(), 1u);
  ASSERT_EQ(dists[0].steps.size(), 1u);
  const Step& s = dists[0].steps[0];
  EXPECT_EQ(s.label.rule, Rule::Link);
  EXPECT_EQ(s.label.probability, Rational(1));
  EXPECT_EQ(s.label.actions[0].chan, "a");
  EXPECT_EQ(s.label.actions[0].sender, 1);
  EXPECT_TRUE(struct_equiv(s.target, parse_process("new s in (s!<5>; 0 | s?(x: nat); 0)")))
      << print_process(s.target);
}

TEST(Steps, DelegationTransfersChannels) {
  ProcPtr sys = parse_process("s!!(t); 0 | s?" "?(u); u?(x: nat); 0");
  auto dists = step_distributions(sys);
  ASSERT_EQ(dists.size(), 1u);
  ASSERT_EQ(dists[0].steps.size(), 1u);
  const Step& s = dists[0].steps[0];
  EXPECT_EQ(s.label.rule, Rule::Deleg);
  EXPECT_EQ(s.label.probability, Rational(1));
  EXPECT_EQ(s.label.actions[0].chan, "s");
  EXPECT_EQ(s.label.actions[0].text, "t");
  EXPECT_TRUE(struct_equiv(s.target, parse_process("t?(x: nat); 0")));
}

TEST(Steps, SubstitutionKeepsBranchSourceText) {
  ProcPtr sys = parse_process(
      "as!<100>; 0 | (as?(q: nat); (0.5: ab!<q/2>; 0 + 0.5: ab!<q/3>; 0)) | ab?(c: nat); 0");
  auto first = step_distributions(sys);
  ASSERT_EQ(first.size(), 1u);
  ASSERT_EQ(first[0].steps.size(), 1u);
  auto second = step_distributions(first[0].steps[0].target);
  ASSERT_EQ(second.size(), 1u);
  ASSERT_EQ(second[0].steps.size(), 2u);
  std::map<std::string, Value> seen;
  for (const auto& s : second[0].steps) {
    ASSERT_EQ(s.label.actions.size(), 1u);
    ASSERT_EQ(s.label.actions[0].values.size(), 1u);
    seen[s.label.actions[0].text] = s.label.actions[0].values[0];
    EXPECT_EQ(s.label.probability, Rational(1, 2));
  }
  // The branch keeps its source spelling even though the payload was rewritten
  // by the substitution of 100 for q.
  ASSERT_TRUE(seen.count("q / 2"));
  ASSERT_TRUE(seen.count("q / 3"));
  EXPECT_EQ(seen["q / 2"], nat(50));
  EXPECT_EQ(seen["q / 3"], nat(33));
}

TEST(Steps, EquivalentProcessesStepAlike) {
  ProcPtr a = parse_process("(" + std::string(kAliceOpen) + ") | (" + seller_open() + ")");
  ProcPtr b = parse_process("(" + seller_open() + ") | (" + std::string(kAliceOpen) + ")");
  ASSERT_TRUE(struct_equiv(a, b));
  auto sa = enabled_steps(a);
  auto sb = enabled_steps(b);
  ASSERT_EQ(sa.size(), sb.size());
  auto sig = [](const std::vector<Step>& v) {
    std::multiset<std::string> out;
    for (const auto& s : v)
      out.insert(to_string(s.label.rule) + " " + to_fraction_string(s.label.probability) +
                 " " + canonical_key(s.target));
    return out;
  };
  EXPECT_EQ(sig(sa), sig(sb));
}

TEST(Steps, StuckShapes) {
  EXPECT_TRUE(is_stuck(parse_process("0")));
  EXPECT_TRUE(is_stuck(parse_process("s?(x: nat); 0")));
  EXPECT_TRUE(is_stuck(parse_process("request a[2](c). 0")));
  EXPECT_TRUE(is_stuck(parse_process("error")));
  EXPECT_TRUE(is_stuck(parse_process("if x > 1 then 0 else 0")));  // open condition
  EXPECT_FALSE(is_stuck(parse_process(open_system())));
}

TEST(Graph, InactionIsASingleTerminalNode) {
  ReductionGraph g = build_graph(parse_process("0"), 5);
  ASSERT_EQ(g.nodes.size(), 1u);
  EXPECT_EQ(g.edges.size(), 0u);
  EXPECT_TRUE(g.nodes[0].terminal());
  EXPECT_FALSE(g.has_error_edge);
}

TEST(Graph, ClosedTwoBuyersOpensWithLinkThenTitleChoice) {
  std::string closed = "(request a[3](ab, as, bs). " + std::string(kAliceOpen) +
                       ") | (accept a[2](ab, as, bs). " + seller_open() +
                       ") | (accept a[3](ab, as, bs). " + bob_open() + ")";
  ReductionGraph g = build_graph(parse_process(closed), 2);
  ASSERT_EQ(g.nodes[g.root].out.size(), 1u);
  const GraphEdge& link = g.edges[g.nodes[g.root].out[0]];
  EXPECT_EQ(link.label.rule, Rule::Link);
  EXPECT_EQ(link.label.probability, Rational(1));

  const GraphNode& linked = g.nodes[link.to];
  EXPECT_EQ(linked.depth, 1u);
  ASSERT_EQ(linked.out.size(), 3u);
  std::multiset<std::string> probs;
  for (size_t e : linked.out) {
    EXPECT_EQ(g.edges[e].label.rule, Rule::Com);
    probs.insert(to_fraction_string(g.edges[e].label.probability));
  }
  EXPECT_EQ(probs, (std::multiset<std::string>{"1/5", "3/10", "1/2"}));
  EXPECT_FALSE(g.has_error_edge);
}

TEST(Graph, RecursionFoldsBackToTheSameNode) {
  ReductionGraph g = build_graph(parse_process("mu X. if true then X else 0"), 50);
  EXPECT_EQ(g.nodes.size(), 2u);
  ASSERT_EQ(g.edges.size(), 2u);
  EXPECT_EQ(g.edges[0].label.rule, Rule::Call);
  EXPECT_EQ(g.edges[1].label.rule, Rule::IfT);
  EXPECT_EQ(g.edges[1].to, g.root);
}

TEST(Graph, DepthBoundLeavesFrontierUnexpanded) {
  std::string closed = "(request a[2](c). c!<1>; 0) | (accept a[2](c). c?(x: nat); 0)";
  ReductionGraph g = build_graph(parse_process(closed), 1);
  ASSERT_EQ(g.nodes.size(), 2u);
  EXPECT_TRUE(g.nodes[g.root].expanded);
  EXPECT_FALSE(g.nodes[1].expanded);
  EXPECT_FALSE(g.nodes[1].terminal());
}

TEST(Graph, ErrorNodeIsASink) {
  ReductionGraph g = build_graph(parse_process("0.4: s!<1>; 0 | s?(x: nat); 0"), 10);
  EXPECT_TRUE(g.has_error_edge);
  bool saw_error_node = false;
  for (const auto& n : g.nodes)
    if (n.is_error) {
      saw_error_node = true;
      EXPECT_EQ(n.out.size(), 0u);
      EXPECT_TRUE(n.terminal());
    }
  EXPECT_TRUE(saw_error_node);
}

TEST(Graph, DotExportNamesRulesAndProbabilities) {
  ProcPtr sys = parse_process(
      "(0.5: s!<1>; 0 + 0.5: s!<2>; 0) | s?(x: nat); 0 | t!<\"a\">; 0 | t?(y: string); 0");
  ReductionGraph g = build_graph(sys, 3);
  std::string dot = to_dot(g);
  EXPECT_NE(dot.find("digraph"), std::string::npos);
  EXPECT_NE(dot.find("Par2 p=1/2"), std::string::npos);
  EXPECT_EQ(dot.find("new "), std::string::npos) << "compact labels are hashes";
  std::string full = to_dot(g, true);
  EXPECT_NE(full.find("s?(x:nat)"), std::string::npos);
}
