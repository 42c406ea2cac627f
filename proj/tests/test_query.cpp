#include "pmps/query.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pmps/parser.hpp"
#include "pmps/semantics.hpp"

using namespace pmps;

namespace {

// Open two-buyers composition: session channels free, every node is resolved
// by plain synchronization, so the whole run space is purely probabilistic.
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

const char* kGoldenQuery =
    "sent(as,\"The Art of War\") | sent(as,0195014766) & chose(ab, quote/3)";

ReductionGraph golden_graph() { return build_graph(parse_process(open_system()), 20); }

// Independent oracle: walk every maximal path, multiply edge probabilities,
// and sum the ones whose accumulated matches satisfy the predicate.
struct Brute {
  Rational prob{0};
  size_t paths = 0;
};

Brute brute_force(const ReductionGraph& g, const TracePredicate& pred) {
  Brute b;
  std::function<void(size_t, Rational, uint64_t)> walk = [&](size_t n, Rational acc,
                                                             uint64_t mask) {
    if (g.nodes[n].out.empty()) {
      ++b.paths;
      if (pred.eval(mask)) b.prob = b.prob + acc;
      return;
    }
    for (size_t e : g.nodes[n].out) {
      const GraphEdge& ed = g.edges[e];
      walk(ed.to, acc * ed.label.probability, mask | pred.match(ed.label));
    }
  };
  walk(g.root, Rational{1}, 0);
  return b;
}

}  // namespace

TEST(Query, GoldenQueryIsSevenFiftieths) {
  ReductionGraph g = golden_graph();
  QueryResult r = event_probability(g, parse_predicate(kGoldenQuery));
  EXPECT_TRUE(r.is_exact);
  EXPECT_EQ(r.nondeterministic_nodes, 0u);
  EXPECT_EQ(r.lo, Rational(7, 50));
  EXPECT_EQ(r.hi, Rational(7, 50));
}

TEST(Query, ConnectivesShareOnePrecedenceLevel) {
  ReductionGraph g = golden_graph();
  // Unparenthesized, & and | associate left; the explicit groupings witness
  // both readings.
  QueryResult plain = event_probability(g, parse_predicate(kGoldenQuery));
  QueryResult left = event_probability(
      g, parse_predicate("(sent(as,\"The Art of War\") | sent(as,0195014766)) & "
                         "chose(ab, quote/3)"));
  QueryResult right = event_probability(
      g, parse_predicate("sent(as,\"The Art of War\") | (sent(as,0195014766) & "
                         "chose(ab, quote/3))"));
  EXPECT_EQ(plain.lo, left.lo);
  EXPECT_EQ(left.lo, Rational(7, 50));
  EXPECT_EQ(right.lo, Rational(27, 50));
}

TEST(Query, ConstantsAreCertainties) {
  ReductionGraph g = golden_graph();
  QueryResult t = event_probability(g, parse_predicate("true"));
  QueryResult f = event_probability(g, parse_predicate("false"));
  EXPECT_EQ(t.lo, Rational(1));
  EXPECT_EQ(f.lo, Rational(0));
  EXPECT_GE(t.paths_counted, 1u);
}

TEST(Query, ComplementSumsToOne) {
  ReductionGraph g = golden_graph();
  Rational q = event_probability(g, parse_predicate(kGoldenQuery)).lo;
  Rational nq =
      event_probability(g, parse_predicate(std::string("!(") + kGoldenQuery + ")")).lo;
  EXPECT_EQ(q + nq, Rational(1));
}

TEST(Query, HalfAndQuarterContributionsTieForMostProbable) {
  ReductionGraph g = golden_graph();
  std::vector<TracePredicate> classes;
  classes.push_back(parse_predicate("sent(as,\"War and Peace\") & chose(ab, quote/2)"));
  classes.push_back(parse_predicate("sent(as,\"War and Peace\") & chose(ab, quote/3)"));
  classes.push_back(parse_predicate(
      "(sent(as,\"The Art of War\") | sent(as,0195014766)) & chose(ab, quote/2)"));
  classes.push_back(parse_predicate(kGoldenQuery));
  classes.push_back(parse_predicate(
      "(sent(as,\"The Art of War\") | sent(as,0195014766)) & chose(ab, quote/4)"));
  MostProbable mp = most_probable(g, classes);
  EXPECT_EQ(mp.winner, 2u);
  EXPECT_EQ(mp.probability, Rational(7, 25));
  EXPECT_EQ(mp.ties, (std::vector<size_t>{2, 4}));
  ASSERT_EQ(mp.probabilities.size(), 5u);
  EXPECT_EQ(mp.probabilities[0], Rational(3, 20));
  EXPECT_EQ(mp.probabilities[3], Rational(7, 50));
}

TEST(Query, NonPartitioningClassifierIsRejected) {
  ReductionGraph g = golden_graph();
  std::vector<TracePredicate> classes;
  classes.push_back(parse_predicate("sent(as,\"War and Peace\") & chose(ab, quote/2)"));
  try {
    most_probable(g, classes);
    FAIL() << "a single 3/20 class cannot partition the runs";
  } catch (const QueryError& e) {
    EXPECT_NE(std::string(e.what()).find("3/20"), std::string::npos) << e.what();
  }
}

TEST(Query, SingleTrueClassPartitions) {
  ReductionGraph g = golden_graph();
  std::vector<TracePredicate> classes;
  classes.push_back(parse_predicate("true"));
  MostProbable mp = most_probable(g, classes);
  EXPECT_EQ(mp.winner, 0u);
  EXPECT_EQ(mp.probability, Rational(1));
  EXPECT_EQ(mp.ties, (std::vector<size_t>{0}));
}

TEST(Query, BruteForceEnumerationAgrees) {
  ReductionGraph g = golden_graph();
  for (const char* q : {kGoldenQuery, "chose(ab, quote/2)", "label(bs, quit)",
                        "sent(bs, 80) & !label(bs, ok2)", "on(ab) & true"}) {
    TracePredicate pred = parse_predicate(q);
    QueryResult r = event_probability(g, pred);
    Brute b = brute_force(g, pred);
    EXPECT_EQ(r.lo, b.prob) << q;
    EXPECT_EQ(r.paths_counted, b.paths) << q;
  }
}

TEST(Query, CompetingReceiversMakeTheResultARange) {
  ProcPtr p = parse_process(
      "c!<5>; 0 | c?(x: nat); 0 | c?(y: nat); (d!<1>; 0 | d?(z: nat); 0)");
  ReductionGraph g = build_graph(p, 10);
  QueryResult r = event_probability(g, parse_predicate("on(d)"));
  EXPECT_FALSE(r.is_exact);
  EXPECT_EQ(r.nondeterministic_nodes, 1u);
  EXPECT_EQ(r.lo, Rational(0));
  EXPECT_EQ(r.hi, Rational(1));

  // Coinciding bounds still report a range: the certainty is scheduler-made.
  QueryResult t = event_probability(g, parse_predicate("true"));
  EXPECT_FALSE(t.is_exact);
  EXPECT_EQ(t.lo, Rational(1));
  EXPECT_EQ(t.hi, Rational(1));
}

TEST(Query, CyclicGraphsAreRejected) {
  ReductionGraph g = build_graph(parse_process("mu X. if true then X else 0"), 10);
  try {
    event_probability(g, parse_predicate("true"));
    FAIL() << "a cyclic graph has no maximal-path distribution";
  } catch (const QueryError& e) {
    EXPECT_NE(std::string(e.what()).find("depth"), std::string::npos) << e.what();
  }
}

TEST(Query, ErroredGraphsAreRejected) {
  ReductionGraph g = build_graph(parse_process("0.5: c!<1>; 0 | c?(x: nat); 0"), 10);
  ASSERT_TRUE(g.has_error_edge);
  try {
    event_probability(g, parse_predicate("true"));
    FAIL() << "error transitions poison every query";
  } catch (const QueryError& e) {
    EXPECT_NE(std::string(e.what()).find("error"), std::string::npos) << e.what();
  }
}

TEST(Query, LinkInitiatorIsObservable) {
  ProcPtr p = parse_process(
      "(request b[2](c). c!<7>; 0) | (accept b[2](c). c?(x: nat); 0)");
  ReductionGraph g = build_graph(p, 10);
  EXPECT_EQ(event_probability(g, parse_predicate("from(1)")).lo, Rational(1));
  EXPECT_EQ(event_probability(g, parse_predicate("from(2)")).lo, Rational(0));
  EXPECT_EQ(event_probability(g, parse_predicate("on(b)")).lo, Rational(1));
}

TEST(Query, ChannelObservationSeesEveryRule) {
  ReductionGraph g = golden_graph();
  EXPECT_EQ(event_probability(g, parse_predicate("on(bs)")).lo, Rational(1));
  EXPECT_EQ(event_probability(g, parse_predicate("on(zz)")).lo, Rational(0));
  // Labels ride on the session channel, values on the payload.
  EXPECT_EQ(event_probability(g, parse_predicate("label(bs, ok1)")).lo, Rational(1, 5));
  EXPECT_EQ(event_probability(g, parse_predicate("sent(bs, \"Paris\")")).lo,
            Rational(1, 5));
}

TEST(Query, InactionHasExactlyOnePath) {
  ReductionGraph g = build_graph(parse_process("0"), 5);
  QueryResult r = event_probability(g, parse_predicate("true"));
  EXPECT_EQ(r.lo, Rational(1));
  EXPECT_EQ(r.paths_counted, 1u);
}

TEST(Query, MalformedPredicatesAreRejected) {
  EXPECT_THROW(parse_predicate("seen(as, 1)"), QueryError);
  EXPECT_THROW(parse_predicate("sent(as, 1"), QueryError);
  EXPECT_THROW(parse_predicate("sent(as, 1) &"), QueryError);
  EXPECT_THROW(parse_predicate("sent(as, 1) sent(ab, 2)"), QueryError);
  EXPECT_THROW(parse_predicate("from(alice)"), QueryError);
  EXPECT_THROW(parse_predicate("sent(as)"), QueryError);
}

TEST(Query, MonteCarloIsReproducible) {
  ProcPtr p = parse_process(open_system());
  TracePredicate pred = parse_predicate(kGoldenQuery);
  MonteCarlo a = monte_carlo(p, pred, 200, 42);
  MonteCarlo b = monte_carlo(p, pred, 200, 42);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.stderr_, b.stderr_);
  EXPECT_EQ(a.divergent, b.divergent);
  EXPECT_EQ(a.divergent, 0u);

  MonteCarlo one = monte_carlo(p, pred, 1, 7);
  EXPECT_TRUE(one.estimate == 0.0 || one.estimate == 1.0);

  MonteCarlo sure = monte_carlo(p, parse_predicate("true"), 50, 3);
  EXPECT_EQ(sure.estimate, 1.0);
  EXPECT_EQ(sure.stderr_, 0.0);
}

TEST(Query, MonteCarloTracksTheExactAnswer) {
  ProcPtr p = parse_process(open_system());
  MonteCarlo mc = monte_carlo(p, parse_predicate(kGoldenQuery), 10000, 20260817);
  EXPECT_EQ(mc.divergent, 0u);
  EXPECT_LT(std::abs(mc.estimate - 0.14), 0.02);
  EXPECT_GT(mc.stderr_, 0.0);
}
