#include <gtest/gtest.h>

#include <string>

#include "pmps/parser.hpp"
#include "pmps/projection.hpp"

using namespace pmps;

namespace {

const char* kGlobal =
    "1 ->[0.7,0.9] 2 : as<string>. (2 ->1 1 : as<int>. 2 ->1 3 : bs<int>. 1 ->1 3 : "
    "ab<int>. (3 ->[0.18,0.22] 2 : bs{ ok1: 3 ->1 2 : bs<string>. 2 ->1 3 : bs<string>. "
    "end } + 3 ->[0.27,0.31] 2 : bs{ ok2: 3 ->1 2 : bs<string>. 2 ->1 3 : bs<string>. "
    "end } + 3 ->[0.45,0.52] 2 : bs{ quit: end }) ) + 1 ->[0.15,0.25] 2 : as<nat>. (2 "
    "->1 1 : as<int>. 2 ->1 3 : bs<int>. 1 ->1 3 : ab<int>. (3 ->[0.18,0.22] 2 : bs{ "
    "ok1: 3 ->1 2 : bs<string>. 2 ->1 3 : bs<string>. end } + 3 ->[0.27,0.31] 2 : bs{ "
    "ok2: 3 ->1 2 : bs<string>. 2 ->1 3 : bs<string>. end } + 3 ->[0.45,0.52] 2 : bs{ "
    "quit: end }) )";

GlobalPtr golden() { return parse_global(kGlobal); }

}  // namespace

TEST(Projection, GoldenOntoBuyerOne) {
  auto r = project(golden(), 1);
  ASSERT_TRUE(r.ok()) << r.error;
  LocalPtr expect = parse_local(
      "[0.7,0.9]: as!<string>. as?(int). 1: ab!<int>. end "
      "+ [0.15,0.25]: as!<nat>. as?(int). 1: ab!<int>. end");
  EXPECT_TRUE(alpha_equal_local(r.type, expect)) << print_local(r.type);
}

TEST(Projection, GoldenOntoSeller) {
  auto r = project(golden(), 2);
  ASSERT_TRUE(r.ok()) << r.error;
  LocalPtr expect = parse_local(
      "as?(string). (1: as!<int>. 1: bs!<int>. bs & { ok1: bs?(string). 1: bs!<string>. "
      "end, ok2: bs?(string). 1: bs!<string>. end, quit: end }) "
      "+ as?(nat). (1: as!<int>. 1: bs!<int>. bs & { ok1: bs?(string). 1: bs!<string>. "
      "end, ok2: bs?(string). 1: bs!<string>. end, quit: end })");
  EXPECT_TRUE(alpha_equal_local(r.type, expect)) << print_local(r.type);
}

TEST(Projection, GoldenOntoBob) {
  auto r = project(golden(), 3);
  ASSERT_TRUE(r.ok()) << r.error;
  LocalPtr expect = parse_local(
      "bs?(int). ab?(int). bs (+) { [0.18,0.22]: ok1: 1: bs!<string>. bs?(string). end, "
      "[0.27,0.31]: ok2: 1: bs!<string>. bs?(string). end, [0.45,0.52]: quit: end }");
  EXPECT_TRUE(alpha_equal_local(r.type, expect)) << print_local(r.type);
}

TEST(Projection, ThirdPartyDisagreementUndefined) {
  GlobalPtr g = parse_global(
      "1 ->0.5 2 : c<int>. 3 ->1 1 : d<int>. end + 1 ->0.5 2 : c<string>. 3 ->1 1 : "
      "d<string>. end");
  auto r = project(g, 3);
  EXPECT_FALSE(r.ok());
  EXPECT_NE(r.error.find("participant 3"), std::string::npos);
  EXPECT_TRUE(project(g, 1).ok());
  EXPECT_TRUE(project(g, 2).ok());
}

TEST(Projection, ReceiverDuplicateSorts) {
  // same sort tuple, same continuation: the receiver folds them into one branch
  GlobalPtr ok = parse_global("1 ->0.6 2 : c<int>. end + 1 ->0.4 2 : c<int>. end");
  auto r = project(ok, 2);
  ASSERT_TRUE(r.ok()) << r.error;
  auto* recv = as_l<LRecv>(r.type);
  ASSERT_NE(recv, nullptr);
  EXPECT_EQ(recv->branches.size(), 1u);

  // same sort tuple, different continuations: reception would be ambiguous
  GlobalPtr bad = parse_global(
      "1 ->0.6 2 : c<int>. 2 ->1 1 : d<int>. end + 1 ->0.4 2 : c<int>. 2 ->1 1 : "
      "d<string>. end");
  auto r2 = project(bad, 2);
  EXPECT_FALSE(r2.ok());
  EXPECT_NE(r2.error.find("equal sort tuples"), std::string::npos);
}

TEST(Projection, ParallelMembership) {
  GlobalPtr g = parse_global("(1 ->1 2 : c<int>. end) , (3 ->1 4 : d<bool>. end)");
  auto r1 = project(g, 1);
  ASSERT_TRUE(r1.ok());
  EXPECT_NE(as_l<LSend>(r1.type), nullptr);
  auto r4 = project(g, 4);
  ASSERT_TRUE(r4.ok());
  EXPECT_NE(as_l<LRecv>(r4.type), nullptr);
  auto r5 = project(g, 5);
  ASSERT_TRUE(r5.ok());
  EXPECT_NE(as_l<LEnd>(r5.type), nullptr);

  GlobalPtr both = parse_global("(1 ->1 2 : c<int>. end) , (1 ->1 3 : d<bool>. end)");
  auto rb = project(both, 1);
  EXPECT_FALSE(rb.ok());
  EXPECT_NE(rb.error.find("both sides"), std::string::npos);
}

TEST(Projection, RecursionCollapsesForOutsiders) {
  GlobalPtr g = parse_global("mu t. 1 ->1 2 : c<int>. t");
  auto r3 = project(g, 3);
  ASSERT_TRUE(r3.ok());
  EXPECT_NE(as_l<LEnd>(r3.type), nullptr);

  auto r1 = project(g, 1);
  ASSERT_TRUE(r1.ok());
  EXPECT_TRUE(alpha_equal_local(r1.type, parse_local("mu t. 1: c!<int>. t")));
}

TEST(Projection, DelegationSidesAndBystander) {
  GlobalPtr g = parse_global("1 ->1 2 : c<end @ 3>. 1 ->1 3 : d<int>. end");
  auto r1 = project(g, 1);
  ASSERT_TRUE(r1.ok());
  auto* del = as_l<LDeleg>(r1.type);
  ASSERT_NE(del, nullptr);
  EXPECT_EQ(del->carried.role, 3);
  auto r2 = project(g, 2);
  ASSERT_TRUE(r2.ok());
  EXPECT_NE(as_l<LSessRecv>(r2.type), nullptr);
  auto r3 = project(g, 3);
  ASSERT_TRUE(r3.ok());
  EXPECT_NE(as_l<LRecv>(r3.type), nullptr);
}

TEST(Simplify, MergesEqualBranchesGlobally) {
  GlobalPtr g = parse_global("2 ->0.6 1 : as<int>. end + 2 ->0.4 1 : as<int>. end");
  GlobalPtr s = simplify_global(g);
  auto* v = as_g<GValues>(s);
  ASSERT_NE(v, nullptr);
  ASSERT_EQ(v->branches.size(), 1u);
  EXPECT_EQ(v->branches[0].delta, ProbInterval::point(Rational(1)));

  // the golden type has no two branches with equal payloads, so it is a fixed point
  EXPECT_TRUE(alpha_equal_global(simplify_global(golden()), golden()));
}

TEST(Simplify, MergesIntervalsAndNestedBranches) {
  GlobalPtr g = parse_global(
      "1 ->[0.2,0.3] 2 : c<int>. (1 ->0.5 2 : d<bool>. end + 1 ->0.5 2 : d<bool>. end) "
      "+ 1 ->[0.6,0.8] 2 : c<int>. 1 ->1 2 : d<bool>. end");
  GlobalPtr s = simplify_global(g);
  auto* v = as_g<GValues>(s);
  ASSERT_NE(v, nullptr);
  // inner branches merge first, making the outer branches equal
  ASSERT_EQ(v->branches.size(), 1u);
  EXPECT_EQ(v->branches[0].delta, (ProbInterval{Rational(Int(4), Int(5)), Rational(1)}));

  LocalPtr t = parse_local("0.5: ab!<int>. end + 0.5: ab!<int>. end");
  LocalPtr st = simplify_local(t);
  EXPECT_TRUE(alpha_equal_local(st, parse_local("1: ab!<int>. end")));
}

TEST(Simplify, MergesLabelSums) {
  GlobalPtr g = parse_global(
      "3 ->[0.1,0.2] 2 : bs{ ok: end } + 3 ->[0.2,0.3] 2 : bs{ ok: end } + 3 "
      "->[0.5,0.7] 2 : bs{ no: end }");
  GlobalPtr s = simplify_global(g);
  auto* b = as_g<GBranching>(s);
  ASSERT_NE(b, nullptr);
  ASSERT_EQ(b->branches.size(), 2u);
  EXPECT_EQ(b->branches[0].delta, (ProbInterval{Rational(Int(3), Int(10)), Rational(Int(1), Int(2))}));
}

TEST(WellFormed, AcceptsGolden) {
  auto res = well_formed(golden());
  EXPECT_TRUE(res.ok) << (res.errors.empty() ? "" : res.errors[0]);
}

TEST(WellFormed, RejectsBadShapes) {
  auto errs = [](const char* src) {
    auto res = well_formed(parse_global(src));
    EXPECT_FALSE(res.ok) << src;
    return res.errors.empty() ? std::string() : res.errors[0];
  };

  EXPECT_NE(errs("1 ->1 1 : c<int>. end").find("itself"), std::string::npos);
  EXPECT_NE(errs("1 ->1 3 : c<int>. end").find("contiguous"), std::string::npos);
  EXPECT_NE(errs("mu t. t").find("unguarded"), std::string::npos);
  EXPECT_NE(errs("mu t. 1 ->1 2 : c<int>. u").find("unbound"), std::string::npos);

  // interval sums that cannot reach probability 1
  EXPECT_NE(errs("1 ->[0.1,0.3] 2 : c<int>. end + 1 ->[0.2,0.4] 2 : c<bool>. end")
                .find("sum to 1"),
            std::string::npos);
  EXPECT_NE(errs("1 ->[0.6,0.8] 2 : c<int>. end + 1 ->[0.5,0.7] 2 : c<bool>. end")
                .find("sum to 1"),
            std::string::npos);
  // the lower bounds reach 1 only through open endpoints
  EXPECT_NE(errs("1 ->(0.5,0.6] 2 : c<int>. end + 1 ->[0.5,0.6] 2 : c<bool>. end")
                .find("sum to 1"),
            std::string::npos);
  // a participant on both sides of a parallel composition
  EXPECT_NE(errs("(1 ->1 2 : c<int>. end) , (1 ->1 3 : d<int>. end)").find("both sides"),
            std::string::npos);
  // third-party projection failure surfaces as a well-formedness error
  EXPECT_NE(errs("1 ->0.5 2 : c<int>. 3 ->1 1 : d<int>. end + 1 ->0.5 2 : c<string>. 3 "
                 "->1 1 : d<string>. end")
                .find("projection onto 3"),
            std::string::npos);
}

TEST(WellFormed, BoundarySumsAreExact) {
  // closed endpoints summing to exactly 1 are admissible
  auto ok = well_formed(
      parse_global("1 ->[0.5,0.6] 2 : c<int>. end + 1 ->[0.4,0.5] 2 : c<bool>. end"));
  EXPECT_TRUE(ok.ok);
  auto ok2 = well_formed(parse_global("1 ->0.5 2 : c<int>. end + 1 ->0.5 2 : c<bool>. end"));
  EXPECT_TRUE(ok2.ok);
}
