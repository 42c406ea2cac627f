#include <gtest/gtest.h>

#include <functional>
#include <optional>
#include <string>

#include "pmps/parser.hpp"
#include "pmps/typing.hpp"

using namespace pmps;

namespace {

const char* kProtocol =
    "1 ->[0.7,0.9] 2 : as<string>. (2 ->1 1 : as<int>. 2 ->1 3 : bs<int>. 1 ->1 3 : "
    "ab<int>. (3 ->[0.18,0.22] 2 : bs{ ok1: 3 ->1 2 : bs<string>. 2 ->1 3 : bs<date>. "
    "end } + 3 ->[0.27,0.31] 2 : bs{ ok2: 3 ->1 2 : bs<string>. 2 ->1 3 : bs<date>. "
    "end } + 3 ->[0.45,0.52] 2 : bs{ quit: end }) ) + 1 ->[0.15,0.25] 2 : as<nat>. (2 "
    "->1 1 : as<int>. 2 ->1 3 : bs<int>. 1 ->1 3 : ab<int>. (3 ->[0.18,0.22] 2 : bs{ "
    "ok1: 3 ->1 2 : bs<string>. 2 ->1 3 : bs<date>. end } + 3 ->[0.27,0.31] 2 : bs{ "
    "ok2: 3 ->1 2 : bs<string>. 2 ->1 3 : bs<date>. end } + 3 ->[0.45,0.52] 2 : bs{ "
    "quit: end }) )";

std::string alice_body(const std::string& inner2, const std::string& inner3,
                       const std::string& p1, const std::string& p2, const std::string& p3) {
  return p1 + ": as!<\"War and Peace\">; as?(quote: nat); (" + inner2 + ")" +
         " + " + p2 + ": as!<\"The Art of War\">; as?(quote: nat); (" + inner3 + ")" +
         " + " + p3 + ": as!<0195014766>; as?(quote: nat); (" + inner3 + ")";
}

std::string alice_default() {
  return alice_body("0.5: ab!<quote/2>; 0 + 0.5: ab!<quote/3>; 0",
                    "0.4: ab!<quote/2>; 0 + 0.2: ab!<quote/3>; 0 + 0.4: ab!<quote/4>; 0",
                    "0.3", "0.5", "0.2");
}

// The same protocol admits a different shopper: other titles, other splits.
std::string alice_variant() {
  return "0.15: as!<\"Peter Pan\">; as?(quote: nat); ab!<quote/3>; 0"
         " + 0.65: as!<\"Robinson Crusoe\">; as?(quote: nat);"
         "   (0.35: ab!<quote/3>; 0 + 0.65: ab!<quote/4>; 0)"
         " + 0.2: as!<1593080115>; as?(quote: nat);"
         "   (0.45: ab!<quote/2>; 0 + 0.55: ab!<quote/4>; 0)";
}

std::string seller_tail() {
  return "bs >> { ok1: bs?(addr: string); bs!<\"2026-09-01\">; 0, "
         "ok2: bs?(addr: string); bs!<\"2026-09-01\">; 0, quit: 0 }";
}

std::string seller_quote() {
  return "0.6: as!<100>; bs!<100>; " + seller_tail() + " + 0.4: as!<80>; bs!<80>; " +
         seller_tail();
}

std::string seller_body() {
  return "as?(title: string); (" + seller_quote() + ") + as?(ISBN: nat); (" + seller_quote() +
         ")";
}

std::string bob_body(const std::string& p1, const std::string& p2, const std::string& p3) {
  return "bs?(quote: int); ab?(contrib: int); (" + p1 +
         ": bs <+ ok1; bs!<\"Paris\">; bs?(d: date); 0 + " + p2 +
         ": bs <+ ok2; bs!<\"London\">; bs?(d: date); 0 + " + p3 + ": bs <+ quit; 0)";
}

std::string closed_system(const std::string& alice, const std::string& bob) {
  return "(request a[3](ab,as,bs). (" + alice + ")) | (accept a[2](ab,as,bs). (" +
         seller_body() + ")) | (accept a[3](ab,as,bs). (" + bob + "))";
}

SortEnv gamma() {
  SortEnv g;
  g.names["a"] = parse_global(kProtocol);
  return g;
}

std::optional<TypeErrorKind> fails_with(const std::function<void()>& f) {
  try {
    f();
  } catch (const TypeError& e) {
    return e.kind;
  }
  return std::nullopt;
}

}  // namespace

TEST(Typing, ClosedGoldenSystemHasEmptyTyping) {
  ProcPtr p = parse_process(closed_system(alice_default(), bob_body("0.2", "0.3", "0.5")));
  TypeCheck tc = typecheck(gamma(), p);
  EXPECT_TRUE(tc.env.empty()) << env_key(tc.env);
  EXPECT_TRUE(tc.warnings.empty());
}

TEST(Typing, SecondShopperTypesAgainstTheSameProtocol) {
  ProcPtr p = parse_process(closed_system(alice_variant(), bob_body("0.2", "0.3", "0.5")));
  TypeCheck tc = typecheck(gamma(), p);
  EXPECT_TRUE(tc.env.empty()) << env_key(tc.env);
}

TEST(Typing, OpenCompositionMatchesTheDeclaredViews) {
  ProcPtr p = parse_process("(" + alice_default() + ") | (" + seller_body() + ") | (" +
                            bob_body("0.2", "0.3", "0.5") + ")");
  SessionEnv expected = session_env_of(parse_global(kProtocol), {"ab", "as", "bs"});
  TypeCheck tc = check_against(SortEnv{}, p, expected);
  EXPECT_TRUE(tc.warnings.empty());
  // One thread per participant; overlapping channel use knits them into one
  // entry, so the domain's channel vectors stay pairwise disjoint.
  ASSERT_EQ(tc.env.entries.size(), 1u);
  EXPECT_EQ(tc.env.entries.begin()->second.size(), 3u);
  EXPECT_EQ(normalize(tc.env).entries.size(), 1u);
}

TEST(Typing, MissummedInternalChoiceIsRejected) {
  ProcPtr p = parse_process(closed_system(
      alice_body("0.5: ab!<quote/2>; 0 + 0.5: ab!<quote/3>; 0",
                 "0.4: ab!<quote/2>; 0 + 0.2: ab!<quote/3>; 0 + 0.4: ab!<quote/4>; 0",
                 "0.3", "0.5", "0.3"),
      bob_body("0.2", "0.3", "0.5")));
  auto kind = fails_with([&] { typecheck(gamma(), p); });
  ASSERT_TRUE(kind.has_value());
  EXPECT_EQ(*kind, TypeErrorKind::ProbSum);
}

TEST(Typing, RebalancedChoiceWithinTheIntervalsIsAccepted) {
  ProcPtr p = parse_process(closed_system(
      alice_body("0.5: ab!<quote/2>; 0 + 0.5: ab!<quote/3>; 0",
                 "0.4: ab!<quote/2>; 0 + 0.2: ab!<quote/3>; 0 + 0.4: ab!<quote/4>; 0",
                 "0.5", "0.3", "0.2"),
      bob_body("0.2", "0.3", "0.5")));
  EXPECT_TRUE(typecheck(gamma(), p).env.empty());
}

TEST(Typing, ChoiceOutsideItsIntervalIsRejected) {
  ProcPtr p =
      parse_process(closed_system(alice_default(), bob_body("0.25", "0.25", "0.5")));
  auto kind = fails_with([&] { typecheck(gamma(), p); });
  ASSERT_TRUE(kind.has_value());
  EXPECT_EQ(*kind, TypeErrorKind::Interval);
}

TEST(Typing, WrongPayloadSortIsRejected) {
  std::string alice = "0.8: as!<true>; as?(quote: nat); ab!<quote/2>; 0"
                      " + 0.2: as!<0195014766>; as?(quote: nat); ab!<quote/2>; 0";
  ProcPtr p = parse_process(closed_system(alice, bob_body("0.2", "0.3", "0.5")));
  auto kind = fails_with([&] { typecheck(gamma(), p); });
  ASSERT_TRUE(kind.has_value());
  EXPECT_EQ(*kind, TypeErrorKind::Branches);
}

TEST(Typing, MissingOfferedLabelIsRejected) {
  std::string tail = "bs >> { ok1: bs?(addr: string); bs!<\"2026-09-01\">; 0, "
                     "ok2: bs?(addr: string); bs!<\"2026-09-01\">; 0 }";
  std::string quote = "0.6: as!<100>; bs!<100>; " + tail + " + 0.4: as!<80>; bs!<80>; " + tail;
  std::string seller = "as?(title: string); (" + quote + ") + as?(ISBN: nat); (" + quote + ")";
  ProcPtr p = parse_process("(request a[3](ab,as,bs). (" + alice_default() +
                            ")) | (accept a[2](ab,as,bs). (" + seller +
                            ")) | (accept a[3](ab,as,bs). (" + bob_body("0.2", "0.3", "0.5") +
                            "))");
  auto kind = fails_with([&] { typecheck(gamma(), p); });
  ASSERT_TRUE(kind.has_value());
  EXPECT_EQ(*kind, TypeErrorKind::Branches);
}

TEST(Typing, UnexercisedReceiveBranchOnlyWarns) {
  std::string seller = seller_body() + " + as?(flag: bool); 0";
  ProcPtr p = parse_process("(request a[3](ab,as,bs). (" + alice_default() +
                            ")) | (accept a[2](ab,as,bs). (" + seller +
                            ")) | (accept a[3](ab,as,bs). (" + bob_body("0.2", "0.3", "0.5") +
                            "))");
  TypeCheck tc = typecheck(gamma(), p);
  EXPECT_TRUE(tc.env.empty());
  ASSERT_EQ(tc.warnings.size(), 1u);
  EXPECT_NE(tc.warnings[0].find("never exercised"), std::string::npos) << tc.warnings[0];
}

TEST(Typing, UnboundVariableIsRejected) {
  auto kind = fails_with([&] { typecheck(SortEnv{}, parse_process("c!<x+1>; 0")); });
  ASSERT_TRUE(kind.has_value());
  EXPECT_EQ(*kind, TypeErrorKind::Unbound);
}

TEST(Typing, SessionEndpointSplitAcrossComponentsIsRejected) {
  SortEnv g;
  g.names["b"] = parse_global("1 ->1 2 : s<nat>. 2 ->1 1 : s<nat>. end");
  ProcPtr p = parse_process("request b[2](s). (s!<1>; 0 | s?(x: nat); 0)");
  auto kind = fails_with([&] { typecheck(g, p); });
  ASSERT_TRUE(kind.has_value());
  EXPECT_EQ(*kind, TypeErrorKind::Split);
}

TEST(Typing, ConditionalArmsMustUseSessionsAlike) {
  auto kind =
      fails_with([&] { typecheck(SortEnv{}, parse_process("if true then c!<1>; 0 else 0")); });
  ASSERT_TRUE(kind.has_value());
  EXPECT_EQ(*kind, TypeErrorKind::Branches);

  // Equal arms are fine even when both communicate.
  EXPECT_FALSE(fails_with([&] {
    typecheck(SortEnv{}, parse_process("if true then c!<1>; 0 else c!<1>; 0"));
  }));
}

TEST(Typing, RecursiveThreadsMatchARecursiveProtocol) {
  GlobalPtr g = parse_global("mu t. 1 ->1 2 : c<int>. t");
  ProcPtr p = parse_process("(mu X. c!<5>; X) | (mu Y. c?(x: int); Y)");
  TypeCheck tc = check_against(SortEnv{}, p, session_env_of(g, {"c"}));
  EXPECT_TRUE(tc.warnings.empty());
}

TEST(Typing, ErrorProcessHasNoType) {
  auto kind = fails_with([&] { typecheck(SortEnv{}, parse_process("error")); });
  ASSERT_TRUE(kind.has_value());
  EXPECT_EQ(*kind, TypeErrorKind::Shape);
}

TEST(Typing, EnvironmentIsStableUnderStructuralRearrangement) {
  std::string a = env_key(typecheck(SortEnv{}, parse_process("(c!<1>; 0 | 0)")).env);
  std::string b = env_key(typecheck(SortEnv{}, parse_process("c!<1>; 0")).env);
  EXPECT_EQ(a, b);

  std::string s1 = env_key(
      typecheck(SortEnv{}, parse_process("0.3: c!<1>; 0 + 0.7: c!<2>; 0")).env);
  std::string s2 = env_key(
      typecheck(SortEnv{}, parse_process("0.7: c!<2>; 0 + 0.3: c!<1>; 0")).env);
  EXPECT_EQ(s1, s2);
}

TEST(Typing, TypeReduceFindsBothOpeningExchanges) {
  SessionEnv env = session_env_of(parse_global(kProtocol), {"ab", "as", "bs"});
  auto reducts = type_reduce(env);
  ASSERT_EQ(reducts.size(), 2u);
  ProbInterval lo = reducts[0].first.lo < reducts[1].first.lo ? reducts[0].first
                                                              : reducts[1].first;
  ProbInterval hi = reducts[0].first.lo < reducts[1].first.lo ? reducts[1].first
                                                              : reducts[0].first;
  EXPECT_EQ(lo, (ProbInterval{Rational(3, 20), Rational(1, 4), true, true}));
  EXPECT_EQ(hi, (ProbInterval{Rational(7, 10), Rational(9, 10), true, true}));
  for (const auto& [delta, next] : reducts) {
    (void)delta;
    SessionEnv norm = normalize(next);
    ASSERT_EQ(norm.entries.size(), 1u);
    EXPECT_EQ(norm.entries.begin()->second.size(), 3u);
  }
}

TEST(Typing, TypeReduceHandlesDelegation) {
  LocalPtr carried = mkl(LRecv{"t", {{{Sort::Int}, lend()}}});
  LocalPtr after = mkl(LSend{"s", {{ProbInterval::point(Rational(1)), {Sort::Nat}, lend()}}});
  SessionEnv env;
  env.entries[{"s"}] = {{mkl(LDeleg{"s", {carried, 3}, after}), 1},
                        {mkl(LSessRecv{"s", {carried, 3}, mkl(LRecv{"s", {{{Sort::Nat}, lend()}}})}), 2}};
  auto reducts = type_reduce(env);
  ASSERT_EQ(reducts.size(), 1u);
  EXPECT_TRUE(reducts[0].first.is_point());
  EXPECT_EQ(reducts[0].first.lo, Rational(1));
  SessionEnv norm = normalize(reducts[0].second);
  ASSERT_EQ(norm.entries.size(), 1u);
  EXPECT_EQ(norm.entries.begin()->second.size(), 2u);
}

TEST(Typing, TypeReduceOnFinishedSessionsIsEmpty) {
  SessionEnv env;
  env.entries[{"s"}] = {{lend(), 1}, {lend(), 2}};
  EXPECT_TRUE(type_reduce(env).empty());
  EXPECT_TRUE(type_reduce(SessionEnv{}).empty());
}

TEST(Typing, DelegatingThreadsLeaveAWildcardEntry) {
  ProcPtr p = parse_process("s!!(t); 0 | s?" "?(u); u!<1>; 0");
  TypeCheck tc = typecheck(SortEnv{}, p);
  ASSERT_EQ(tc.env.entries.size(), 2u);  // the s pair plus the delegated vector
  auto reducts = type_reduce(tc.env);
  ASSERT_EQ(reducts.size(), 1u);
  EXPECT_EQ(reducts[0].first.lo, Rational(1));
}

TEST(Typing, NormalizeUnfoldsRecursionHeads) {
  SessionEnv a = typecheck(SortEnv{}, parse_process("mu X. c!<5>; X")).env;
  SessionEnv b = typecheck(SortEnv{}, parse_process("c!<5>; mu X. c!<5>; X")).env;
  EXPECT_EQ(env_key(normalize(a)), env_key(normalize(b)));
  EXPECT_NE(env_key(a), env_key(b));
}
