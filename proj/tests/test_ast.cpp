#include <gtest/gtest.h>

#include "pmps/ast.hpp"
#include "pmps/printer.hpp"

using namespace pmps;

namespace {

ProcPtr send1(const std::string& chan, ExprPtr e, ProcPtr cont) {
  return mk(PSend{chan, {SendBranch{Rational(1), {std::move(e)}, std::move(cont)}}});
}

ProcPtr recv1(const std::string& chan, const std::string& x, Sort s, ProcPtr cont) {
  return mk(PRecv{chan, {RecvBranch{{{x, s}}, std::move(cont)}}});
}

}  // namespace

TEST(Ast, ValueSorts) {
  EXPECT_EQ(primary_sort(Value{Int(5)}), Sort::Nat);
  EXPECT_EQ(primary_sort(Value{Int(-5)}), Sort::Int);
  EXPECT_EQ(primary_sort(Value{true}), Sort::Bool);
  EXPECT_EQ(primary_sort(Value{std::string("x")}), Sort::String);
  EXPECT_EQ(primary_sort(Value{SharedName{"a"}}), std::nullopt);

  EXPECT_TRUE(value_inhabits(Value{Int(5)}, Sort::Nat));
  EXPECT_TRUE(value_inhabits(Value{Int(5)}, Sort::Int));
  EXPECT_FALSE(value_inhabits(Value{Int(-5)}, Sort::Nat));
  EXPECT_TRUE(value_inhabits(Value{Int(-5)}, Sort::Int));
  EXPECT_FALSE(value_inhabits(Value{std::string("x")}, Sort::Int));
}

TEST(Ast, FreeNamesAndVars) {
  // as?(quote:int); 1: ab!<quote / 2>; 0
  auto p = recv1("as", "quote", Sort::Int,
                 send1("ab", mk_bin(BinOp::Div, mk_var("quote"), mk_val(Value{Int(2)})),
                       mk_inact()));
  EXPECT_EQ(free_names(p), (std::set<std::string>{"as", "ab"}));
  EXPECT_TRUE(free_vars(p).empty());

  auto body = send1("ab", mk_var("quote"), mk_inact());
  EXPECT_EQ(free_vars(body), (std::set<std::string>{"quote"}));

  auto hidden = mk(PHide{"ab", body});
  EXPECT_EQ(free_names(hidden), (std::set<std::string>{}));

  auto req = mk(PRequest{"a", 3, {"ab", "as"}, body});
  EXPECT_EQ(free_names(req), (std::set<std::string>{"a"}));
}

TEST(Ast, ValueSubstitutionReplacesFreeOccurrences) {
  auto body = send1("as", mk_bin(BinOp::Div, mk_var("ISBN"), mk_val(Value{Int(1000000)})),
                    mk_inact());
  auto subst = subst_values(body, {{"ISBN", Value{Int(195014766)}}});
  auto expected = send1(
      "as", mk_bin(BinOp::Div, mk_val(Value{Int(195014766)}), mk_val(Value{Int(1000000)})),
      mk_inact());
  EXPECT_TRUE(alpha_equal(subst, expected));
  EXPECT_TRUE(free_vars(subst).empty());
}

TEST(Ast, ValueSubstitutionRespectsShadowing) {
  // x is rebound by the receive; only the outer occurrence changes.
  auto p = mk_par(send1("c", mk_var("x"), mk_inact()),
                  recv1("c", "x", Sort::Nat, send1("d", mk_var("x"), mk_inact())));
  auto subst = subst_values(p, {{"x", Value{Int(7)}}});
  auto expected = mk_par(send1("c", mk_val(Value{Int(7)}), mk_inact()),
                         recv1("c", "x", Sort::Nat, send1("d", mk_var("x"), mk_inact())));
  EXPECT_TRUE(alpha_equal(subst, expected));
}

TEST(Ast, ValueSubstitutionAvoidsNameCapture) {
  // Substituting the shared name n under new n must rename the binder.
  auto p = mk(PHide{"n", send1("c", mk_var("x"), mk_inact())});
  auto subst = subst_values(p, {{"x", Value{SharedName{"n"}}}});
  auto* hide = as<PHide>(subst);
  ASSERT_NE(hide, nullptr);
  EXPECT_NE(hide->name, "n");
  auto* send = as<PSend>(hide->body);
  ASSERT_NE(send, nullptr);
  auto* val = std::get_if<EVal>(&send->branches[0].payload[0]->node);
  ASSERT_NE(val, nullptr);
  EXPECT_EQ(std::get<SharedName>(val->v).name, "n");
}

TEST(Ast, NameSubstitutionRenamesChannels) {
  auto p = recv1("as", "q", Sort::Int, send1("ab", mk_var("q"), mk_inact()));
  auto renamed = subst_names(p, {{"as", "s1"}, {"ab", "s2"}});
  auto expected = recv1("s1", "q", Sort::Int, send1("s2", mk_var("q"), mk_inact()));
  EXPECT_TRUE(alpha_equal(renamed, expected));
}

TEST(Ast, ProcVarSubstitutionUnfoldsRecursion) {
  // mu X. 1: c!<1>; X  unfolds to  1: c!<1>; mu X. 1: c!<1>; X
  auto loop = mk(PRec{"X", send1("c", mk_val(Value{Int(1)}), mk(PVar{"X"}))});
  auto* rec = as<PRec>(loop);
  auto unfolded = subst_proc_var(rec->body, "X", loop);
  auto expected = send1("c", mk_val(Value{Int(1)}), loop);
  EXPECT_TRUE(alpha_equal(unfolded, expected));
}

TEST(Ast, EvalDivisionTruncatesTowardZero) {
  ValueEnv env{{"quote", Value{Int(7)}}};
  auto e = mk_bin(BinOp::Div, mk_var("quote"), mk_val(Value{Int(2)}));
  EXPECT_EQ(std::get<Int>(eval_expr(e, env)), 3);

  env["quote"] = Value{Int(-7)};
  EXPECT_EQ(std::get<Int>(eval_expr(e, env)), -3);

  env["quote"] = Value{Int(195014766)};
  auto big = mk_bin(BinOp::Div, mk_var("quote"), mk_val(Value{Int(1000000)}));
  EXPECT_EQ(std::get<Int>(eval_expr(big, env)), 195);
}

TEST(Ast, EvalErrors) {
  EXPECT_THROW(eval_expr(mk_var("missing"), {}), EvalError);
  EXPECT_THROW(
      eval_expr(mk_bin(BinOp::Div, mk_val(Value{Int(1)}), mk_val(Value{Int(0)})), {}),
      EvalError);
  EXPECT_THROW(
      eval_expr(mk_bin(BinOp::Add, mk_val(Value{true}), mk_val(Value{Int(1)})), {}),
      EvalError);
  EXPECT_THROW(
      eval_expr(mk_bin(BinOp::Eq, mk_val(Value{Int(1)}), mk_val(Value{std::string("1")})), {}),
      EvalError);
}

TEST(Ast, EvalBooleansAndComparisons) {
  auto lt = mk_bin(BinOp::Lt, mk_val(Value{Int(2)}), mk_val(Value{Int(3)}));
  EXPECT_EQ(std::get<bool>(eval_expr(lt, {})), true);
  auto conj = mk_bin(BinOp::And, lt, mk_not(mk_val(Value{false})));
  EXPECT_EQ(std::get<bool>(eval_expr(conj, {})), true);
  auto eq = mk_bin(BinOp::Eq, mk_val(Value{std::string("a")}), mk_val(Value{std::string("a")}));
  EXPECT_EQ(std::get<bool>(eval_expr(eq, {})), true);
}

TEST(Ast, AlphaEqualityIgnoresBinderNames) {
  auto p = recv1("as", "x", Sort::Int, send1("ab", mk_var("x"), mk_inact()));
  auto q = recv1("as", "y", Sort::Int, send1("ab", mk_var("y"), mk_inact()));
  EXPECT_TRUE(alpha_equal(p, q));
  EXPECT_EQ(canonical_key(p), canonical_key(q));

  auto r = recv1("as", "x", Sort::Int, send1("ab", mk_val(Value{Int(1)}), mk_inact()));
  EXPECT_FALSE(alpha_equal(p, r));

  // free occurrences keep their identity
  auto f1 = send1("ab", mk_var("x"), mk_inact());
  auto f2 = send1("ab", mk_var("y"), mk_inact());
  EXPECT_FALSE(alpha_equal(f1, f2));
}

TEST(Ast, PrinterProducesConcreteSyntax) {
  auto p = mk(PSend{
      "as",
      {SendBranch{Rational(3, 10), {mk_val(Value{std::string("War and Peace")})}, mk_inact()},
       SendBranch{Rational(7, 10), {mk_val(Value{Int(195014766)})}, mk_inact()}}});
  EXPECT_EQ(print_process(p), "0.3: as!<\"War and Peace\">; 0 + 0.7: as!<195014766>; 0");

  auto q = recv1("as", "quote", Sort::Int,
                 send1("ab", mk_bin(BinOp::Div, mk_var("quote"), mk_val(Value{Int(2)})),
                       mk_inact()));
  EXPECT_EQ(print_process(q), "as?(quote:int); ab!<quote / 2>; 0");

  auto b = mk(PBranch{"bs", {BranchArm{"ok", mk_inact()}, BranchArm{"quit", mk_error()}}});
  EXPECT_EQ(print_process(b), "bs >> { ok: 0, quit: error }");
}
