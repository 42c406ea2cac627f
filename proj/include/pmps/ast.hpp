#ifndef PMPS_AST_HPP
#define PMPS_AST_HPP

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pmps/rational.hpp"

namespace pmps {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

enum class Sort { Bool, Nat, Int, String };

inline std::string to_string(Sort s) {
  switch (s) {
    case Sort::Bool: return "bool";
    case Sort::Nat: return "nat";
    case Sort::Int: return "int";
    case Sort::String: return "string";
  }
  return "?";
}

inline std::optional<Sort> sort_from_name(std::string_view s) {
  if (s == "bool") return Sort::Bool;
  if (s == "nat") return Sort::Nat;
  if (s == "int") return Sort::Int;
  if (s == "string") return Sort::String;
  // Calendar dates ride on strings: they need equality and transport, not
  // arithmetic, so a separate runtime representation would buy nothing.
  if (s == "date") return Sort::String;
  return std::nullopt;
}

struct SharedName {
  std::string name;
  friend bool operator==(const SharedName&, const SharedName&) = default;
  friend bool operator<(const SharedName& a, const SharedName& b) { return a.name < b.name; }
};

// Runtime values: shared names, booleans, integers (naturals are the
// non-negative ones), strings.
using Value = std::variant<SharedName, bool, Int, std::string>;

// The sort a value carries on its own. Shared names have none: the sort
// universe has no name sorts, so names are not sendable payloads.
inline std::optional<Sort> primary_sort(const Value& v) {
  return std::visit(overloaded{
                        [](const SharedName&) -> std::optional<Sort> { return std::nullopt; },
                        [](bool) -> std::optional<Sort> { return Sort::Bool; },
                        [](const Int& n) -> std::optional<Sort> {
                          return n < 0 ? Sort::Int : Sort::Nat;
                        },
                        [](const std::string&) -> std::optional<Sort> { return Sort::String; },
                    },
                    v);
}

// Naturals inhabit int as well; everything else matches only its own sort.
inline bool value_inhabits(const Value& v, Sort s) {
  auto p = primary_sort(v);
  if (!p) return false;
  return *p == s || (*p == Sort::Nat && s == Sort::Int);
}

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class BinOp { Add, Sub, Mul, Div, And, Or, Eq, Ne, Lt, Le, Gt, Ge };

struct EVal {
  Value v;
};
struct EVar {
  std::string name;
};
struct ENot {
  ExprPtr e;
};
struct EBin {
  BinOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};

struct Expr {
  std::variant<EVal, EVar, ENot, EBin> node;
};

inline ExprPtr mk_val(Value v) { return std::make_shared<Expr>(Expr{EVal{std::move(v)}}); }
inline ExprPtr mk_var(std::string n) { return std::make_shared<Expr>(Expr{EVar{std::move(n)}}); }
inline ExprPtr mk_not(ExprPtr e) { return std::make_shared<Expr>(Expr{ENot{std::move(e)}}); }
inline ExprPtr mk_bin(BinOp op, ExprPtr l, ExprPtr r) {
  return std::make_shared<Expr>(Expr{EBin{op, std::move(l), std::move(r)}});
}

struct Process;
using ProcPtr = std::shared_ptr<const Process>;

struct SendBranch {
  Rational prob;
  std::vector<ExprPtr> payload;
  ProcPtr cont;
  // The payload as first written, before value substitution rewrites it.
  // Queries match branch identity against this text, so substitution and
  // unfolding must carry it along unchanged. Empty means "print the payload
  // as it stands now".
  std::string payload_src;
};
struct RecvBranch {
  std::vector<std::pair<std::string, Sort>> binders;
  ProcPtr cont;
};
struct SelectBranch {
  Rational prob;
  std::string label;
  ProcPtr cont;
};
struct BranchArm {
  std::string label;
  ProcPtr cont;
};

// session request: the initiator side, expecting n participants in total
struct PRequest {
  std::string shared;
  int parties = 0;
  std::vector<std::string> chans;
  ProcPtr body;
};
// session accept as participant `role`
struct PAccept {
  std::string shared;
  int role = 0;
  std::vector<std::string> chans;
  ProcPtr body;
};
struct PSend {
  std::string chan;
  std::vector<SendBranch> branches;
};
struct PRecv {
  std::string chan;
  std::vector<RecvBranch> branches;
};
// channel delegation, c!!(t...)
struct PDeleg {
  std::string chan;
  std::vector<std::string> sent;
  ProcPtr cont;
};
// session reception, c??(t...): binds the received channels
struct PSessRecv {
  std::string chan;
  std::vector<std::string> bound;
  ProcPtr cont;
};
struct PSelect {
  std::string chan;
  std::vector<SelectBranch> branches;
};
struct PBranch {
  std::string chan;
  std::vector<BranchArm> arms;
};
struct PIf {
  ExprPtr cond;
  ProcPtr then_p;
  ProcPtr else_p;
};
struct PPar {
  ProcPtr left;
  ProcPtr right;
};
struct PHide {
  std::string name;
  ProcPtr body;
};
struct PRec {
  std::string var;
  ProcPtr body;
};
struct PVar {
  std::string var;
};
struct PInact {};
// sink the error reduction rules step to
struct PError {};

struct Process {
  std::variant<PRequest, PAccept, PSend, PRecv, PDeleg, PSessRecv, PSelect, PBranch, PIf,
               PPar, PHide, PRec, PVar, PInact, PError>
      node;
};

template <class T>
ProcPtr mk(T node) {
  return std::make_shared<Process>(Process{std::move(node)});
}
inline ProcPtr mk_inact() { return mk(PInact{}); }
inline ProcPtr mk_error() { return mk(PError{}); }
inline ProcPtr mk_par(ProcPtr l, ProcPtr r) { return mk(PPar{std::move(l), std::move(r)}); }

template <class T>
const T* as(const ProcPtr& p) {
  return p ? std::get_if<T>(&p->node) : nullptr;
}

// ---- free identifiers ----------------------------------------------------
//
// Shared names and session channels share one namespace: hiding binds either.

inline void free_names_expr(const ExprPtr& e, std::set<std::string>& out) {
  std::visit(overloaded{
                 [&](const EVal& v) {
                   if (auto* n = std::get_if<SharedName>(&v.v)) out.insert(n->name);
                 },
                 [&](const EVar&) {},
                 [&](const ENot& n) { free_names_expr(n.e, out); },
                 [&](const EBin& b) {
                   free_names_expr(b.lhs, out);
                   free_names_expr(b.rhs, out);
                 },
             },
             e->node);
}

inline void free_names_into(const ProcPtr& p, std::set<std::string>& out);

inline std::set<std::string> free_names(const ProcPtr& p) {
  std::set<std::string> out;
  free_names_into(p, out);
  return out;
}

inline void free_names_into(const ProcPtr& p, std::set<std::string>& out) {
  std::visit(
      overloaded{
          [&](const PRequest& r) {
            out.insert(r.shared);
            std::set<std::string> body;
            free_names_into(r.body, body);
            for (const auto& c : r.chans) body.erase(c);
            out.insert(body.begin(), body.end());
          },
          [&](const PAccept& a) {
            out.insert(a.shared);
            std::set<std::string> body;
            free_names_into(a.body, body);
            for (const auto& c : a.chans) body.erase(c);
            out.insert(body.begin(), body.end());
          },
          [&](const PSend& s) {
            out.insert(s.chan);
            for (const auto& b : s.branches) {
              for (const auto& e : b.payload) free_names_expr(e, out);
              free_names_into(b.cont, out);
            }
          },
          [&](const PRecv& r) {
            out.insert(r.chan);
            for (const auto& b : r.branches) free_names_into(b.cont, out);
          },
          [&](const PDeleg& d) {
            out.insert(d.chan);
            for (const auto& t : d.sent) out.insert(t);
            free_names_into(d.cont, out);
          },
          [&](const PSessRecv& s) {
            out.insert(s.chan);
            std::set<std::string> body;
            free_names_into(s.cont, body);
            for (const auto& c : s.bound) body.erase(c);
            out.insert(body.begin(), body.end());
          },
          [&](const PSelect& s) {
            out.insert(s.chan);
            for (const auto& b : s.branches) free_names_into(b.cont, out);
          },
          [&](const PBranch& b) {
            out.insert(b.chan);
            for (const auto& a : b.arms) free_names_into(a.cont, out);
          },
          [&](const PIf& i) {
            free_names_expr(i.cond, out);
            free_names_into(i.then_p, out);
            free_names_into(i.else_p, out);
          },
          [&](const PPar& pp) {
            free_names_into(pp.left, out);
            free_names_into(pp.right, out);
          },
          [&](const PHide& h) {
            std::set<std::string> body;
            free_names_into(h.body, body);
            body.erase(h.name);
            out.insert(body.begin(), body.end());
          },
          [&](const PRec& r) { free_names_into(r.body, out); },
          [&](const PVar&) {},
          [&](const PInact&) {},
          [&](const PError&) {},
      },
      p->node);
}

inline void free_vars_expr(const ExprPtr& e, std::set<std::string>& out) {
  std::visit(overloaded{
                 [&](const EVal&) {},
                 [&](const EVar& v) { out.insert(v.name); },
                 [&](const ENot& n) { free_vars_expr(n.e, out); },
                 [&](const EBin& b) {
                   free_vars_expr(b.lhs, out);
                   free_vars_expr(b.rhs, out);
                 },
             },
             e->node);
}

inline void free_vars_into(const ProcPtr& p, std::set<std::string>& out) {
  std::visit(overloaded{
                 [&](const PRequest& r) { free_vars_into(r.body, out); },
                 [&](const PAccept& a) { free_vars_into(a.body, out); },
                 [&](const PSend& s) {
                   for (const auto& b : s.branches) {
                     for (const auto& e : b.payload) free_vars_expr(e, out);
                     free_vars_into(b.cont, out);
                   }
                 },
                 [&](const PRecv& r) {
                   for (const auto& b : r.branches) {
                     std::set<std::string> body;
                     free_vars_into(b.cont, body);
                     for (const auto& [x, s] : b.binders) body.erase(x);
                     out.insert(body.begin(), body.end());
                   }
                 },
                 [&](const PDeleg& d) { free_vars_into(d.cont, out); },
                 [&](const PSessRecv& s) { free_vars_into(s.cont, out); },
                 [&](const PSelect& s) {
                   for (const auto& b : s.branches) free_vars_into(b.cont, out);
                 },
                 [&](const PBranch& b) {
                   for (const auto& a : b.arms) free_vars_into(a.cont, out);
                 },
                 [&](const PIf& i) {
                   free_vars_expr(i.cond, out);
                   free_vars_into(i.then_p, out);
                   free_vars_into(i.else_p, out);
                 },
                 [&](const PPar& pp) {
                   free_vars_into(pp.left, out);
                   free_vars_into(pp.right, out);
                 },
                 [&](const PHide& h) { free_vars_into(h.body, out); },
                 [&](const PRec& r) { free_vars_into(r.body, out); },
                 [&](const PVar&) {},
                 [&](const PInact&) {},
                 [&](const PError&) {},
             },
             p->node);
}

inline std::set<std::string> free_vars(const ProcPtr& p) {
  std::set<std::string> out;
  free_vars_into(p, out);
  return out;
}

inline std::string fresh_name(const std::string& base, const std::set<std::string>& avoid) {
  if (!avoid.count(base)) return base;
  for (int i = 1;; ++i) {
    std::string cand = base + "_" + std::to_string(i);
    if (!avoid.count(cand)) return cand;
  }
}

// ---- substitution ---------------------------------------------------------

using ValueSubst = std::map<std::string, Value>;
using NameSubst = std::map<std::string, std::string>;

inline ExprPtr subst_expr(const ExprPtr& e, const ValueSubst& sub) {
  return std::visit(overloaded{
                        [&](const EVal&) { return e; },
                        [&](const EVar& v) {
                          auto it = sub.find(v.name);
                          return it == sub.end() ? e : mk_val(it->second);
                        },
                        [&](const ENot& n) { return mk_not(subst_expr(n.e, sub)); },
                        [&](const EBin& b) {
                          return mk_bin(b.op, subst_expr(b.lhs, sub), subst_expr(b.rhs, sub));
                        },
                    },
                    e->node);
}

namespace detail {

inline std::set<std::string> value_subst_names(const ValueSubst& sub) {
  std::set<std::string> names;
  for (const auto& [k, v] : sub)
    if (auto* n = std::get_if<SharedName>(&v)) names.insert(n->name);
  return names;
}

}  // namespace detail

inline ProcPtr subst_values(const ProcPtr& p, const ValueSubst& sub);
inline ProcPtr subst_names(const ProcPtr& p, const NameSubst& sub);

// Replaces free value variables. Name binders are renamed when a substituted
// shared-name payload would otherwise be captured.
inline ProcPtr subst_values(const ProcPtr& p, const ValueSubst& sub) {
  if (sub.empty()) return p;
  auto captured = detail::value_subst_names(sub);
  return std::visit(
      overloaded{
          [&](const PRequest& r) -> ProcPtr {
            PRequest out = r;
            NameSubst ren;
            for (auto& c : out.chans)
              if (captured.count(c)) {
                auto avoid = free_names(r.body);
                avoid.insert(captured.begin(), captured.end());
                auto f = fresh_name(c, avoid);
                ren[c] = f;
                c = f;
              }
            out.body = subst_values(ren.empty() ? r.body : subst_names(r.body, ren), sub);
            return mk(out);
          },
          [&](const PAccept& a) -> ProcPtr {
            PAccept out = a;
            NameSubst ren;
            for (auto& c : out.chans)
              if (captured.count(c)) {
                auto avoid = free_names(a.body);
                avoid.insert(captured.begin(), captured.end());
                auto f = fresh_name(c, avoid);
                ren[c] = f;
                c = f;
              }
            out.body = subst_values(ren.empty() ? a.body : subst_names(a.body, ren), sub);
            return mk(out);
          },
          [&](const PSend& s) -> ProcPtr {
            PSend out{s.chan, {}};
            for (const auto& b : s.branches) {
              SendBranch nb{b.prob, {}, subst_values(b.cont, sub), b.payload_src};
              for (const auto& e : b.payload) nb.payload.push_back(subst_expr(e, sub));
              out.branches.push_back(std::move(nb));
            }
            return mk(out);
          },
          [&](const PRecv& r) -> ProcPtr {
            PRecv out{r.chan, {}};
            for (const auto& b : r.branches) {
              ValueSubst inner = sub;
              for (const auto& [x, srt] : b.binders) inner.erase(x);
              out.branches.push_back(RecvBranch{b.binders, subst_values(b.cont, inner)});
            }
            return mk(out);
          },
          [&](const PDeleg& d) -> ProcPtr {
            return mk(PDeleg{d.chan, d.sent, subst_values(d.cont, sub)});
          },
          [&](const PSessRecv& s) -> ProcPtr {
            PSessRecv out = s;
            NameSubst ren;
            for (auto& c : out.bound)
              if (captured.count(c)) {
                auto avoid = free_names(s.cont);
                avoid.insert(captured.begin(), captured.end());
                auto f = fresh_name(c, avoid);
                ren[c] = f;
                c = f;
              }
            out.cont = subst_values(ren.empty() ? s.cont : subst_names(s.cont, ren), sub);
            return mk(out);
          },
          [&](const PSelect& s) -> ProcPtr {
            PSelect out{s.chan, {}};
            for (const auto& b : s.branches)
              out.branches.push_back(SelectBranch{b.prob, b.label, subst_values(b.cont, sub)});
            return mk(out);
          },
          [&](const PBranch& br) -> ProcPtr {
            PBranch out{br.chan, {}};
            for (const auto& a : br.arms)
              out.arms.push_back(BranchArm{a.label, subst_values(a.cont, sub)});
            return mk(out);
          },
          [&](const PIf& i) -> ProcPtr {
            return mk(PIf{subst_expr(i.cond, sub), subst_values(i.then_p, sub),
                          subst_values(i.else_p, sub)});
          },
          [&](const PPar& pp) -> ProcPtr {
            return mk_par(subst_values(pp.left, sub), subst_values(pp.right, sub));
          },
          [&](const PHide& h) -> ProcPtr {
            if (captured.count(h.name)) {
              auto avoid = free_names(h.body);
              avoid.insert(captured.begin(), captured.end());
              auto f = fresh_name(h.name, avoid);
              return mk(PHide{f, subst_values(subst_names(h.body, {{h.name, f}}), sub)});
            }
            return mk(PHide{h.name, subst_values(h.body, sub)});
          },
          [&](const PRec& r) -> ProcPtr { return mk(PRec{r.var, subst_values(r.body, sub)}); },
          [&](const PVar&) -> ProcPtr { return p; },
          [&](const PInact&) -> ProcPtr { return p; },
          [&](const PError&) -> ProcPtr { return p; },
      },
      p->node);
}

inline ExprPtr subst_expr_names(const ExprPtr& e, const NameSubst& sub) {
  return std::visit(overloaded{
                        [&](const EVal& v) -> ExprPtr {
                          if (auto* n = std::get_if<SharedName>(&v.v)) {
                            auto it = sub.find(n->name);
                            if (it != sub.end()) return mk_val(SharedName{it->second});
                          }
                          return e;
                        },
                        [&](const EVar&) -> ExprPtr { return e; },
                        [&](const ENot& n) -> ExprPtr {
                          return mk_not(subst_expr_names(n.e, sub));
                        },
                        [&](const EBin& b) -> ExprPtr {
                          return mk_bin(b.op, subst_expr_names(b.lhs, sub),
                                        subst_expr_names(b.rhs, sub));
                        },
                    },
                    e->node);
}

// Renames free names and channels. Binders shadow; a binder colliding with a
// substitution target is renamed first so nothing is captured.
inline ProcPtr subst_names(const ProcPtr& p, const NameSubst& sub) {
  if (sub.empty()) return p;
  std::set<std::string> targets;
  for (const auto& [k, v] : sub) targets.insert(v);
  auto rename_binders = [&](std::vector<std::string> chans, const ProcPtr& body, NameSubst inner)
      -> std::pair<std::vector<std::string>, ProcPtr> {
    NameSubst ren;
    for (auto& c : chans) {
      inner.erase(c);
      if (targets.count(c)) {
        auto avoid = free_names(body);
        avoid.insert(targets.begin(), targets.end());
        for (const auto& cc : chans) avoid.insert(cc);
        auto f = fresh_name(c, avoid);
        ren[c] = f;
        c = f;
      }
    }
    ProcPtr b = ren.empty() ? body : subst_names(body, ren);
    return {std::move(chans), subst_names(b, inner)};
  };
  auto lookup = [&](const std::string& n) {
    auto it = sub.find(n);
    return it == sub.end() ? n : it->second;
  };
  return std::visit(
      overloaded{
          [&](const PRequest& r) -> ProcPtr {
            auto [chans, body] = rename_binders(r.chans, r.body, sub);
            return mk(PRequest{lookup(r.shared), r.parties, std::move(chans), body});
          },
          [&](const PAccept& a) -> ProcPtr {
            auto [chans, body] = rename_binders(a.chans, a.body, sub);
            return mk(PAccept{lookup(a.shared), a.role, std::move(chans), body});
          },
          [&](const PSend& s) -> ProcPtr {
            PSend out{lookup(s.chan), {}};
            for (const auto& b : s.branches) {
              SendBranch nb{b.prob, {}, subst_names(b.cont, sub), b.payload_src};
              for (const auto& e : b.payload) nb.payload.push_back(subst_expr_names(e, sub));
              out.branches.push_back(std::move(nb));
            }
            return mk(out);
          },
          [&](const PRecv& r) -> ProcPtr {
            PRecv out{lookup(r.chan), {}};
            for (const auto& b : r.branches)
              out.branches.push_back(RecvBranch{b.binders, subst_names(b.cont, sub)});
            return mk(out);
          },
          [&](const PDeleg& d) -> ProcPtr {
            PDeleg out{lookup(d.chan), {}, subst_names(d.cont, sub)};
            for (const auto& t : d.sent) out.sent.push_back(lookup(t));
            return mk(out);
          },
          [&](const PSessRecv& s) -> ProcPtr {
            auto [chans, body] = rename_binders(s.bound, s.cont, sub);
            return mk(PSessRecv{lookup(s.chan), std::move(chans), body});
          },
          [&](const PSelect& s) -> ProcPtr {
            PSelect out{lookup(s.chan), {}};
            for (const auto& b : s.branches)
              out.branches.push_back(SelectBranch{b.prob, b.label, subst_names(b.cont, sub)});
            return mk(out);
          },
          [&](const PBranch& br) -> ProcPtr {
            PBranch out{lookup(br.chan), {}};
            for (const auto& a : br.arms)
              out.arms.push_back(BranchArm{a.label, subst_names(a.cont, sub)});
            return mk(out);
          },
          [&](const PIf& i) -> ProcPtr {
            return mk(PIf{subst_expr_names(i.cond, sub), subst_names(i.then_p, sub),
                          subst_names(i.else_p, sub)});
          },
          [&](const PPar& pp) -> ProcPtr {
            return mk_par(subst_names(pp.left, sub), subst_names(pp.right, sub));
          },
          [&](const PHide& h) -> ProcPtr {
            NameSubst inner = sub;
            inner.erase(h.name);
            if (targets.count(h.name)) {
              auto avoid = free_names(h.body);
              avoid.insert(targets.begin(), targets.end());
              auto f = fresh_name(h.name, avoid);
              return mk(PHide{f, subst_names(subst_names(h.body, {{h.name, f}}), inner)});
            }
            return mk(PHide{h.name, subst_names(h.body, inner)});
          },
          [&](const PRec& r) -> ProcPtr { return mk(PRec{r.var, subst_names(r.body, sub)}); },
          [&](const PVar&) -> ProcPtr { return p; },
          [&](const PInact&) -> ProcPtr { return p; },
          [&](const PError&) -> ProcPtr { return p; },
      },
      p->node);
}

// Replaces the free process variable `var` by `rep` (one-level recursion
// unfolding). Name binders shadowing free names of `rep` are renamed.
inline ProcPtr subst_proc_var(const ProcPtr& p, const std::string& var, const ProcPtr& rep) {
  auto rep_names = free_names(rep);
  std::function<ProcPtr(const ProcPtr&)> go = [&](const ProcPtr& q) -> ProcPtr {
    return std::visit(
        overloaded{
            [&](const PRequest& r) -> ProcPtr {
              PRequest out = r;
              NameSubst ren;
              for (auto& c : out.chans)
                if (rep_names.count(c)) {
                  auto avoid = free_names(r.body);
                  avoid.insert(rep_names.begin(), rep_names.end());
                  auto f = fresh_name(c, avoid);
                  ren[c] = f;
                  c = f;
                }
              out.body = go(ren.empty() ? r.body : subst_names(r.body, ren));
              return mk(out);
            },
            [&](const PAccept& a) -> ProcPtr {
              PAccept out = a;
              NameSubst ren;
              for (auto& c : out.chans)
                if (rep_names.count(c)) {
                  auto avoid = free_names(a.body);
                  avoid.insert(rep_names.begin(), rep_names.end());
                  auto f = fresh_name(c, avoid);
                  ren[c] = f;
                  c = f;
                }
              out.body = go(ren.empty() ? a.body : subst_names(a.body, ren));
              return mk(out);
            },
            [&](const PSend& s) -> ProcPtr {
              PSend out{s.chan, {}};
              for (const auto& b : s.branches)
                out.branches.push_back(SendBranch{b.prob, b.payload, go(b.cont), b.payload_src});
              return mk(out);
            },
            [&](const PRecv& r) -> ProcPtr {
              PRecv out{r.chan, {}};
              for (const auto& b : r.branches)
                out.branches.push_back(RecvBranch{b.binders, go(b.cont)});
              return mk(out);
            },
            [&](const PDeleg& d) -> ProcPtr {
              return mk(PDeleg{d.chan, d.sent, go(d.cont)});
            },
            [&](const PSessRecv& s) -> ProcPtr {
              PSessRecv out = s;
              NameSubst ren;
              for (auto& c : out.bound)
                if (rep_names.count(c)) {
                  auto avoid = free_names(s.cont);
                  avoid.insert(rep_names.begin(), rep_names.end());
                  auto f = fresh_name(c, avoid);
                  ren[c] = f;
                  c = f;
                }
              out.cont = go(ren.empty() ? s.cont : subst_names(s.cont, ren));
              return mk(out);
            },
            [&](const PSelect& s) -> ProcPtr {
              PSelect out{s.chan, {}};
              for (const auto& b : s.branches)
                out.branches.push_back(SelectBranch{b.prob, b.label, go(b.cont)});
              return mk(out);
            },
            [&](const PBranch& br) -> ProcPtr {
              PBranch out{br.chan, {}};
              for (const auto& a : br.arms) out.arms.push_back(BranchArm{a.label, go(a.cont)});
              return mk(out);
            },
            [&](const PIf& i) -> ProcPtr { return mk(PIf{i.cond, go(i.then_p), go(i.else_p)}); },
            [&](const PPar& pp) -> ProcPtr { return mk_par(go(pp.left), go(pp.right)); },
            [&](const PHide& h) -> ProcPtr {
              if (rep_names.count(h.name)) {
                auto avoid = free_names(h.body);
                avoid.insert(rep_names.begin(), rep_names.end());
                auto f = fresh_name(h.name, avoid);
                return mk(PHide{f, go(subst_names(h.body, {{h.name, f}}))});
              }
              return mk(PHide{h.name, go(h.body)});
            },
            [&](const PRec& r) -> ProcPtr {
              if (r.var == var) return q;  // shadowed
              return mk(PRec{r.var, go(r.body)});
            },
            [&](const PVar& v) -> ProcPtr { return v.var == var ? rep : q; },
            [&](const PInact&) -> ProcPtr { return q; },
            [&](const PError&) -> ProcPtr { return q; },
        },
        q->node);
  };
  return go(p);
}

// ---- expression evaluation -------------------------------------------------

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using ValueEnv = std::map<std::string, Value>;

inline Value eval_expr(const ExprPtr& e, const ValueEnv& env) {
  auto numeric = [](const Value& v) -> const Int& {
    if (auto* n = std::get_if<Int>(&v)) return *n;
    throw EvalError("numeric operand expected");
  };
  auto boolean = [](const Value& v) -> bool {
    if (auto* b = std::get_if<bool>(&v)) return *b;
    throw EvalError("boolean operand expected");
  };
  return std::visit(
      overloaded{
          [&](const EVal& v) -> Value { return v.v; },
          [&](const EVar& v) -> Value {
            auto it = env.find(v.name);
            if (it == env.end()) throw EvalError("unbound variable " + v.name);
            return it->second;
          },
          [&](const ENot& n) -> Value { return !boolean(eval_expr(n.e, env)); },
          [&](const EBin& b) -> Value {
            Value l = eval_expr(b.lhs, env);
            Value r = eval_expr(b.rhs, env);
            switch (b.op) {
              case BinOp::Add: return numeric(l) + numeric(r);
              case BinOp::Sub: return numeric(l) - numeric(r);
              case BinOp::Mul: return numeric(l) * numeric(r);
              case BinOp::Div: {
                const Int& d = numeric(r);
                if (d == 0) throw EvalError("division by zero");
                return numeric(l) / d;  // truncates toward zero
              }
              case BinOp::And: return boolean(l) && boolean(r);
              case BinOp::Or: return boolean(l) || boolean(r);
              case BinOp::Eq:
              case BinOp::Ne: {
                if (l.index() != r.index()) throw EvalError("comparison across sorts");
                bool eq = l == r;
                return b.op == BinOp::Eq ? eq : !eq;
              }
              case BinOp::Lt: return numeric(l) < numeric(r);
              case BinOp::Le: return numeric(l) <= numeric(r);
              case BinOp::Gt: return numeric(l) > numeric(r);
              case BinOp::Ge: return numeric(l) >= numeric(r);
            }
            throw EvalError("unknown operator");
          },
      },
      e->node);
}

}  // namespace pmps

#endif
