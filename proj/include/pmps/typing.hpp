#ifndef PMPS_TYPING_HPP
#define PMPS_TYPING_HPP

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pmps/ast.hpp"
#include "pmps/interval.hpp"
#include "pmps/projection.hpp"
#include "pmps/rational.hpp"
#include "pmps/types.hpp"

namespace pmps {

enum class TypeErrorKind {
  ProbSum,    // probabilities of an internal choice do not sum to 1
  Interval,   // a probability falls outside the interval the type allows
  Shape,      // process and type disagree structurally
  Split,      // session channels cross a parallel or delegation boundary
  Branches,   // branch sets do not line up (labels or sort tuples)
  Unbound,    // unbound variable, shared name, or process variable
  Arity,      // participant or channel count mismatch at a session binder
  Recursion,  // recursion is unguarded or spans several sessions
};

class TypeError : public std::runtime_error {
 public:
  TypeErrorKind kind;
  TypeError(TypeErrorKind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// Sorts for free value variables plus the protocols of free shared names.
struct SortEnv {
  std::map<std::string, Sort> vars;
  std::map<std::string, GlobalPtr> names;
};

// Channel vectors mapped to the located types of the threads still using
// them. Keys are sorted; a synthesized entry is keyed by the channels its
// threads actually touch, so it may name a subset of the declared vector.
struct SessionEnv {
  std::map<std::vector<std::string>, std::vector<LocatedType>> entries;

  bool empty() const { return entries.empty(); }
};

struct TypeCheck {
  SessionEnv env;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string key_of_located(const LocatedType& m) {
  std::string s = m.type ? canonical_key_local(m.type) : "*";
  s += '@';
  s += std::to_string(m.role);
  return s;
}

inline void sort_family(std::vector<LocatedType>& fam) {
  std::sort(fam.begin(), fam.end(), [](const LocatedType& a, const LocatedType& b) {
    return key_of_located(a) < key_of_located(b);
  });
}

}  // namespace detail

// Canonical rendering used wherever two environments must be compared.
inline std::string env_key(const SessionEnv& env) {
  std::string out;
  for (const auto& [key, fam] : env.entries) {
    for (const auto& c : key) {
      out += c;
      out += ',';
    }
    out += ':';
    std::vector<std::string> ms;
    ms.reserve(fam.size());
    for (const auto& m : fam) ms.push_back(detail::key_of_located(m));
    std::sort(ms.begin(), ms.end());
    for (const auto& m : ms) {
      out += m;
      out += '|';
    }
    out += '\n';
  }
  return out;
}

namespace detail {

// ---- local type rewriting ----------------------------------------------------

inline LocalPtr rename_local(const LocalPtr& t, const std::map<std::string, std::string>& ren);

inline LocatedType rename_located(const LocatedType& m,
                                  const std::map<std::string, std::string>& ren) {
  return {m.type ? rename_local(m.type, ren) : nullptr, m.role};
}

inline LocalPtr rename_local(const LocalPtr& t, const std::map<std::string, std::string>& ren) {
  auto ch = [&](const std::string& c) {
    auto it = ren.find(c);
    return it == ren.end() ? c : it->second;
  };
  if (auto* n = as_l<LSend>(t)) {
    LSend out{ch(n->chan), {}};
    for (const auto& b : n->branches) out.branches.push_back({b.delta, b.sorts, rename_local(b.cont, ren)});
    return mkl(std::move(out));
  }
  if (auto* n = as_l<LRecv>(t)) {
    LRecv out{ch(n->chan), {}};
    for (const auto& b : n->branches) out.branches.push_back({b.sorts, rename_local(b.cont, ren)});
    return mkl(std::move(out));
  }
  if (auto* n = as_l<LDeleg>(t))
    return mkl(LDeleg{ch(n->chan), rename_located(n->carried, ren), rename_local(n->cont, ren)});
  if (auto* n = as_l<LSessRecv>(t))
    return mkl(LSessRecv{ch(n->chan), rename_located(n->carried, ren), rename_local(n->cont, ren)});
  if (auto* n = as_l<LSelect>(t)) {
    LSelect out{ch(n->chan), {}};
    for (const auto& b : n->branches) out.branches.push_back({b.delta, b.label, rename_local(b.cont, ren)});
    return mkl(std::move(out));
  }
  if (auto* n = as_l<LBranch>(t)) {
    LBranch out{ch(n->chan), {}};
    for (const auto& a : n->arms) out.arms.push_back({a.label, rename_local(a.cont, ren)});
    return mkl(std::move(out));
  }
  if (auto* n = as_l<LRec>(t)) return mkl(LRec{n->var, rename_local(n->body, ren)});
  return t;  // LVar, LEnd
}

inline LocalPtr subst_tvar(const LocalPtr& t, const std::string& var, const LocalPtr& rep) {
  if (auto* v = as_l<LVar>(t)) return v->var == var ? rep : t;
  if (auto* r = as_l<LRec>(t)) {
    if (r->var == var) return t;  // shadowed
    return mkl(LRec{r->var, subst_tvar(r->body, var, rep)});
  }
  if (auto* n = as_l<LSend>(t)) {
    LSend out{n->chan, {}};
    for (const auto& b : n->branches) out.branches.push_back({b.delta, b.sorts, subst_tvar(b.cont, var, rep)});
    return mkl(std::move(out));
  }
  if (auto* n = as_l<LRecv>(t)) {
    LRecv out{n->chan, {}};
    for (const auto& b : n->branches) out.branches.push_back({b.sorts, subst_tvar(b.cont, var, rep)});
    return mkl(std::move(out));
  }
  if (auto* n = as_l<LDeleg>(t))
    return mkl(LDeleg{n->chan, n->carried, subst_tvar(n->cont, var, rep)});
  if (auto* n = as_l<LSessRecv>(t))
    return mkl(LSessRecv{n->chan, n->carried, subst_tvar(n->cont, var, rep)});
  if (auto* n = as_l<LSelect>(t)) {
    LSelect out{n->chan, {}};
    for (const auto& b : n->branches) out.branches.push_back({b.delta, b.label, subst_tvar(b.cont, var, rep)});
    return mkl(std::move(out));
  }
  if (auto* n = as_l<LBranch>(t)) {
    LBranch out{n->chan, {}};
    for (const auto& a : n->arms) out.arms.push_back({a.label, subst_tvar(a.cont, var, rep)});
    return mkl(std::move(out));
  }
  return t;  // LEnd
}

// Unfolds top-level recursion until the head is a communication (or the
// guardedness cap trips, in which case the type is returned as it stands).
inline LocalPtr unfold_head(LocalPtr t) {
  for (int i = 0; i < 64 && t; ++i) {
    auto* r = as_l<LRec>(t);
    if (!r) return t;
    t = subst_tvar(r->body, r->var, t);
  }
  return t;
}

inline bool uses_tvar(const LocalPtr& t, const std::string& var) {
  if (!t) return false;
  if (auto* v = as_l<LVar>(t)) return v->var == var;
  if (auto* r = as_l<LRec>(t)) return r->var != var && uses_tvar(r->body, var);
  if (auto* n = as_l<LSend>(t)) {
    for (const auto& b : n->branches)
      if (uses_tvar(b.cont, var)) return true;
    return false;
  }
  if (auto* n = as_l<LRecv>(t)) {
    for (const auto& b : n->branches)
      if (uses_tvar(b.cont, var)) return true;
    return false;
  }
  if (auto* n = as_l<LDeleg>(t)) return uses_tvar(n->cont, var);
  if (auto* n = as_l<LSessRecv>(t)) return uses_tvar(n->cont, var);
  if (auto* n = as_l<LSelect>(t)) {
    for (const auto& b : n->branches)
      if (uses_tvar(b.cont, var)) return true;
    return false;
  }
  if (auto* n = as_l<LBranch>(t)) {
    for (const auto& a : n->arms)
      if (uses_tvar(a.cont, var)) return true;
    return false;
  }
  return false;
}

inline std::string head_word(const LocalPtr& t) {
  if (!t || as_l<LEnd>(t)) return "end";
  if (auto* n = as_l<LSend>(t)) return "a send on " + n->chan;
  if (auto* n = as_l<LRecv>(t)) return "a receive on " + n->chan;
  if (auto* n = as_l<LDeleg>(t)) return "a delegation on " + n->chan;
  if (auto* n = as_l<LSessRecv>(t)) return "a session receive on " + n->chan;
  if (auto* n = as_l<LSelect>(t)) return "a selection on " + n->chan;
  if (auto* n = as_l<LBranch>(t)) return "an offer on " + n->chan;
  if (as_l<LRec>(t)) return "a recursion";
  return "a recursion variable";
}

inline std::string sorts_word(const std::vector<Sort>& ss) {
  std::string out = "(";
  for (size_t i = 0; i < ss.size(); ++i) {
    if (i) out += ",";
    out += to_string(ss[i]);
  }
  return out + ")";
}

// Splits one thread's interleaved usage into the actions on `inside` and the
// actions off it. Fails when a choice would have to carry information across
// the boundary, since the two halves must then stay one thread.
[[noreturn]] inline void split_fail(const std::string& why) {
  throw TypeError(TypeErrorKind::Split, why);
}

inline std::pair<LocalPtr, LocalPtr> split_local(const LocalPtr& t,
                                                 const std::set<std::string>& inside) {
  if (!t || as_l<LEnd>(t)) return {nullptr, nullptr};
  std::set<std::string> used = local_chans(t);
  if (used.empty()) return {nullptr, t};  // a bare recursion variable stays put
  bool any_in = false, any_out = false;
  for (const auto& c : used) (inside.count(c) ? any_in : any_out) = true;
  if (!any_out) return {t, nullptr};
  if (!any_in) return {nullptr, t};
  if (as_l<LRec>(t)) split_fail("a recursion interleaves several sessions");

  auto demand_equal = [&](std::vector<LocalPtr>& sides) -> LocalPtr {
    std::string fk = sides.front() ? canonical_key_local(sides.front()) : "";
    for (const auto& s : sides) {
      std::string k = s ? canonical_key_local(s) : "";
      if (k != fk) split_fail("a choice spans several sessions and cannot be split");
    }
    return sides.front();
  };

  if (auto* n = as_l<LSend>(t)) {
    bool on = inside.count(n->chan) > 0;
    LSend kept{n->chan, {}};
    std::vector<LocalPtr> other;
    for (const auto& b : n->branches) {
      auto [in_part, out_part] = split_local(b.cont, inside);
      kept.branches.push_back({b.delta, b.sorts, on ? in_part : out_part});
      other.push_back(on ? out_part : in_part);
    }
    LocalPtr off = demand_equal(other);
    for (auto& b : kept.branches)
      if (!b.cont) b.cont = lend();
    LocalPtr keptp = mkl(std::move(kept));
    return on ? std::pair{keptp, off} : std::pair{off, keptp};
  }
  if (auto* n = as_l<LRecv>(t)) {
    bool on = inside.count(n->chan) > 0;
    LRecv kept{n->chan, {}};
    std::vector<LocalPtr> other;
    for (const auto& b : n->branches) {
      auto [in_part, out_part] = split_local(b.cont, inside);
      kept.branches.push_back({b.sorts, on ? in_part : out_part});
      other.push_back(on ? out_part : in_part);
    }
    LocalPtr off = demand_equal(other);
    for (auto& b : kept.branches)
      if (!b.cont) b.cont = lend();
    LocalPtr keptp = mkl(std::move(kept));
    return on ? std::pair{keptp, off} : std::pair{off, keptp};
  }
  if (auto* n = as_l<LSelect>(t)) {
    bool on = inside.count(n->chan) > 0;
    LSelect kept{n->chan, {}};
    std::vector<LocalPtr> other;
    for (const auto& b : n->branches) {
      auto [in_part, out_part] = split_local(b.cont, inside);
      kept.branches.push_back({b.delta, b.label, on ? in_part : out_part});
      other.push_back(on ? out_part : in_part);
    }
    LocalPtr off = demand_equal(other);
    for (auto& b : kept.branches)
      if (!b.cont) b.cont = lend();
    LocalPtr keptp = mkl(std::move(kept));
    return on ? std::pair{keptp, off} : std::pair{off, keptp};
  }
  if (auto* n = as_l<LBranch>(t)) {
    bool on = inside.count(n->chan) > 0;
    LBranch kept{n->chan, {}};
    std::vector<LocalPtr> other;
    for (const auto& a : n->arms) {
      auto [in_part, out_part] = split_local(a.cont, inside);
      kept.arms.push_back({a.label, on ? in_part : out_part});
      other.push_back(on ? out_part : in_part);
    }
    LocalPtr off = demand_equal(other);
    for (auto& a : kept.arms)
      if (!a.cont) a.cont = lend();
    LocalPtr keptp = mkl(std::move(kept));
    return on ? std::pair{keptp, off} : std::pair{off, keptp};
  }
  if (auto* n = as_l<LDeleg>(t)) {
    bool on = inside.count(n->chan) > 0;
    auto [in_part, out_part] = split_local(n->cont, inside);
    if (on) return {mkl(LDeleg{n->chan, n->carried, in_part ? in_part : lend()}), out_part};
    return {in_part, mkl(LDeleg{n->chan, n->carried, out_part ? out_part : lend()})};
  }
  if (auto* n = as_l<LSessRecv>(t)) {
    bool on = inside.count(n->chan) > 0;
    auto [in_part, out_part] = split_local(n->cont, inside);
    if (on) return {mkl(LSessRecv{n->chan, n->carried, in_part ? in_part : lend()}), out_part};
    return {in_part, mkl(LSessRecv{n->chan, n->carried, out_part ? out_part : lend()})};
  }
  return {nullptr, t};  // bare LVar: owned by the enclosing recursion
}

// ---- conformance of a synthesized type against an expected one ---------------

inline bool is_numeric(Sort s) { return s == Sort::Nat || s == Sort::Int; }

// Direction matters: a nat expression may feed an int slot, never the reverse.
inline bool send_fits(Sort have, Sort want) {
  return have == want || (have == Sort::Nat && want == Sort::Int);
}
inline bool tuple_send_fits(const std::vector<Sort>& have, const std::vector<Sort>& want) {
  if (have.size() != want.size()) return false;
  for (size_t i = 0; i < have.size(); ++i)
    if (!send_fits(have[i], want[i])) return false;
  return true;
}

// Receive binders treat the two numeric sorts as one storage class, matching
// how incoming values are dispatched at run time.
inline bool recv_compat(Sort a, Sort b) { return a == b || (is_numeric(a) && is_numeric(b)); }
inline bool tuple_recv_compat(const std::vector<Sort>& a, const std::vector<Sort>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!recv_compat(a[i], b[i])) return false;
  return true;
}

struct Conformer {
  std::vector<std::string>* warnings = nullptr;
  std::map<std::string, std::string> vars;  // synthesized tvar -> expected tvar

  [[noreturn]] void fail(TypeErrorKind k, const std::string& m) const { throw TypeError(k, m); }

  void located(const LocatedType& syn, const LocatedType& exp) {
    if (!syn.type || !exp.type) return;  // wildcard
    if (syn.role != 0 && syn.role != exp.role)
      fail(TypeErrorKind::Shape, "delegated endpoint belongs to participant " +
                                     std::to_string(syn.role) + ", the type names " +
                                     std::to_string(exp.role));
    Conformer inner{warnings, {}};
    inner.go(syn.type, exp.type);
  }

  void go(const LocalPtr& syn, const LocalPtr& exp) {
    if (!syn || as_l<LEnd>(syn)) {
      if (!as_l<LEnd>(exp))
        fail(TypeErrorKind::Shape, "thread ends while its type still expects " + head_word(exp));
      return;
    }
    if (auto* s = as_l<LSend>(syn)) {
      auto* e = as_l<LSend>(exp);
      if (!e || e->chan != s->chan)
        fail(TypeErrorKind::Shape,
             head_word(syn) + " where the type expects " + head_word(exp));
      // Each process branch feeds exactly one type branch: one with the same
      // sort tuple if present, otherwise one that admits it. The type may
      // carry several branches with one tuple, so the split is searched, not
      // picked greedily.
      std::vector<std::vector<size_t>> cands(s->branches.size());
      for (size_t i = 0; i < s->branches.size(); ++i) {
        for (size_t j = 0; j < e->branches.size(); ++j)
          if (e->branches[j].sorts == s->branches[i].sorts) cands[i].push_back(j);
        if (cands[i].empty())
          for (size_t j = 0; j < e->branches.size(); ++j)
            if (tuple_send_fits(s->branches[i].sorts, e->branches[j].sorts))
              cands[i].push_back(j);
        if (cands[i].empty())
          fail(TypeErrorKind::Branches, "the type allows no send of " +
                                            sorts_word(s->branches[i].sorts) + " on " + s->chan);
      }
      std::vector<std::vector<const LSendBranch*>> assigned(e->branches.size());
      auto group_ok = [&](size_t j) {
        Rational sum{0};
        for (const auto* sb : assigned[j]) sum = sum + sb->delta.lo;
        if (!e->branches[j].delta.contains(sum)) return false;
        for (const auto* sb : assigned[j]) {
          Conformer trial{nullptr, vars};
          try {
            trial.go(sb->cont, e->branches[j].cont);
          } catch (const TypeError&) {
            return false;
          }
        }
        return true;
      };
      std::function<bool(size_t)> place = [&](size_t i) -> bool {
        if (i == s->branches.size()) {
          for (size_t j = 0; j < e->branches.size(); ++j)
            if (!group_ok(j)) return false;
          return true;
        }
        for (size_t j : cands[i]) {
          assigned[j].push_back(&s->branches[i]);
          if (place(i + 1)) return true;
          assigned[j].pop_back();
        }
        return false;
      };
      if (!place(0)) {
        // Rebuild the first-candidate split for the error message.
        for (auto& g : assigned) g.clear();
        for (size_t i = 0; i < s->branches.size(); ++i)
          assigned[cands[i].front()].push_back(&s->branches[i]);
        for (size_t j = 0; j < e->branches.size(); ++j) {
          Rational sum{0};
          for (const auto* sb : assigned[j]) sum = sum + sb->delta.lo;
          if (!e->branches[j].delta.contains(sum))
            fail(TypeErrorKind::Interval,
                 "sends of " + sorts_word(e->branches[j].sorts) + " on " + s->chan +
                     " carry probability " + to_fraction_string(sum) + ", the type allows " +
                     to_string(e->branches[j].delta));
        }
        for (size_t j = 0; j < e->branches.size(); ++j)
          for (const auto* sb : assigned[j]) go(sb->cont, e->branches[j].cont);
        fail(TypeErrorKind::Interval,
             "send branches on " + s->chan + " cannot be split to match the type");
      }
      for (size_t j = 0; j < e->branches.size(); ++j)
        for (const auto* sb : assigned[j]) go(sb->cont, e->branches[j].cont);
      return;
    }
    if (auto* s = as_l<LRecv>(syn)) {
      auto* e = as_l<LRecv>(exp);
      if (!e || e->chan != s->chan)
        fail(TypeErrorKind::Shape,
             head_word(syn) + " where the type expects " + head_word(exp));
      std::vector<bool> exercised(s->branches.size(), false);
      for (const auto& eb : e->branches) {
        bool hit = false;
        for (size_t i = 0; i < s->branches.size(); ++i) {
          if (!tuple_recv_compat(s->branches[i].sorts, eb.sorts)) continue;
          hit = true;
          exercised[i] = true;
          go(s->branches[i].cont, eb.cont);
        }
        if (!hit)
          fail(TypeErrorKind::Branches,
               "no receive branch on " + s->chan + " accepts " + sorts_word(eb.sorts));
      }
      for (size_t i = 0; i < s->branches.size(); ++i)
        if (!exercised[i] && warnings)
          warnings->push_back("receive branch " + sorts_word(s->branches[i].sorts) + " on " +
                              s->chan + " is never exercised by the session type");
      return;
    }
    if (auto* s = as_l<LSelect>(syn)) {
      auto* e = as_l<LSelect>(exp);
      if (!e || e->chan != s->chan)
        fail(TypeErrorKind::Shape,
             head_word(syn) + " where the type expects " + head_word(exp));
      // The type may repeat a label across branches, so selections are split
      // among same-label type branches by search, like sends.
      std::vector<std::vector<size_t>> cands(s->branches.size());
      for (size_t i = 0; i < s->branches.size(); ++i) {
        for (size_t j = 0; j < e->branches.size(); ++j)
          if (e->branches[j].label == s->branches[i].label) cands[i].push_back(j);
        if (cands[i].empty())
          fail(TypeErrorKind::Branches, "label " + s->branches[i].label + " on " + s->chan +
                                            " is not offered by the type");
      }
      std::vector<std::vector<const LSelectBranch*>> assigned(e->branches.size());
      auto group_ok = [&](size_t j) {
        Rational sum{0};
        for (const auto* sb : assigned[j]) sum = sum + sb->delta.lo;
        if (!e->branches[j].delta.contains(sum)) return false;
        for (const auto* sb : assigned[j]) {
          Conformer trial{nullptr, vars};
          try {
            trial.go(sb->cont, e->branches[j].cont);
          } catch (const TypeError&) {
            return false;
          }
        }
        return true;
      };
      std::function<bool(size_t)> place = [&](size_t i) -> bool {
        if (i == s->branches.size()) {
          for (size_t j = 0; j < e->branches.size(); ++j)
            if (!group_ok(j)) return false;
          return true;
        }
        for (size_t j : cands[i]) {
          assigned[j].push_back(&s->branches[i]);
          if (place(i + 1)) return true;
          assigned[j].pop_back();
        }
        return false;
      };
      if (!place(0)) {
        // Rebuild the first-candidate split for the error message.
        for (auto& g : assigned) g.clear();
        for (size_t i = 0; i < s->branches.size(); ++i)
          assigned[cands[i].front()].push_back(&s->branches[i]);
        for (size_t j = 0; j < e->branches.size(); ++j) {
          Rational sum{0};
          for (const auto* sb : assigned[j]) sum = sum + sb->delta.lo;
          if (!e->branches[j].delta.contains(sum))
            fail(TypeErrorKind::Interval, "label " + e->branches[j].label + " on " + s->chan +
                                              " is chosen with probability " +
                                              to_fraction_string(sum) + ", the type allows " +
                                              to_string(e->branches[j].delta));
        }
        for (size_t j = 0; j < e->branches.size(); ++j)
          for (const auto* sb : assigned[j]) go(sb->cont, e->branches[j].cont);
        fail(TypeErrorKind::Interval,
             "selections on " + s->chan + " cannot be split to match the type");
      }
      for (size_t j = 0; j < e->branches.size(); ++j)
        for (const auto* sb : assigned[j]) go(sb->cont, e->branches[j].cont);
      return;
    }
    if (auto* s = as_l<LBranch>(syn)) {
      auto* e = as_l<LBranch>(exp);
      if (!e || e->chan != s->chan)
        fail(TypeErrorKind::Shape,
             head_word(syn) + " where the type expects " + head_word(exp));
      for (const auto& ea : e->arms) {
        bool hit = false;
        for (const auto& sa : s->arms) {
          if (sa.label != ea.label) continue;
          hit = true;
          go(sa.cont, ea.cont);
        }
        if (!hit)
          fail(TypeErrorKind::Branches,
               "offer on " + s->chan + " is missing the label " + ea.label);
      }
      for (const auto& sa : s->arms) {
        bool known = false;
        for (const auto& ea : e->arms) known = known || ea.label == sa.label;
        if (!known && warnings)
          warnings->push_back("offered label " + sa.label + " on " + s->chan +
                              " is never selected by the session type");
      }
      return;
    }
    if (auto* s = as_l<LDeleg>(syn)) {
      auto* e = as_l<LDeleg>(exp);
      if (!e || e->chan != s->chan)
        fail(TypeErrorKind::Shape,
             head_word(syn) + " where the type expects " + head_word(exp));
      located(s->carried, e->carried);
      go(s->cont, e->cont);
      return;
    }
    if (auto* s = as_l<LSessRecv>(syn)) {
      auto* e = as_l<LSessRecv>(exp);
      if (!e || e->chan != s->chan)
        fail(TypeErrorKind::Shape,
             head_word(syn) + " where the type expects " + head_word(exp));
      located(s->carried, e->carried);
      go(s->cont, e->cont);
      return;
    }
    if (auto* s = as_l<LRec>(syn)) {
      auto* e = as_l<LRec>(exp);
      if (!e)
        fail(TypeErrorKind::Shape,
             head_word(syn) + " where the type expects " + head_word(exp));
      auto saved = vars;
      vars[s->var] = e->var;
      go(s->body, e->body);
      vars = std::move(saved);
      return;
    }
    if (auto* s = as_l<LVar>(syn)) {
      auto* e = as_l<LVar>(exp);
      auto it = vars.find(s->var);
      if (!e || it == vars.end() || it->second != e->var)
        fail(TypeErrorKind::Shape, "recursion unfolds differently from its type");
      return;
    }
    fail(TypeErrorKind::Shape, head_word(syn) + " where the type expects " + head_word(exp));
  }
};

// ---- synthesis ---------------------------------------------------------------

// A process is checked bottom-up into the interleaved action sequences of its
// parallel threads. Sessions are told apart only where a binder names their
// channels; until then a thread's usage stays one sequence.
struct Syn {
  std::vector<LocalPtr> threads;
  SessionEnv rest;  // vectors delegated away, typed by the receiving side
};

struct Checker {
  const SortEnv* gamma = nullptr;
  std::vector<std::string>* warnings = nullptr;
  std::map<std::string, Sort> scope;
  std::map<std::string, std::string> tvar_of;
  int next_tvar = 0;

  [[noreturn]] static void fail(TypeErrorKind k, const std::string& m) { throw TypeError(k, m); }

  Sort expr_sort(const ExprPtr& e) {
    if (auto* v = std::get_if<EVal>(&e->node)) {
      auto s = primary_sort(v->v);
      if (!s) fail(TypeErrorKind::Shape, "shared names are not sendable values");
      return *s;
    }
    if (auto* v = std::get_if<EVar>(&e->node)) {
      auto it = scope.find(v->name);
      if (it != scope.end()) return it->second;
      auto ig = gamma->vars.find(v->name);
      if (ig != gamma->vars.end()) return ig->second;
      fail(TypeErrorKind::Unbound, "unbound variable " + v->name);
    }
    if (auto* n = std::get_if<ENot>(&e->node)) {
      if (expr_sort(n->e) != Sort::Bool)
        fail(TypeErrorKind::Shape, "negation applied to a non-boolean");
      return Sort::Bool;
    }
    const auto& b = std::get<EBin>(e->node);
    Sort l = expr_sort(b.lhs), r = expr_sort(b.rhs);
    switch (b.op) {
      case BinOp::And:
      case BinOp::Or:
        if (l != Sort::Bool || r != Sort::Bool)
          fail(TypeErrorKind::Shape, "boolean connective applied to non-booleans");
        return Sort::Bool;
      case BinOp::Add:
      case BinOp::Mul:
      case BinOp::Div:
        if (!is_numeric(l) || !is_numeric(r))
          fail(TypeErrorKind::Shape, "arithmetic on non-numeric operands");
        return (l == Sort::Nat && r == Sort::Nat) ? Sort::Nat : Sort::Int;
      case BinOp::Sub:
        if (!is_numeric(l) || !is_numeric(r))
          fail(TypeErrorKind::Shape, "arithmetic on non-numeric operands");
        return Sort::Int;
      case BinOp::Eq:
      case BinOp::Ne:
        if (l != r && !(is_numeric(l) && is_numeric(r)))
          fail(TypeErrorKind::Shape, "equality between incomparable sorts");
        return Sort::Bool;
      default:
        if (!is_numeric(l) || !is_numeric(r))
          fail(TypeErrorKind::Shape, "ordering on non-numeric operands");
        return Sort::Bool;
    }
  }

  static std::set<std::string> thread_chans(const LocalPtr& t) { return local_chans(t); }

  static void ensure_rest_free(const SessionEnv& rest, const std::set<std::string>& names,
                               const std::string& why) {
    for (const auto& [key, fam] : rest.entries) {
      (void)fam;
      for (const auto& c : key)
        if (names.count(c)) fail(TypeErrorKind::Split, why + " (channel " + c + ")");
    }
  }

  // The continuation a prefix on `c` extends: the unique thread already using
  // c, else the lone thread, else a fresh one (returned null).
  static LocalPtr take_cont_for(Syn& s, const std::string& c) {
    size_t found = s.threads.size();
    int users = 0;
    for (size_t i = 0; i < s.threads.size(); ++i) {
      if (thread_chans(s.threads[i]).count(c)) {
        ++users;
        found = i;
      }
    }
    if (users > 1)
      fail(TypeErrorKind::Split, "channel " + c + " is used by several parallel components");
    if (users == 0) {
      if (s.threads.size() != 1) return nullptr;
      found = 0;
    }
    LocalPtr t = s.threads[found];
    s.threads.erase(s.threads.begin() + static_cast<long>(found));
    return t;
  }

  static LocalPtr wrap(const LocalPtr& t) { return t ? t : lend(); }

  static std::string residual_key(const Syn& s) {
    std::vector<std::string> ks;
    ks.reserve(s.threads.size());
    for (const auto& t : s.threads) ks.push_back(canonical_key_local(t));
    std::sort(ks.begin(), ks.end());
    std::string out;
    for (const auto& k : ks) {
      out += k;
      out += '&';
    }
    out += '#';
    out += env_key(s.rest);
    return out;
  }

  struct Arm {
    LocalPtr cont;
    Syn residual;
  };

  Arm arm(const ProcPtr& body, const std::string& chan) {
    Syn s = check(body);
    ensure_rest_free(s.rest, {chan}, "channel of a delegated session is used");
    LocalPtr c = take_cont_for(s, chan);
    return {c, std::move(s)};
  }

  static void merge_env(SessionEnv& into, const SessionEnv& from) {
    for (const auto& [key, fam] : from.entries) {
      auto& dst = into.entries[key];
      dst.insert(dst.end(), fam.begin(), fam.end());
      sort_family(dst);
    }
  }

  Syn finish_choice(std::vector<Arm>& arms, LocalPtr sum, const std::string& what) {
    std::string key0 = residual_key(arms.front().residual);
    for (size_t i = 1; i < arms.size(); ++i)
      if (residual_key(arms[i].residual) != key0)
        fail(TypeErrorKind::Branches, what + " disagree about the sessions around them");
    Syn out = std::move(arms.front().residual);
    out.threads.push_back(std::move(sum));
    return out;
  }

  Syn check(const ProcPtr& p) {
    if (std::get_if<PInact>(&p->node)) return {};
    if (std::get_if<PError>(&p->node))
      fail(TypeErrorKind::Shape, "the error process has no type");

    if (auto* n = std::get_if<PVar>(&p->node)) {
      auto it = tvar_of.find(n->var);
      if (it == tvar_of.end()) fail(TypeErrorKind::Unbound, "unbound process variable " + n->var);
      return {{mkl(LVar{it->second})}, {}};
    }

    if (auto* n = std::get_if<PRec>(&p->node)) {
      std::string tv = "r" + std::to_string(next_tvar++);
      auto saved = tvar_of.find(n->var) != tvar_of.end()
                       ? std::optional<std::string>(tvar_of[n->var])
                       : std::nullopt;
      tvar_of[n->var] = tv;
      Syn body = check(n->body);
      if (saved)
        tvar_of[n->var] = *saved;
      else
        tvar_of.erase(n->var);
      if (!body.rest.entries.empty() || body.threads.size() > 1)
        fail(TypeErrorKind::Recursion, "recursion spans several sessions or components");
      if (body.threads.empty()) return {};
      LocalPtr t = body.threads.front();
      if (uses_tvar(t, tv)) {
        if (as_l<LVar>(t)) fail(TypeErrorKind::Recursion, "unguarded recursion");
        t = mkl(LRec{tv, t});
      }
      return {{t}, {}};
    }

    if (auto* n = std::get_if<PIf>(&p->node)) {
      if (expr_sort(n->cond) != Sort::Bool)
        fail(TypeErrorKind::Shape, "conditional on a non-boolean expression");
      Syn a = check(n->then_p);
      Syn b = check(n->else_p);
      if (residual_key(a) != residual_key(b))
        fail(TypeErrorKind::Branches, "conditional arms use their sessions differently");
      return a;
    }

    if (auto* n = std::get_if<PPar>(&p->node)) {
      Syn l = check(n->left);
      Syn r = check(n->right);
      Syn out;
      out.threads = std::move(l.threads);
      out.threads.insert(out.threads.end(), r.threads.begin(), r.threads.end());
      out.rest = std::move(l.rest);
      merge_env(out.rest, r.rest);
      return out;
    }

    if (auto* n = std::get_if<PSend>(&p->node)) {
      Rational total{0};
      for (const auto& b : n->branches) total = total + b.prob;
      if (total != Rational{1})
        fail(TypeErrorKind::ProbSum, "send probabilities on " + n->chan + " sum to " +
                                         to_fraction_string(total));
      std::vector<Arm> arms;
      std::vector<LSendBranch> tb;
      for (const auto& b : n->branches) {
        std::vector<Sort> sorts;
        sorts.reserve(b.payload.size());
        for (const auto& e : b.payload) sorts.push_back(expr_sort(e));
        arms.push_back(arm(b.cont, n->chan));
        tb.push_back({ProbInterval::point(b.prob), std::move(sorts), wrap(arms.back().cont)});
      }
      std::sort(tb.begin(), tb.end(), [](const LSendBranch& a, const LSendBranch& b) {
        auto key = [](const LSendBranch& x) {
          std::string k = sorts_word(x.sorts) + ";" + to_fraction_string(x.delta.lo) + ";" +
                          canonical_key_local(x.cont);
          return k;
        };
        return key(a) < key(b);
      });
      return finish_choice(arms, mkl(LSend{n->chan, std::move(tb)}), "send branches");
    }

    if (auto* n = std::get_if<PRecv>(&p->node)) {
      std::vector<Arm> arms;
      std::vector<LRecvBranch> tb;
      for (const auto& b : n->branches) {
        std::vector<Sort> sorts;
        std::vector<std::pair<std::string, std::optional<Sort>>> shadowed;
        for (const auto& [name, sort] : b.binders) {
          sorts.push_back(sort);
          auto it = scope.find(name);
          shadowed.emplace_back(name, it == scope.end() ? std::nullopt
                                                        : std::optional<Sort>(it->second));
          scope[name] = sort;
        }
        arms.push_back(arm(b.cont, n->chan));
        for (auto it = shadowed.rbegin(); it != shadowed.rend(); ++it) {
          if (it->second)
            scope[it->first] = *it->second;
          else
            scope.erase(it->first);
        }
        tb.push_back({std::move(sorts), wrap(arms.back().cont)});
      }
      std::sort(tb.begin(), tb.end(), [](const LRecvBranch& a, const LRecvBranch& b) {
        auto key = [](const LRecvBranch& x) {
          return sorts_word(x.sorts) + ";" + canonical_key_local(x.cont);
        };
        return key(a) < key(b);
      });
      return finish_choice(arms, mkl(LRecv{n->chan, std::move(tb)}), "receive branches");
    }

    if (auto* n = std::get_if<PSelect>(&p->node)) {
      Rational total{0};
      for (const auto& b : n->branches) total = total + b.prob;
      if (total != Rational{1})
        fail(TypeErrorKind::ProbSum, "selection probabilities on " + n->chan + " sum to " +
                                         to_fraction_string(total));
      std::vector<Arm> arms;
      std::vector<LSelectBranch> tb;
      for (const auto& b : n->branches) {
        arms.push_back(arm(b.cont, n->chan));
        tb.push_back({ProbInterval::point(b.prob), b.label, wrap(arms.back().cont)});
      }
      std::sort(tb.begin(), tb.end(),
                [](const LSelectBranch& a, const LSelectBranch& b) { return a.label < b.label; });
      return finish_choice(arms, mkl(LSelect{n->chan, std::move(tb)}), "selection branches");
    }

    if (auto* n = std::get_if<PBranch>(&p->node)) {
      std::vector<Arm> arms;
      std::vector<LBranchArm> tb;
      for (const auto& a : n->arms) {
        arms.push_back(arm(a.cont, n->chan));
        tb.push_back({a.label, wrap(arms.back().cont)});
      }
      std::sort(tb.begin(), tb.end(),
                [](const LBranchArm& a, const LBranchArm& b) { return a.label < b.label; });
      return finish_choice(arms, mkl(LBranch{n->chan, std::move(tb)}), "offered branches");
    }

    if (auto* n = std::get_if<PDeleg>(&p->node)) {
      std::set<std::string> sent(n->sent.begin(), n->sent.end());
      if (sent.size() != n->sent.size())
        fail(TypeErrorKind::Arity, "duplicate channels in a delegation");
      Syn s = check(n->cont);
      for (const auto& t : s.threads)
        for (const auto& c : thread_chans(t))
          if (sent.count(c))
            fail(TypeErrorKind::Split, "channel " + c + " is used after being delegated");
      ensure_rest_free(s.rest, sent, "channel is delegated twice");
      ensure_rest_free(s.rest, {n->chan}, "channel of a delegated session is used");
      LocalPtr cont = take_cont_for(s, n->chan);
      s.threads.push_back(mkl(LDeleg{n->chan, LocatedType{}, wrap(cont)}));
      std::vector<std::string> key(sent.begin(), sent.end());
      auto& fam = s.rest.entries[key];
      fam.push_back(LocatedType{});
      sort_family(fam);
      return s;
    }

    if (auto* n = std::get_if<PSessRecv>(&p->node)) {
      std::set<std::string> bound(n->bound.begin(), n->bound.end());
      if (bound.size() != n->bound.size())
        fail(TypeErrorKind::Arity, "duplicate channels in a session receive");
      Syn s = check(n->cont);
      ensure_rest_free(s.rest, bound, "received channels escape through delegation");
      LocalPtr carried;
      size_t using_bound = 0;
      for (size_t i = 0; i < s.threads.size(); ++i) {
        std::set<std::string> tc = thread_chans(s.threads[i]);
        bool touches = false;
        for (const auto& c : tc) touches = touches || bound.count(c) > 0;
        if (!touches) continue;
        if (++using_bound > 1)
          fail(TypeErrorKind::Split, "received session channels are split across components");
        auto [on, off] = split_local(s.threads[i], bound);
        carried = on;
        if (off)
          s.threads[i] = off;
        else
          s.threads.erase(s.threads.begin() + static_cast<long>(i--));
      }
      ensure_rest_free(s.rest, {n->chan}, "channel of a delegated session is used");
      LocalPtr cont = take_cont_for(s, n->chan);
      s.threads.push_back(
          mkl(LSessRecv{n->chan, LocatedType{wrap(carried), 0}, wrap(cont)}));
      return s;
    }

    if (auto* n = std::get_if<PHide>(&p->node)) {
      std::set<std::string> hidden;
      ProcPtr body = p;
      while (auto* h = std::get_if<PHide>(&body->node)) {
        hidden.insert(h->name);
        body = h->body;
      }
      Syn s = check(body);
      std::vector<LocalPtr> kept;
      for (const auto& t : s.threads) {
        auto [on, off] = split_local(t, hidden);
        (void)on;  // a hidden session closes here
        if (off) kept.push_back(off);
      }
      s.threads = std::move(kept);
      SessionEnv rest;
      for (const auto& [key, fam] : s.rest.entries) {
        size_t in = 0;
        for (const auto& c : key) in += hidden.count(c);
        if (in == 0)
          rest.entries[key] = fam;
        else if (in != key.size())
          fail(TypeErrorKind::Split, "hidden session channels leak past their binder");
      }
      s.rest = std::move(rest);
      return s;
    }

    const std::string* shared = nullptr;
    int role = 0;
    const std::vector<std::string>* binder = nullptr;
    const ProcPtr* body = nullptr;
    int parties = 0;
    if (auto* rq = std::get_if<PRequest>(&p->node)) {
      shared = &rq->shared;
      role = 1;
      parties = rq->parties;
      binder = &rq->chans;
      body = &rq->body;
    } else {
      auto* ac = std::get_if<PAccept>(&p->node);
      shared = &ac->shared;
      role = ac->role;
      binder = &ac->chans;
      body = &ac->body;
    }

    auto ig = gamma->names.find(*shared);
    if (ig == gamma->names.end())
      fail(TypeErrorKind::Unbound, "unbound session name " + *shared);
    const GlobalPtr& g = ig->second;
    std::set<int> ps = pid(g);
    if (parties > 0) {
      std::set<int> want;
      for (int i = 1; i <= parties; ++i) want.insert(i);
      if (ps != want)
        fail(TypeErrorKind::Arity, "session on " + *shared + " expects participants 1.." +
                                       std::to_string(parties) +
                                       " but the protocol names others");
    } else if (!ps.count(role) || role == 1) {
      fail(TypeErrorKind::Arity,
           "participant " + std::to_string(role) + " does not accept a role in " + *shared);
    }
    std::set<std::string> bound(binder->begin(), binder->end());
    if (bound.size() != binder->size())
      fail(TypeErrorKind::Arity, "duplicate session channels at a binder");
    if (binder->size() != sid(g))
      fail(TypeErrorKind::Arity, "session on " + *shared + " binds " +
                                     std::to_string(binder->size()) + " channels, the protocol uses " +
                                     std::to_string(sid(g)));

    Syn s = check(*body);
    ensure_rest_free(s.rest, bound, "session channels escape through delegation");
    LocalPtr mine;
    size_t endpoints = 0;
    for (size_t i = 0; i < s.threads.size(); ++i) {
      std::set<std::string> tc = thread_chans(s.threads[i]);
      bool touches = false;
      for (const auto& c : tc) touches = touches || bound.count(c) > 0;
      if (!touches) continue;
      if (++endpoints > 1)
        fail(TypeErrorKind::Split, "one session endpoint is split across parallel components");
      auto [on, off] = split_local(s.threads[i], bound);
      mine = on;
      if (off)
        s.threads[i] = off;
      else
        s.threads.erase(s.threads.begin() + static_cast<long>(i--));
    }

    ProjResult pr = project(g, role);
    if (!pr.ok())
      fail(TypeErrorKind::Shape, "the protocol of " + *shared +
                                     " has no view for participant " + std::to_string(role) +
                                     ": " + pr.error);
    // The binder vector enumerates the protocol's channels in name order.
    std::set<std::string> gset = chans(g);
    std::map<std::string, std::string> ren;
    size_t i = 0;
    for (const auto& c : gset) ren[c] = (*binder)[i++];
    LocalPtr expected = rename_local(pr.type, ren);
    Conformer cf{warnings, {}};
    cf.go(mine, expected);
    return s;
  }
};

}  // namespace detail

// Synthesizes the sessions a process still owes to its environment. A closed,
// self-contained system synthesizes the empty environment.
inline TypeCheck typecheck(const SortEnv& gamma, const ProcPtr& p) {
  TypeCheck out;
  detail::Checker ck;
  ck.gamma = &gamma;
  ck.warnings = &out.warnings;
  detail::Syn s = ck.check(p);
  out.env = std::move(s.rest);
  for (const auto& t : s.threads) {
    std::set<std::string> cs = local_chans(t);
    if (cs.empty()) continue;
    std::vector<std::string> key(cs.begin(), cs.end());
    auto& fam = out.env.entries[key];
    fam.push_back({t, 0});
    detail::sort_family(fam);
  }
  // Entries that share a channel describe one session between them; merging
  // them keeps the channel vectors in the domain pairwise disjoint.
  std::map<std::string, size_t> owner;
  std::vector<size_t> parent(out.env.entries.size());
  for (size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  std::function<size_t(size_t)> find = [&](size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  size_t idx = 0;
  for (const auto& [key, fam] : out.env.entries) {
    for (const auto& c : key) {
      auto [it, fresh] = owner.emplace(c, idx);
      if (!fresh) parent[find(idx)] = find(it->second);
    }
    ++idx;
  }
  SessionEnv merged;
  idx = 0;
  std::map<size_t, std::pair<std::set<std::string>, std::vector<LocatedType>>> groups;
  for (auto& [key, fam] : out.env.entries) {
    auto& g = groups[find(idx++)];
    g.first.insert(key.begin(), key.end());
    for (auto& m : fam) g.second.push_back(std::move(m));
  }
  for (auto& [root, g] : groups) {
    detail::sort_family(g.second);
    merged.entries.emplace(std::vector<std::string>(g.first.begin(), g.first.end()),
                           std::move(g.second));
  }
  out.env = std::move(merged);
  return out;
}

// The typing a declared session induces: one entry for the binder vector,
// holding every participant's view. Binder names stand in for the protocol's
// channels in name order.
inline SessionEnv session_env_of(const GlobalPtr& g, const std::vector<std::string>& binder) {
  if (binder.size() != sid(g))
    throw TypeError(TypeErrorKind::Arity,
                    "the declared vector binds " + std::to_string(binder.size()) +
                        " channels, the protocol uses " + std::to_string(sid(g)));
  std::set<std::string> gset = chans(g);
  std::map<std::string, std::string> ren;
  size_t i = 0;
  for (const auto& c : gset) ren[c] = binder[i++];
  std::vector<std::string> key = binder;
  std::sort(key.begin(), key.end());
  SessionEnv env;
  auto& fam = env.entries[key];
  for (int q : pid(g)) {
    ProjResult pr = project(g, q);
    if (!pr.ok())
      throw TypeError(TypeErrorKind::Shape, "the protocol has no view for participant " +
                                                std::to_string(q) + ": " + pr.error);
    fam.push_back({detail::rename_local(pr.type, ren), q});
  }
  detail::sort_family(fam);
  return env;
}

// Checks a process against a declared environment: every synthesized thread
// must conform to a distinct declared view, and declared views left over must
// be end. Returns the synthesis together with any warnings.
inline TypeCheck check_against(const SortEnv& gamma, const ProcPtr& p, const SessionEnv& expected) {
  TypeCheck tc = typecheck(gamma, p);
  // Pool the synthesized members under the declared vector covering them.
  std::map<const std::vector<std::string>*, std::vector<LocatedType>> pools;
  for (const auto& [key, fam] : expected.entries) pools[&key];
  for (const auto& [key, fam] : tc.env.entries) {
    const std::vector<std::string>* home = nullptr;
    for (const auto& [ekey, efam] : expected.entries) {
      (void)efam;
      bool subset = true;
      for (const auto& c : key)
        subset = subset && std::binary_search(ekey.begin(), ekey.end(), c);
      if (subset) {
        home = &ekey;
        break;
      }
    }
    if (!home) {
      std::string cs;
      for (const auto& c : key) {
        if (!cs.empty()) cs += ",";
        cs += c;
      }
      throw TypeError(TypeErrorKind::Shape,
                      "the session on " + cs + " is not part of the declared typing");
    }
    auto& pool = pools[home];
    pool.insert(pool.end(), fam.begin(), fam.end());
  }
  for (const auto& [ekey, efam] : expected.entries) {
    const auto& pool = pools[&ekey];
    if (pool.size() > efam.size())
      throw TypeError(TypeErrorKind::Split,
                      "more threads than the declared session has participants");
    // Backtracking bijection; warnings are only collected on the chosen match.
    std::vector<int> match(pool.size(), -1);
    std::vector<bool> used(efam.size(), false);
    auto fits = [&](size_t i, size_t j, std::vector<std::string>* w) {
      detail::Conformer cf{w, {}};
      try {
        if (pool[i].role != 0 && pool[i].role != efam[j].role) return false;
        cf.go(pool[i].type, efam[j].type);
        return true;
      } catch (const TypeError&) {
        return false;
      }
    };
    std::function<bool(size_t)> assign = [&](size_t i) -> bool {
      if (i == pool.size()) return true;
      for (size_t j = 0; j < efam.size(); ++j) {
        if (used[j] || !fits(i, j, nullptr)) continue;
        used[j] = true;
        match[i] = static_cast<int>(j);
        if (assign(i + 1)) return true;
        used[j] = false;
        match[i] = -1;
      }
      return false;
    };
    if (!assign(0)) {
      // Re-run the first unmatchable member for its error message.
      for (size_t i = 0; i < pool.size(); ++i) {
        bool any = false;
        for (size_t j = 0; j < efam.size() && !any; ++j) any = fits(i, j, nullptr);
        if (!any && !efam.empty()) {
          detail::Conformer cf{&tc.warnings, {}};
          cf.go(pool[i].type, efam[0].type);
        }
      }
      throw TypeError(TypeErrorKind::Split,
                      "threads cannot be matched to the declared participants");
    }
    for (size_t i = 0; i < pool.size(); ++i) fits(i, static_cast<size_t>(match[i]), &tc.warnings);
    for (size_t j = 0; j < efam.size(); ++j) {
      if (used[j] || !efam[j].type) continue;
      detail::Conformer cf{&tc.warnings, {}};
      cf.go(nullptr, efam[j].type);  // an unimplemented participant must be done
    }
  }
  return tc;
}

// Canonical form for comparing environments across reduction: recursion is
// unfolded to a communication head, finished endpoints are dropped, and the
// remaining views are regrouped by the channels they still touch.
inline SessionEnv normalize(const SessionEnv& env) {
  struct Member {
    LocalPtr type;
    int role;
    std::set<std::string> chans;
  };
  std::vector<Member> ms;
  for (const auto& [key, fam] : env.entries) {
    (void)key;
    for (const auto& m : fam) {
      if (!m.type) continue;
      LocalPtr t = detail::unfold_head(m.type);
      if (as_l<LEnd>(t)) continue;
      std::set<std::string> cs = local_chans(t);
      if (cs.empty()) continue;
      ms.push_back({t, m.role, std::move(cs)});
    }
  }
  // Union-find over shared channels keeps one entry per live session.
  std::vector<size_t> parent(ms.size());
  for (size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  std::function<size_t(size_t)> find = [&](size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  std::map<std::string, size_t> owner;
  for (size_t i = 0; i < ms.size(); ++i) {
    for (const auto& c : ms[i].chans) {
      auto [it, fresh] = owner.emplace(c, i);
      if (!fresh) parent[find(i)] = find(it->second);
    }
  }
  std::map<size_t, std::vector<size_t>> groups;
  for (size_t i = 0; i < ms.size(); ++i) groups[find(i)].push_back(i);
  SessionEnv out;
  for (const auto& [root, idxs] : groups) {
    (void)root;
    std::set<std::string> cs;
    std::vector<LocatedType> fam;
    for (size_t i : idxs) {
      cs.insert(ms[i].chans.begin(), ms[i].chans.end());
      fam.push_back({ms[i].type, ms[i].role});
    }
    detail::sort_family(fam);
    out.entries[std::vector<std::string>(cs.begin(), cs.end())] = std::move(fam);
  }
  return out;
}

// One step of the reduction relation on environments: two views of one entry
// exchange a value, a delegation, or a label; everything else rides along.
inline std::vector<std::pair<ProbInterval, SessionEnv>> type_reduce(const SessionEnv& env) {
  std::vector<std::pair<ProbInterval, SessionEnv>> out;
  for (const auto& [key, fam] : env.entries) {
    for (size_t i = 0; i < fam.size(); ++i) {
      LocalPtr ti = detail::unfold_head(fam[i].type);
      for (size_t j = 0; j < fam.size(); ++j) {
        if (i == j) continue;
        LocalPtr tj = detail::unfold_head(fam[j].type);
        auto emit = [&](const ProbInterval& delta, const LocalPtr& ci, const LocalPtr& cj) {
          SessionEnv next = env;
          auto& f = next.entries[key];
          f[i] = {ci, fam[i].role};
          f[j] = {cj, fam[j].role};
          detail::sort_family(f);
          out.emplace_back(delta, std::move(next));
        };
        if (auto* snd = as_l<LSend>(ti)) {
          auto* rcv = as_l<LRecv>(tj);
          if (!rcv || rcv->chan != snd->chan) continue;
          for (const auto& sb : snd->branches) {
            // Mirror of value dispatch: the same sort tuple wins, otherwise
            // the first branch whose slots admit the payload.
            const LRecvBranch* pick = nullptr;
            for (const auto& rb : rcv->branches)
              if (rb.sorts == sb.sorts) pick = &rb;
            if (!pick)
              for (const auto& rb : rcv->branches)
                if (!pick && detail::tuple_send_fits(sb.sorts, rb.sorts)) pick = &rb;
            if (!pick) continue;
            emit(sb.delta, sb.cont, pick->cont);
          }
        } else if (auto* del = as_l<LDeleg>(ti)) {
          auto* acc = as_l<LSessRecv>(tj);
          if (!acc || acc->chan != del->chan) continue;
          if (!detail::located_equal(del->carried, acc->carried)) continue;
          emit(ProbInterval::point(Rational{1}), del->cont, acc->cont);
        } else if (auto* sel = as_l<LSelect>(ti)) {
          auto* bra = as_l<LBranch>(tj);
          if (!bra || bra->chan != sel->chan) continue;
          for (const auto& sb : sel->branches)
            for (const auto& arm : bra->arms)
              if (arm.label == sb.label) emit(sb.delta, sb.cont, arm.cont);
        }
      }
    }
  }
  return out;
}

}  // namespace pmps

#endif
