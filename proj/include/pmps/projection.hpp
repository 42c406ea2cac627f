#ifndef PMPS_PROJECTION_HPP
#define PMPS_PROJECTION_HPP

#include <string>
#include <vector>

#include "pmps/types.hpp"

namespace pmps {

// Projection is partial; a failed projection names the offending construct.
struct ProjResult {
  LocalPtr type;
  std::string error;

  bool ok() const { return type != nullptr; }
  static ProjResult fail(std::string why) { return {nullptr, std::move(why)}; }
};

inline ProjResult project(const GlobalPtr& g, int role) {
  return std::visit(
      overloaded{
          [&](const GValues& v) -> ProjResult {
            std::vector<LocalPtr> conts;
            for (const auto& b : v.branches) {
              auto r = project(b.cont, role);
              if (!r.ok()) return r;
              conts.push_back(r.type);
            }
            if (role == v.from) {
              LSend out{v.chan, {}};
              for (size_t i = 0; i < v.branches.size(); ++i)
                out.branches.push_back(
                    LSendBranch{v.branches[i].delta, v.branches[i].sorts, conts[i]});
              return {mkl(out), ""};
            }
            if (role == v.to) {
              // intervals are dropped; duplicate sort tuples must agree so
              // reception stays deterministic
              LRecv out{v.chan, {}};
              for (size_t i = 0; i < v.branches.size(); ++i) {
                bool dup = false;
                for (const auto& prev : out.branches)
                  if (prev.sorts == v.branches[i].sorts) {
                    if (!alpha_equal_local(prev.cont, conts[i]))
                      return ProjResult::fail(
                          "receiver sees equal sort tuples with different continuations on " +
                          v.chan);
                    dup = true;
                  }
                if (!dup) out.branches.push_back(LRecvBranch{v.branches[i].sorts, conts[i]});
              }
              return {mkl(out), ""};
            }
            for (size_t i = 1; i < conts.size(); ++i)
              if (!alpha_equal_local(conts[0], conts[i]))
                return ProjResult::fail("participant " + std::to_string(role) +
                                        " sees differing branches of the exchange on " +
                                        v.chan);
            return {conts[0], ""};
          },
          [&](const GDeleg& d) -> ProjResult {
            auto r = project(d.cont, role);
            if (!r.ok()) return r;
            if (role == d.from) return {mkl(LDeleg{d.chan, d.carried, r.type}), ""};
            if (role == d.to) return {mkl(LSessRecv{d.chan, d.carried, r.type}), ""};
            return r;
          },
          [&](const GBranching& b) -> ProjResult {
            std::vector<LocalPtr> conts;
            for (const auto& br : b.branches) {
              auto r = project(br.cont, role);
              if (!r.ok()) return r;
              conts.push_back(r.type);
            }
            if (role == b.from) {
              LSelect out{b.chan, {}};
              for (size_t i = 0; i < b.branches.size(); ++i)
                out.branches.push_back(
                    LSelectBranch{b.branches[i].delta, b.branches[i].label, conts[i]});
              return {mkl(out), ""};
            }
            if (role == b.to) {
              LBranch out{b.chan, {}};
              for (size_t i = 0; i < b.branches.size(); ++i) {
                bool dup = false;
                for (const auto& prev : out.arms)
                  if (prev.label == b.branches[i].label) {
                    if (!alpha_equal_local(prev.cont, conts[i]))
                      return ProjResult::fail(
                          "duplicate label " + b.branches[i].label +
                          " with different continuations on " + b.chan);
                    dup = true;
                  }
                if (!dup) out.arms.push_back(LBranchArm{b.branches[i].label, conts[i]});
              }
              return {mkl(out), ""};
            }
            for (size_t i = 1; i < conts.size(); ++i)
              if (!alpha_equal_local(conts[0], conts[i]))
                return ProjResult::fail("participant " + std::to_string(role) +
                                        " sees differing branches of the choice on " + b.chan);
            return {conts[0], ""};
          },
          [&](const GPar& p) -> ProjResult {
            bool in_left = pid(p.left).count(role) > 0;
            bool in_right = pid(p.right).count(role) > 0;
            if (in_left && in_right)
              return ProjResult::fail("participant " + std::to_string(role) +
                                      " occurs on both sides of a parallel type");
            if (in_left) return project(p.left, role);
            if (in_right) return project(p.right, role);
            return {lend(), ""};
          },
          [&](const GRec& r) -> ProjResult {
            auto body = project(r.body, role);
            if (!body.ok()) return body;
            if (as_l<LEnd>(body.type)) return {lend(), ""};
            if (auto* v = as_l<LVar>(body.type); v && v->var == r.var) return {lend(), ""};
            return {mkl(LRec{r.var, body.type}), ""};
          },
          [&](const GVar& v) -> ProjResult { return {mkl(LVar{v.var}), ""}; },
          [&](const GEnd&) -> ProjResult { return {lend(), ""}; },
      },
      g->node);
}

// ---- branch merging ----------------------------------------------------------
//
// Branches with the same payload (sort tuple or label) and identical
// continuation are one choice made in two steps; merging folds their
// intervals together. Applied bottom-up, the result is a fixed point.

inline LocalPtr simplify_local(const LocalPtr& t) {
  return std::visit(
      overloaded{
          [&](const LSend& s) -> LocalPtr {
            LSend out{s.chan, {}};
            for (const auto& b : s.branches) {
              auto cont = simplify_local(b.cont);
              bool merged = false;
              for (auto& prev : out.branches)
                if (prev.sorts == b.sorts && alpha_equal_local(prev.cont, cont)) {
                  prev.delta = interval_add(prev.delta, b.delta);
                  merged = true;
                  break;
                }
              if (!merged) out.branches.push_back(LSendBranch{b.delta, b.sorts, cont});
            }
            return mkl(out);
          },
          [&](const LRecv& r) -> LocalPtr {
            LRecv out{r.chan, {}};
            for (const auto& b : r.branches) {
              auto cont = simplify_local(b.cont);
              bool merged = false;
              for (auto& prev : out.branches)
                if (prev.sorts == b.sorts && alpha_equal_local(prev.cont, cont)) {
                  merged = true;
                  break;
                }
              if (!merged) out.branches.push_back(LRecvBranch{b.sorts, cont});
            }
            return mkl(out);
          },
          [&](const LDeleg& d) -> LocalPtr {
            return mkl(LDeleg{d.chan, d.carried, simplify_local(d.cont)});
          },
          [&](const LSessRecv& s) -> LocalPtr {
            return mkl(LSessRecv{s.chan, s.carried, simplify_local(s.cont)});
          },
          [&](const LSelect& s) -> LocalPtr {
            LSelect out{s.chan, {}};
            for (const auto& b : s.branches) {
              auto cont = simplify_local(b.cont);
              bool merged = false;
              for (auto& prev : out.branches)
                if (prev.label == b.label && alpha_equal_local(prev.cont, cont)) {
                  prev.delta = interval_add(prev.delta, b.delta);
                  merged = true;
                  break;
                }
              if (!merged) out.branches.push_back(LSelectBranch{b.delta, b.label, cont});
            }
            return mkl(out);
          },
          [&](const LBranch& b) -> LocalPtr {
            LBranch out{b.chan, {}};
            for (const auto& a : b.arms) {
              auto cont = simplify_local(a.cont);
              bool merged = false;
              for (auto& prev : out.arms)
                if (prev.label == a.label && alpha_equal_local(prev.cont, cont)) {
                  merged = true;
                  break;
                }
              if (!merged) out.arms.push_back(LBranchArm{a.label, cont});
            }
            return mkl(out);
          },
          [&](const LRec& r) -> LocalPtr { return mkl(LRec{r.var, simplify_local(r.body)}); },
          [&](const LVar&) -> LocalPtr { return t; },
          [&](const LEnd&) -> LocalPtr { return t; },
      },
      t->node);
}

inline GlobalPtr simplify_global(const GlobalPtr& g) {
  return std::visit(
      overloaded{
          [&](const GValues& v) -> GlobalPtr {
            GValues out{v.from, v.to, v.chan, {}};
            for (const auto& b : v.branches) {
              auto cont = simplify_global(b.cont);
              bool merged = false;
              for (auto& prev : out.branches)
                if (prev.sorts == b.sorts && alpha_equal_global(prev.cont, cont)) {
                  prev.delta = interval_add(prev.delta, b.delta);
                  merged = true;
                  break;
                }
              if (!merged) out.branches.push_back(GValueBranch{b.delta, b.sorts, cont});
            }
            return mkg(out);
          },
          [&](const GDeleg& d) -> GlobalPtr {
            return mkg(GDeleg{d.from, d.to, d.chan, d.carried, simplify_global(d.cont)});
          },
          [&](const GBranching& b) -> GlobalPtr {
            GBranching out{b.from, b.to, b.chan, {}};
            for (const auto& br : b.branches) {
              auto cont = simplify_global(br.cont);
              bool merged = false;
              for (auto& prev : out.branches)
                if (prev.label == br.label && alpha_equal_global(prev.cont, cont)) {
                  prev.delta = interval_add(prev.delta, br.delta);
                  merged = true;
                  break;
                }
              if (!merged) out.branches.push_back(GLabelBranch{br.delta, br.label, cont});
            }
            return mkg(out);
          },
          [&](const GPar& p) -> GlobalPtr {
            return mkg(GPar{simplify_global(p.left), simplify_global(p.right)});
          },
          [&](const GRec& r) -> GlobalPtr { return mkg(GRec{r.var, simplify_global(r.body)}); },
          [&](const GVar&) -> GlobalPtr { return g; },
          [&](const GEnd&) -> GlobalPtr { return g; },
      },
      g->node);
}

// ---- well-formedness -----------------------------------------------------------

struct WellFormedResult {
  bool ok = true;
  std::vector<std::string> errors;

  void fail(std::string why) {
    ok = false;
    errors.push_back(std::move(why));
  }
};

namespace detail {

// every branch sum must admit point probabilities inside its intervals
// summing to exactly 1
inline bool sum_admits_one(const std::vector<ProbInterval>& ds) {
  Rational lo_sum(0), hi_sum(0);
  bool lo_all_closed = true, hi_all_closed = true;
  for (const auto& d : ds) {
    lo_sum = lo_sum + d.lo;
    hi_sum = hi_sum + d.hi;
    lo_all_closed = lo_all_closed && d.lo_closed;
    hi_all_closed = hi_all_closed && d.hi_closed;
  }
  bool lo_ok = lo_sum < Rational(1) || (lo_sum == Rational(1) && lo_all_closed);
  bool hi_ok = hi_sum > Rational(1) || (hi_sum == Rational(1) && hi_all_closed);
  return lo_ok && hi_ok;
}

inline void check_global(const GlobalPtr& g, std::vector<std::string>& bound_tvars,
                         bool guarded, WellFormedResult& res) {
  std::visit(
      overloaded{
          [&](const GValues& v) {
            if (v.from == v.to)
              res.fail("participant " + std::to_string(v.from) + " exchanges with itself");
            if (v.from <= 0 || v.to <= 0) res.fail("participants must be positive");
            std::vector<ProbInterval> ds;
            for (const auto& b : v.branches) {
              ds.push_back(b.delta);
              if (!b.delta.valid())
                res.fail("invalid probability interval " + to_string(b.delta) + " on " +
                         v.chan);
            }
            if (!sum_admits_one(ds))
              res.fail("branch intervals on " + v.chan + " cannot sum to 1");
            for (const auto& b : v.branches) check_global(b.cont, bound_tvars, true, res);
          },
          [&](const GDeleg& d) {
            if (d.from == d.to)
              res.fail("participant " + std::to_string(d.from) + " delegates to itself");
            if (d.from <= 0 || d.to <= 0) res.fail("participants must be positive");
            check_global(d.cont, bound_tvars, true, res);
          },
          [&](const GBranching& b) {
            if (b.from == b.to)
              res.fail("participant " + std::to_string(b.from) + " chooses with itself");
            if (b.from <= 0 || b.to <= 0) res.fail("participants must be positive");
            std::vector<ProbInterval> ds;
            for (const auto& br : b.branches) {
              ds.push_back(br.delta);
              if (!br.delta.valid())
                res.fail("invalid probability interval " + to_string(br.delta) + " on " +
                         b.chan);
            }
            if (!sum_admits_one(ds))
              res.fail("branch intervals on " + b.chan + " cannot sum to 1");
            for (const auto& br : b.branches) check_global(br.cont, bound_tvars, true, res);
          },
          [&](const GPar& p) {
            auto l = pid(p.left);
            auto r = pid(p.right);
            for (int q : l)
              if (r.count(q))
                res.fail("participant " + std::to_string(q) +
                         " occurs on both sides of a parallel type");
            check_global(p.left, bound_tvars, guarded, res);
            check_global(p.right, bound_tvars, guarded, res);
          },
          [&](const GRec& r) {
            bound_tvars.push_back(r.var);
            check_global(r.body, bound_tvars, false, res);
            bound_tvars.pop_back();
          },
          [&](const GVar& v) {
            bool bound = false;
            for (const auto& tv : bound_tvars) bound = bound || tv == v.var;
            if (!bound) res.fail("unbound type variable " + v.var);
            if (!guarded) res.fail("unguarded recursion through " + v.var);
          },
          [&](const GEnd&) {},
      },
      g->node);
}

}  // namespace detail

inline WellFormedResult well_formed(const GlobalPtr& g) {
  WellFormedResult res;
  std::vector<std::string> tvars;
  detail::check_global(g, tvars, true, res);

  auto ps = pid(g);
  if (!ps.empty()) {
    int expect = 1;
    for (int q : ps) {
      if (q != expect)
        res.fail("participants are not contiguous from 1: missing " + std::to_string(expect));
      ++expect;
      if (q != expect - 1) break;
    }
  }
  for (int q : ps) {
    auto pr = project(g, q);
    if (!pr.ok()) res.fail("projection onto " + std::to_string(q) + " undefined: " + pr.error);
  }
  return res;
}

}  // namespace pmps

#endif
