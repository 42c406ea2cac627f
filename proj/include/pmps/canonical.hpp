#ifndef PMPS_CANONICAL_HPP
#define PMPS_CANONICAL_HPP

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pmps/ast.hpp"
#include "pmps/printer.hpp"

// Canonical forms for the structural-equivalence equations: parallel unit,
// commutativity and associativity, scope extrusion and exchange of hidings,
// (new n) 0 = 0, mu X. 0 = 0, and commutativity of sum branches. Two
// processes are equivalent iff their canonical forms are alpha-equal.

namespace pmps {

namespace detail {

inline std::string key_in(const DbEnv& env, const ProcPtr& p) {
  Printer pr;
  pr.canonical = true;
  pr.env = env;
  return pr.proc(p);
}

// Free-name occurrences in a fixed traversal order. Used to number extruded
// hidden names: the first component that mentions a name decides its slot, so
// the numbering is stable under renaming of the hidden names themselves.
inline void occurrences_expr(const ExprPtr& e, const std::set<std::string>& bound,
                             std::vector<std::string>& out) {
  std::visit(overloaded{
                 [&](const EVal& v) {
                   if (auto* n = std::get_if<SharedName>(&v.v))
                     if (!bound.count(n->name)) out.push_back(n->name);
                 },
                 [&](const EVar&) {},
                 [&](const ENot& n) { occurrences_expr(n.e, bound, out); },
                 [&](const EBin& b) {
                   occurrences_expr(b.lhs, bound, out);
                   occurrences_expr(b.rhs, bound, out);
                 },
             },
             e->node);
}

inline void occurrences(const ProcPtr& p, std::set<std::string> bound,
                        std::vector<std::string>& out) {
  auto see = [&](const std::string& n) {
    if (!bound.count(n)) out.push_back(n);
  };
  std::visit(
      overloaded{
          [&](const PRequest& r) {
            see(r.shared);
            auto inner = bound;
            inner.insert(r.chans.begin(), r.chans.end());
            occurrences(r.body, std::move(inner), out);
          },
          [&](const PAccept& a) {
            see(a.shared);
            auto inner = bound;
            inner.insert(a.chans.begin(), a.chans.end());
            occurrences(a.body, std::move(inner), out);
          },
          [&](const PSend& s) {
            see(s.chan);
            for (const auto& b : s.branches) {
              for (const auto& e : b.payload) occurrences_expr(e, bound, out);
              occurrences(b.cont, bound, out);
            }
          },
          [&](const PRecv& r) {
            see(r.chan);
            for (const auto& b : r.branches) occurrences(b.cont, bound, out);
          },
          [&](const PDeleg& d) {
            see(d.chan);
            for (const auto& t : d.sent) see(t);
            occurrences(d.cont, bound, out);
          },
          [&](const PSessRecv& s) {
            see(s.chan);
            auto inner = bound;
            inner.insert(s.bound.begin(), s.bound.end());
            occurrences(s.cont, std::move(inner), out);
          },
          [&](const PSelect& s) {
            see(s.chan);
            for (const auto& b : s.branches) occurrences(b.cont, bound, out);
          },
          [&](const PBranch& br) {
            see(br.chan);
            for (const auto& a : br.arms) occurrences(a.cont, bound, out);
          },
          [&](const PIf& i) {
            occurrences_expr(i.cond, bound, out);
            occurrences(i.then_p, bound, out);
            occurrences(i.else_p, bound, out);
          },
          [&](const PPar& pp) {
            occurrences(pp.left, bound, out);
            occurrences(pp.right, bound, out);
          },
          [&](const PHide& h) {
            auto inner = bound;
            inner.insert(h.name);
            occurrences(h.body, std::move(inner), out);
          },
          [&](const PRec& r) { occurrences(r.body, bound, out); },
          [&](const PVar&) {},
          [&](const PInact&) {},
          [&](const PError&) {},
      },
      p->node);
}

struct Canonicalizer {
  DbEnv env;
  int tmp = 0;

  std::string fresh_tmp() { return "#c" + std::to_string(tmp++); }

  template <class F>
  auto scoped(DbEnv::Ns ns, std::vector<std::string> ids, F f) {
    env.frames.push_back({ns, std::move(ids)});
    auto out = f();
    env.frames.pop_back();
    return out;
  }

  // Gathers the maximal parallel/hiding region rooted at p: hidden binders
  // are renamed to region-unique temporaries (so extruding them over sibling
  // components captures nothing) and inert leaves are dropped.
  void collect(const ProcPtr& p, const NameSubst& ren, std::vector<std::string>& binders,
               std::vector<ProcPtr>& leaves) {
    if (auto* pp = as<PPar>(p)) {
      collect(pp->left, ren, binders, leaves);
      collect(pp->right, ren, binders, leaves);
      return;
    }
    if (auto* h = as<PHide>(p)) {
      std::string t = fresh_tmp();
      binders.push_back(t);
      NameSubst inner = ren;
      inner[h->name] = t;
      collect(h->body, inner, binders, leaves);
      return;
    }
    if (as<PInact>(p)) return;
    leaves.push_back(ren.empty() ? p : subst_names(p, ren));
  }

  ProcPtr region(const ProcPtr& p) {
    std::vector<std::string> binders;
    std::vector<ProcPtr> raw;
    collect(p, {}, binders, raw);

    // Binder order and component order depend on each other: keys are
    // computed with the binders in their current slots, components are
    // sorted by key, and the binders are then renumbered by first
    // occurrence. The first round keys with every extruded binder collapsed
    // to one placeholder so the starting order owes nothing to the names the
    // input happened to use; later rounds key positionally and iterate to a
    // fixed point (bounded; remaining ties are between identical components,
    // where either order prints the same term).
    NameSubst conflate;
    for (const auto& t : binders) conflate[t] = "#u";
    std::vector<ProcPtr> leaves;
    std::vector<std::string> order = binders;
    for (int round = 0; round < 8; ++round) {
      leaves.clear();
      for (const auto& l : raw) {
        auto cl = scoped(DbEnv::Ns::Name, order, [&] { return canon(l); });
        if (!as<PInact>(cl)) leaves.push_back(cl);  // a collapsed leaf is a unit
      }
      std::vector<std::pair<std::string, ProcPtr>> keyed;
      for (const auto& l : leaves) {
        ProcPtr for_key = round == 0 && !conflate.empty() ? subst_names(l, conflate) : l;
        keyed.emplace_back(
            scoped(DbEnv::Ns::Name, order, [&] { return key_in(env, for_key); }), l);
      }
      std::stable_sort(keyed.begin(), keyed.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      leaves.clear();
      for (auto& [k, l] : keyed) leaves.push_back(std::move(l));
      std::vector<std::string> next;
      std::set<std::string> pool(binders.begin(), binders.end());
      std::vector<std::string> occ;
      for (const auto& l : leaves) occurrences(l, {}, occ);
      for (const auto& n : occ)
        if (pool.count(n) && std::find(next.begin(), next.end(), n) == next.end())
          next.push_back(n);
      for (const auto& n : order)
        if (std::find(next.begin(), next.end(), n) == next.end()) next.push_back(n);
      bool stable = round > 0 && next == order;
      order = std::move(next);
      if (stable) break;
    }

    if (leaves.empty()) return mk_inact();

    // A binder no component mentions is equivalent to hiding over 0 next to
    // the composition; it goes away entirely.
    {
      std::set<std::string> used;
      for (const auto& l : leaves) {
        auto fn = free_names(l);
        used.insert(fn.begin(), fn.end());
      }
      std::vector<std::string> kept;
      for (const auto& t : order)
        if (used.count(t)) kept.push_back(t);
      order = std::move(kept);
    }

    // Temporaries become readable names, distinct from everything free.
    std::set<std::string> avoid;
    for (const auto& l : leaves) {
      auto fn = free_names(l);
      avoid.insert(fn.begin(), fn.end());
    }
    NameSubst final_names;
    std::vector<std::string> final_order;
    int idx = 0;
    for (const auto& t : order) {
      std::string n = fresh_name("h" + std::to_string(idx++), avoid);
      avoid.insert(n);
      final_names[t] = n;
      final_order.push_back(n);
    }
    if (!final_names.empty())
      for (auto& l : leaves) l = subst_names(l, final_names);

    ProcPtr body = leaves.back();
    for (size_t i = leaves.size() - 1; i-- > 0;) body = mk_par(leaves[i], body);
    for (size_t i = final_order.size(); i-- > 0;) body = mk(PHide{final_order[i], body});
    return body;
  }

  ProcPtr canon(const ProcPtr& p) {
    return std::visit(
        overloaded{
            [&](const PRequest& r) -> ProcPtr {
              auto body = scoped(DbEnv::Ns::Name, r.chans, [&] { return canon(r.body); });
              return mk(PRequest{r.shared, r.parties, r.chans, body});
            },
            [&](const PAccept& a) -> ProcPtr {
              auto body = scoped(DbEnv::Ns::Name, a.chans, [&] { return canon(a.body); });
              return mk(PAccept{a.shared, a.role, a.chans, body});
            },
            [&](const PSend& s) -> ProcPtr {
              PSend out{s.chan, {}};
              for (const auto& b : s.branches)
                out.branches.push_back(SendBranch{b.prob, b.payload, canon(b.cont), b.payload_src});
              sort_branches(out.branches, [&](const SendBranch& b) {
                return key_in(env, mk(PSend{s.chan, {b}}));
              });
              return mk(out);
            },
            [&](const PRecv& r) -> ProcPtr {
              PRecv out{r.chan, {}};
              for (const auto& b : r.branches) {
                std::vector<std::string> xs;
                for (const auto& [x, srt] : b.binders) xs.push_back(x);
                auto cont = scoped(DbEnv::Ns::Var, xs, [&] { return canon(b.cont); });
                out.branches.push_back(RecvBranch{b.binders, cont});
              }
              sort_branches(out.branches, [&](const RecvBranch& b) {
                return key_in(env, mk(PRecv{r.chan, {b}}));
              });
              return mk(out);
            },
            [&](const PDeleg& d) -> ProcPtr {
              return mk(PDeleg{d.chan, d.sent, canon(d.cont)});
            },
            [&](const PSessRecv& s) -> ProcPtr {
              auto cont = scoped(DbEnv::Ns::Name, s.bound, [&] { return canon(s.cont); });
              return mk(PSessRecv{s.chan, s.bound, cont});
            },
            [&](const PSelect& s) -> ProcPtr {
              PSelect out{s.chan, {}};
              for (const auto& b : s.branches)
                out.branches.push_back(SelectBranch{b.prob, b.label, canon(b.cont)});
              sort_branches(out.branches, [&](const SelectBranch& b) {
                return key_in(env, mk(PSelect{s.chan, {b}}));
              });
              return mk(out);
            },
            [&](const PBranch& br) -> ProcPtr {
              PBranch out{br.chan, {}};
              for (const auto& a : br.arms)
                out.arms.push_back(BranchArm{a.label, canon(a.cont)});
              sort_branches(out.arms, [&](const BranchArm& a) {
                return a.label + "\x01" + key_in(env, a.cont);
              });
              return mk(out);
            },
            [&](const PIf& i) -> ProcPtr {
              return mk(PIf{i.cond, canon(i.then_p), canon(i.else_p)});
            },
            [&](const PPar&) -> ProcPtr { return region(p); },
            [&](const PHide&) -> ProcPtr { return region(p); },
            [&](const PRec& r) -> ProcPtr {
              auto body =
                  scoped(DbEnv::Ns::Proc, {r.var}, [&] { return canon(r.body); });
              if (as<PInact>(body)) return mk_inact();
              return mk(PRec{r.var, body});
            },
            [&](const PVar&) -> ProcPtr { return p; },
            [&](const PInact&) -> ProcPtr { return p; },
            [&](const PError&) -> ProcPtr { return p; },
        },
        p->node);
  }

  template <class B, class K>
  void sort_branches(std::vector<B>& bs, K key) {
    std::vector<std::pair<std::string, B>> keyed;
    keyed.reserve(bs.size());
    for (auto& b : bs) keyed.emplace_back(key(b), std::move(b));
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    bs.clear();
    for (auto& [k, b] : keyed) bs.push_back(std::move(b));
  }
};

}  // namespace detail

inline ProcPtr canonicalize(const ProcPtr& p) {
  detail::Canonicalizer c;
  return c.canon(p);
}

inline std::string canonical_form_key(const ProcPtr& p) {
  return canonical_key(canonicalize(p));
}

inline bool struct_equiv(const ProcPtr& a, const ProcPtr& b) {
  return canonical_form_key(a) == canonical_form_key(b);
}

// ---- one-step equivalence rewriting ----------------------------------------
//
// Every process reachable from p by one application of one equation, in
// either direction, at any position. The "add a unit" direction applies at
// every node, so callers get a finite but complete picture of the relation's
// single-step neighbourhood.

namespace detail {

template <class B>
void adjacent_swaps(const std::string& chan, const std::vector<B>& bs,
                    std::vector<ProcPtr>& out, ProcPtr (*build)(const std::string&,
                                                                std::vector<B>)) {
  for (size_t i = 0; i + 1 < bs.size(); ++i) {
    auto copy = bs;
    std::swap(copy[i], copy[i + 1]);
    out.push_back(build(chan, std::move(copy)));
  }
}

inline std::vector<ProcPtr> rewrites(const ProcPtr& p) {
  std::vector<ProcPtr> out;
  auto here = [&](ProcPtr q) { out.push_back(std::move(q)); };

  // unit introduction: P -> P | 0 at this node
  here(mk_par(p, mk_inact()));

  std::visit(
      overloaded{
          [&](const PRequest& r) {
            for (auto& b : rewrites(r.body))
              here(mk(PRequest{r.shared, r.parties, r.chans, b}));
          },
          [&](const PAccept& a) {
            for (auto& b : rewrites(a.body)) here(mk(PAccept{a.shared, a.role, a.chans, b}));
          },
          [&](const PSend& s) {
            adjacent_swaps<SendBranch>(
                s.chan, s.branches, out,
                +[](const std::string& c, std::vector<SendBranch> bs) {
                  return mk(PSend{c, std::move(bs)});
                });
            for (size_t i = 0; i < s.branches.size(); ++i)
              for (auto& c : rewrites(s.branches[i].cont)) {
                auto copy = s.branches;
                copy[i].cont = c;
                here(mk(PSend{s.chan, std::move(copy)}));
              }
          },
          [&](const PRecv& r) {
            adjacent_swaps<RecvBranch>(
                r.chan, r.branches, out,
                +[](const std::string& c, std::vector<RecvBranch> bs) {
                  return mk(PRecv{c, std::move(bs)});
                });
            for (size_t i = 0; i < r.branches.size(); ++i)
              for (auto& c : rewrites(r.branches[i].cont)) {
                auto copy = r.branches;
                copy[i].cont = c;
                here(mk(PRecv{r.chan, std::move(copy)}));
              }
          },
          [&](const PDeleg& d) {
            for (auto& c : rewrites(d.cont)) here(mk(PDeleg{d.chan, d.sent, c}));
          },
          [&](const PSessRecv& s) {
            for (auto& c : rewrites(s.cont)) here(mk(PSessRecv{s.chan, s.bound, c}));
          },
          [&](const PSelect& s) {
            adjacent_swaps<SelectBranch>(
                s.chan, s.branches, out,
                +[](const std::string& c, std::vector<SelectBranch> bs) {
                  return mk(PSelect{c, std::move(bs)});
                });
            for (size_t i = 0; i < s.branches.size(); ++i)
              for (auto& c : rewrites(s.branches[i].cont)) {
                auto copy = s.branches;
                copy[i].cont = c;
                here(mk(PSelect{s.chan, std::move(copy)}));
              }
          },
          [&](const PBranch& br) {
            adjacent_swaps<BranchArm>(
                br.chan, br.arms, out,
                +[](const std::string& c, std::vector<BranchArm> as) {
                  return mk(PBranch{c, std::move(as)});
                });
            for (size_t i = 0; i < br.arms.size(); ++i)
              for (auto& c : rewrites(br.arms[i].cont)) {
                auto copy = br.arms;
                copy[i].cont = c;
                here(mk(PBranch{br.chan, std::move(copy)}));
              }
          },
          [&](const PIf& i) {
            for (auto& t : rewrites(i.then_p)) here(mk(PIf{i.cond, t, i.else_p}));
            for (auto& e : rewrites(i.else_p)) here(mk(PIf{i.cond, i.then_p, e}));
          },
          [&](const PPar& pp) {
            here(mk_par(pp.right, pp.left));  // commutativity
            if (as<PInact>(pp.right)) here(pp.left);  // unit elimination
            if (auto* l = as<PPar>(pp.left))
              here(mk_par(l->left, mk_par(l->right, pp.right)));
            if (auto* r = as<PPar>(pp.right))
              here(mk_par(mk_par(pp.left, r->left), r->right));
            if (auto* h = as<PHide>(pp.left))
              if (!free_names(pp.right).count(h->name))
                here(mk(PHide{h->name, mk_par(h->body, pp.right)}));  // extrusion
            for (auto& l : rewrites(pp.left)) here(mk_par(l, pp.right));
            for (auto& r : rewrites(pp.right)) here(mk_par(pp.left, r));
          },
          [&](const PHide& h) {
            if (as<PInact>(h.body)) here(mk_inact());  // (new n) 0 = 0
            if (auto* inner = as<PHide>(h.body))
              here(mk(PHide{inner->name, mk(PHide{h.name, inner->body})}));
            if (auto* pp = as<PPar>(h.body))
              if (!free_names(pp->right).count(h.name))
                here(mk_par(mk(PHide{h.name, pp->left}), pp->right));  // intrusion
            for (auto& b : rewrites(h.body)) here(mk(PHide{h.name, b}));
          },
          [&](const PRec& r) {
            if (as<PInact>(r.body)) here(mk_inact());  // mu X. 0 = 0
            for (auto& b : rewrites(r.body)) here(mk(PRec{r.var, b}));
          },
          [&](const PVar&) {},
          [&](const PInact&) {
            here(mk(PHide{"u0", mk_inact()}));  // 0 = (new n) 0
            here(mk(PRec{"U0", mk_inact()}));   // 0 = mu X. 0
          },
          [&](const PError&) {},
      },
      p->node);
  return out;
}

}  // namespace detail

inline std::vector<ProcPtr> equiv_rewrites(const ProcPtr& p) { return detail::rewrites(p); }

}  // namespace pmps

#endif
