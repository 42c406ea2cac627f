#ifndef PMPS_TYPES_HPP
#define PMPS_TYPES_HPP

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "pmps/ast.hpp"
#include "pmps/interval.hpp"

namespace pmps {

struct GlobalType;
using GlobalPtr = std::shared_ptr<const GlobalType>;
struct LocalType;
using LocalPtr = std::shared_ptr<const LocalType>;

// T @ q: a local type located at participant q. A null type is the synthesis
// wildcard: a delegation typed without any expectation carries one, and it
// compares equal to everything.
struct LocatedType {
  LocalPtr type;
  int role = 0;
};

// ---- global types ----------------------------------------------------------

struct GValueBranch {
  ProbInterval delta;
  std::vector<Sort> sorts;
  GlobalPtr cont;
};
// probabilistic value exchange: from -> to on chan, one branch per sort tuple
struct GValues {
  int from = 0, to = 0;
  std::string chan;
  std::vector<GValueBranch> branches;
};
// session delegation, always probability 1
struct GDeleg {
  int from = 0, to = 0;
  std::string chan;
  LocatedType carried;
  GlobalPtr cont;
};
struct GLabelBranch {
  ProbInterval delta;
  std::string label;
  GlobalPtr cont;
};
struct GBranching {
  int from = 0, to = 0;
  std::string chan;
  std::vector<GLabelBranch> branches;
};
struct GPar {
  GlobalPtr left, right;
};
struct GRec {
  std::string var;
  GlobalPtr body;
};
struct GVar {
  std::string var;
};
struct GEnd {};

struct GlobalType {
  std::variant<GValues, GDeleg, GBranching, GPar, GRec, GVar, GEnd> node;
};

template <class T>
GlobalPtr mkg(T node) {
  return std::make_shared<GlobalType>(GlobalType{std::move(node)});
}
template <class T>
const T* as_g(const GlobalPtr& g) {
  return g ? std::get_if<T>(&g->node) : nullptr;
}

// ---- local types -----------------------------------------------------------

struct LSendBranch {
  ProbInterval delta;
  std::vector<Sort> sorts;
  LocalPtr cont;
};
struct LSend {
  std::string chan;
  std::vector<LSendBranch> branches;
};
struct LRecvBranch {
  std::vector<Sort> sorts;
  LocalPtr cont;
};
struct LRecv {
  std::string chan;
  std::vector<LRecvBranch> branches;
};
struct LDeleg {
  std::string chan;
  LocatedType carried;
  LocalPtr cont;
};
struct LSessRecv {
  std::string chan;
  LocatedType carried;
  LocalPtr cont;
};
struct LSelectBranch {
  ProbInterval delta;
  std::string label;
  LocalPtr cont;
};
struct LSelect {
  std::string chan;
  std::vector<LSelectBranch> branches;
};
struct LBranchArm {
  std::string label;
  LocalPtr cont;
};
struct LBranch {
  std::string chan;
  std::vector<LBranchArm> arms;
};
struct LRec {
  std::string var;
  LocalPtr body;
};
struct LVar {
  std::string var;
};
struct LEnd {};

struct LocalType {
  std::variant<LSend, LRecv, LDeleg, LSessRecv, LSelect, LBranch, LRec, LVar, LEnd> node;
};

template <class T>
LocalPtr mkl(T node) {
  return std::make_shared<LocalType>(LocalType{std::move(node)});
}
template <class T>
const T* as_l(const LocalPtr& t) {
  return t ? std::get_if<T>(&t->node) : nullptr;
}

inline LocalPtr lend() { return mkl(LEnd{}); }

// ---- participants and channels ----------------------------------------------

inline void pid_into(const GlobalPtr& g, std::set<int>& out) {
  std::visit(overloaded{
                 [&](const GValues& v) {
                   out.insert(v.from);
                   out.insert(v.to);
                   for (const auto& b : v.branches) pid_into(b.cont, out);
                 },
                 [&](const GDeleg& d) {
                   out.insert(d.from);
                   out.insert(d.to);
                   // the carried role names a participant of the delegated
                   // session, not of this one
                   pid_into(d.cont, out);
                 },
                 [&](const GBranching& b) {
                   out.insert(b.from);
                   out.insert(b.to);
                   for (const auto& br : b.branches) pid_into(br.cont, out);
                 },
                 [&](const GPar& p) {
                   pid_into(p.left, out);
                   pid_into(p.right, out);
                 },
                 [&](const GRec& r) { pid_into(r.body, out); },
                 [&](const GVar&) {},
                 [&](const GEnd&) {},
             },
             g->node);
}

inline std::set<int> pid(const GlobalPtr& g) {
  std::set<int> out;
  pid_into(g, out);
  return out;
}

inline void chans_into(const GlobalPtr& g, std::set<std::string>& out) {
  std::visit(overloaded{
                 [&](const GValues& v) {
                   out.insert(v.chan);
                   for (const auto& b : v.branches) chans_into(b.cont, out);
                 },
                 [&](const GDeleg& d) {
                   out.insert(d.chan);
                   chans_into(d.cont, out);
                 },
                 [&](const GBranching& b) {
                   out.insert(b.chan);
                   for (const auto& br : b.branches) chans_into(br.cont, out);
                 },
                 [&](const GPar& p) {
                   chans_into(p.left, out);
                   chans_into(p.right, out);
                 },
                 [&](const GRec& r) { chans_into(r.body, out); },
                 [&](const GVar&) {},
                 [&](const GEnd&) {},
             },
             g->node);
}

inline std::set<std::string> chans(const GlobalPtr& g) {
  std::set<std::string> out;
  chans_into(g, out);
  return out;
}

inline size_t sid(const GlobalPtr& g) { return chans(g).size(); }

inline void local_chans_into(const LocalPtr& t, std::set<std::string>& out) {
  std::visit(overloaded{
                 [&](const LSend& s) {
                   out.insert(s.chan);
                   for (const auto& b : s.branches) local_chans_into(b.cont, out);
                 },
                 [&](const LRecv& r) {
                   out.insert(r.chan);
                   for (const auto& b : r.branches) local_chans_into(b.cont, out);
                 },
                 [&](const LDeleg& d) {
                   out.insert(d.chan);
                   local_chans_into(d.cont, out);
                 },
                 [&](const LSessRecv& s) {
                   out.insert(s.chan);
                   local_chans_into(s.cont, out);
                 },
                 [&](const LSelect& s) {
                   out.insert(s.chan);
                   for (const auto& b : s.branches) local_chans_into(b.cont, out);
                 },
                 [&](const LBranch& b) {
                   out.insert(b.chan);
                   for (const auto& a : b.arms) local_chans_into(a.cont, out);
                 },
                 [&](const LRec& r) { local_chans_into(r.body, out); },
                 [&](const LVar&) {},
                 [&](const LEnd&) {},
             },
             t->node);
}

inline std::set<std::string> local_chans(const LocalPtr& t) {
  std::set<std::string> out;
  local_chans_into(t, out);
  return out;
}

// ---- printing ---------------------------------------------------------------

// Optional display names for participants; role i prints as names[i-1].
struct RoleNames {
  std::vector<std::string> names;

  std::string show(int q) const {
    if (q >= 1 && static_cast<size_t>(q) <= names.size()) return names[q - 1];
    return std::to_string(q);
  }
  std::optional<int> find(std::string_view n) const {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == n) return static_cast<int>(i) + 1;
    return std::nullopt;
  }
};

namespace detail {

struct TypePrinter {
  const RoleNames* roles = nullptr;
  bool canonical = false;
  std::vector<std::string> tvars;  // in-scope recursion variables, innermost last

  std::string role(int q) const { return roles ? roles->show(q) : std::to_string(q); }

  std::string tvar(const std::string& v) const {
    if (!canonical) return v;
    int depth = 0;
    for (auto it = tvars.rbegin(); it != tvars.rend(); ++it, ++depth)
      if (*it == v) return "@t" + std::to_string(depth);
    return v;
  }

  static std::string sorts_text(const std::vector<Sort>& ss) {
    std::string out;
    for (size_t i = 0; i < ss.size(); ++i) {
      if (i) out += ", ";
      out += to_string(ss[i]);
    }
    return out;
  }

  std::string located(const LocatedType& lt) {
    std::string t = lt.type ? local(lt.type) : "_";
    return t + " @ " + role(lt.role);
  }

  std::string global(const GlobalPtr& g) {
    return std::visit(
        overloaded{
            [&](const GValues& v) {
              std::string out;
              for (size_t i = 0; i < v.branches.size(); ++i) {
                const auto& b = v.branches[i];
                if (i) out += " + ";
                out += role(v.from) + " ->" + to_string(b.delta) + " " + role(v.to) +
                       " : " + v.chan + "<" + sorts_text(b.sorts) + ">. " +
                       atom(b.cont);
              }
              return out;
            },
            [&](const GDeleg& d) {
              return role(d.from) + " ->1 " + role(d.to) + " : " + d.chan + "<" +
                     located(d.carried) + ">. " + atom(d.cont);
            },
            [&](const GBranching& b) {
              std::string out;
              for (size_t i = 0; i < b.branches.size(); ++i) {
                const auto& br = b.branches[i];
                if (i) out += " + ";
                out += role(b.from) + " ->" + to_string(br.delta) + " " + role(b.to) +
                       " : " + b.chan + "{ " + br.label + ": " + global(br.cont) + " }";
              }
              return out;
            },
            [&](const GPar& p) { return atom(p.left) + " , " + atom(p.right); },
            [&](const GRec& r) {
              tvars.push_back(r.var);
              std::string out = "mu " + tvar(r.var) + ". " + global(r.body);
              tvars.pop_back();
              return out;
            },
            [&](const GVar& v) { return tvar(v.var); },
            [&](const GEnd&) { return std::string("end"); },
        },
        g->node);
  }

  // continuation position: sums and parallels need parentheses
  std::string atom(const GlobalPtr& g) {
    bool wrap = false;
    if (auto* v = as_g<GValues>(g)) wrap = v->branches.size() > 1;
    if (auto* b = as_g<GBranching>(g)) wrap = wrap || b->branches.size() > 1;
    if (as_g<GPar>(g) || as_g<GRec>(g)) wrap = true;
    std::string s = global(g);
    return wrap ? "(" + s + ") " : s;
  }

  std::string local(const LocalPtr& t) {
    return std::visit(
        overloaded{
            [&](const LSend& s) {
              std::string out;
              for (size_t i = 0; i < s.branches.size(); ++i) {
                const auto& b = s.branches[i];
                if (i) out += " + ";
                out += to_string(b.delta) + ": " + s.chan + "!<" + sorts_text(b.sorts) +
                       ">. " + latom(b.cont);
              }
              return out;
            },
            [&](const LRecv& r) {
              std::string out;
              for (size_t i = 0; i < r.branches.size(); ++i) {
                const auto& b = r.branches[i];
                if (i) out += " + ";
                out += r.chan + "?(" + sorts_text(b.sorts) + "). " + latom(b.cont);
              }
              return out;
            },
            [&](const LDeleg& d) {
              return d.chan + "!<<" + located(d.carried) + ">>. " + latom(d.cont);
            },
            [&](const LSessRecv& s) {
              return s.chan + "?((" + located(s.carried) + ")). " + latom(s.cont);
            },
            [&](const LSelect& s) {
              std::string out = s.chan + " (+) { ";
              for (size_t i = 0; i < s.branches.size(); ++i) {
                const auto& b = s.branches[i];
                if (i) out += ", ";
                out += to_string(b.delta) + ": " + b.label + ": " + local(b.cont);
              }
              return out + " }";
            },
            [&](const LBranch& b) {
              std::string out = b.chan + " & { ";
              for (size_t i = 0; i < b.arms.size(); ++i) {
                if (i) out += ", ";
                out += b.arms[i].label + ": " + local(b.arms[i].cont);
              }
              return out + " }";
            },
            [&](const LRec& r) {
              tvars.push_back(r.var);
              std::string out = "mu " + tvar(r.var) + ". " + local(r.body);
              tvars.pop_back();
              return out;
            },
            [&](const LVar& v) { return tvar(v.var); },
            [&](const LEnd&) { return std::string("end"); },
        },
        t->node);
  }

  std::string latom(const LocalPtr& t) {
    bool wrap = false;
    if (auto* s = as_l<LSend>(t)) wrap = s->branches.size() > 1;
    if (auto* r = as_l<LRecv>(t)) wrap = wrap || r->branches.size() > 1;
    if (as_l<LRec>(t)) wrap = true;
    std::string s = local(t);
    return wrap ? "(" + s + ") " : s;
  }
};

}  // namespace detail

inline std::string print_global(const GlobalPtr& g, const RoleNames* roles = nullptr) {
  detail::TypePrinter pr;
  pr.roles = roles;
  return pr.global(g);
}

inline std::string print_local(const LocalPtr& t, const RoleNames* roles = nullptr) {
  detail::TypePrinter pr;
  pr.roles = roles;
  return pr.local(t);
}

inline std::string canonical_key_global(const GlobalPtr& g) {
  detail::TypePrinter pr;
  pr.canonical = true;
  return pr.global(g);
}

inline std::string canonical_key_local(const LocalPtr& t) {
  detail::TypePrinter pr;
  pr.canonical = true;
  return pr.local(t);
}

// Alpha-equality on recursion variables; the located-type wildcard (null
// local type) matches any located type.
inline bool alpha_equal_local(const LocalPtr& a, const LocalPtr& b);

namespace detail {

inline bool located_equal(const LocatedType& a, const LocatedType& b) {
  if (!a.type || !b.type) return true;  // wildcard
  if (a.role != b.role) return false;
  return alpha_equal_local(a.type, b.type);
}

}  // namespace detail

inline bool alpha_equal_local(const LocalPtr& a, const LocalPtr& b) {
  if (a->node.index() != b->node.index()) {
    return canonical_key_local(a) == canonical_key_local(b);  // never equal, cheap exit
  }
  // Wildcards force structural comparison; fall back to keys when no wildcard
  // can occur below, and compare delegation nodes structurally.
  if (auto* da = as_l<LDeleg>(a)) {
    auto* db = as_l<LDeleg>(b);
    return da->chan == db->chan && detail::located_equal(da->carried, db->carried) &&
           alpha_equal_local(da->cont, db->cont);
  }
  if (auto* sa = as_l<LSessRecv>(a)) {
    auto* sb = as_l<LSessRecv>(b);
    return sa->chan == sb->chan && detail::located_equal(sa->carried, sb->carried) &&
           alpha_equal_local(sa->cont, sb->cont);
  }
  if (auto* na = as_l<LSend>(a)) {
    auto* nb = as_l<LSend>(b);
    if (na->chan != nb->chan || na->branches.size() != nb->branches.size()) return false;
    for (size_t i = 0; i < na->branches.size(); ++i) {
      const auto& x = na->branches[i];
      const auto& y = nb->branches[i];
      if (x.delta != y.delta || x.sorts != y.sorts) return false;
      if (!alpha_equal_local(x.cont, y.cont)) return false;
    }
    return true;
  }
  if (auto* ra = as_l<LRecv>(a)) {
    auto* rb = as_l<LRecv>(b);
    if (ra->chan != rb->chan || ra->branches.size() != rb->branches.size()) return false;
    for (size_t i = 0; i < ra->branches.size(); ++i) {
      if (ra->branches[i].sorts != rb->branches[i].sorts) return false;
      if (!alpha_equal_local(ra->branches[i].cont, rb->branches[i].cont)) return false;
    }
    return true;
  }
  if (auto* sa = as_l<LSelect>(a)) {
    auto* sb = as_l<LSelect>(b);
    if (sa->chan != sb->chan || sa->branches.size() != sb->branches.size()) return false;
    for (size_t i = 0; i < sa->branches.size(); ++i) {
      const auto& x = sa->branches[i];
      const auto& y = sb->branches[i];
      if (x.delta != y.delta || x.label != y.label) return false;
      if (!alpha_equal_local(x.cont, y.cont)) return false;
    }
    return true;
  }
  if (auto* ba = as_l<LBranch>(a)) {
    auto* bb = as_l<LBranch>(b);
    if (ba->chan != bb->chan || ba->arms.size() != bb->arms.size()) return false;
    for (size_t i = 0; i < ba->arms.size(); ++i) {
      if (ba->arms[i].label != bb->arms[i].label) return false;
      if (!alpha_equal_local(ba->arms[i].cont, bb->arms[i].cont)) return false;
    }
    return true;
  }
  if (as_l<LRec>(a) || as_l<LVar>(a)) {
    // no wildcard below a recursion binder in practice; keys handle alpha
    return canonical_key_local(a) == canonical_key_local(b);
  }
  return true;  // LEnd
}

inline bool alpha_equal_global(const GlobalPtr& a, const GlobalPtr& b) {
  return canonical_key_global(a) == canonical_key_global(b);
}

}  // namespace pmps

#endif
