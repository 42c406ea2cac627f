#ifndef PMPS_PRINTER_HPP
#define PMPS_PRINTER_HPP

#include <sstream>
#include <string>
#include <vector>

#include "pmps/ast.hpp"
#include "pmps/interval.hpp"

namespace pmps {

namespace detail {

// Binder environment for alpha-invariant printing. Names (channels and shared
// names), value variables, and process variables are separate namespaces.
struct DbEnv {
  enum class Ns { Name, Var, Proc };
  struct Frame {
    Ns ns;
    std::vector<std::string> ids;
  };
  std::vector<Frame> frames;

  std::string resolve(Ns ns, const std::string& id) const {
    int depth = 0;
    for (auto it = frames.rbegin(); it != frames.rend(); ++it) {
      if (it->ns != ns) continue;
      for (size_t i = 0; i < it->ids.size(); ++i)
        if (it->ids[i] == id) {
          const char* tag = ns == Ns::Name ? "@n" : ns == Ns::Var ? "@v" : "@x";
          return std::string(tag) + std::to_string(depth) + "." + std::to_string(i);
        }
      ++depth;
    }
    return id;  // free: keep the literal spelling
  }
};

struct Printer {
  bool canonical = false;
  DbEnv env;

  std::string name(const std::string& id) {
    return canonical ? env.resolve(DbEnv::Ns::Name, id) : id;
  }
  std::string var(const std::string& id) {
    return canonical ? env.resolve(DbEnv::Ns::Var, id) : id;
  }
  std::string pvar(const std::string& id) {
    return canonical ? env.resolve(DbEnv::Ns::Proc, id) : id;
  }

  template <class F>
  std::string scoped(DbEnv::Ns ns, std::vector<std::string> ids, F f) {
    env.frames.push_back({ns, std::move(ids)});
    std::string out = f();
    env.frames.pop_back();
    return out;
  }

  static std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
      }
    }
    out += '"';
    return out;
  }

  std::string value(const Value& v) {
    return std::visit(overloaded{
                          [&](const SharedName& n) { return name(n.name); },
                          [](bool b) { return std::string(b ? "true" : "false"); },
                          [](const Int& n) { return n.str(); },
                          [](const std::string& s) { return quote(s); },
                      },
                      v);
  }

  static int prec(BinOp op) {
    switch (op) {
      case BinOp::Or: return 1;
      case BinOp::And: return 2;
      case BinOp::Eq:
      case BinOp::Ne:
      case BinOp::Lt:
      case BinOp::Le:
      case BinOp::Gt:
      case BinOp::Ge: return 4;
      case BinOp::Add:
      case BinOp::Sub: return 5;
      case BinOp::Mul:
      case BinOp::Div: return 6;
    }
    return 0;
  }

  static const char* op_text(BinOp op) {
    switch (op) {
      case BinOp::Or: return "or";
      case BinOp::And: return "and";
      case BinOp::Eq: return "==";
      case BinOp::Ne: return "!=";
      case BinOp::Lt: return "<";
      case BinOp::Le: return "<=";
      case BinOp::Gt: return ">";
      case BinOp::Ge: return ">=";
      case BinOp::Add: return "+";
      case BinOp::Sub: return "-";
      case BinOp::Mul: return "*";
      case BinOp::Div: return "/";
    }
    return "?";
  }

  // min_prec: parenthesize when this node binds looser than the context
  std::string expr(const ExprPtr& e, int min_prec = 0) {
    return std::visit(
        overloaded{
            [&](const EVal& v) { return value(v.v); },
            [&](const EVar& v) { return var(v.name); },
            [&](const ENot& n) {
              std::string s = "not " + expr(n.e, 3);
              return min_prec > 3 ? "(" + s + ")" : s;
            },
            [&](const EBin& b) {
              int p = prec(b.op);
              std::string s =
                  expr(b.lhs, p) + " " + op_text(b.op) + " " + expr(b.rhs, p + 1);
              return p < min_prec ? "(" + s + ")" : s;
            },
        },
        e->node);
  }

  static std::string prob(const Rational& r) { return to_display_string(r); }

  // true for forms that swallow everything to their right when reparsed
  static bool swallows_right(const ProcPtr& p) {
    return as<PHide>(p) || as<PRec>(p) || as<PRequest>(p) || as<PAccept>(p);
  }
  static bool is_sum(const ProcPtr& p) {
    if (auto* s = as<PSend>(p)) return s->branches.size() > 1;
    if (auto* s = as<PSelect>(p)) return s->branches.size() > 1;
    if (auto* r = as<PRecv>(p)) return r->branches.size() > 1;
    return false;
  }

  // a branch continuation or if-arm: must reparse as a single term
  std::string term(const ProcPtr& p) {
    std::string s = proc(p);
    if (is_sum(p) || as<PPar>(p) || swallows_right(p)) return "(" + s + ")";
    return s;
  }

  std::string binders(const std::vector<std::pair<std::string, Sort>>& bs) {
    std::string out;
    for (size_t i = 0; i < bs.size(); ++i) {
      if (i) out += ", ";
      // binder names resolve in the frame pushed by the caller
      out += var(bs[i].first) + ":" + to_string(bs[i].second);
    }
    return out;
  }

  std::string chan_list(const std::vector<std::string>& cs, bool bound) {
    std::string out;
    for (size_t i = 0; i < cs.size(); ++i) {
      if (i) out += ",";
      out += bound ? name(cs[i]) : name(cs[i]);
    }
    return out;
  }

  std::string proc(const ProcPtr& p) {
    return std::visit(
        overloaded{
            [&](const PRequest& r) {
              std::string head = "request " + name(r.shared) + "[" +
                                 std::to_string(r.parties) + "](";
              return scoped(DbEnv::Ns::Name, r.chans, [&] {
                return head + chan_list(r.chans, true) + "). " + proc(r.body);
              });
            },
            [&](const PAccept& a) {
              std::string head =
                  "accept " + name(a.shared) + "[" + std::to_string(a.role) + "](";
              return scoped(DbEnv::Ns::Name, a.chans, [&] {
                return head + chan_list(a.chans, true) + "). " + proc(a.body);
              });
            },
            [&](const PSend& s) {
              std::string out;
              bool implicit_one =
                  s.branches.size() == 1 && s.branches[0].prob == Rational(1);
              for (size_t i = 0; i < s.branches.size(); ++i) {
                const auto& b = s.branches[i];
                if (i) out += " + ";
                if (!implicit_one) out += prob(b.prob) + ": ";
                out += name(s.chan) + "!<";
                for (size_t j = 0; j < b.payload.size(); ++j) {
                  if (j) out += ", ";
                  out += expr(b.payload[j], 5);  // additive level: '>' closes
                }
                out += ">; " + term(b.cont);
              }
              return out;
            },
            [&](const PRecv& r) {
              std::string out;
              for (size_t i = 0; i < r.branches.size(); ++i) {
                const auto& b = r.branches[i];
                if (i) out += " + ";
                std::vector<std::string> ids;
                for (const auto& [x, srt] : b.binders) ids.push_back(x);
                out += name(r.chan) + "?(";
                out += scoped(DbEnv::Ns::Var, ids, [&] {
                  return binders(b.binders) + "); " + term(b.cont);
                });
              }
              return out;
            },
            [&](const PDeleg& d) {
              return name(d.chan) + "!!(" + chan_list(d.sent, false) + "); " + term(d.cont);
            },
            [&](const PSessRecv& s) {
              std::string head = name(s.chan) + "?\?(";
              return scoped(DbEnv::Ns::Name, s.bound, [&] {
                return head + chan_list(s.bound, true) + "); " + term(s.cont);
              });
            },
            [&](const PSelect& s) {
              std::string out;
              bool implicit_one =
                  s.branches.size() == 1 && s.branches[0].prob == Rational(1);
              for (size_t i = 0; i < s.branches.size(); ++i) {
                const auto& b = s.branches[i];
                if (i) out += " + ";
                if (!implicit_one) out += prob(b.prob) + ": ";
                out += name(s.chan) + " <+ " + b.label + "; " + term(b.cont);
              }
              return out;
            },
            [&](const PBranch& br) {
              std::string out = name(br.chan) + " >> { ";
              for (size_t i = 0; i < br.arms.size(); ++i) {
                if (i) out += ", ";
                out += br.arms[i].label + ": " + proc(br.arms[i].cont);
              }
              return out + " }";
            },
            [&](const PIf& i) {
              return "if " + expr(i.cond) + " then " + term(i.then_p) + " else " +
                     term(i.else_p);
            },
            [&](const PPar& pp) {
              std::string l = proc(pp.left);
              if (as<PPar>(pp.left) || swallows_right(pp.left)) l = "(" + l + ")";
              return l + " | " + proc(pp.right);
            },
            [&](const PHide& h) {
              std::string head = "new ";
              return scoped(DbEnv::Ns::Name, {h.name}, [&] {
                return head + name(h.name) + " in " + proc(h.body);
              });
            },
            [&](const PRec& r) {
              std::string head = "mu ";
              return scoped(DbEnv::Ns::Proc, {r.var}, [&] {
                return head + pvar(r.var) + ". " + proc(r.body);
              });
            },
            [&](const PVar& v) { return pvar(v.var); },
            [&](const PInact&) { return std::string("0"); },
            [&](const PError&) { return std::string("error"); },
        },
        p->node);
  }
};

}  // namespace detail

inline std::string print_expr(const ExprPtr& e) {
  detail::Printer pr;
  return pr.expr(e);
}

// Renders a payload tuple the way send prefixes do (comparisons
// parenthesized, items comma-separated). Branch identity in queries compares
// against exactly this rendering.
inline std::string render_payload(const std::vector<ExprPtr>& es) {
  detail::Printer pr;
  std::string out;
  for (size_t i = 0; i < es.size(); ++i) {
    if (i) out += ", ";
    out += pr.expr(es[i], 5);
  }
  return out;
}

inline std::string print_value(const Value& v) {
  detail::Printer pr;
  return pr.value(v);
}

inline std::string print_process(const ProcPtr& p) {
  detail::Printer pr;
  return pr.proc(p);
}

// Alpha-invariant rendering: bound identifiers print as binder-relative
// indices, so two terms have equal keys iff they are alpha-equal.
inline std::string canonical_key(const ProcPtr& p) {
  detail::Printer pr;
  pr.canonical = true;
  return pr.proc(p);
}

inline bool alpha_equal(const ProcPtr& a, const ProcPtr& b) {
  return canonical_key(a) == canonical_key(b);
}

}  // namespace pmps

#endif
