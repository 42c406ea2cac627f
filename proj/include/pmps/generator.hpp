#ifndef PMPS_GENERATOR_HPP
#define PMPS_GENERATOR_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmps/ast.hpp"
#include "pmps/parser.hpp"
#include "pmps/printer.hpp"
#include "pmps/projection.hpp"
#include "pmps/rational.hpp"
#include "pmps/typing.hpp"

namespace pmps {

// A randomly generated protocol together with processes that follow it: one
// per participant, composed open (session channels free) and closed (started
// through a shared name). Point probabilities sit inside their declared
// intervals by construction, so the composition is well typed.
struct GenSystem {
  GlobalPtr global;
  SortEnv gamma;  // binds the shared name "a" to the protocol
  std::vector<std::string> channels;
  int participants = 0;
  std::map<int, ProcPtr> views;
  ProcPtr open;
  ProcPtr closed;
};

namespace detail {

// Every channel is owned by one directed participant pair, and each of the
// two endpoint threads is sequential, so at most one send and one receive can
// ever be pending per channel: generated systems are race free.
struct GenWalk {
  std::mt19937_64 rng;
  struct Link {
    int from, to;
    std::string chan;
  };
  std::vector<Link> links;
  int participants = 0;
  int next_var = 0;
  int next_rec = 0;

  explicit GenWalk(uint64_t seed) : rng(seed) {}

  size_t pick(size_t k) { return static_cast<size_t>(rng() % k); }

  // One piece of the protocol: the global text plus each participant's text.
  struct Piece {
    std::string g;
    std::map<int, std::string> procs;
  };

  static bool atom_g(const std::string& s) {
    if (s == "end") return true;
    if (s.size() < 2 || s[0] != 't') return false;
    for (size_t i = 1; i < s.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
  }

  static bool atom_p(const std::string& s) {
    if (s == "0") return true;
    if (s.size() < 2 || s[0] != 'X') return false;
    for (size_t i = 1; i < s.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
  }

  static std::string wrap_g(const std::string& s) { return atom_g(s) ? s : "(" + s + ")"; }
  static std::string wrap_p(const std::string& s) { return atom_p(s) ? s : "(" + s + ")"; }

  Piece end_piece() {
    Piece p;
    p.g = "end";
    for (int r = 1; r <= participants; ++r) p.procs[r] = "0";
    return p;
  }

  // Exact unit partition with small random weights.
  std::vector<Rational> partition(size_t k) {
    std::vector<Int> w(k);
    Int total = 0;
    for (auto& x : w) {
      x = 1 + static_cast<long long>(pick(9));
      total += x;
    }
    std::vector<Rational> out;
    out.reserve(k);
    for (const auto& x : w) out.emplace_back(x, total);
    return out;
  }

  std::string widen(const Rational& p) {
    static const Rational slacks[] = {Rational(0), Rational(1, 20), Rational(1, 10)};
    Rational lo = p - slacks[pick(3)];
    Rational hi = p + slacks[pick(3)];
    if (lo < Rational(0)) lo = Rational(0);
    if (hi > Rational(1)) hi = Rational(1);
    return "[" + to_fraction_string(lo) + "," + to_fraction_string(hi) + "]";
  }

  struct SortPick {
    std::string name;
    std::string value;
  };

  SortPick sample_sort() {
    switch (pick(3)) {
      case 0: return {"nat", std::to_string(pick(10))};
      case 1: return {"string", "\"w" + std::to_string(pick(10)) + "\""};
      default: return {"bool", pick(2) ? "true" : "false"};
    }
  }

  std::vector<SortPick> distinct_sorts(size_t k) {
    std::vector<std::string> names = {"nat", "string", "bool"};
    std::shuffle(names.begin(), names.end(), rng);
    names.resize(k);
    std::vector<SortPick> out;
    for (const auto& n : names) {
      SortPick s = sample_sort();
      while (s.name != n) s = sample_sort();
      out.push_back(s);
    }
    return out;
  }

  Piece single_value(const Link& l, Piece cont) {
    SortPick s = sample_sort();
    std::string x = "v" + std::to_string(next_var++);
    Piece out;
    out.g = std::to_string(l.from) + " ->" + widen(Rational(1)) + " " + std::to_string(l.to) +
            " : " + l.chan + "<" + s.name + ">. " + wrap_g(cont.g);
    for (int r = 1; r <= participants; ++r) {
      if (r == l.from)
        out.procs[r] = l.chan + "!<" + s.value + ">; " + wrap_p(cont.procs[r]);
      else if (r == l.to)
        out.procs[r] = l.chan + "?(" + x + ": " + s.name + "); " + wrap_p(cont.procs[r]);
      else
        out.procs[r] = cont.procs[r];
    }
    return out;
  }

  // Probabilistic exchange: branches differ in payload sort, the continuation
  // is shared so every other participant projects one unambiguous view.
  Piece prob_value(const Link& l, Piece cont) {
    size_t k = 2 + pick(2);
    std::vector<SortPick> sorts = distinct_sorts(k);
    std::vector<Rational> probs = partition(k);
    Piece out;
    std::string& snd = out.procs[l.from];
    std::string& rcv = out.procs[l.to];
    for (size_t i = 0; i < k; ++i) {
      if (i) {
        out.g += " + ";
        snd += " + ";
        rcv += " + ";
      }
      out.g += std::to_string(l.from) + " ->" + widen(probs[i]) + " " + std::to_string(l.to) +
               " : " + l.chan + "<" + sorts[i].name + ">. " + wrap_g(cont.g);
      snd += to_fraction_string(probs[i]) + ": " + l.chan + "!<" + sorts[i].value + ">; " +
             wrap_p(cont.procs[l.from]);
      rcv += l.chan + "?(v" + std::to_string(next_var++) + ": " + sorts[i].name + "); " +
             wrap_p(cont.procs[l.to]);
    }
    for (int r = 1; r <= participants; ++r)
      if (r != l.from && r != l.to) out.procs[r] = cont.procs[r];
    return out;
  }

  Piece label_choice(const Link& l, Piece cont) {
    size_t k = 2 + pick(2);
    std::vector<Rational> probs = partition(k);
    Piece out;
    std::string& sel = out.procs[l.from];
    std::string& brn = out.procs[l.to];
    brn = l.chan + " >> { ";
    for (size_t i = 0; i < k; ++i) {
      std::string lab = "l" + std::to_string(i);
      if (i) {
        out.g += " + ";
        sel += " + ";
        brn += ", ";
      }
      out.g += std::to_string(l.from) + " ->" + widen(probs[i]) + " " + std::to_string(l.to) +
               " : " + l.chan + "{ " + lab + ": " + cont.g + " }";
      sel += to_fraction_string(probs[i]) + ": " + l.chan + " <+ " + lab + "; " +
             wrap_p(cont.procs[l.from]);
      brn += lab + ": " + wrap_p(cont.procs[l.to]);
    }
    brn += " }";
    for (int r = 1; r <= participants; ++r)
      if (r != l.from && r != l.to) out.procs[r] = cont.procs[r];
    return out;
  }

  Piece one_exchange(Piece cont) {
    const Link& l = links[pick(links.size())];
    switch (pick(4)) {
      case 0:
      case 1: return single_value(l, cont);
      case 2: return prob_value(l, cont);
      default: return label_choice(l, cont);
    }
  }

  Piece walk(int budget, Piece tail) {
    if (budget <= 0 || pick(100) < 15) return tail;
    return one_exchange(walk(budget - 1, std::move(tail)));
  }

  // Terminal loop: a guarded body cycling forever. Participants the body never
  // touches fall out of the loop entirely, mirroring their projection.
  Piece recursion(int body_len) {
    std::string tv = "t" + std::to_string(next_rec);
    std::string pv = "X" + std::to_string(next_rec);
    ++next_rec;
    Piece inner;
    inner.g = tv;
    for (int r = 1; r <= participants; ++r) inner.procs[r] = pv;
    Piece body = inner;
    for (int i = 0; i < body_len; ++i) body = one_exchange(std::move(body));
    Piece out;
    out.g = "mu " + tv + ". " + body.g;
    for (int r = 1; r <= participants; ++r)
      out.procs[r] = body.procs[r] == pv ? "0" : "mu " + pv + ". " + body.procs[r];
    return out;
  }
};

}  // namespace detail

// Builds one reproducible random system. Depth along any path of the global
// type stays within twelve exchanges; between two and four participants.
namespace detail {

inline GenSystem generate_once(uint64_t rng_seed) {
  detail::GenWalk w(rng_seed);
  w.participants = 2 + static_cast<int>(w.pick(3));
  int nchan = w.participants == 2 ? 1 + static_cast<int>(w.pick(2)) : w.participants - 1;
  for (int i = 0; i < nchan; ++i) {
    int a = w.participants == 2 ? 1 : i + 1;
    int b = w.participants == 2 ? 2 : i + 2;
    if (w.pick(2)) std::swap(a, b);
    w.links.push_back({a, b, "c" + std::to_string(i)});
  }

  int budget = 12 - nchan;
  detail::GenWalk::Piece tail = w.end_piece();
  if (w.pick(100) < 35) {
    int len = 1 + static_cast<int>(w.pick(3));
    tail = w.recursion(len);
    budget -= len + 1;
  }
  detail::GenWalk::Piece body = w.walk(budget, std::move(tail));
  // Prologue: one exchange per channel, so every participant and channel
  // occurs and the first action of each thread is causally anchored.
  for (int i = nchan - 1; i >= 0; --i) body = w.single_value(w.links[i], std::move(body));

  GenSystem sys;
  sys.participants = w.participants;
  sys.global = parse_global(body.g);
  sys.gamma.names["a"] = sys.global;
  for (int i = 0; i < nchan; ++i) sys.channels.push_back("c" + std::to_string(i));

  WellFormedResult wf = well_formed(sys.global);
  if (!wf.ok)
    throw std::logic_error("generated an ill-formed protocol: " +
                           (wf.errors.empty() ? std::string() : wf.errors.front()));
  for (int r = 1; r <= w.participants; ++r) {
    ProjResult pr = project(sys.global, r);
    if (!pr.ok()) throw std::logic_error("generated an unprojectable protocol: " + pr.error);
  }

  std::string open_text, closed_text;
  std::string binder;
  for (size_t i = 0; i < sys.channels.size(); ++i)
    binder += (i ? "," : "") + sys.channels[i];
  for (int r = 1; r <= w.participants; ++r) {
    sys.views[r] = parse_process(body.procs[r]);
    if (r > 1) {
      open_text += " | ";
      closed_text += " | ";
    }
    open_text += "(" + body.procs[r] + ")";
    closed_text += r == 1 ? "(request a[" + std::to_string(w.participants) + "](" + binder +
                                "). (" + body.procs[r] + "))"
                          : "(accept a[" + std::to_string(r) + "](" + binder + "). (" +
                                body.procs[r] + "))";
  }
  sys.open = parse_process(open_text);
  sys.closed = parse_process(closed_text);
  return sys;
}

}  // namespace detail

// Oversized draws would make whole-term sweeps (typing every rewrite of a
// term, enumerating every path of its graph) quadratic in practice, so they
// are redrawn under a deterministically shifted seed.
inline GenSystem generate_system(uint64_t seed) {
  for (uint64_t attempt = 0;; ++attempt) {
    GenSystem sys = detail::generate_once(seed + 0x9e3779b97f4a7c15ULL * attempt);
    if (print_process(sys.open).size() <= 4096) return sys;
  }
}

namespace detail {

inline void count_choices(const ProcPtr& p, size_t& k) {
  std::visit(overloaded{
                 [&](const PSend& n) {
                   ++k;
                   for (const auto& b : n.branches) count_choices(b.cont, k);
                 },
                 [&](const PSelect& n) {
                   ++k;
                   for (const auto& b : n.branches) count_choices(b.cont, k);
                 },
                 [&](const PRecv& n) {
                   for (const auto& b : n.branches) count_choices(b.cont, k);
                 },
                 [&](const PBranch& n) {
                   for (const auto& a : n.arms) count_choices(a.cont, k);
                 },
                 [&](const PDeleg& n) { count_choices(n.cont, k); },
                 [&](const PSessRecv& n) { count_choices(n.cont, k); },
                 [&](const PIf& n) {
                   count_choices(n.then_p, k);
                   count_choices(n.else_p, k);
                 },
                 [&](const PPar& n) {
                   count_choices(n.left, k);
                   count_choices(n.right, k);
                 },
                 [&](const PHide& n) { count_choices(n.body, k); },
                 [&](const PRec& n) { count_choices(n.body, k); },
                 [&](const PRequest& n) { count_choices(n.body, k); },
                 [&](const PAccept& n) { count_choices(n.body, k); },
                 [&](const PVar&) {},
                 [&](const PInact&) {},
                 [&](const PError&) {},
             },
             p->node);
}

inline ProcPtr scale_choice(const ProcPtr& p, size_t& idx, size_t target, uint64_t which) {
  return std::visit(
      overloaded{
          [&](const PSend& n) -> ProcPtr {
            PSend out = n;
            if (idx++ == target) {
              out.branches[which % out.branches.size()].prob =
                  out.branches[which % out.branches.size()].prob * Rational(1, 2);
              return mk(out);
            }
            for (auto& b : out.branches) b.cont = scale_choice(b.cont, idx, target, which);
            return mk(out);
          },
          [&](const PSelect& n) -> ProcPtr {
            PSelect out = n;
            if (idx++ == target) {
              out.branches[which % out.branches.size()].prob =
                  out.branches[which % out.branches.size()].prob * Rational(1, 2);
              return mk(out);
            }
            for (auto& b : out.branches) b.cont = scale_choice(b.cont, idx, target, which);
            return mk(out);
          },
          [&](const PRecv& n) -> ProcPtr {
            PRecv out = n;
            for (auto& b : out.branches) b.cont = scale_choice(b.cont, idx, target, which);
            return mk(out);
          },
          [&](const PBranch& n) -> ProcPtr {
            PBranch out = n;
            for (auto& a : out.arms) a.cont = scale_choice(a.cont, idx, target, which);
            return mk(out);
          },
          [&](const PDeleg& n) -> ProcPtr {
            PDeleg out = n;
            out.cont = scale_choice(out.cont, idx, target, which);
            return mk(out);
          },
          [&](const PSessRecv& n) -> ProcPtr {
            PSessRecv out = n;
            out.cont = scale_choice(out.cont, idx, target, which);
            return mk(out);
          },
          [&](const PIf& n) -> ProcPtr {
            PIf out = n;
            out.then_p = scale_choice(out.then_p, idx, target, which);
            out.else_p = scale_choice(out.else_p, idx, target, which);
            return mk(out);
          },
          [&](const PPar& n) -> ProcPtr {
            PPar out = n;
            out.left = scale_choice(out.left, idx, target, which);
            out.right = scale_choice(out.right, idx, target, which);
            return mk(out);
          },
          [&](const PHide& n) -> ProcPtr {
            PHide out = n;
            out.body = scale_choice(out.body, idx, target, which);
            return mk(out);
          },
          [&](const PRec& n) -> ProcPtr {
            PRec out = n;
            out.body = scale_choice(out.body, idx, target, which);
            return mk(out);
          },
          [&](const PRequest& n) -> ProcPtr {
            PRequest out = n;
            out.body = scale_choice(out.body, idx, target, which);
            return mk(out);
          },
          [&](const PAccept& n) -> ProcPtr {
            PAccept out = n;
            out.body = scale_choice(out.body, idx, target, which);
            return mk(out);
          },
          [&](const PVar&) -> ProcPtr { return p; },
          [&](const PInact&) -> ProcPtr { return p; },
          [&](const PError&) -> ProcPtr { return p; },
      },
      p->node);
}

}  // namespace detail

// Halves one randomly chosen branch probability, so exactly one internal
// choice stops summing to 1: the result must be rejected by the type checker
// and must expose an error transition once that choice fires.
inline ProcPtr perturb_probability(const ProcPtr& p, uint64_t seed) {
  size_t k = 0;
  detail::count_choices(p, k);
  if (k == 0) throw std::invalid_argument("nothing probabilistic to perturb");
  std::mt19937_64 rng(seed);
  size_t target = static_cast<size_t>(rng() % k);
  uint64_t which = rng();
  size_t idx = 0;
  return detail::scale_choice(p, idx, target, which);
}

}  // namespace pmps

#endif
