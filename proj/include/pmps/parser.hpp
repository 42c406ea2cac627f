#ifndef PMPS_PARSER_HPP
#define PMPS_PARSER_HPP

#include <cctype>
#include <cstring>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pmps/ast.hpp"
#include "pmps/interval.hpp"
#include "pmps/printer.hpp"
#include "pmps/types.hpp"

namespace pmps {

struct ParseError : std::runtime_error {
  int line = 0, col = 0;

  ParseError(const std::string& msg, int line_, int col_)
      : std::runtime_error(std::to_string(line_) + ":" + std::to_string(col_) + ": " + msg),
        line(line_),
        col(col_) {}
};

// A parsed protocol file: declarations in source order, later declarations may
// reference earlier ones by name.
struct SourceFile {
  RoleNames roles;
  std::vector<std::pair<std::string, GlobalPtr>> globals;
  std::vector<std::pair<std::string, ProcPtr>> processes;
  std::vector<std::pair<std::string, std::string>> name_decls;  // shared name -> global
  std::vector<std::pair<std::string, ProcPtr>> systems;

  const GlobalPtr* find_global(const std::string& n) const {
    for (const auto& [k, v] : globals)
      if (k == n) return &v;
    return nullptr;
  }
  const ProcPtr* find_process(const std::string& n) const {
    for (const auto& [k, v] : processes)
      if (k == n) return &v;
    return nullptr;
  }
  const ProcPtr* find_system(const std::string& n) const {
    for (const auto& [k, v] : systems)
      if (k == n) return &v;
    return nullptr;
  }
  // shared-name typing environment induced by the name declarations
  std::map<std::string, GlobalPtr> name_env() const {
    std::map<std::string, GlobalPtr> out;
    for (const auto& [a, gname] : name_decls)
      if (const auto* g = find_global(gname)) out[a] = *g;
    return out;
  }
};

namespace detail {

struct Token {
  enum class Kind { Eof, Ident, Number, Str, Punct };
  Kind kind = Kind::Eof;
  std::string text;  // punct spelling, identifier, number literal, or string value
  int line = 1, col = 1;
};

inline const std::set<std::string>& reserved_words() {
  static const std::set<std::string> words = {
      "request", "accept", "if",     "then",   "else", "new",  "in",     "mu",
      "end",     "true",   "false",  "and",    "or",   "not",  "error",  "global",
      "process", "system", "name",   "roles",  "bool", "nat",  "int",    "string"};
  return words;
}

inline std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto peek = [&](size_t k) { return i + k < src.size() ? src[i + k] : '\0'; };
  auto fail = [&](const std::string& msg) { throw ParseError(msg, line, col); };

  static const char* puncts[] = {"(+)", "!!", "!=", "==", "<=", ">=", "<+", "<<",
                                 ">>",  "??", "->", "(",  ")",  "[",  "]",  "{",
                                 "}",   "<",  ">",  "+",  "-",  "*",  "/",  "|",
                                 "&",   "!",  "?",  ".",  ",",  ":",  ";",  "=",
                                 "@"};

  while (i < src.size()) {
    char c = src[i];
    if (c == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      ++col;
      ++i;
      continue;
    }
    if (c == '/' && peek(1) == '/') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j < src.size() && src[j] == '.' && j + 1 < src.size() &&
          std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      t.kind = Token::Kind::Number;
      t.text = src.substr(i, j - i);
      col += static_cast<int>(j - i);
      i = j;
      out.push_back(std::move(t));
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) ||
                                src[j] == '_' || src[j] == '\''))
        ++j;
      t.kind = Token::Kind::Ident;
      t.text = src.substr(i, j - i);
      col += static_cast<int>(j - i);
      i = j;
      out.push_back(std::move(t));
      continue;
    }
    if (c == '"') {
      std::string val;
      size_t j = i + 1;
      int ccol = col + 1;
      while (true) {
        if (j >= src.size() || src[j] == '\n') fail("unterminated string literal");
        char d = src[j];
        if (d == '"') {
          ++j;
          ++ccol;
          break;
        }
        if (d == '\\') {
          char e = j + 1 < src.size() ? src[j + 1] : '\0';
          switch (e) {
            case '"': val += '"'; break;
            case '\\': val += '\\'; break;
            case 'n': val += '\n'; break;
            case 't': val += '\t'; break;
            default: fail("unknown escape in string literal");
          }
          j += 2;
          ccol += 2;
          continue;
        }
        val += d;
        ++j;
        ++ccol;
      }
      t.kind = Token::Kind::Str;
      t.text = std::move(val);
      col = ccol;
      i = j;
      out.push_back(std::move(t));
      continue;
    }
    bool matched = false;
    for (const char* p : puncts) {
      size_t len = std::strlen(p);
      if (src.compare(i, len, p) == 0) {
        t.kind = Token::Kind::Punct;
        t.text = p;
        col += static_cast<int>(len);
        i += len;
        out.push_back(std::move(t));
        matched = true;
        break;
      }
    }
    if (!matched) fail(std::string("unexpected character '") + c + "'");
  }
  Token eof;
  eof.line = line;
  eof.col = col;
  out.push_back(std::move(eof));
  return out;
}

struct Parser {
  std::vector<Token> toks;
  size_t pos = 0;
  const RoleNames* roles = nullptr;
  const SourceFile* file = nullptr;       // for process-reference resolution
  std::vector<std::string> mu_bound;      // process variables in scope

  explicit Parser(const std::string& src) : toks(lex(src)) {}

  const Token& cur() const { return toks[pos]; }
  const Token& ahead(size_t k) const {
    return toks[std::min(pos + k, toks.size() - 1)];
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, cur().line, cur().col);
  }
  [[noreturn]] void fail_at(const Token& t, const std::string& msg) const {
    throw ParseError(msg, t.line, t.col);
  }

  bool at_punct(const std::string& p) const {
    return cur().kind == Token::Kind::Punct && cur().text == p;
  }
  bool at_kw(const std::string& k) const {
    return cur().kind == Token::Kind::Ident && cur().text == k;
  }
  bool eat_punct(const std::string& p) {
    if (!at_punct(p)) return false;
    ++pos;
    return true;
  }
  void expect_punct(const std::string& p) {
    if (!eat_punct(p)) fail("expected '" + p + "'");
  }
  bool eat_kw(const std::string& k) {
    if (!at_kw(k)) return false;
    ++pos;
    return true;
  }
  void expect_kw(const std::string& k) {
    if (!eat_kw(k)) fail("expected '" + k + "'");
  }
  std::string expect_ident(const std::string& what) {
    if (cur().kind != Token::Kind::Ident) fail("expected " + what);
    if (reserved_words().count(cur().text)) fail("'" + cur().text + "' is a reserved word");
    return toks[pos++].text;
  }

  // ---- numbers and probabilities ------------------------------------------

  Int expect_int(const std::string& what) {
    if (cur().kind != Token::Kind::Number || cur().text.find('.') != std::string::npos)
      fail("expected " + what);
    return int_from_digits(toks[pos++].text);
  }

  Rational parse_prob() {
    const Token& t = cur();
    if (t.kind != Token::Kind::Number) fail("expected a probability");
    std::string text = toks[pos++].text;
    if (at_punct("/")) {
      ++pos;
      if (cur().kind != Token::Kind::Number || cur().text.find('.') != std::string::npos)
        fail("expected a denominator");
      text += "/" + toks[pos++].text;
    }
    auto r = parse_rational(text);
    if (!r) fail_at(t, "malformed probability '" + text + "'");
    if (*r < Rational(0) || Rational(1) < *r)
      fail_at(t, "probability " + text + " outside [0,1]");
    return *r;
  }

  // point probability, or an interval in (half-)open bracket notation
  ProbInterval parse_delta() {
    const Token& t = cur();
    if (at_punct("[") || at_punct("(")) {
      bool lo_closed = cur().text == "[";
      ++pos;
      Rational lo = parse_prob();
      expect_punct(",");
      Rational hi = parse_prob();
      bool hi_closed;
      if (eat_punct("]"))
        hi_closed = true;
      else if (eat_punct(")"))
        hi_closed = false;
      else
        fail("expected ']' or ')' to close the interval");
      ProbInterval d{lo, hi, lo_closed, hi_closed};
      if (!d.valid()) fail_at(t, "empty probability interval");
      return d;
    }
    return ProbInterval::point(parse_prob());
  }

  // an interval begins here iff '(' or '[' is followed by a number and, after
  // the full bound, a comma
  bool delta_ahead() const {
    if (cur().kind == Token::Kind::Number) return true;
    if (!at_punct("[") && !at_punct("(")) return false;
    if (ahead(1).kind != Token::Kind::Number) return false;
    size_t k = 2;
    if (ahead(k).kind == Token::Kind::Punct && ahead(k).text == "/" &&
        ahead(k + 1).kind == Token::Kind::Number)
      k += 2;
    return ahead(k).kind == Token::Kind::Punct && ahead(k).text == ",";
  }

  // ---- expressions ----------------------------------------------------------
  //
  // precedence: or < and < not < comparisons < additive < multiplicative

  ExprPtr parse_expr(int level = 1) {
    if (level == 3) {
      if (eat_kw("not")) return mk_not(parse_expr(3));
      return parse_expr(4);
    }
    if (level >= 7) return parse_primary();
    ExprPtr lhs = parse_expr(level + 1);
    while (true) {
      std::optional<BinOp> op;
      switch (level) {
        case 1:
          if (at_kw("or")) op = BinOp::Or;
          break;
        case 2:
          if (at_kw("and")) op = BinOp::And;
          break;
        case 4:
          if (at_punct("==")) op = BinOp::Eq;
          else if (at_punct("!=")) op = BinOp::Ne;
          else if (at_punct("<=")) op = BinOp::Le;
          else if (at_punct(">=")) op = BinOp::Ge;
          else if (at_punct("<")) op = BinOp::Lt;
          else if (at_punct(">")) op = BinOp::Gt;
          break;
        case 5:
          if (at_punct("+")) op = BinOp::Add;
          else if (at_punct("-")) op = BinOp::Sub;
          break;
        case 6:
          if (at_punct("*")) op = BinOp::Mul;
          else if (at_punct("/")) op = BinOp::Div;
          break;
        default: break;
      }
      if (!op) return lhs;
      ++pos;
      // operands of a comparison or boolean operator sit one level tighter;
      // 'not' re-enters at its own level
      int rhs_level = level == 2 ? 3 : level + 1;
      lhs = mk_bin(*op, lhs, parse_expr(rhs_level));
    }
  }

  ExprPtr parse_primary() {
    if (eat_punct("(")) {
      ExprPtr e = parse_expr(1);
      expect_punct(")");
      return e;
    }
    if (at_punct("-")) {
      ++pos;
      return mk_val(Value{-expect_int("an integer after unary minus")});
    }
    if (cur().kind == Token::Kind::Number) {
      if (cur().text.find('.') != std::string::npos)
        fail("decimal literals are only probabilities, not values");
      return mk_val(Value{int_from_digits(toks[pos++].text)});
    }
    if (cur().kind == Token::Kind::Str) return mk_val(Value{toks[pos++].text});
    if (eat_kw("true")) return mk_val(Value{true});
    if (eat_kw("false")) return mk_val(Value{false});
    if (cur().kind == Token::Kind::Ident && !reserved_words().count(cur().text))
      return mk_var(toks[pos++].text);
    fail("expected an expression");
  }

  // ---- processes ------------------------------------------------------------

  std::vector<std::string> parse_chan_list() {
    std::vector<std::string> out;
    out.push_back(expect_ident("a channel name"));
    while (eat_punct(",")) out.push_back(expect_ident("a channel name"));
    return out;
  }

  Sort parse_sort() {
    if (cur().kind != Token::Kind::Ident) fail("expected a sort");
    auto s = sort_from_name(cur().text);
    if (!s) fail("unknown sort '" + cur().text + "'");
    ++pos;
    return *s;
  }

  bool proc_ref_known(const std::string& n) const {
    for (const auto& v : mu_bound)
      if (v == n) return true;
    return file && file->find_process(n);
  }

  ProcPtr parse_proc() {  // full level: parallel composition
    ProcPtr left = parse_sum();
    if (eat_punct("|")) return mk<PPar>(PPar{left, parse_proc()});
    return left;
  }

  ProcPtr parse_sum() {
    const Token& start = cur();
    ProcPtr acc = parse_term();
    while (at_punct("+")) {
      ++pos;
      const Token& bt = cur();
      ProcPtr next = parse_term();
      if (auto* s = as<PSend>(acc)) {
        auto* t = as<PSend>(next);
        if (!t || t->chan != s->chan)
          fail_at(bt, "branches of a sum must send on one channel");
        PSend merged = *s;
        for (const auto& b : t->branches) merged.branches.push_back(b);
        acc = mk<PSend>(std::move(merged));
      } else if (auto* sel = as<PSelect>(acc)) {
        auto* t = as<PSelect>(next);
        if (!t || t->chan != sel->chan)
          fail_at(bt, "branches of a sum must select on one channel");
        PSelect merged = *sel;
        for (const auto& b : t->branches) merged.branches.push_back(b);
        acc = mk<PSelect>(std::move(merged));
      } else if (auto* r = as<PRecv>(acc)) {
        auto* t = as<PRecv>(next);
        if (!t || t->chan != r->chan)
          fail_at(bt, "branches of a sum must receive on one channel");
        PRecv merged = *r;
        for (const auto& b : t->branches) merged.branches.push_back(b);
        acc = mk<PRecv>(std::move(merged));
      } else {
        fail_at(start, "only sends, receives, and selections form sums");
      }
    }
    return acc;
  }

  ProcPtr parse_term() {
    // probability-prefixed branch: "p:" before a send or selection
    if (cur().kind == Token::Kind::Number && ahead(1).kind == Token::Kind::Punct &&
        (ahead(1).text == ":" ||
         (ahead(1).text == "/" && ahead(2).kind == Token::Kind::Number &&
          ahead(3).kind == Token::Kind::Punct && ahead(3).text == ":"))) {
      Rational p = parse_prob();
      expect_punct(":");
      return parse_prefixed_action(p);
    }
    if (cur().kind == Token::Kind::Number) {
      if (cur().text == "0") {
        ++pos;
        return mk_inact();
      }
      fail("unexpected number; the inert process is '0'");
    }
    if (eat_kw("error")) return mk_error();
    if (eat_kw("if")) {
      ExprPtr c = parse_expr(1);
      expect_kw("then");
      ProcPtr t = parse_term();
      expect_kw("else");
      ProcPtr e = parse_term();
      return mk<PIf>(PIf{c, t, e});
    }
    if (eat_kw("new")) {
      std::string n = expect_ident("a name to hide");
      expect_kw("in");
      return mk<PHide>(PHide{n, parse_proc()});
    }
    if (eat_kw("mu")) {
      std::string v = expect_ident("a recursion variable");
      expect_punct(".");
      mu_bound.push_back(v);
      ProcPtr body = parse_proc();
      mu_bound.pop_back();
      return mk<PRec>(PRec{v, body});
    }
    if (at_kw("request") || at_kw("accept")) {
      bool is_request = cur().text == "request";
      ++pos;
      std::string shared = expect_ident("a shared name");
      expect_punct("[");
      Int n = expect_int("a participant count");
      expect_punct("]");
      expect_punct("(");
      auto cs = parse_chan_list();
      expect_punct(")");
      expect_punct(".");
      ProcPtr body = parse_proc();
      int k = static_cast<int>(n);
      if (is_request) return mk<PRequest>(PRequest{shared, k, cs, body});
      return mk<PAccept>(PAccept{shared, k, cs, body});
    }
    if (eat_punct("(")) {
      ProcPtr p = parse_proc();
      expect_punct(")");
      return p;
    }
    if (cur().kind == Token::Kind::Ident && !reserved_words().count(cur().text)) {
      const Token& id_tok = cur();
      std::string id = toks[pos++].text;
      if (at_punct("!") && ahead(1).kind == Token::Kind::Punct && ahead(1).text == "<")
        return parse_send_tail(id, Rational(1));
      if (at_punct("<+")) return parse_select_tail(id, Rational(1));
      if (eat_punct("!!")) {
        expect_punct("(");
        auto cs = parse_chan_list();
        expect_punct(")");
        expect_punct(";");
        return mk<PDeleg>(PDeleg{id, cs, parse_term()});
      }
      if (eat_punct("??")) {
        expect_punct("(");
        auto cs = parse_chan_list();
        expect_punct(")");
        expect_punct(";");
        return mk<PSessRecv>(PSessRecv{id, cs, parse_term()});
      }
      if (eat_punct("?")) {
        expect_punct("(");
        RecvBranch b;
        do {
          std::string x = expect_ident("a variable");
          expect_punct(":");
          b.binders.emplace_back(x, parse_sort());
        } while (eat_punct(","));
        expect_punct(")");
        expect_punct(";");
        b.cont = parse_term();
        return mk<PRecv>(PRecv{id, {std::move(b)}});
      }
      if (eat_punct(">>")) {
        expect_punct("{");
        PBranch br{id, {}};
        do {
          std::string label = expect_ident("a label");
          expect_punct(":");
          br.arms.push_back(BranchArm{label, parse_proc()});
        } while (eat_punct(","));
        expect_punct("}");
        return mk<PBranch>(std::move(br));
      }
      // bare identifier: a recursion variable, or a named process to splice in
      bool bound = false;
      for (const auto& v : mu_bound) bound = bound || v == id;
      if (!bound && file) {
        if (const auto* decl = file->find_process(id)) return *decl;
        fail_at(id_tok, "unknown process reference '" + id + "'");
      }
      return mk<PVar>(PVar{id});
    }
    fail("expected a process");
  }

  ProcPtr parse_prefixed_action(const Rational& p) {
    const Token& t = cur();
    std::string chan = expect_ident("a channel after the probability");
    if (at_punct("!") && ahead(1).kind == Token::Kind::Punct && ahead(1).text == "<")
      return parse_send_tail(chan, p);
    if (at_punct("<+")) return parse_select_tail(chan, p);
    fail_at(t, "a probability prefix must guard a send or a selection");
  }

  ProcPtr parse_send_tail(const std::string& chan, const Rational& p) {
    expect_punct("!");
    expect_punct("<");
    SendBranch b;
    b.prob = p;
    b.payload.push_back(parse_expr(5));
    while (eat_punct(",")) b.payload.push_back(parse_expr(5));
    b.payload_src = render_payload(b.payload);
    expect_punct(">");
    expect_punct(";");
    b.cont = parse_term();
    return mk<PSend>(PSend{chan, {std::move(b)}});
  }

  ProcPtr parse_select_tail(const std::string& chan, const Rational& p) {
    expect_punct("<+");
    std::string label = expect_ident("a label");
    expect_punct(";");
    return mk<PSelect>(PSelect{chan, {SelectBranch{p, label, parse_term()}}});
  }

  // ---- global types ----------------------------------------------------------

  int parse_role() {
    if (cur().kind == Token::Kind::Number) {
      Int n = expect_int("a participant");
      if (n <= 0) fail("participants are numbered from 1");
      return static_cast<int>(n);
    }
    if (cur().kind == Token::Kind::Ident && !reserved_words().count(cur().text)) {
      if (roles) {
        if (auto q = roles->find(cur().text)) {
          ++pos;
          return *q;
        }
      }
      fail("unknown participant '" + cur().text + "'");
    }
    fail("expected a participant");
  }

  std::vector<Sort> parse_sort_list() {
    std::vector<Sort> out;
    out.push_back(parse_sort());
    while (eat_punct(",")) out.push_back(parse_sort());
    return out;
  }

  GlobalPtr parse_gtype() {
    GlobalPtr left = parse_gsum();
    while (eat_punct(",")) left = mkg(GPar{left, parse_gsum()});
    return left;
  }

  GlobalPtr parse_gsum() {
    const Token& start = cur();
    GlobalPtr acc = parse_gatom();
    while (at_punct("+")) {
      ++pos;
      const Token& bt = cur();
      GlobalPtr next = parse_gatom();
      if (auto* v = as_g<GValues>(acc)) {
        auto* w = as_g<GValues>(next);
        if (!w || w->from != v->from || w->to != v->to || w->chan != v->chan)
          fail_at(bt, "summed exchanges must share participants and channel");
        GValues merged = *v;
        for (const auto& b : w->branches) merged.branches.push_back(b);
        acc = mkg(std::move(merged));
      } else if (auto* b = as_g<GBranching>(acc)) {
        auto* w = as_g<GBranching>(next);
        if (!w || w->from != b->from || w->to != b->to || w->chan != b->chan)
          fail_at(bt, "summed choices must share participants and channel");
        GBranching merged = *b;
        for (const auto& br : w->branches) merged.branches.push_back(br);
        acc = mkg(std::move(merged));
      } else {
        fail_at(start, "only exchanges and choices form sums");
      }
    }
    return acc;
  }

  GlobalPtr parse_gatom() {
    if (eat_kw("end")) return mkg(GEnd{});
    if (eat_kw("mu")) {
      std::string v = expect_ident("a type variable");
      expect_punct(".");
      return mkg(GRec{v, parse_gtype()});
    }
    if (eat_punct("(")) {
      GlobalPtr g = parse_gtype();
      expect_punct(")");
      return g;
    }
    if (cur().kind == Token::Kind::Number ||
        (cur().kind == Token::Kind::Ident && !reserved_words().count(cur().text) &&
         ahead(1).kind == Token::Kind::Punct && ahead(1).text == "->")) {
      int from = parse_role();
      expect_punct("->");
      ProbInterval delta = parse_delta();
      int to = parse_role();
      expect_punct(":");
      std::string chan = expect_ident("a channel");
      if (eat_punct("{")) {
        std::string label = expect_ident("a label");
        expect_punct(":");
        GlobalPtr cont = parse_gtype();
        expect_punct("}");
        return mkg(GBranching{from, to, chan, {GLabelBranch{delta, label, cont}}});
      }
      expect_punct("<");
      if (cur().kind == Token::Kind::Ident && sort_from_name(cur().text)) {
        auto sorts = parse_sort_list();
        expect_punct(">");
        expect_punct(".");
        return mkg(GValues{from, to, chan, {GValueBranch{delta, sorts, parse_gatom()}}});
      }
      const Token& dt = cur();
      LocatedType carried = parse_located();
      expect_punct(">");
      expect_punct(".");
      if (!(delta.is_point() && delta.lo == Rational(1)))
        fail_at(dt, "delegation always happens with probability 1");
      return mkg(GDeleg{from, to, chan, carried, parse_gatom()});
    }
    if (cur().kind == Token::Kind::Ident && !reserved_words().count(cur().text))
      return mkg(GVar{toks[pos++].text});
    fail("expected a global type");
  }

  // ---- local types -----------------------------------------------------------

  LocatedType parse_located() {
    LocalPtr t = parse_ltype();
    if (auto* v = as_l<LVar>(t); v && v->var == "_") t = nullptr;  // wildcard
    expect_punct("@");
    int q = parse_role();
    return LocatedType{t, q};
  }

  LocalPtr parse_ltype() { return parse_lsum(); }

  LocalPtr parse_lsum() {
    const Token& start = cur();
    LocalPtr acc = parse_latom();
    while (at_punct("+")) {
      ++pos;
      const Token& bt = cur();
      LocalPtr next = parse_latom();
      if (auto* s = as_l<LSend>(acc)) {
        auto* t = as_l<LSend>(next);
        if (!t || t->chan != s->chan)
          fail_at(bt, "summed send types must share a channel");
        LSend merged = *s;
        for (const auto& b : t->branches) merged.branches.push_back(b);
        acc = mkl(std::move(merged));
      } else if (auto* r = as_l<LRecv>(acc)) {
        auto* t = as_l<LRecv>(next);
        if (!t || t->chan != r->chan)
          fail_at(bt, "summed receive types must share a channel");
        LRecv merged = *r;
        for (const auto& b : t->branches) merged.branches.push_back(b);
        acc = mkl(std::move(merged));
      } else {
        fail_at(start, "only send and receive types form sums");
      }
    }
    return acc;
  }

  LocalPtr parse_latom() {
    if (delta_ahead()) {
      ProbInterval delta = parse_delta();
      expect_punct(":");
      std::string chan = expect_ident("a channel");
      expect_punct("!");
      expect_punct("<");
      auto sorts = parse_sort_list();
      expect_punct(">");
      expect_punct(".");
      return mkl(LSend{chan, {LSendBranch{delta, sorts, parse_latom()}}});
    }
    if (eat_kw("end")) return mkl(LEnd{});
    if (eat_kw("mu")) {
      std::string v = expect_ident("a type variable");
      expect_punct(".");
      return mkl(LRec{v, parse_ltype()});
    }
    if (eat_punct("(")) {
      LocalPtr t = parse_ltype();
      expect_punct(")");
      return t;
    }
    if (cur().kind == Token::Kind::Ident && !reserved_words().count(cur().text)) {
      std::string id = toks[pos++].text;
      if (at_punct("!") && ahead(1).kind == Token::Kind::Punct && ahead(1).text == "<") {
        // unprefixed send: probability 1
        pos += 2;
        auto sorts = parse_sort_list();
        expect_punct(">");
        expect_punct(".");
        return mkl(
            LSend{id, {LSendBranch{ProbInterval::point(Rational(1)), sorts, parse_latom()}}});
      }
      if (at_punct("!") && ahead(1).kind == Token::Kind::Punct && ahead(1).text == "<<") {
        pos += 2;
        LocatedType carried = parse_located();
        expect_punct(">>");
        expect_punct(".");
        return mkl(LDeleg{id, carried, parse_latom()});
      }
      if (eat_punct("?")) {
        expect_punct("(");
        if (at_punct("(")) {
          ++pos;
          LocatedType carried = parse_located();
          expect_punct(")");
          expect_punct(")");
          expect_punct(".");
          return mkl(LSessRecv{id, carried, parse_latom()});
        }
        auto sorts = parse_sort_list();
        expect_punct(")");
        expect_punct(".");
        return mkl(LRecv{id, {LRecvBranch{sorts, parse_latom()}}});
      }
      if (eat_punct("(+)")) {
        expect_punct("{");
        LSelect sel{id, {}};
        do {
          ProbInterval d = parse_delta();
          expect_punct(":");
          std::string label = expect_ident("a label");
          expect_punct(":");
          sel.branches.push_back(LSelectBranch{d, label, parse_ltype()});
        } while (eat_punct(","));
        expect_punct("}");
        return mkl(std::move(sel));
      }
      if (eat_punct("&")) {
        expect_punct("{");
        LBranch br{id, {}};
        do {
          std::string label = expect_ident("a label");
          expect_punct(":");
          br.arms.push_back(LBranchArm{label, parse_ltype()});
        } while (eat_punct(","));
        expect_punct("}");
        return mkl(std::move(br));
      }
      return mkl(LVar{id});
    }
    fail("expected a local type");
  }

  // ---- declarations ----------------------------------------------------------

  SourceFile parse_file() {
    SourceFile out;
    file = &out;
    while (cur().kind != Token::Kind::Eof) {
      if (eat_kw("roles")) {
        if (!out.roles.names.empty()) fail("duplicate roles declaration");
        out.roles.names.push_back(expect_ident("a role name"));
        while (eat_punct(",")) out.roles.names.push_back(expect_ident("a role name"));
        expect_punct(";");
        roles = &out.roles;
        continue;
      }
      if (eat_kw("global")) {
        std::string n = expect_ident("a global type name");
        if (out.find_global(n)) fail("duplicate global type '" + n + "'");
        expect_punct("=");
        out.globals.emplace_back(n, parse_gtype());
        expect_punct(";");
        continue;
      }
      if (at_kw("process") || at_kw("system")) {
        bool is_proc = cur().text == "process";
        ++pos;
        std::string n = expect_ident("a process name");
        if (out.find_process(n) || out.find_system(n)) fail("duplicate process '" + n + "'");
        expect_punct("=");
        ProcPtr p = parse_proc();
        expect_punct(";");
        (is_proc ? out.processes : out.systems).emplace_back(n, p);
        continue;
      }
      if (eat_kw("name")) {
        const Token& t = cur();
        std::string a = expect_ident("a shared name");
        expect_punct(":");
        const Token& gt = cur();
        std::string g = expect_ident("a global type name");
        if (!out.find_global(g)) fail_at(gt, "unknown global type '" + g + "'");
        for (const auto& [k, v] : out.name_decls)
          if (k == a) fail_at(t, "duplicate name declaration '" + a + "'");
        out.name_decls.emplace_back(a, g);
        expect_punct(";");
        continue;
      }
      fail("expected a declaration (roles, global, process, system, or name)");
    }
    file = nullptr;
    return out;
  }

  void expect_eof() {
    if (cur().kind != Token::Kind::Eof) fail("trailing input after the term");
  }
};

}  // namespace detail

inline ProcPtr parse_process(const std::string& src) {
  detail::Parser p(src);
  ProcPtr out = p.parse_proc();
  p.expect_eof();
  return out;
}

inline GlobalPtr parse_global(const std::string& src, const RoleNames* roles = nullptr) {
  detail::Parser p(src);
  p.roles = roles;
  GlobalPtr out = p.parse_gtype();
  p.expect_eof();
  return out;
}

inline LocalPtr parse_local(const std::string& src, const RoleNames* roles = nullptr) {
  detail::Parser p(src);
  p.roles = roles;
  LocalPtr out = p.parse_ltype();
  p.expect_eof();
  return out;
}

inline SourceFile parse_file(const std::string& src) {
  detail::Parser p(src);
  return p.parse_file();
}

}  // namespace pmps

#endif
