#include "mebn/theory_format.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mebn/error.hpp"

namespace mebn {

namespace {

// ---------------------------------------------------------------------------
// lexer

enum class Tok { Ident, Entity, Number, Punct, Newline, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  SourceSpan span;
};

std::vector<Token> lex(const std::string& src, std::vector<ParseDiagnostic>& diags) {
  std::vector<Token> out;
  std::size_t i = 0, line = 1, col = 1;
  int depth = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto push = [&](Tok kind, std::size_t len) {
    out.push_back({kind, src.substr(i, len), {line, col, len}});
    advance(len);
  };
  static const char* kTwoChar[] = {"->", ":=", "!=", "<=", ">=", "=="};
  while (i < src.size()) {
    char c = src[i];
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (c == '\n') {
      if (depth == 0 && (out.empty() || out.back().kind != Tok::Newline)) push(Tok::Newline, 1);
      else advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      push(Tok::Ident, j - i);
      continue;
    }
    if (c == '!' && i + 1 < src.size() && std::isalnum(static_cast<unsigned char>(src[i + 1]))) {
      std::size_t j = i + 1;
      while (j < src.size() && std::isalnum(static_cast<unsigned char>(src[j]))) ++j;
      push(Tok::Entity, j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          j = k;
          while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
        }
      }
      push(Tok::Number, j - i);
      continue;
    }
    bool two = false;
    for (const char* p : kTwoChar)
      if (src.compare(i, 2, p) == 0) {
        push(Tok::Punct, 2);
        two = true;
        break;
      }
    if (two) continue;
    if (std::string_view("(){},;:.=<>*+-&/").find(c) != std::string_view::npos) {
      if (c == '(' || c == '{') ++depth;
      if ((c == ')' || c == '}') && depth > 0) --depth;
      push(Tok::Punct, 1);
      continue;
    }
    diags.push_back({ParseDiagnostic::Severity::Error, std::string("unexpected character '") + c + "'", {line, col, 1}});
    advance(1);
  }
  if (out.empty() || out.back().kind != Tok::Newline) out.push_back({Tok::Newline, "", {line, col, 0}});
  out.push_back({Tok::End, "", {line, col, 0}});
  return out;
}

struct ParseFailure {
  ParseDiagnostic diag;
};

bool is_lower(const std::string& s) { return !s.empty() && std::islower(static_cast<unsigned char>(s[0])); }

const std::set<std::string, std::less<>> kReserved = {
    "mtheory", "type",  "entities", "rv",   "define", "mfrag", "end",      "context", "input",
    "resident", "graph", "recursive", "local", "if",    "elif",  "else",     "then",    "count",
    "sat",     "min",   "uniform",  "and",  "or",     "not",   "forall",   "exists",  "via",
    "ordered", "candidates"};

const std::set<std::string, std::less<>> kMfragSections = {"context", "input", "resident", "graph",
                                                            "recursive", "local", "end"};

/// A name used somewhere in the source, resolved after all declarations are read.
struct Reference {
  enum class What { RV, Type };
  What what;
  std::string name;
  std::size_t arity = 0;
  bool check_arity = false;
  SourceSpan span;
};

class Parser {
 public:
  explicit Parser(const SourceText& src) {
    toks_ = lex(src.content, diags_);
  }

  std::vector<ParseDiagnostic>& diagnostics() { return diags_; }
  std::vector<Reference>& references() { return refs_; }

  bool has_errors() const {
    return std::any_of(diags_.begin(), diags_.end(),
                       [](const auto& d) { return d.severity == ParseDiagnostic::Severity::Error; });
  }

  // ---- token helpers
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool at_punct(std::string_view p) const { return peek().kind == Tok::Punct && peek().text == p; }
  bool at_word(std::string_view w) const { return peek().kind == Tok::Ident && peek().text == w; }
  bool at_end() const { return peek().kind == Tok::End; }
  bool at_newline() const { return peek().kind == Tok::Newline; }

  [[noreturn]] void fail(const std::string& msg, const SourceSpan& span) {
    throw ParseFailure{{ParseDiagnostic::Severity::Error, msg, span}};
  }
  [[noreturn]] void fail(const std::string& msg) {
    const Token& t = peek();
    fail(msg + (t.kind == Tok::End       ? " at end of input"
                : t.kind == Tok::Newline ? " at end of line"
                                         : ", found '" + t.text + "'"),
         t.span);
  }

  void expect_punct(std::string_view p) {
    if (!at_punct(p)) fail("expected '" + std::string(p) + "'");
    next();
  }
  void expect_word(std::string_view w) {
    if (!at_word(w)) fail("expected '" + std::string(w) + "'");
    next();
  }
  void expect_newline() {
    if (at_end()) return;
    if (!at_newline()) fail("expected end of line");
    next();
  }
  void skip_newlines() {
    while (at_newline()) next();
  }
  void skip_line() {
    while (!at_newline() && !at_end()) next();
    if (at_newline()) next();
  }
  void record(const ParseFailure& f) { diags_.push_back(f.diag); }

  std::string ident(const char* what) {
    if (peek().kind != Tok::Ident) fail(std::string("expected ") + what);
    if (kReserved.count(peek().text)) fail(std::string("expected ") + what + ", '" + peek().text + "' is reserved");
    return next().text;
  }
  std::string capital(const char* what) {
    auto span = peek().span;
    auto s = ident(what);
    if (is_lower(s)) fail(std::string(what) + " must be capitalized", span);
    return s;
  }
  std::string variable() {
    auto span = peek().span;
    auto s = ident("variable");
    if (!is_lower(s)) fail("variables start with a lower-case letter", span);
    return s;
  }
  std::string type_name() {
    auto span = peek().span;
    auto s = capital("type name");
    refs_.push_back({Reference::What::Type, s, 0, false, span});
    return s;
  }

  std::int64_t integer() {
    bool neg = false;
    if (at_punct("-")) {
      next();
      neg = true;
    }
    if (peek().kind != Tok::Number || peek().text.find_first_of(".eE") != std::string::npos)
      fail("expected an integer");
    auto t = next();
    std::int64_t v = 0;
    auto r = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (r.ec != std::errc()) fail("integer out of range", t.span);
    return neg ? -v : v;
  }

  double number() {
    bool neg = false;
    if (at_punct("-")) {
      next();
      neg = true;
    }
    if (peek().kind != Tok::Number) fail("expected a number");
    auto t = next();
    double v = 0.0;
    auto r = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (r.ec != std::errc()) fail("malformed number", t.span);
    if (at_punct("/")) {
      next();
      if (peek().kind != Tok::Number) fail("expected a denominator");
      auto d = next();
      double den = 0.0;
      std::from_chars(d.text.data(), d.text.data() + d.text.size(), den);
      if (den == 0.0) fail("zero denominator", d.span);
      v /= den;
    }
    return neg ? -v : v;
  }

  // ---- terms and formulas

  Term term() {
    const Token& t = peek();
    if (t.kind == Tok::Entity) {
      next();
      return Term::entity(t.text);
    }
    if (t.kind != Tok::Ident) fail("expected a term");
    auto span = t.span;
    std::string name = ident("term");
    if (!at_punct("(")) {
      if (is_lower(name)) return Term::var(name);
      return Term::symbol(name);
    }
    if (is_lower(name)) fail("RV names must be capitalized", span);
    next();
    std::vector<Term> args;
    if (!at_punct(")")) {
      args.push_back(term());
      while (at_punct(",")) {
        next();
        args.push_back(term());
      }
    }
    expect_punct(")");
    if (name != "Prev") refs_.push_back({Reference::What::RV, name, args.size(), true, span});
    return Term::apply(name, std::move(args));
  }

  Formula formula() {
    if (at_word("forall") || at_word("exists")) {
      auto kind = next().text == "forall" ? Formula::Kind::ForAll : Formula::Kind::Exists;
      auto var = variable();
      expect_punct(":");
      auto type = type_name();
      expect_punct(".");
      return Formula::quantifier(kind, var, type, formula());
    }
    if (peek().kind == Tok::Ident && peek(1).kind == Tok::Punct && peek(1).text == "(") {
      const std::string& w = peek().text;
      if (w == "Not") {
        next();
        expect_punct("(");
        auto f = formula();
        expect_punct(")");
        return Formula::negate(std::move(f));
      }
      if (w == "And" || w == "Or" || w == "Implies" || w == "Iff") {
        auto kind = w == "And"       ? Formula::Kind::And
                    : w == "Or"      ? Formula::Kind::Or
                    : w == "Implies" ? Formula::Kind::Implies
                                     : Formula::Kind::Iff;
        auto span = next().span;
        expect_punct("(");
        auto f = formula();
        expect_punct(",");
        f = Formula::binary(kind, std::move(f), formula());
        while (at_punct(",")) {
          if (kind == Formula::Kind::Implies || kind == Formula::Kind::Iff) fail("Implies and Iff take two operands", span);
          next();
          f = Formula::binary(kind, std::move(f), formula());
        }
        expect_punct(")");
        return f;
      }
      if (w == "Isa") {
        next();
        expect_punct("(");
        auto type = type_name();
        expect_punct(",");
        auto arg = term();
        expect_punct(")");
        return Formula::isa(type, std::move(arg));
      }
      if (w == "Eq") {
        next();
        expect_punct("(");
        auto a = term();
        expect_punct(",");
        auto b = term();
        expect_punct(")");
        return Formula::equals(std::move(a), std::move(b));
      }
    }
    auto span = peek().span;
    Term lhs = term();
    if (at_punct("=") || at_punct("==")) {
      next();
      return Formula::equals(std::move(lhs), term());
    }
    if (at_punct("!=")) {
      next();
      return Formula::not_equals(std::move(lhs), term());
    }
    if (lhs.kind != Term::Kind::Apply) fail("a bare '" + lhs.str() + "' is not a formula", span);
    return Formula::atom(std::move(lhs));
  }

  // ---- local distribution language

  std::string value_symbol() {
    if (peek().kind == Tok::Entity) return next().text;
    if (peek().kind != Tok::Ident) fail("expected a value");
    return next().text;
  }

  Pattern pattern() {
    Pattern p;
    if (at_punct(")") || at_punct(",")) return p;
    while (true) {
      Constraint c;
      c.parent = capital("parent RV name");
      expect_punct("=");
      c.value = value_symbol();
      p.constraints.push_back(std::move(c));
      if (!at_punct("&")) break;
      next();
    }
    return p;
  }

  Guard guard_factor() {
    if (at_word("not")) {
      next();
      return Guard::negate(guard_factor());
    }
    if (at_punct("(")) {
      next();
      auto g = guard();
      expect_punct(")");
      return g;
    }
    expect_word("count");
    expect_punct("(");
    auto p = pattern();
    expect_punct(")");
    CmpOp op;
    if (at_punct("=") || at_punct("==")) op = CmpOp::Eq;
    else if (at_punct("!=")) op = CmpOp::Ne;
    else if (at_punct("<")) op = CmpOp::Lt;
    else if (at_punct("<=")) op = CmpOp::Le;
    else if (at_punct(">")) op = CmpOp::Gt;
    else if (at_punct(">=")) op = CmpOp::Ge;
    else fail("expected a comparison operator");
    next();
    return Guard::compare(std::move(p), op, integer());
  }

  Guard guard_term() {
    auto g = guard_factor();
    while (at_word("and")) {
      next();
      g = Guard::conj(std::move(g), guard_factor());
    }
    return g;
  }

  Guard guard() {
    auto g = guard_term();
    while (at_word("or")) {
      next();
      g = Guard::disj(std::move(g), guard_term());
    }
    return g;
  }

  ProbTerm prob_term() {
    if (at_punct("*")) {
      next();
      return ProbTerm::remainder();
    }
    if (at_word("min")) {
      next();
      expect_punct("(");
      double cap = number();
      expect_punct(",");
      double base = number();
      double sign = 1.0;
      if (at_punct("+")) next();
      else if (at_punct("-")) {
        next();
        sign = -1.0;
      } else {
        fail("expected '+' or '-'");
      }
      double slope = sign * number();
      expect_punct("*");
      expect_word("sat");
      expect_punct("(");
      auto p = pattern();
      expect_punct(",");
      auto bound = integer();
      expect_punct(")");
      expect_punct(")");
      return ProbTerm::saturated(cap, base, slope, std::move(p), bound);
    }
    return ProbTerm::constant_of(number());
  }

  Distribution distribution() {
    Distribution d;
    if (at_word("uniform")) {
      next();
      d.uniform = true;
      return d;
    }
    expect_punct("{");
    while (true) {
      auto state = value_symbol();
      expect_punct(":");
      d.entries.emplace_back(std::move(state), prob_term());
      if (at_punct("}")) break;
      expect_punct(",");
    }
    expect_punct("}");
    return d;
  }

  /// Clauses until a line that does not start with if/elif/else. A
  /// distribution right after `local X:` is a constant local.
  LocalExpression local_body(const SourceSpan& head) {
    LocalExpression e;
    if (!at_newline()) {
      e.otherwise = distribution();
      expect_newline();
      return e;
    }
    skip_newlines();
    return local_clauses(head);
  }

  LocalExpression local_clauses(const SourceSpan& head) {
    LocalExpression e;
    bool seen_else = false;
    while (at_word("if") || at_word("elif") || at_word("else")) {
      if (seen_else) fail("no clause may follow 'else'");
      auto w = next();
      if (w.text == "else") {
        skip_newlines();
        e.otherwise = distribution();
        seen_else = true;
      } else {
        if ((w.text == "if") != e.clauses.empty()) fail("'" + w.text + "' is out of place", w.span);
        auto g = guard();
        expect_word("then");
        skip_newlines();
        e.clauses.push_back({std::move(g), distribution()});
      }
      expect_newline();
      skip_newlines();
    }
    if (!seen_else) fail("local distribution needs an 'else' (default) branch", head);
    return e;
  }

  std::vector<Param> params() {
    std::vector<Param> ps;
    expect_punct("(");
    if (!at_punct(")")) {
      while (true) {
        Param p;
        p.name = variable();
        expect_punct(":");
        p.type = type_name();
        ps.push_back(std::move(p));
        if (!at_punct(",")) break;
        next();
      }
    }
    expect_punct(")");
    return ps;
  }

  // ---- theory

  MTheory theory() {
    MTheory t;
    skip_newlines();
    try {
      expect_word("mtheory");
      t.name = capital("theory name");
      expect_newline();
    } catch (const ParseFailure& f) {
      record(f);
      skip_line();
    }
    while (true) {
      skip_newlines();
      if (at_end()) break;
      try {
        declaration(t);
      } catch (const ParseFailure& f) {
        record(f);
        skip_line();
      }
    }
    return t;
  }

  void declaration(MTheory& t) {
    auto head = peek();
    if (at_word("type")) {
      next();
      TypeDecl d;
      auto span = peek().span;
      d.name = capital("type name");
      if (at_word("ordered")) {
        next();
        d.ordered = true;
      }
      expect_newline();
      if (t.find_type(d.name)) diags_.push_back({ParseDiagnostic::Severity::Error, "type " + d.name + " declared twice", span});
      t.types.push_back(std::move(d));
    } else if (at_word("entities")) {
      next();
      t.entities.push_back(entities_line());
    } else if (at_word("rv")) {
      next();
      RVTemplate r;
      auto span = peek().span;
      r.name = capital("RV name");
      r.params = params();
      expect_punct(":");
      if (at_punct("{")) {
        next();
        std::vector<std::string> states;
        while (true) {
          auto sspan = peek().span;
          auto s = capital("state name");
          if (s == kAbsurd) fail("Absurd is implicit and cannot be declared", sspan);
          if (std::find(states.begin(), states.end(), s) != states.end()) fail("duplicate state " + s, sspan);
          states.push_back(std::move(s));
          if (at_punct("}")) break;
          expect_punct(",");
        }
        next();
        r.states = StateSpace(std::move(states));
      } else if (at_word("Bool")) {
        next();
        r.states = StateSpace::boolean();
      } else {
        r.entity_range = type_name();
      }
      expect_newline();
      if (t.find_rv(r.name) || t.find_define(r.name))
        diags_.push_back({ParseDiagnostic::Severity::Error, "RV " + r.name + " declared twice", span});
      t.rvs.push_back(std::move(r));
    } else if (at_word("define")) {
      next();
      Define d;
      auto span = peek().span;
      d.name = capital("definition name");
      d.params = params();
      expect_punct(":=");
      d.body = formula();
      expect_newline();
      if (t.find_rv(d.name) || t.find_define(d.name))
        diags_.push_back({ParseDiagnostic::Severity::Error, "RV " + d.name + " declared twice", span});
      t.defines.push_back(std::move(d));
    } else if (at_word("mfrag")) {
      next();
      auto span = peek().span;
      auto m = mfrag();
      if (t.find_mfrag(m.name))
        diags_.push_back({ParseDiagnostic::Severity::Error, "duplicate MFrag name " + m.name, span});
      t.mfrags.push_back(std::move(m));
    } else {
      fail("expected a declaration (type, entities, rv, define, mfrag)", head.span);
    }
  }

  EntityDecl entities_line() {
    EntityDecl e;
    e.type = type_name();
    expect_punct(":");
    while (peek().kind == Tok::Entity) {
      auto tok = next();
      if (!is_unique_identifier(tok.text)) fail("unique identifiers are '!' followed by A-Z and 0-9", tok.span);
      e.ids.push_back(tok.text);
    }
    expect_newline();
    return e;
  }

  struct ArcSpan {
    std::size_t index;
    SourceSpan span;
  };

  MFrag mfrag() {
    MFrag m;
    m.name = capital("MFrag name");
    expect_newline();
    std::vector<ArcSpan> arc_spans;
    std::vector<std::pair<std::string, SourceSpan>> local_spans;
    while (true) {
      skip_newlines();
      if (at_end()) fail("MFrag " + m.name + " is missing 'end'");
      if (at_word("end")) {
        next();
        expect_newline();
        break;
      }
      try {
        mfrag_section(m, arc_spans, local_spans);
      } catch (const ParseFailure& f) {
        record(f);
        skip_line();
        // resynchronize on the next section keyword
        while (!at_end() && !(peek().kind == Tok::Ident && kMfragSections.count(peek().text))) skip_line();
      }
    }
    auto declared = [&](const Term& t) {
      return std::find(m.input.begin(), m.input.end(), t) != m.input.end() ||
             std::find(m.resident.begin(), m.resident.end(), t) != m.resident.end();
    };
    for (const auto& a : arc_spans) {
      const Arc& arc = m.arcs[a.index];
      if (!declared(arc.from))
        diags_.push_back({ParseDiagnostic::Severity::Error,
                          "arc source " + arc.from.str() + " is not an input or resident of " + m.name, a.span});
      if (std::find(m.resident.begin(), m.resident.end(), arc.to) == m.resident.end())
        diags_.push_back({ParseDiagnostic::Severity::Error,
                          "arc target " + arc.to.str() + " is not a resident of " + m.name, a.span});
    }
    for (const auto& [name, span] : local_spans)
      if (!m.find_resident(name))
        diags_.push_back({ParseDiagnostic::Severity::Error, "local for " + name + ", which is not resident in " + m.name, span});
    return m;
  }

  void mfrag_section(MFrag& m, std::vector<ArcSpan>& arc_spans,
                     std::vector<std::pair<std::string, SourceSpan>>& local_spans) {
    auto head = peek();
    if (head.kind != Tok::Ident || !kMfragSections.count(head.text))
      fail("expected an MFrag section (context, input, resident, graph, recursive, local, end)");
    next();
    if (head.text == "local") {
      auto span = peek().span;
      auto name = capital("resident name");
      expect_punct(":");
      local_spans.emplace_back(name, span);
      m.locals.push_back({name, local_body(span)});
      return;
    }
    expect_punct(":");
    if (head.text == "recursive") {
      Recursion r;
      r.variable = variable();
      expect_word("via");
      r.function = capital("function name");
      m.recursion = std::move(r);
      expect_newline();
      return;
    }
    while (true) {
      if (head.text == "context") {
        m.context.push_back(formula());
      } else if (head.text == "graph") {
        auto span = peek().span;
        auto from = term();
        expect_punct("->");
        auto to = term();
        arc_spans.push_back({m.arcs.size(), span});
        m.arcs.push_back({std::move(from), std::move(to)});
      } else {
        auto span = peek().span;
        auto t = term();
        if (t.kind != Term::Kind::Apply) fail("expected an RV term", span);
        for (const auto& a : t.args)
          if (a.kind != Term::Kind::Variable && a.kind != Term::Kind::Entity)
            fail("arguments of input and resident terms must be variables or identifiers", span);
        (head.text == "input" ? m.input : m.resident).push_back(std::move(t));
      }
      if (!at_punct(";")) break;
      next();
    }
    expect_newline();
  }

  // ---- evidence

  Evidence evidence() {
    Evidence ev;
    while (true) {
      skip_newlines();
      if (at_end()) break;
      try {
        if (at_word("entities")) {
          next();
          ev.entities.push_back(entities_line());
        } else if (at_word("candidates")) {
          next();
          auto span = peek().span;
          CandidateDecl c;
          c.subject = ground_instance();
          expect_punct("=");
          expect_punct("{");
          while (true) {
            if (peek().kind != Tok::Entity) fail("candidates are unique identifiers");
            c.values.push_back(next().text);
            if (at_punct("}")) break;
            expect_punct(",");
          }
          next();
          expect_newline();
          if (c.values.empty()) fail("candidate list is empty", span);
          candidate_spans_.push_back(span);
          ev.candidates.push_back(std::move(c));
        } else {
          Finding f;
          auto span = peek().span;
          f.subject = ground_instance();
          expect_punct("=");
          f.value = value_symbol();
          expect_newline();
          finding_spans_.push_back(span);
          ev.findings.push_back(std::move(f));
        }
      } catch (const ParseFailure& f) {
        record(f);
        skip_line();
      }
    }
    return ev;
  }

  RVInstance ground_instance() {
    RVInstance inst;
    inst.name = capital("RV name");
    expect_punct("(");
    if (!at_punct(")")) {
      while (true) {
        if (peek().kind != Tok::Entity) fail("evidence arguments are unique identifiers");
        inst.args.push_back(next().text);
        if (!at_punct(",")) break;
        next();
      }
    }
    expect_punct(")");
    return inst;
  }

  const std::vector<SourceSpan>& candidate_spans() const { return candidate_spans_; }
  const std::vector<SourceSpan>& finding_spans() const { return finding_spans_; }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<ParseDiagnostic> diags_;
  std::vector<Reference> refs_;
  std::vector<SourceSpan> candidate_spans_;
  std::vector<SourceSpan> finding_spans_;
};

void resolve_references(const MTheory& t, Parser& p) {
  for (const auto& r : p.references()) {
    if (r.what == Reference::What::Type) {
      if (!t.find_type(r.name))
        p.diagnostics().push_back({ParseDiagnostic::Severity::Error, "unknown type " + r.name, r.span});
      continue;
    }
    const std::vector<Param>* params = nullptr;
    if (const auto* rv = t.find_rv(r.name)) params = &rv->params;
    else if (const auto* d = t.find_define(r.name)) params = &d->params;
    if (!params) {
      p.diagnostics().push_back({ParseDiagnostic::Severity::Error, "reference to undeclared RV " + r.name, r.span});
    } else if (r.check_arity && params->size() != r.arity) {
      p.diagnostics().push_back({ParseDiagnostic::Severity::Error,
                                 r.name + " takes " + std::to_string(params->size()) + " arguments, given " +
                                     std::to_string(r.arity),
                                 r.span});
    }
  }
}

// ---------------------------------------------------------------------------
// serialization

std::string pattern_str(const Pattern& p) {
  std::string s;
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    if (i) s += " & ";
    s += p.constraints[i].parent + " = " + p.constraints[i].value;
  }
  return s;
}

std::string guard_str(const Guard& g, bool nested) {
  switch (g.kind) {
    case Guard::Kind::Compare:
      return "count(" + pattern_str(g.pattern) + ") " + std::string(to_string(g.op)) + " " + std::to_string(g.threshold);
    case Guard::Kind::Not: return "not " + guard_str(g.children[0], true);
    case Guard::Kind::And:
    case Guard::Kind::Or: {
      auto s = guard_str(g.children[0], true) + (g.kind == Guard::Kind::And ? " and " : " or ") +
               guard_str(g.children[1], true);
      return nested ? "(" + s + ")" : s;
    }
  }
  return "";
}

std::string term_str(const ProbTerm& t) {
  switch (t.kind) {
    case ProbTerm::Kind::Constant: return format_number(t.constant);
    case ProbTerm::Kind::Remainder: return "*";
    case ProbTerm::Kind::Saturated: {
      bool neg = std::signbit(t.slope);
      return "min(" + format_number(t.cap) + ", " + format_number(t.base) + (neg ? " - " : " + ") +
             format_number(neg ? -t.slope : t.slope) + " * sat(" + pattern_str(t.pattern) + ", " +
             std::to_string(t.bound) + "))";
    }
  }
  return "";
}

std::string dist_str(const Distribution& d) {
  if (d.uniform) return "uniform";
  std::string s = "{";
  for (std::size_t i = 0; i < d.entries.size(); ++i) {
    if (i) s += ", ";
    s += d.entries[i].first + ": " + term_str(d.entries[i].second);
  }
  return s + "}";
}

std::string params_str(const std::vector<Param>& ps) {
  std::string s = "(";
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (i) s += ", ";
    s += ps[i].name + ": " + ps[i].type;
  }
  return s + ")";
}

template <class T, class F>
std::string join(const std::vector<T>& items, const char* sep, F f) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) s += sep;
    s += f(items[i]);
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// public API

SourceText SourceText::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string content = ss.str();
  content.erase(std::remove(content.begin(), content.end(), '\r'), content.end());
  return {std::move(content), path};
}

std::string ParseDiagnostic::render(const std::string& origin) const {
  return origin + ":" + std::to_string(span.line) + ":" + std::to_string(span.column) + ": " +
         (severity == Severity::Error ? "error: " : "warning: ") + message;
}

std::string format_number(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

ParseResult<MTheory> parse_mtheory(const SourceText& src) {
  Parser p(src);
  ParseResult<MTheory> result;
  MTheory t = p.theory();
  resolve_references(t, p);
  result.diagnostics = std::move(p.diagnostics());
  bool errors = std::any_of(result.diagnostics.begin(), result.diagnostics.end(),
                            [](const auto& d) { return d.severity == ParseDiagnostic::Severity::Error; });
  if (!errors) result.value = std::move(t);
  return result;
}

ParseResult<Evidence> parse_evidence(const SourceText& src, const MTheory& theory) {
  Parser p(src);
  ParseResult<Evidence> result;
  Evidence ev = p.evidence();
  auto& diags = p.diagnostics();
  auto error = [&](const std::string& msg, const SourceSpan& span) {
    diags.push_back({ParseDiagnostic::Severity::Error, msg, span});
  };

  std::optional<EntityRegistry> reg;
  try {
    reg = registry_from(theory, ev.entities.empty() ? theory.entities : ev.entities);
  } catch (const Error& e) {
    error(e.what(), {1, 1, 0});
  }

  std::map<std::string, std::vector<std::string>> candidates;

  auto check_instance = [&](const RVInstance& inst, const SourceSpan& span) -> const RVTemplate* {
    const RVTemplate* rv = theory.find_rv(inst.name);
    if (!rv) {
      error("unknown RV " + inst.name, span);
      return nullptr;
    }
    if (rv->params.size() != inst.args.size()) {
      error(inst.name + " takes " + std::to_string(rv->params.size()) + " arguments", span);
      return nullptr;
    }
    if (!reg) return rv;
    for (std::size_t i = 0; i < inst.args.size(); ++i) {
      auto type = reg->type_of(inst.args[i]);
      if (!type) error("unknown identifier " + inst.args[i], span);
      else if (*type != rv->params[i].type)
        error(inst.args[i] + " is a " + *type + ", " + inst.name + " expects " + rv->params[i].type, span);
    }
    return rv;
  };

  for (std::size_t i = 0; i < ev.candidates.size(); ++i) {
    const auto& c = ev.candidates[i];
    SourceSpan span = i < p.candidate_spans().size() ? p.candidate_spans()[i] : SourceSpan{};
    const RVTemplate* rv = check_instance(c.subject, span);
    if (!rv) continue;
    if (!rv->entity_valued()) {
      error("candidates apply only to entity-valued RVs; " + rv->name + " is not", span);
      continue;
    }
    if (reg)
      for (const auto& v : c.values) {
        auto type = reg->type_of(v);
        if (!type || *type != rv->entity_range) error(v + " is not a registered " + rv->entity_range, span);
      }
    if (!candidates.emplace(c.subject.key(), c.values).second) error("duplicate candidates for " + c.subject.key(), span);
  }
  std::map<std::string, std::string> seen;
  for (std::size_t i = 0; i < ev.findings.size(); ++i) {
    const auto& f = ev.findings[i];
    SourceSpan span = i < p.finding_spans().size() ? p.finding_spans()[i] : SourceSpan{};
    const RVTemplate* rv = check_instance(f.subject, span);
    if (!rv) continue;
    bool ok = f.value == kAbsurd;
    if (!ok && rv->entity_valued()) {
      if (reg) {
        auto it = candidates.find(f.subject.key());
        if (it != candidates.end()) ok = std::find(it->second.begin(), it->second.end(), f.value) != it->second.end();
        else ok = reg->type_of(f.value) == rv->entity_range;
      } else {
        ok = true;
      }
    } else if (!ok) {
      ok = rv->states.contains(f.value);
    }
    if (!ok) error("value " + f.value + " is not in the state space of " + f.subject.key(), span);
    auto [it, inserted] = seen.emplace(f.subject.key(), f.value);
    if (!inserted && it->second != f.value)
      error("conflicting findings for " + f.subject.key() + ": " + it->second + " and " + f.value, span);
  }

  result.diagnostics = std::move(diags);
  bool errors = std::any_of(result.diagnostics.begin(), result.diagnostics.end(),
                            [](const auto& d) { return d.severity == ParseDiagnostic::Severity::Error; });
  if (!errors) result.value = std::move(ev);
  return result;
}

ParseResult<Formula> parse_formula(const SourceText& src) {
  Parser p(src);
  ParseResult<Formula> result;
  try {
    p.skip_newlines();
    Formula f = p.formula();
    p.skip_newlines();
    if (!p.at_end()) p.fail("unexpected trailing input");
    if (!p.has_errors()) result.value = std::move(f);
  } catch (const ParseFailure& f) {
    p.record(f);
  }
  result.diagnostics = std::move(p.diagnostics());
  return result;
}

ParseResult<LocalExpression> parse_local_expression(const SourceText& src) {
  Parser p(src);
  ParseResult<LocalExpression> result;
  try {
    p.skip_newlines();
    auto e = p.at_word("if") || p.at_word("else") ? p.local_clauses({1, 1, 0}) : LocalExpression{};
    if (!(p.at_end())) {
      if (e.clauses.empty() && e.otherwise == Distribution{}) {
        e.otherwise = p.distribution();
        p.skip_newlines();
      }
      if (!p.at_end()) p.fail("unexpected trailing input");
    }
    if (!p.has_errors()) result.value = std::move(e);
  } catch (const ParseFailure& f) {
    p.record(f);
  }
  result.diagnostics = std::move(p.diagnostics());
  return result;
}

std::string serialize_local(const LocalExpression& e) {
  std::string s;
  for (std::size_t i = 0; i < e.clauses.size(); ++i)
    s += std::string(i ? "elif " : "if ") + guard_str(e.clauses[i].guard, false) + " then " +
         dist_str(e.clauses[i].distribution) + "\n";
  s += "else " + dist_str(e.otherwise) + "\n";
  return s;
}

std::string serialize_mtheory(const MTheory& t) {
  std::ostringstream out;
  out << "mtheory " << t.name << "\n\n";
  for (const auto& ty : t.types) out << "type " << ty.name << (ty.ordered ? " ordered" : "") << "\n";
  if (!t.types.empty()) out << "\n";
  for (const auto& e : t.entities) {
    out << "entities " << e.type << ":";
    for (const auto& id : e.ids) out << " " << id;
    out << "\n";
  }
  if (!t.entities.empty()) out << "\n";
  for (const auto& r : t.rvs) {
    out << "rv " << r.name << params_str(r.params) << " : ";
    if (r.entity_valued()) out << r.entity_range;
    else out << "{" << join(std::vector<std::string>(r.states.declared().begin(), r.states.declared().end()), ", ",
                            [](const std::string& s) { return s; })
             << "}";
    out << "\n";
  }
  if (!t.rvs.empty()) out << "\n";
  for (const auto& d : t.defines) out << "define " << d.name << params_str(d.params) << " := " << d.body.str() << "\n";
  if (!t.defines.empty()) out << "\n";
  for (const auto& m : t.mfrags) {
    out << "mfrag " << m.name << "\n";
    if (!m.context.empty())
      out << "  context: " << join(m.context, "; ", [](const Formula& f) { return f.str(); }) << "\n";
    if (!m.input.empty()) out << "  input: " << join(m.input, "; ", [](const Term& x) { return x.str(); }) << "\n";
    if (!m.resident.empty())
      out << "  resident: " << join(m.resident, "; ", [](const Term& x) { return x.str(); }) << "\n";
    if (!m.arcs.empty())
      out << "  graph: " << join(m.arcs, "; ", [](const Arc& a) { return a.from.str() + " -> " + a.to.str(); }) << "\n";
    if (m.recursion) out << "  recursive: " << m.recursion->variable << " via " << m.recursion->function << "\n";
    for (const auto& l : m.locals) {
      out << "  local " << l.resident << ":\n";
      std::istringstream body(serialize_local(l.expr));
      for (std::string line; std::getline(body, line);) out << "    " << line << "\n";
    }
    out << "end\n\n";
  }
  return out.str();
}

std::string serialize_evidence(const Evidence& ev) {
  std::ostringstream out;
  for (const auto& e : ev.entities) {
    out << "entities " << e.type << ":";
    for (const auto& id : e.ids) out << " " << id;
    out << "\n";
  }
  for (const auto& c : ev.candidates)
    out << "candidates " << c.subject.key() << " = {" << join(c.values, ", ", [](const std::string& s) { return s; })
        << "}\n";
  for (const auto& f : ev.findings) out << f.subject.key() << " = " << f.value << "\n";
  return out.str();
}

}  // namespace mebn
