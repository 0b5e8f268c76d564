#include "mebn/logical_builtins.hpp"

#include <map>

#include "mebn/error.hpp"
#include "mebn/theory_format.hpp"

namespace mebn {

namespace {

const char* connective_text(Formula::Kind kind) {
  switch (kind) {
    case Formula::Kind::Not:
      return "if count(X1 = Absurd) >= 1 then {Absurd: 1}\n"
             "elif count(X1 = True) >= 1 then {False: 1}\n"
             "else {True: 1}\n";
    case Formula::Kind::And:
      return "if count(X1 = Absurd) >= 1 or count(X2 = Absurd) >= 1 then {Absurd: 1}\n"
             "elif count(X1 = True & X2 = True) >= 1 then {True: 1}\n"
             "else {False: 1}\n";
    case Formula::Kind::Or:
      return "if count(X1 = Absurd) >= 1 or count(X2 = Absurd) >= 1 then {Absurd: 1}\n"
             "elif count(X1 = False & X2 = False) >= 1 then {False: 1}\n"
             "else {True: 1}\n";
    case Formula::Kind::Implies:
      return "if count(X1 = Absurd) >= 1 or count(X2 = Absurd) >= 1 then {Absurd: 1}\n"
             "elif count(X1 = True & X2 = False) >= 1 then {False: 1}\n"
             "else {True: 1}\n";
    case Formula::Kind::Iff:
      return "if count(X1 = Absurd) >= 1 or count(X2 = Absurd) >= 1 then {Absurd: 1}\n"
             "elif count(X1 = True & X2 = True) >= 1 or count(X1 = False & X2 = False) >= 1 then {True: 1}\n"
             "else {False: 1}\n";
    default:
      throw Error(ErrorCode::InvalidValue, "not a connective: " + std::string(to_string(kind)));
  }
}

}  // namespace

const LocalExpression& connective_local(Formula::Kind kind) {
  static const std::map<Formula::Kind, LocalExpression> cache = [] {
    std::map<Formula::Kind, LocalExpression> m;
    for (auto k : {Formula::Kind::Not, Formula::Kind::And, Formula::Kind::Or, Formula::Kind::Implies,
                   Formula::Kind::Iff}) {
      auto r = parse_local_expression({connective_text(k), "builtin"});
      if (!r.ok()) throw Error(ErrorCode::Parse, r.render("builtin"));
      m.emplace(k, *r.value);
    }
    return m;
  }();
  auto it = cache.find(kind);
  if (it == cache.end()) throw Error(ErrorCode::InvalidValue, "not a connective: " + std::string(to_string(kind)));
  return it->second;
}

MFrag connective_mfrag(Formula::Kind kind) {
  MFrag m;
  std::string name(to_string(kind));
  m.name = "Builtin" + name;
  Term a = Term::var("a");
  m.input.push_back(Term::apply("X1", {a}));
  if (kind != Formula::Kind::Not) m.input.push_back(Term::apply("X2", {a}));
  m.resident.push_back(Term::apply(name, {a}));
  for (const auto& in : m.input) m.arcs.push_back({in, m.resident[0]});
  m.locals.push_back({name, connective_local(kind)});
  return m;
}

MFrag equality_mfrag() {
  MFrag m;
  m.name = "BuiltinEq";
  Term a = Term::var("a"), b = Term::var("b");
  m.input = {Term::apply("Value", {a}), Term::apply("Value", {b})};
  m.resident = {Term::apply("Eq", {a, b})};
  for (const auto& in : m.input) m.arcs.push_back({in, m.resident[0]});
  return m;
}

std::string_view equality_value(std::string_view a, std::string_view b) {
  if (a == kAbsurd || b == kAbsurd) return kAbsurd;
  return a == b ? kTrue : kFalse;
}

ContextValue apply_connective(Formula::Kind kind, ContextValue a, ContextValue b) {
  using V = ContextValue;
  if (a == V::Absurd || (kind != Formula::Kind::Not && b == V::Absurd)) return V::Absurd;
  bool x = a == V::True, y = b == V::True, r = false;
  switch (kind) {
    case Formula::Kind::Not: r = !x; break;
    case Formula::Kind::And: r = x && y; break;
    case Formula::Kind::Or: r = x || y; break;
    case Formula::Kind::Implies: r = !x || y; break;
    case Formula::Kind::Iff: r = x == y; break;
    default: throw Error(ErrorCode::InvalidValue, "not a connective: " + std::string(to_string(kind)));
  }
  return r ? V::True : V::False;
}

Formula expand_quantifier(const Formula& q, const EntityRegistry& registry) {
  if (q.kind != Formula::Kind::ForAll && q.kind != Formula::Kind::Exists)
    throw Error(ErrorCode::InvalidValue, "not a quantifier: " + q.str());
  const auto& ids = registry.ids_of(q.bound_type);
  if (ids.empty())
    throw Error(ErrorCode::EmptyDomain, "quantifier over " + q.bound_type + ", which has no registered identifiers");
  auto kind = q.kind == Formula::Kind::ForAll ? Formula::Kind::And : Formula::Kind::Or;
  Formula out = q.children[0].substitute({{q.bound_var, ids[0]}});
  for (std::size_t i = 1; i < ids.size(); ++i)
    out = Formula::binary(kind, std::move(out), q.children[0].substitute({{q.bound_var, ids[i]}}));
  return out;
}

}  // namespace mebn
