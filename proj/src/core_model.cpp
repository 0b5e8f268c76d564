#include "mebn/core_model.hpp"

#include <algorithm>
#include <cctype>

#include "mebn/error.hpp"

namespace mebn {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidIdentifier: return "InvalidIdentifier";
    case ErrorCode::DuplicateIdentifier: return "DuplicateIdentifier";
    case ErrorCode::UnknownType: return "UnknownType";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::UnboundParameter: return "UnboundParameter";
    case ErrorCode::TypeViolation: return "TypeViolation";
    case ErrorCode::IncompleteWorld: return "IncompleteWorld";
    case ErrorCode::NegativeResidual: return "NegativeResidual";
    case ErrorCode::MassError: return "MassError";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::UnknownRV: return "UnknownRV";
    case ErrorCode::UnknownIdentifier: return "UnknownIdentifier";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::Validation: return "Validation";
    case ErrorCode::UnresolvableContext: return "UnresolvableContext";
    case ErrorCode::LimitExceeded: return "LimitExceeded";
    case ErrorCode::UnknownTarget: return "UnknownTarget";
    case ErrorCode::InconsistentEvidence: return "InconsistentEvidence";
    case ErrorCode::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorCode::EmptyDomain: return "EmptyDomain";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// values

std::string_view to_string(ContextValue v) {
  switch (v) {
    case ContextValue::True: return kTrue;
    case ContextValue::False: return kFalse;
    case ContextValue::Absurd: return kAbsurd;
  }
  return kAbsurd;
}

ContextValue context_value_from(std::string_view state) {
  if (state == kTrue) return ContextValue::True;
  if (state == kFalse) return ContextValue::False;
  return ContextValue::Absurd;
}

StateSpace::StateSpace(std::vector<std::string> declared) : declared_(std::move(declared)) {
  if (declared_.empty()) throw Error(ErrorCode::InvalidValue, "state space must not be empty");
  std::set<std::string_view> seen;
  for (const auto& v : declared_) {
    if (v == kAbsurd) throw Error(ErrorCode::InvalidValue, "Absurd cannot be declared as a state");
    if (!seen.insert(v).second) throw Error(ErrorCode::InvalidValue, "duplicate state '" + v + "'");
  }
}

StateSpace StateSpace::boolean() { return StateSpace({std::string(kTrue), std::string(kFalse)}); }

std::string_view StateSpace::operator[](std::size_t i) const {
  return i < declared_.size() ? std::string_view(declared_[i]) : kAbsurd;
}

std::optional<std::size_t> StateSpace::index_of(std::string_view value) const {
  if (value == kAbsurd) return declared_.size();
  for (std::size_t i = 0; i < declared_.size(); ++i)
    if (declared_[i] == value) return i;
  return std::nullopt;
}

std::vector<std::string> StateSpace::all() const {
  std::vector<std::string> out = declared_;
  out.emplace_back(kAbsurd);
  return out;
}

// ---------------------------------------------------------------------------
// terms and formulas

bool is_unique_identifier(std::string_view text) {
  if (text.size() < 2 || text[0] != '!') return false;
  return std::all_of(text.begin() + 1, text.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || (c >= 'A' && c <= 'Z');
  });
}

bool Term::is_ground() const {
  if (kind == Kind::Variable) return false;
  return std::all_of(args.begin(), args.end(), [](const Term& t) { return t.is_ground(); });
}

void Term::collect_variables(std::set<std::string>& out) const {
  if (kind == Kind::Variable) out.insert(name);
  for (const auto& a : args) a.collect_variables(out);
}

Term Term::substitute(const std::map<std::string, std::string>& binding) const {
  if (kind == Kind::Variable) {
    auto it = binding.find(name);
    return it == binding.end() ? *this : Term::entity(it->second);
  }
  Term out = *this;
  for (auto& a : out.args) a = a.substitute(binding);
  return out;
}

std::string Term::str() const {
  if (kind != Kind::Apply) return name;
  std::string s = name + "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) s += ", ";
    s += args[i].str();
  }
  return s + ")";
}

std::string_view to_string(Formula::Kind k) {
  switch (k) {
    case Formula::Kind::Atom: return "Atom";
    case Formula::Kind::Equals: return "Eq";
    case Formula::Kind::Isa: return "Isa";
    case Formula::Kind::Not: return "Not";
    case Formula::Kind::And: return "And";
    case Formula::Kind::Or: return "Or";
    case Formula::Kind::Implies: return "Implies";
    case Formula::Kind::Iff: return "Iff";
    case Formula::Kind::ForAll: return "forall";
    case Formula::Kind::Exists: return "exists";
  }
  return "?";
}

Formula Formula::atom(Term t) {
  Formula f;
  f.kind = Kind::Atom;
  f.terms = {std::move(t)};
  return f;
}

Formula Formula::equals(Term lhs, Term rhs) {
  Formula f;
  f.kind = Kind::Equals;
  f.terms = {std::move(lhs), std::move(rhs)};
  return f;
}

Formula Formula::not_equals(Term lhs, Term rhs) { return negate(equals(std::move(lhs), std::move(rhs))); }

Formula Formula::isa(std::string type, Term arg) {
  Formula f;
  f.kind = Kind::Isa;
  f.terms = {Term::symbol(std::move(type)), std::move(arg)};
  return f;
}

Formula Formula::negate(Formula a) {
  Formula f;
  f.kind = Kind::Not;
  f.children = {std::move(a)};
  return f;
}

Formula Formula::binary(Kind k, Formula a, Formula b) {
  Formula f;
  f.kind = k;
  f.children = {std::move(a), std::move(b)};
  return f;
}

Formula Formula::quantifier(Kind k, std::string var, std::string type, Formula body) {
  Formula f;
  f.kind = k;
  f.bound_var = std::move(var);
  f.bound_type = std::move(type);
  f.children = {std::move(body)};
  return f;
}

void Formula::collect_free_variables(std::set<std::string>& out) const {
  std::set<std::string> inner;
  for (const auto& t : terms) t.collect_variables(inner);
  for (const auto& c : children) c.collect_free_variables(inner);
  if (kind == Kind::ForAll || kind == Kind::Exists) inner.erase(bound_var);
  out.insert(inner.begin(), inner.end());
}

Formula Formula::substitute(const std::map<std::string, std::string>& binding) const {
  Formula out = *this;
  if (kind == Kind::ForAll || kind == Kind::Exists) {
    auto inner = binding;
    inner.erase(bound_var);
    out.children[0] = children[0].substitute(inner);
    return out;
  }
  for (auto& t : out.terms) t = t.substitute(binding);
  for (auto& c : out.children) c = c.substitute(binding);
  return out;
}

std::string Formula::str() const {
  switch (kind) {
    case Kind::Atom: return terms[0].str();
    case Kind::Equals: return terms[0].str() + " = " + terms[1].str();
    case Kind::Isa: return "Isa(" + terms[0].name + ", " + terms[1].str() + ")";
    case Kind::Not:
      if (children[0].kind == Kind::Equals)
        return children[0].terms[0].str() + " != " + children[0].terms[1].str();
      return "Not(" + children[0].str() + ")";
    case Kind::And:
    case Kind::Or:
    case Kind::Implies:
    case Kind::Iff:
      return std::string(to_string(kind)) + "(" + children[0].str() + ", " + children[1].str() + ")";
    case Kind::ForAll:
    case Kind::Exists:
      return std::string(to_string(kind)) + " " + bound_var + ": " + bound_type + " . " + children[0].str();
  }
  return "?";
}

// ---------------------------------------------------------------------------
// MFrag / MTheory lookups

const Term* MFrag::find_resident(std::string_view template_name) const {
  for (const auto& r : resident)
    if (r.name == template_name) return &r;
  return nullptr;
}

const LocalExpression* MFrag::local_for(std::string_view template_name) const {
  for (const auto& l : locals)
    if (l.resident == template_name) return &l.expr;
  return nullptr;
}

std::vector<Term> MFrag::parents_of(const Term& resident_term) const {
  std::vector<Term> out;
  auto consider = [&](const Term& t) {
    for (const auto& a : arcs)
      if (a.to == resident_term && a.from == t) {
        out.push_back(t);
        return;
      }
  };
  for (const auto& t : input) consider(t);
  for (const auto& t : resident) consider(t);
  return out;
}

std::set<std::string> MFrag::variables() const {
  std::set<std::string> vars;
  for (const auto& c : context) c.collect_free_variables(vars);
  for (const auto& t : input) t.collect_variables(vars);
  for (const auto& t : resident) t.collect_variables(vars);
  return vars;
}

const TypeDecl* MTheory::find_type(std::string_view n) const {
  for (const auto& t : types)
    if (t.name == n) return &t;
  return nullptr;
}

const RVTemplate* MTheory::find_rv(std::string_view n) const {
  for (const auto& r : rvs)
    if (r.name == n) return &r;
  return nullptr;
}

const Define* MTheory::find_define(std::string_view n) const {
  for (const auto& d : defines)
    if (d.name == n) return &d;
  return nullptr;
}

const MFrag* MTheory::find_mfrag(std::string_view n) const {
  for (const auto& m : mfrags)
    if (m.name == n) return &m;
  return nullptr;
}

const MFrag* MTheory::home_of(std::string_view rv) const {
  for (const auto& m : mfrags)
    if (m.find_resident(rv)) return &m;
  return nullptr;
}

// ---------------------------------------------------------------------------
// registry

void EntityRegistry::declare_type(const std::string& type, bool ordered) {
  by_type_.try_emplace(type);
  if (ordered) ordered_.insert(type);
}

void EntityRegistry::register_entity(const std::string& id, const std::string& type) {
  if (!is_unique_identifier(id))
    throw Error(ErrorCode::InvalidIdentifier, "'" + id + "' is not a unique identifier");
  auto list = by_type_.find(type);
  if (list == by_type_.end()) throw Error(ErrorCode::UnknownType, "unknown type '" + type + "'");
  if (type_of_.count(id))
    throw Error(ErrorCode::DuplicateIdentifier, "identifier " + id + " is already registered");
  type_of_.emplace(id, type);
  auto& ids = list->second;
  ids.insert(std::lower_bound(ids.begin(), ids.end(), id), id);
}

bool EntityRegistry::has_type(std::string_view type) const { return by_type_.find(type) != by_type_.end(); }

bool EntityRegistry::is_ordered(std::string_view type) const { return ordered_.find(type) != ordered_.end(); }

std::optional<std::string> EntityRegistry::type_of(std::string_view id) const {
  auto it = type_of_.find(id);
  if (it == type_of_.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::string>& EntityRegistry::ids_of(std::string_view type) const {
  static const std::vector<std::string> kEmpty;
  auto it = by_type_.find(type);
  return it == by_type_.end() ? kEmpty : it->second;
}

std::vector<std::string> EntityRegistry::types() const {
  std::vector<std::string> out;
  for (const auto& [t, _] : by_type_) out.push_back(t);
  return out;
}

std::optional<std::string> EntityRegistry::predecessor(std::string_view id) const {
  auto type = type_of(id);
  if (!type || !is_ordered(*type)) return std::nullopt;
  const auto& ids = ids_of(*type);
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.begin()) return std::nullopt;
  return *std::prev(it);
}

EntityRegistry registry_from(const MTheory& theory, const std::vector<EntityDecl>& entities) {
  EntityRegistry reg;
  for (const auto& t : theory.types) reg.declare_type(t.name, t.ordered);
  for (const auto& e : entities)
    for (const auto& id : e.ids) reg.register_entity(id, e.type);
  return reg;
}

std::string eval_identity(const EntityRegistry& registry, std::string_view id) {
  return registry.type_of(id) ? std::string(id) : std::string(kAbsurd);
}

ContextValue eval_isa(const EntityRegistry& registry, std::string_view type, std::string_view id) {
  if (!registry.has_type(type)) throw Error(ErrorCode::UnknownType, "unknown type '" + std::string(type) + "'");
  auto t = registry.type_of(id);
  if (!t) return ContextValue::Absurd;
  return *t == type ? ContextValue::True : ContextValue::False;
}

// ---------------------------------------------------------------------------
// instances

std::string RVInstance::key() const {
  std::string s = name + "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) s += ',';
    s += args[i];
  }
  return s + ")";
}

std::optional<RVInstance> parse_instance_key(std::string_view text) {
  auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') return std::nullopt;
  RVInstance inst;
  inst.name = std::string(text.substr(0, open));
  std::string_view inner = text.substr(open + 1, text.size() - open - 2);
  while (!inner.empty()) {
    auto comma = inner.find(',');
    std::string_view part = inner.substr(0, comma);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    if (!is_unique_identifier(part)) return std::nullopt;
    inst.args.emplace_back(part);
    if (comma == std::string_view::npos) break;
    inner.remove_prefix(comma + 1);
  }
  return inst;
}

RVInstance instantiate_rv(const RVTemplate& tmpl, const std::map<std::string, std::string>& bindings) {
  for (const auto& [k, _] : bindings) {
    bool known = std::any_of(tmpl.params.begin(), tmpl.params.end(), [&](const Param& p) { return p.name == k; });
    if (!known) throw Error(ErrorCode::ArityMismatch, tmpl.name + " has no parameter '" + k + "'");
  }
  RVInstance inst{tmpl.name, {}};
  for (const auto& p : tmpl.params) {
    auto it = bindings.find(p.name);
    if (it == bindings.end())
      throw Error(ErrorCode::UnboundParameter, "parameter '" + p.name + "' of " + tmpl.name + " is unbound");
    inst.args.push_back(it->second);
  }
  return inst;
}

std::vector<Term> MFragInstance::resident_terms() const {
  std::vector<Term> out;
  for (const auto& r : mfrag->resident) out.push_back(r.substitute(binding));
  return out;
}

namespace {

void note_type(VariableTyping& typing, const std::string& var, const std::string& type) {
  auto [it, inserted] = typing.types.emplace(var, type);
  if (!inserted && it->second != type)
    typing.conflicts.push_back("variable '" + var + "' used as both " + it->second + " and " + type);
}

void type_term(const Term& t, const MTheory& theory, VariableTyping& typing) {
  if (t.kind != Term::Kind::Apply) return;
  if (t.name == "Prev" && t.args.size() == 1) {
    type_term(t.args[0], theory, typing);
    return;
  }
  const std::vector<Param>* params = nullptr;
  if (const auto* rv = theory.find_rv(t.name)) params = &rv->params;
  else if (const auto* d = theory.find_define(t.name)) params = &d->params;
  if (!params) return;
  for (std::size_t i = 0; i < t.args.size() && i < params->size(); ++i) {
    if (t.args[i].kind == Term::Kind::Variable) note_type(typing, t.args[i].name, (*params)[i].type);
    type_term(t.args[i], theory, typing);
  }
}

void type_formula(const Formula& f, const MTheory& theory, VariableTyping& typing) {
  if (f.kind == Formula::Kind::Isa) {
    if (f.terms[1].kind == Term::Kind::Variable) note_type(typing, f.terms[1].name, f.terms[0].name);
    return;
  }
  if (f.kind == Formula::Kind::Equals) {
    // `x = Subject(sr)` gives x the range type of Subject; `x = Prev(t)` the type of t.
    for (int side = 0; side < 2; ++side) {
      const Term& a = f.terms[side];
      const Term& b = f.terms[1 - side];
      if (a.kind != Term::Kind::Variable || b.kind != Term::Kind::Apply) continue;
      if (const auto* rv = theory.find_rv(b.name); rv && rv->entity_valued())
        note_type(typing, a.name, rv->entity_range);
    }
  }
  for (const auto& t : f.terms) type_term(t, theory, typing);
  for (const auto& c : f.children) type_formula(c, theory, typing);
  if (f.kind == Formula::Kind::ForAll || f.kind == Formula::Kind::Exists)
    note_type(typing, f.bound_var, f.bound_type);
}

}  // namespace

VariableTyping infer_variable_types(const MFrag& mfrag, const MTheory& theory) {
  VariableTyping typing;
  for (const auto& t : mfrag.resident) type_term(t, theory, typing);
  for (const auto& t : mfrag.input) type_term(t, theory, typing);
  for (const auto& c : mfrag.context) type_formula(c, theory, typing);
  // Prev(t) = tp: tp shares t's type.
  for (const auto& c : mfrag.context) {
    if (c.kind != Formula::Kind::Equals) continue;
    for (int side = 0; side < 2; ++side) {
      const Term& a = c.terms[side];
      const Term& b = c.terms[1 - side];
      if (a.kind == Term::Kind::Variable && b.kind == Term::Kind::Apply && b.name == "Prev" &&
          b.args.size() == 1 && b.args[0].kind == Term::Kind::Variable) {
        auto it = typing.types.find(b.args[0].name);
        if (it != typing.types.end()) note_type(typing, a.name, it->second);
      }
    }
  }
  for (const auto& v : mfrag.variables())
    if (!typing.types.count(v)) typing.conflicts.push_back("cannot infer a type for variable '" + v + "'");
  return typing;
}

MFragInstance instantiate_mfrag(const MFrag& mfrag, const MTheory& theory, const EntityRegistry& registry,
                                const std::map<std::string, std::string>& binding) {
  auto vars = mfrag.variables();
  auto typing = infer_variable_types(mfrag, theory);
  for (const auto& [var, id] : binding) {
    if (!vars.count(var))
      throw Error(ErrorCode::ArityMismatch, "MFrag " + mfrag.name + " has no variable '" + var + "'");
    auto declared = typing.types.find(var);
    auto actual = registry.type_of(id);
    if (!actual) throw Error(ErrorCode::UnknownIdentifier, "identifier " + id + " is not registered");
    if (declared != typing.types.end() && *actual != declared->second)
      throw Error(ErrorCode::TypeViolation, "variable '" + var + "' expects " + declared->second + " but " + id +
                                                " is a " + *actual);
  }
  MFragInstance inst;
  inst.mfrag = &mfrag;
  inst.binding = binding;
  for (const auto& v : vars)
    if (!binding.count(v)) inst.free_variables.push_back(v);
  return inst;
}

StateSpace ground_states(const RVTemplate& tmpl, const EntityRegistry& registry,
                         const std::vector<std::string>* candidates) {
  if (!tmpl.entity_valued()) return tmpl.states;
  if (candidates) return StateSpace(*candidates);
  const auto& ids = registry.ids_of(tmpl.entity_range);
  if (ids.empty())
    throw Error(ErrorCode::EmptyDomain, tmpl.name + " ranges over " + tmpl.entity_range + ", which has no entities");
  return StateSpace(ids);
}

}  // namespace mebn
