#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mebn/local_distribution.hpp"
#include "mebn/values.hpp"

namespace mebn {

/// `!` followed by upper-case letters and digits.
bool is_unique_identifier(std::string_view text);

/// Expression inside an RV term: a variable (lower-case), a unique
/// identifier, a value symbol (capitalized), or an application of an RV or
/// builtin function such as Prev.
struct Term {
  enum class Kind { Variable, Entity, Symbol, Apply };
  Kind kind = Kind::Symbol;
  std::string name;
  std::vector<Term> args;

  static Term var(std::string n) { return {Kind::Variable, std::move(n), {}}; }
  static Term entity(std::string n) { return {Kind::Entity, std::move(n), {}}; }
  static Term symbol(std::string n) { return {Kind::Symbol, std::move(n), {}}; }
  static Term apply(std::string n, std::vector<Term> a) { return {Kind::Apply, std::move(n), std::move(a)}; }

  bool is_ground() const;
  void collect_variables(std::set<std::string>& out) const;
  Term substitute(const std::map<std::string, std::string>& binding) const;
  std::string str() const;

  bool operator==(const Term&) const = default;
  auto operator<=>(const Term&) const = default;
};

/// Boolean formula. Contexts, logical definitions and query targets share
/// this representation.
struct Formula {
  enum class Kind { Atom, Equals, Isa, Not, And, Or, Implies, Iff, ForAll, Exists };
  Kind kind = Kind::Atom;
  std::vector<Term> terms;        // Atom: {rv}; Equals: {lhs, rhs}; Isa: {Symbol(type), arg}
  std::vector<Formula> children;  // connectives and quantifier body
  std::string bound_var;
  std::string bound_type;

  static Formula atom(Term t);
  static Formula equals(Term lhs, Term rhs);
  static Formula not_equals(Term lhs, Term rhs);
  static Formula isa(std::string type, Term arg);
  static Formula negate(Formula f);
  static Formula binary(Kind k, Formula a, Formula b);
  static Formula quantifier(Kind k, std::string var, std::string type, Formula body);

  void collect_free_variables(std::set<std::string>& out) const;
  Formula substitute(const std::map<std::string, std::string>& binding) const;
  std::string str() const;

  bool operator==(const Formula&) const = default;
};

std::string_view to_string(Formula::Kind k);

struct Param {
  std::string name;
  std::string type;
  bool operator==(const Param&) const = default;
};

/// RV template. The range is either an enumerated StateSpace or, for
/// entity-valued RVs such as Subject, a type whose identifiers are the states.
struct RVTemplate {
  enum class Kind { Domain, BuiltinIdentity, BuiltinIsa, Logical };
  std::string name;
  std::vector<Param> params;
  StateSpace states;
  std::string entity_range;  // non-empty for entity-valued RVs
  Kind kind = Kind::Domain;

  bool entity_valued() const { return !entity_range.empty(); }
  bool is_boolean() const { return !entity_valued() && states == StateSpace::boolean(); }

  bool operator==(const RVTemplate&) const = default;
};

struct TypeDecl {
  std::string name;
  bool ordered = false;
  bool operator==(const TypeDecl&) const = default;
};

struct EntityDecl {
  std::string type;
  std::vector<std::string> ids;
  bool operator==(const EntityDecl&) const = default;
};

/// Logical RV defined by a formula; its home is an injected builtin MFrag.
struct Define {
  std::string name;
  std::vector<Param> params;
  Formula body;
  bool operator==(const Define&) const = default;
};

struct Arc {
  Term from;
  Term to;
  bool operator==(const Arc&) const = default;
};

/// Declares that residents depend on earlier instances of themselves through
/// `variable`, stepping down the ordered type with `function` (Prev).
struct Recursion {
  std::string variable;
  std::string function;
  bool operator==(const Recursion&) const = default;
};

struct LocalDecl {
  std::string resident;
  LocalExpression expr;
  bool operator==(const LocalDecl&) const = default;
};

struct MFrag {
  std::string name;
  std::vector<Formula> context;
  std::vector<Term> input;
  std::vector<Term> resident;
  std::vector<Arc> arcs;
  std::vector<LocalDecl> locals;
  std::optional<Recursion> recursion;

  const Term* find_resident(std::string_view template_name) const;
  const LocalExpression* local_for(std::string_view template_name) const;
  /// Parent terms of a resident, in MFrag declaration order (inputs, then residents).
  std::vector<Term> parents_of(const Term& resident_term) const;
  std::set<std::string> variables() const;

  bool operator==(const MFrag&) const = default;
};

struct MTheory {
  std::string name;
  std::vector<TypeDecl> types;
  std::vector<EntityDecl> entities;
  std::vector<RVTemplate> rvs;
  std::vector<Define> defines;
  std::vector<MFrag> mfrags;

  const TypeDecl* find_type(std::string_view n) const;
  const RVTemplate* find_rv(std::string_view n) const;
  const Define* find_define(std::string_view n) const;
  const MFrag* find_mfrag(std::string_view n) const;
  /// First MFrag holding `rv` as resident; validation guarantees uniqueness.
  const MFrag* home_of(std::string_view rv) const;

  bool operator==(const MTheory&) const = default;
};

/// Registry of unique identifiers and their (certain) types.
class EntityRegistry {
 public:
  void declare_type(const std::string& type, bool ordered = false);
  /// Throws InvalidIdentifier, DuplicateIdentifier or UnknownType.
  void register_entity(const std::string& id, const std::string& type);

  bool has_type(std::string_view type) const;
  bool is_ordered(std::string_view type) const;
  std::optional<std::string> type_of(std::string_view id) const;
  /// Registered identifiers of a type in lexicographic order.
  const std::vector<std::string>& ids_of(std::string_view type) const;
  std::vector<std::string> types() const;
  std::size_t size() const { return type_of_.size(); }
  /// Predecessor of `id` within its ordered type; nullopt at the first element.
  std::optional<std::string> predecessor(std::string_view id) const;

 private:
  std::map<std::string, std::string, std::less<>> type_of_;
  std::map<std::string, std::vector<std::string>, std::less<>> by_type_;
  std::set<std::string, std::less<>> ordered_;
};

EntityRegistry registry_from(const MTheory& theory, const std::vector<EntityDecl>& entities);
inline EntityRegistry registry_from(const MTheory& theory) { return registry_from(theory, theory.entities); }

/// Identity RV: the identifier itself when registered, Absurd otherwise.
std::string eval_identity(const EntityRegistry& registry, std::string_view id);

/// Isa(type, id): True/False by registered type, Absurd when unregistered.
ContextValue eval_isa(const EntityRegistry& registry, std::string_view type, std::string_view id);

/// A template with an identifier bound to every argument.
struct RVInstance {
  std::string name;
  std::vector<std::string> args;

  std::string key() const;
  auto operator<=>(const RVInstance&) const = default;
  bool operator==(const RVInstance&) const = default;
};

/// Parse `Name(!A,!B)` into an instance; nullopt when not of that shape.
std::optional<RVInstance> parse_instance_key(std::string_view text);

RVInstance instantiate_rv(const RVTemplate& tmpl, const std::map<std::string, std::string>& bindings);

struct MFragInstance {
  const MFrag* mfrag = nullptr;
  std::map<std::string, std::string> binding;
  std::vector<std::string> free_variables;  // sorted

  std::vector<Term> resident_terms() const;
};

/// Variable types inferred from RV argument positions, Isa terms and Prev.
/// Conflicting or missing types are reported in `conflicts`.
struct VariableTyping {
  std::map<std::string, std::string> types;
  std::vector<std::string> conflicts;
};
VariableTyping infer_variable_types(const MFrag& mfrag, const MTheory& theory);

MFragInstance instantiate_mfrag(const MFrag& mfrag, const MTheory& theory,
                                const EntityRegistry& registry,
                                const std::map<std::string, std::string>& binding);

struct Finding {
  RVInstance subject;
  std::string value;
  bool operator==(const Finding&) const = default;
};

/// Candidate list for an entity-valued instance (association gating).
struct CandidateDecl {
  RVInstance subject;
  std::vector<std::string> values;
  bool operator==(const CandidateDecl&) const = default;
};

/// Contents of an evidence file. A non-empty `entities` list replaces the
/// theory's own entities block for the scenario.
struct Evidence {
  std::vector<EntityDecl> entities;
  std::vector<CandidateDecl> candidates;
  std::vector<Finding> findings;
};

/// Ground states of an instance: declared states, or the registered
/// identifiers of the range type (restricted to candidates when given).
StateSpace ground_states(const RVTemplate& tmpl, const EntityRegistry& registry,
                         const std::vector<std::string>* candidates = nullptr);

}  // namespace mebn
