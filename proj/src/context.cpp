#include <algorithm>

#include "mebn/error.hpp"
#include "mebn/grounding.hpp"
#include "mebn/logical_builtins.hpp"

namespace mebn {

FindingIndex FindingIndex::from(const Evidence& evidence) {
  FindingIndex idx;
  for (const auto& c : evidence.candidates) idx.candidates[c.subject.key()] = c.values;
  for (const auto& f : evidence.findings) {
    auto [it, inserted] = idx.findings.emplace(f.subject.key(), f.value);
    if (!inserted && it->second != f.value)
      throw Error(ErrorCode::InvalidValue,
                  "conflicting findings for " + f.subject.key() + ": " + it->second + " and " + f.value);
  }
  return idx;
}

const std::string* FindingIndex::finding(std::string_view key) const {
  auto it = findings.find(key);
  return it == findings.end() ? nullptr : &it->second;
}

const std::vector<std::string>* FindingIndex::candidates_of(std::string_view key) const {
  auto it = candidates.find(key);
  return it == candidates.end() ? nullptr : &it->second;
}

ContextCheck ContextResolution::check() const {
  ContextCheck c;
  if (kind == Kind::Resolved) {
    c.fixed = value;
    return c;
  }
  c.selector = selector.key();
  c.candidate = compared;
  c.negated = negated;
  return c;
}

std::string node_key(const Term& t) {
  if (t.kind != Term::Kind::Apply) return t.name;
  std::string s = t.name + "(";
  for (std::size_t i = 0; i < t.args.size(); ++i) {
    if (i) s += ',';
    s += node_key(t.args[i]);
  }
  return s + ")";
}

std::string node_key(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::Atom: return node_key(f.terms[0]);
    case Formula::Kind::Equals: return node_key(f.terms[0]) + "=" + node_key(f.terms[1]);
    case Formula::Kind::Isa: return "Isa(" + f.terms[0].name + "," + node_key(f.terms[1]) + ")";
    case Formula::Kind::Not:
      if (f.children[0].kind == Formula::Kind::Equals)
        return node_key(f.children[0].terms[0]) + "!=" + node_key(f.children[0].terms[1]);
      return "Not(" + node_key(f.children[0]) + ")";
    case Formula::Kind::ForAll:
    case Formula::Kind::Exists:
      return std::string(f.kind == Formula::Kind::ForAll ? "forall " : "exists ") + f.bound_var + ":" +
             f.bound_type + "." + node_key(f.children[0]);
    default:
      return std::string(to_string(f.kind)) + "(" + node_key(f.children[0]) + "," + node_key(f.children[1]) + ")";
  }
}

namespace {

struct Resolver {
  const MTheory& theory;
  const EntityRegistry& registry;
  const FindingIndex& facts;

  [[noreturn]] void unresolvable(const Formula& f, const std::string& why) const {
    throw Error(ErrorCode::UnresolvableContext, "context " + f.str() + ": " + why);
  }

  /// Ground instance of an RV application whose arguments are identifiers,
  /// or nullopt when an argument is unregistered or of the wrong type.
  std::optional<RVInstance> instance_of(const Term& t, const std::vector<Param>& params) const {
    RVInstance inst{t.name, {}};
    if (t.args.size() != params.size())
      throw Error(ErrorCode::ArityMismatch, t.name + " takes " + std::to_string(params.size()) + " arguments");
    for (std::size_t i = 0; i < t.args.size(); ++i) {
      const Term& a = t.args[i];
      if (a.kind != Term::Kind::Entity)
        throw Error(ErrorCode::UnresolvableContext, "argument " + a.str() + " of " + t.str() + " is not an identifier");
      auto type = registry.type_of(a.name);
      if (!type || *type != params[i].type) return std::nullopt;
      inst.args.push_back(a.name);
    }
    return inst;
  }

  /// Value of a term: a constant, or an unobserved RV instance.
  struct TermValue {
    std::optional<std::string> constant;
    RVInstance selector;
    const RVTemplate* tmpl = nullptr;
  };

  TermValue value_of(const Term& t, const Formula& ctx) const {
    switch (t.kind) {
      case Term::Kind::Entity: return {eval_identity(registry, t.name), {}, nullptr};
      case Term::Kind::Symbol: return {t.name, {}, nullptr};
      case Term::Kind::Variable: unresolvable(ctx, "free variable " + t.name);
      case Term::Kind::Apply: break;
    }
    if (t.name == "Prev") {
      if (t.args.size() != 1) unresolvable(ctx, "Prev takes one argument");
      auto inner = value_of(t.args[0], ctx);
      if (!inner.constant) unresolvable(ctx, "Prev of an uncertain value");
      if (*inner.constant == kAbsurd) return {std::string(kAbsurd), {}, nullptr};
      auto type = registry.type_of(*inner.constant);
      if (!type || !registry.is_ordered(*type)) return {std::string(kAbsurd), {}, nullptr};
      auto p = registry.predecessor(*inner.constant);
      return {p ? *p : std::string(kAbsurd), {}, nullptr};
    }
    const RVTemplate* rv = theory.find_rv(t.name);
    if (!rv) unresolvable(ctx, t.name + " cannot be used as a value here");
    auto inst = instance_of(t, rv->params);
    if (!inst) return {std::string(kAbsurd), {}, nullptr};
    if (const auto* v = facts.finding(inst->key())) return {*v, {}, nullptr};
    return {std::nullopt, *inst, rv};
  }

  ContextResolution resolved(ContextValue v) const {
    ContextResolution r;
    r.value = v;
    return r;
  }

  ContextResolution equals(const Formula& f, bool negated) const {
    auto a = value_of(f.terms[0], f);
    auto b = value_of(f.terms[1], f);
    if (a.constant && b.constant) {
      auto v = context_value_from(equality_value(*a.constant, *b.constant));
      return resolved(negated ? apply_connective(Formula::Kind::Not, v) : v);
    }
    if (!a.constant && !b.constant) unresolvable(f, "both sides are unobserved");
    auto& sel = a.constant ? b : a;
    const std::string& c = a.constant ? *a.constant : *b.constant;
    if (c == kAbsurd) return resolved(ContextValue::Absurd);
    auto states = ground_states(*sel.tmpl, registry, facts.candidates_of(sel.selector.key()));
    if (!states.contains(c) || c == kAbsurd) {
      return resolved(negated ? ContextValue::True : ContextValue::False);
    }
    ContextResolution r;
    r.kind = ContextResolution::Kind::UncertainReference;
    r.selector = sel.selector;
    r.candidates.assign(states.declared().begin(), states.declared().end());
    r.compared = c;
    r.negated = negated;
    return r;
  }

  ContextValue strict(const Formula& f) const {
    auto r = resolve(f);
    if (r.kind != ContextResolution::Kind::Resolved)
      unresolvable(f, "an uncertain reference cannot appear inside a compound context");
    return r.value;
  }

  ContextResolution resolve(const Formula& f) const {
    switch (f.kind) {
      case Formula::Kind::Isa: {
        auto v = value_of(f.terms[1], f);
        if (!v.constant) unresolvable(f, "type of an unobserved value");
        if (*v.constant == kAbsurd) return resolved(ContextValue::Absurd);
        return resolved(eval_isa(registry, f.terms[0].name, *v.constant));
      }
      case Formula::Kind::Equals: return equals(f, false);
      case Formula::Kind::Not:
        if (f.children[0].kind == Formula::Kind::Equals) return equals(f.children[0], true);
        return resolved(apply_connective(Formula::Kind::Not, strict(f.children[0])));
      case Formula::Kind::And:
      case Formula::Kind::Or:
      case Formula::Kind::Implies:
      case Formula::Kind::Iff:
        return resolved(apply_connective(f.kind, strict(f.children[0]), strict(f.children[1])));
      case Formula::Kind::ForAll:
      case Formula::Kind::Exists: return resolve(expand_quantifier(f, registry));
      case Formula::Kind::Atom: break;
    }
    const Term& t = f.terms[0];
    if (const Define* d = theory.find_define(t.name)) {
      auto inst = instance_of(t, d->params);
      if (!inst) return resolved(ContextValue::Absurd);
      std::map<std::string, std::string> b;
      for (std::size_t i = 0; i < d->params.size(); ++i) b[d->params[i].name] = inst->args[i];
      if (const auto* v = facts.finding(inst->key())) return resolved(context_value_from(*v));
      return resolved(strict(d->body.substitute(b)));
    }
    const RVTemplate* rv = theory.find_rv(t.name);
    if (!rv) throw Error(ErrorCode::UnknownRV, "unknown RV " + t.name + " in context " + f.str());
    if (!rv->is_boolean()) throw Error(ErrorCode::TypeViolation, "context atom " + f.str() + " is not Boolean");
    auto inst = instance_of(t, rv->params);
    if (!inst) return resolved(ContextValue::Absurd);
    if (const auto* v = facts.finding(inst->key())) return resolved(context_value_from(*v));
    unresolvable(f, inst->key() + " has no finding");
  }
};

}  // namespace

ContextResolution resolve_context(const Formula& ctx, const MTheory& theory, const EntityRegistry& registry,
                                  const FindingIndex& facts) {
  return Resolver{theory, registry, facts}.resolve(ctx);
}

}  // namespace mebn
