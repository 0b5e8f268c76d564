#include "mebn/grounding.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <set>

#include "mebn/error.hpp"
#include "mebn/logical_builtins.hpp"

namespace mebn {

std::optional<std::size_t> SSBN::index_of(std::string_view key) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].key == key) return i;
  return std::nullopt;
}

std::vector<std::vector<std::size_t>> SSBN::children() const {
  std::vector<std::vector<std::size_t>> ch(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (auto p : nodes[i].parents) ch[p].push_back(i);
  return ch;
}

std::size_t SSBN::arc_count() const {
  std::size_t n = 0;
  for (const auto& node : nodes) n += node.parents.size();
  return n;
}

namespace {

bool binding_active(const BindingWorld& b, const PartialWorldState& world) {
  for (const auto& c : b.contexts) {
    if (!c.uncertain()) {
      if (c.fixed != ContextValue::True) return false;
      continue;
    }
    const std::string& v = world.find(c.selector)->second;
    if (v == kAbsurd || (v == c.candidate) == c.negated) return false;
  }
  return true;
}

double parent_product(const std::vector<StateSpace>& parent_states) {
  double n = 1.0;
  for (const auto& s : parent_states) n *= static_cast<double>(s.size());
  return n;
}

/// Calls f(indices) for every joint parent state, last parent fastest.
void for_each_row(const std::vector<StateSpace>& parent_states, const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> idx(parent_states.size(), 0);
  while (true) {
    f(idx);
    std::size_t k = idx.size();
    while (k > 0) {
      --k;
      if (++idx[k] < parent_states[k].size()) break;
      idx[k] = 0;
      if (k == 0) return;
    }
    if (idx.empty()) return;
  }
}

}  // namespace

std::vector<double> compile_cpt(const LocalExpression& expr, const StateSpace& states,
                                std::span<const BindingWorld> bindings, const std::vector<std::string>& parent_names,
                                const std::vector<std::string>& node_parents,
                                const std::vector<StateSpace>& parent_states, double max_parent_product) {
  if (parent_product(parent_states) > max_parent_product)
    throw Error(ErrorCode::LimitExceeded, "max_parent_product: " + std::to_string(parent_product(parent_states)) +
                                              " parent configurations exceed the limit");
  const bool strict = !mentions_absurd(expr);
  const auto fallback = default_distribution(expr, states).probs;
  std::vector<double> cpt;
  cpt.reserve(static_cast<std::size_t>(parent_product(parent_states)) * states.size());
  PartialWorldState world;
  for_each_row(parent_states, [&](const std::vector<std::size_t>& idx) {
    for (std::size_t i = 0; i < idx.size(); ++i) world[node_parents[i]] = std::string(parent_states[i][idx[i]]);
    bool any_active = false, absurd_parent = false;
    for (const auto& b : bindings) {
      if (!binding_active(b, world)) continue;
      any_active = true;
      for (const auto& p : b.parents)
        if (world.find(p)->second == kAbsurd) absurd_parent = true;
    }
    if (!any_active) {
      cpt.insert(cpt.end(), fallback.begin(), fallback.end());
    } else if (absurd_parent && strict) {
      std::vector<double> row(states.size(), 0.0);
      row[states.absurd_index()] = 1.0;
      cpt.insert(cpt.end(), row.begin(), row.end());
    } else {
      auto counts = compute_influence_counts(bindings, world, parent_names);
      auto p = eval_local_distribution(expr, counts, states).probs;
      cpt.insert(cpt.end(), p.begin(), p.end());
    }
  });
  return cpt;
}

namespace {

std::string binding_text(const std::map<std::string, std::string>& b) {
  std::string s;
  for (const auto& [k, v] : b) s += (s.empty() ? "" : ", ") + k + "=" + v;
  return s;
}

class Builder {
 public:
  Builder(const ValidatedMTheory& v, const Evidence& ev, const GroundingLimits& limits)
      : theory_(v.theory()), registry_(v.registry()), facts_(FindingIndex::from(ev)), limits_(limits) {}

  SSBN build(const std::vector<Formula>& targets) {
    std::vector<std::size_t> target_nodes;
    for (const auto& t : targets) target_nodes.push_back(target(t));
    for (const auto& [key, value] : facts_.findings) {
      auto inst = parse_instance_key(key);
      auto idx = instance(*inst, 0);
      if (!nodes_[idx].states.contains(value))
        throw Error(ErrorCode::InvalidValue, "finding " + key + " = " + value + " is outside its state space");
    }
    return finish(target_nodes);
  }

 private:
  const MTheory& theory_;
  const EntityRegistry& registry_;
  FindingIndex facts_;
  GroundingLimits limits_;
  std::vector<GroundNode> nodes_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::set<std::string, std::less<>> in_progress_;

  std::size_t add(GroundNode n) {
    if (nodes_.size() + 1 > limits_.max_nodes)
      throw Error(ErrorCode::LimitExceeded, "max_nodes: the network would exceed " +
                                                std::to_string(limits_.max_nodes) + " nodes");
    auto key = n.key;
    nodes_.push_back(std::move(n));
    index_[key] = nodes_.size() - 1;
    return nodes_.size() - 1;
  }

  void enter(const std::string& key, std::size_t depth) {
    if (depth > limits_.max_depth)
      throw Error(ErrorCode::LimitExceeded, "max_depth: ancestor chain of " + key + " is deeper than " +
                                                std::to_string(limits_.max_depth));
    if (!in_progress_.insert(key).second)
      throw Error(ErrorCode::Validation, key + " is its own ancestor");
    if (in_progress_.size() + nodes_.size() > limits_.max_nodes)
      throw Error(ErrorCode::LimitExceeded, "max_nodes: the network would exceed " +
                                                std::to_string(limits_.max_nodes) + " nodes");
  }

  void check_args(const RVInstance& inst, const std::vector<Param>& params) const {
    if (inst.args.size() != params.size())
      throw Error(ErrorCode::ArityMismatch, inst.name + " takes " + std::to_string(params.size()) + " arguments, given " +
                                                std::to_string(inst.args.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto type = registry_.type_of(inst.args[i]);
      if (!type) throw Error(ErrorCode::UnknownIdentifier, "identifier " + inst.args[i] + " is not registered");
      if (*type != params[i].type)
        throw Error(ErrorCode::TypeViolation, inst.key() + ": " + inst.args[i] + " is a " + *type + ", expected " +
                                                  params[i].type);
    }
  }

  /// Node for a ground RV instance, built from its home MFrag.
  std::size_t instance(const RVInstance& inst, std::size_t depth) {
    const std::string key = inst.key();
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    if (const Define* d = theory_.find_define(inst.name)) return define_instance(*d, inst, depth);
    const RVTemplate* rv = theory_.find_rv(inst.name);
    if (!rv) throw Error(ErrorCode::UnknownRV, "unknown RV " + inst.name);
    check_args(inst, rv->params);
    enter(key, depth);

    GroundNode node;
    node.key = key;
    node.states = ground_states(*rv, registry_, facts_.candidates_of(key));
    const MFrag* home = theory_.home_of(inst.name);
    if (!home) throw Error(ErrorCode::Validation, inst.name + " has no home MFrag");
    const Term& rt = *home->find_resident(inst.name);
    const LocalExpression* expr = home->local_for(inst.name);
    if (!expr) throw Error(ErrorCode::Validation, inst.name + " has no local distribution in " + home->name);

    std::map<std::string, std::string> bound;
    bool matches = true;
    for (std::size_t i = 0; i < rt.args.size(); ++i) {
      const Term& a = rt.args[i];
      if (a.kind == Term::Kind::Entity) {
        matches = matches && a.name == inst.args[i];
      } else {
        auto [it, fresh] = bound.emplace(a.name, inst.args[i]);
        matches = matches && (fresh || it->second == inst.args[i]);
      }
    }

    auto parent_terms = home->parents_of(rt);
    std::vector<std::string> parent_names;
    for (const auto& p : parent_terms) parent_names.push_back(p.name);

    std::vector<BindingWorld> bindings;
    std::set<std::string> parent_keys;
    if (matches) {
      auto typing = infer_variable_types(*home, theory_);
      std::vector<std::string> free;
      for (const auto& v : home->variables())
        if (!bound.count(v)) free.push_back(v);
      enumerate(free, typing, bound, 0, [&](const std::map<std::string, std::string>& b) {
        BindingWorld w;
        for (const auto& ctx : home->context) {
          auto r = resolve_context(ctx.substitute(b), theory_, registry_, facts_);
          if (r.kind == ContextResolution::Kind::Resolved) {
            if (r.value != ContextValue::True) return;
            continue;
          }
          w.contexts.push_back(r.check());
          parent_keys.insert(r.selector.key());
        }
        for (const auto& p : parent_terms) {
          auto key = node_key(p.substitute(b));
          w.parents.push_back(key);
          parent_keys.insert(key);
        }
        bindings.push_back(std::move(w));
      });
    }

    std::vector<std::string> parents(parent_keys.begin(), parent_keys.end());
    std::vector<StateSpace> parent_states;
    for (const auto& pk : parents) {
      auto pinst = parse_instance_key(pk);
      if (!pinst) throw Error(ErrorCode::InvalidValue, "parent " + pk + " of " + key + " is not a ground instance");
      auto pi = instance(*pinst, depth + 1);
      node.parents.push_back(pi);
      parent_states.push_back(nodes_[pi].states);
    }
    node.cpt = compile_cpt(*expr, node.states, bindings, parent_names, parents, parent_states,
                           limits_.max_parent_product);
    node.provenance = home->name + " [" + binding_text(bound) + "] " + std::to_string(bindings.size()) +
                      (bindings.size() == 1 ? " binding" : " bindings");
    in_progress_.erase(key);
    return add(std::move(node));
  }

  void enumerate(const std::vector<std::string>& free, const VariableTyping& typing,
                 std::map<std::string, std::string>& b, std::size_t i,
                 const std::function<void(const std::map<std::string, std::string>&)>& f) {
    if (i == free.size()) {
      f(b);
      return;
    }
    auto it = typing.types.find(free[i]);
    if (it == typing.types.end())
      throw Error(ErrorCode::TypeViolation, "cannot infer a type for variable '" + free[i] + "'");
    for (const auto& id : registry_.ids_of(it->second)) {
      b[free[i]] = id;
      enumerate(free, typing, b, i + 1, f);
    }
    b.erase(free[i]);
  }

  // ---- deterministic logical nodes

  /// Either a constant value or a node whose value the term takes.
  struct Value {
    std::optional<std::string> constant;
    std::size_t node = 0;
  };

  /// Deterministic node over `inputs` (repeats allowed); f maps input values to a state.
  std::size_t deterministic(const std::string& key, StateSpace states, const std::vector<Value>& inputs,
                            const std::function<std::string(const std::vector<std::string>&)>& f,
                            const std::string& provenance) {
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    GroundNode node;
    node.key = key;
    node.states = std::move(states);
    node.provenance = provenance;
    std::vector<std::size_t> slot(inputs.size(), 0);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (inputs[i].constant) continue;
      auto pos = std::find(node.parents.begin(), node.parents.end(), inputs[i].node);
      slot[i] = static_cast<std::size_t>(pos - node.parents.begin());
      if (pos == node.parents.end()) node.parents.push_back(inputs[i].node);
    }
    std::vector<StateSpace> parent_states;
    for (auto p : node.parents) parent_states.push_back(nodes_[p].states);
    if (parent_product(parent_states) > limits_.max_parent_product)
      throw Error(ErrorCode::LimitExceeded, "max_parent_product: " + key + " has too many parent configurations");
    for_each_row(parent_states, [&](const std::vector<std::size_t>& idx) {
      std::vector<std::string> values;
      for (std::size_t i = 0; i < inputs.size(); ++i)
        values.push_back(inputs[i].constant ? *inputs[i].constant
                                            : std::string(parent_states[slot[i]][idx[slot[i]]]));
      auto out = node.states.index_of(f(values));
      std::vector<double> row(node.states.size(), 0.0);
      row[*out] = 1.0;
      node.cpt.insert(node.cpt.end(), row.begin(), row.end());
    });
    return add(std::move(node));
  }

  Value value(const Term& t, std::size_t depth) {
    switch (t.kind) {
      case Term::Kind::Entity:
        if (!registry_.type_of(t.name)) throw Error(ErrorCode::UnknownIdentifier, "identifier " + t.name + " is not registered");
        return {t.name, 0};
      case Term::Kind::Symbol: return {t.name, 0};
      case Term::Kind::Variable: throw Error(ErrorCode::UnboundParameter, "free variable '" + t.name + "' in a query");
      case Term::Kind::Apply: break;
    }
    if (t.name == "Prev") {
      auto inner = value(t.args.at(0), depth);
      if (!inner.constant) throw Error(ErrorCode::UnresolvableContext, "Prev of an uncertain value in " + t.str());
      auto p = registry_.predecessor(*inner.constant);
      return {p ? *p : std::string(kAbsurd), 0};
    }
    bool ground = std::all_of(t.args.begin(), t.args.end(), [](const Term& a) { return a.kind == Term::Kind::Entity; });
    if (ground) {
      RVInstance inst{t.name, {}};
      for (const auto& a : t.args) inst.args.push_back(a.name);
      return {std::nullopt, instance(inst, depth)};
    }
    return {std::nullopt, multiplexer(t, depth)};
  }

  /// F(G(x)): parents are the selector nodes G(x) and F(c) for each
  /// combination of selector values; the row copies the selected F(c).
  std::size_t multiplexer(const Term& t, std::size_t depth) {
    const std::string key = node_key(t);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    std::vector<Value> args;
    for (const auto& a : t.args) args.push_back(value(a, depth + 1));
    std::vector<std::vector<std::string>> choices;
    for (const auto& a : args) {
      if (a.constant) choices.push_back({*a.constant});
      else {
        auto d = nodes_[a.node].states.declared();
        choices.emplace_back(d.begin(), d.end());
      }
    }
    std::map<std::vector<std::string>, Value> branches;
    std::optional<StateSpace> states;
    std::vector<std::string> combo(args.size());
    std::function<void(std::size_t)> walk = [&](std::size_t i) {
      if (i == args.size()) {
        Term branch = Term::apply(t.name, {});
        for (const auto& c : combo) branch.args.push_back(Term::entity(c));
        auto v = value(branch, depth + 1);
        if (!states) states = nodes_[v.node].states;
        else if (!(*states == nodes_[v.node].states))
          throw Error(ErrorCode::TypeViolation, "branches of " + key + " have different state spaces");
        branches.emplace(combo, v);
        return;
      }
      for (const auto& c : choices[i]) {
        combo[i] = c;
        walk(i + 1);
      }
    };
    walk(0);
    std::vector<Value> inputs = args;
    std::vector<std::vector<std::string>> order;
    for (const auto& [c, v] : branches) {
      order.push_back(c);
      inputs.push_back(v);
    }
    const std::size_t n = args.size();
    return deterministic(key, *states, inputs,
                         [&](const std::vector<std::string>& vals) -> std::string {
                           std::vector<std::string> sel(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(n));
                           for (const auto& s : sel)
                             if (s == kAbsurd) return std::string(kAbsurd);
                           auto pos = std::find(order.begin(), order.end(), sel) - order.begin();
                           return vals[n + static_cast<std::size_t>(pos)];
                         },
                         "composition");
  }

  std::size_t define_instance(const Define& d, const RVInstance& inst, std::size_t depth) {
    const std::string key = inst.key();
    check_args(inst, d.params);
    enter(key, depth);
    std::map<std::string, std::string> b;
    for (std::size_t i = 0; i < d.params.size(); ++i) b[d.params[i].name] = inst.args[i];
    auto body = formula(d.body.substitute(b), depth + 1);
    in_progress_.erase(key);
    return deterministic(key, StateSpace::boolean(), {{std::nullopt, body}},
                         [](const std::vector<std::string>& v) { return v[0]; }, "define " + d.name);
  }

  std::size_t boolean_node(const Value& v, const Term& t) {
    if (v.constant) {
      auto c = context_value_from(*v.constant);
      if (c == ContextValue::Absurd && *v.constant != kAbsurd)
        throw Error(ErrorCode::TypeViolation, t.str() + " is not Boolean");
      return deterministic(node_key(t), StateSpace::boolean(), {}, [&](const auto&) { return *v.constant; },
                           "constant");
    }
    const auto& st = nodes_[v.node].states;
    if (!(st == StateSpace::boolean())) throw Error(ErrorCode::TypeViolation, t.str() + " is not Boolean");
    return v.node;
  }

  std::size_t formula(const Formula& f, std::size_t depth) {
    auto key = node_key(f);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    switch (f.kind) {
      case Formula::Kind::Atom: return boolean_node(value(f.terms[0], depth), f.terms[0]);
      case Formula::Kind::Equals: {
        auto a = value(f.terms[0], depth + 1);
        auto b = value(f.terms[1], depth + 1);
        return deterministic(key, StateSpace::boolean(), {a, b},
                             [](const std::vector<std::string>& v) { return std::string(equality_value(v[0], v[1])); },
                             "builtin Eq");
      }
      case Formula::Kind::Isa: {
        auto a = value(f.terms[1], depth + 1);
        const std::string type = f.terms[0].name;
        return deterministic(key, StateSpace::boolean(), {a},
                             [&](const std::vector<std::string>& v) {
                               return std::string(to_string(eval_isa(registry_, type, v[0])));
                             },
                             "builtin Isa");
      }
      case Formula::Kind::ForAll:
      case Formula::Kind::Exists: {
        auto idx = formula(expand_quantifier(f, registry_), depth);
        index_[key] = idx;
        return idx;
      }
      default: break;
    }
    std::vector<Value> inputs;
    for (const auto& c : f.children) inputs.push_back({std::nullopt, formula(c, depth + 1)});
    const auto& expr = connective_local(f.kind);
    std::vector<std::string> names = {"X1", "X2"};
    names.resize(inputs.size());
    auto kind = f.kind;
    return deterministic(
        key, StateSpace::boolean(), inputs,
        [&](const std::vector<std::string>& v) {
          InfluenceCounts counts(names);
          counts.add(v);
          auto p = eval_local_distribution(expr, counts, StateSpace::boolean());
          auto best = std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin();
          return p.states[static_cast<std::size_t>(best)];
        },
        "builtin " + std::string(to_string(kind)));
  }

  std::size_t target(const Formula& f) {
    if (f.kind == Formula::Kind::Atom) {
      const Term& t = f.terms[0];
      if (t.kind != Term::Kind::Apply) throw Error(ErrorCode::UnknownTarget, "target " + t.str() + " is not an RV");
      if (!theory_.find_rv(t.name) && !theory_.find_define(t.name))
        throw Error(ErrorCode::UnknownTarget, "unknown RV " + t.name + " in target " + f.str());
      auto v = value(t, 0);
      if (v.constant) return boolean_node(v, t);
      return v.node;
    }
    std::set<std::string> free;
    f.collect_free_variables(free);
    if (!free.empty()) throw Error(ErrorCode::UnboundParameter, "target " + f.str() + " has free variable '" + *free.begin() + "'");
    return formula(f, 0);
  }

  /// Re-order into a topological order with ties broken by key.
  SSBN finish(const std::vector<std::size_t>& target_nodes) {
    const std::size_t n = nodes_.size();
    std::vector<std::vector<std::size_t>> children(n);
    std::vector<std::size_t> indegree(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      indegree[i] = nodes_[i].parents.size();
      for (auto p : nodes_[i].parents) children[p].push_back(i);
    }
    using Item = std::pair<std::string, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> ready;
    for (std::size_t i = 0; i < n; ++i)
      if (indegree[i] == 0) ready.emplace(nodes_[i].key, i);
    std::vector<std::size_t> remap(n);
    std::vector<std::size_t> order;
    while (!ready.empty()) {
      auto [_, i] = ready.top();
      ready.pop();
      remap[i] = order.size();
      order.push_back(i);
      for (auto c : children[i])
        if (--indegree[c] == 0) ready.emplace(nodes_[c].key, c);
    }
    SSBN s;
    s.limits = limits_;
    for (auto i : order) {
      GroundNode node = nodes_[i];
      for (auto& p : node.parents) p = remap[p];
      s.nodes.push_back(std::move(node));
    }
    for (auto t : target_nodes) s.targets.push_back(nodes_[t].key);
    for (const auto& [key, value] : facts_.findings) s.evidence[key] = value;
    return s;
  }
};

}  // namespace

SSBN build_ssbn(const ValidatedMTheory& theory, const Evidence& evidence, const std::vector<Formula>& targets,
                const GroundingLimits& limits) {
  if (limits.max_depth == 0 || limits.max_nodes == 0 || !(limits.max_parent_product > 0))
    throw Error(ErrorCode::InvalidValue, "grounding limits must be positive");
  return Builder(theory, evidence, limits).build(targets);
}

}  // namespace mebn
