#include "mebn/validation.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mebn/error.hpp"
#include "mebn/grounding.hpp"
#include "mebn/logical_builtins.hpp"

namespace mebn {

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::NoCycles: return "NoCycles";
    case Condition::BoundedDepth: return "BoundedDepth";
    case Condition::UniqueHome: return "UniqueHome";
    case Condition::TypeCheck: return "TypeCheck";
  }
  return "TypeCheck";
}

std::size_t ValidationReport::count(Condition c) const {
  return static_cast<std::size_t>(
      std::count_if(violations.begin(), violations.end(), [&](const Violation& v) { return v.condition == c; }));
}

void ValidationReport::merge(ValidationReport other) {
  for (auto& v : other.violations) violations.push_back(std::move(v));
}

std::string ValidationReport::to_text() const {
  if (violations.empty()) return "ok\n";
  std::string s;
  for (const auto& v : violations) {
    s += std::string(to_string(v.condition)) + ": " + v.message;
    if (!v.witnesses.empty()) {
      s += " [";
      for (std::size_t i = 0; i < v.witnesses.size(); ++i) s += (i ? ", " : "") + v.witnesses[i];
      s += "]";
    }
    s += "\n";
  }
  return s;
}

std::string ValidationReport::to_json() const {
  nlohmann::ordered_json j;
  j["ok"] = ok();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& v : violations)
    arr.push_back({{"condition", to_string(v.condition)}, {"witnesses", v.witnesses}, {"message", v.message}});
  j["violations"] = arr;
  return j.dump(2);
}

namespace {

void add(ValidationReport& r, Condition c, std::vector<std::string> witnesses, std::string message) {
  r.violations.push_back({c, std::move(witnesses), std::move(message)});
}

const std::vector<Param>* params_of(const MTheory& t, std::string_view name) {
  if (const auto* rv = t.find_rv(name)) return &rv->params;
  if (const auto* d = t.find_define(name)) return &d->params;
  return nullptr;
}

}  // namespace

ValidationReport check_unique_home(const MTheory& theory) {
  ValidationReport r;
  for (const auto& rv : theory.rvs) {
    std::vector<std::string> homes;
    for (const auto& m : theory.mfrags)
      if (m.find_resident(rv.name)) homes.push_back(m.name);
    if (homes.size() == 1) continue;
    if (homes.empty())
      add(r, Condition::UniqueHome, {rv.name}, rv.name + " is resident in no MFrag");
    else {
      auto w = homes;
      w.insert(w.begin(), rv.name);
      add(r, Condition::UniqueHome, w, rv.name + " is resident in " + std::to_string(homes.size()) + " MFrags");
    }
  }
  for (const auto& m : theory.mfrags)
    for (const auto& t : m.resident)
      if (theory.find_define(t.name))
        add(r, Condition::UniqueHome, {t.name, m.name}, t.name + " is a definition and has a builtin home");
  return r;
}

ValidationReport check_types(const MTheory& theory, const EntityRegistry& registry) {
  ValidationReport r;
  auto check_term = [&](const MFrag& m, const Term& t, const VariableTyping& typing) {
    const auto* params = params_of(theory, t.name);
    if (!params) {
      add(r, Condition::TypeCheck, {m.name, t.str()}, "unknown RV " + t.name + " in " + m.name);
      return;
    }
    if (params->size() != t.args.size()) {
      add(r, Condition::TypeCheck, {m.name, t.str()},
          t.name + " takes " + std::to_string(params->size()) + " arguments in " + m.name);
      return;
    }
    for (std::size_t i = 0; i < t.args.size(); ++i) {
      const Term& a = t.args[i];
      if (a.kind == Term::Kind::Entity) {
        auto type = registry.type_of(a.name);
        if (!type || *type != (*params)[i].type)
          add(r, Condition::TypeCheck, {m.name, t.str()},
              a.name + " is not a registered " + (*params)[i].type + " in " + m.name);
      } else if (a.kind == Term::Kind::Variable) {
        auto it = typing.types.find(a.name);
        if (it != typing.types.end() && it->second != (*params)[i].type)
          add(r, Condition::TypeCheck, {m.name, t.str()}, "variable '" + a.name + "' has type " + it->second +
                                                               " but " + t.name + " expects " + (*params)[i].type);
      }
    }
  };

  std::function<void(const MFrag&, const Formula&)> check_context = [&](const MFrag& m, const Formula& f) {
    if (f.kind == Formula::Kind::Atom) {
      const Term& t = f.terms[0];
      if (const auto* rv = theory.find_rv(t.name); rv && !rv->is_boolean())
        add(r, Condition::TypeCheck, {m.name, f.str()}, "context " + f.str() + " in " + m.name + " is not Boolean");
    }
    if (f.kind == Formula::Kind::Isa && !theory.find_type(f.terms[0].name))
      add(r, Condition::TypeCheck, {m.name, f.str()}, "unknown type " + f.terms[0].name);
    if ((f.kind == Formula::Kind::ForAll || f.kind == Formula::Kind::Exists) && !theory.find_type(f.bound_type))
      add(r, Condition::TypeCheck, {m.name, f.str()}, "unknown type " + f.bound_type);
    for (const auto& c : f.children) check_context(m, c);
  };

  for (const auto& m : theory.mfrags) {
    auto typing = infer_variable_types(m, theory);
    for (const auto& c : typing.conflicts) add(r, Condition::TypeCheck, {m.name}, m.name + ": " + c);
    for (const auto& t : m.input) check_term(m, t, typing);
    for (const auto& t : m.resident) check_term(m, t, typing);
    for (const auto& c : m.context) check_context(m, c);

    if (m.recursion) {
      auto it = typing.types.find(m.recursion->variable);
      if (it == typing.types.end())
        add(r, Condition::TypeCheck, {m.name}, m.name + ": recursion variable '" + m.recursion->variable + "' is unused");
      else if (!registry.is_ordered(it->second))
        add(r, Condition::TypeCheck, {m.name, it->second},
            m.name + ": recursion over " + it->second + ", which is not an ordered type");
      if (m.recursion->function != "Prev")
        add(r, Condition::TypeCheck, {m.name}, m.name + ": recursion must step down with Prev");
    }

    for (const auto& res : m.resident) {
      const auto* rv = theory.find_rv(res.name);
      if (!rv) continue;
      auto count = std::count_if(m.locals.begin(), m.locals.end(), [&](const LocalDecl& l) { return l.resident == res.name; });
      if (count != 1) {
        add(r, Condition::TypeCheck, {m.name, res.name},
            res.name + " has " + std::to_string(count) + " local distributions in " + m.name);
        continue;
      }
      auto parents = m.parents_of(res);
      std::vector<std::string> names;
      std::vector<StateSpace> parent_states;
      bool states_known = true;
      for (const auto& p : parents) {
        if (std::find(names.begin(), names.end(), p.name) != names.end())
          add(r, Condition::TypeCheck, {m.name, res.name, p.name},
              res.name + " has two parents named " + p.name + "; patterns could not tell them apart");
        names.push_back(p.name);
        if (const auto* prv = theory.find_rv(p.name)) {
          try {
            parent_states.push_back(ground_states(*prv, registry));
          } catch (const Error&) {
            states_known = false;
          }
        } else {
          parent_states.push_back(StateSpace::boolean());
        }
      }
      StateSpace states;
      try {
        states = ground_states(*rv, registry);
      } catch (const Error&) {
        continue;  // entity-valued with no registered range: nothing to check against
      }
      auto diags = check_ldl_wellformed(*m.local_for(res.name), states, names,
                                        states_known ? std::span<const StateSpace>(parent_states)
                                                     : std::span<const StateSpace>());
      for (const auto& d : diags)
        add(r, Condition::TypeCheck, {m.name, res.name},
            "local distribution of " + res.name + " (" + std::string(to_string(d.kind)) + "): " + d.message);
    }
    for (const auto& l : m.locals)
      if (!m.find_resident(l.resident))
        add(r, Condition::TypeCheck, {m.name, l.resident}, "local for " + l.resident + ", which is not resident in " + m.name);
  }

  for (const auto& d : theory.defines) {
    std::set<std::string> free;
    d.body.collect_free_variables(free);
    for (const auto& v : free)
      if (std::none_of(d.params.begin(), d.params.end(), [&](const Param& p) { return p.name == v; }))
        add(r, Condition::TypeCheck, {d.name}, "definition " + d.name + " uses unbound variable '" + v + "'");
  }
  return r;
}

namespace {

/// Dependency graph over ground instance keys.
struct InstanceGraph {
  std::map<std::string, std::set<std::string>> parents;  // child -> parents

  void node(const std::string& k) { parents[k]; }
  void edge(const std::string& from, const std::string& to) {
    parents[to].insert(from);
    parents[from];
  }
};

/// Possible values of a term used as an argument: identifiers only.
std::vector<std::string> possible_values(const Term& t, const MTheory& theory, const EntityRegistry& registry) {
  if (t.kind == Term::Kind::Entity) return {t.name};
  if (t.kind == Term::Kind::Apply && t.name == "Prev" && t.args.size() == 1) {
    std::vector<std::string> out;
    for (const auto& v : possible_values(t.args[0], theory, registry))
      if (auto p = registry.predecessor(v)) out.push_back(*p);
    return out;
  }
  if (t.kind == Term::Kind::Apply)
    if (const auto* rv = theory.find_rv(t.name); rv && rv->entity_valued()) return registry.ids_of(rv->entity_range);
  return {};
}

/// RV instances mentioned by a ground formula or term (compositions expand
/// over every value of the inner term).
void mentioned(const Term& t, const MTheory& theory, const EntityRegistry& registry, std::set<std::string>& out) {
  if (t.kind != Term::Kind::Apply || t.name == "Prev") {
    for (const auto& a : t.args) mentioned(a, theory, registry, out);
    return;
  }
  if (!params_of(theory, t.name)) return;
  std::vector<std::vector<std::string>> choices;
  for (const auto& a : t.args) {
    mentioned(a, theory, registry, out);
    choices.push_back(possible_values(a, theory, registry));
  }
  std::vector<std::string> combo(choices.size());
  std::function<void(std::size_t)> walk = [&](std::size_t i) {
    if (i == choices.size()) {
      out.insert(RVInstance{t.name, combo}.key());
      return;
    }
    for (const auto& c : choices[i]) {
      combo[i] = c;
      walk(i + 1);
    }
  };
  walk(0);
}

void mentioned(const Formula& f, const MTheory& theory, const EntityRegistry& registry, std::set<std::string>& out) {
  if (f.kind == Formula::Kind::ForAll || f.kind == Formula::Kind::Exists) {
    for (const auto& id : registry.ids_of(f.bound_type))
      mentioned(f.children[0].substitute({{f.bound_var, id}}), theory, registry, out);
    return;
  }
  if (f.kind == Formula::Kind::Isa) {
    mentioned(f.terms[1], theory, registry, out);
    return;
  }
  for (const auto& t : f.terms) mentioned(t, theory, registry, out);
  for (const auto& c : f.children) mentioned(c, theory, registry, out);
}

void enumerate(const std::vector<std::string>& vars, const VariableTyping& typing, const EntityRegistry& registry,
               std::map<std::string, std::string>& b, std::size_t i,
               const std::function<void(const std::map<std::string, std::string>&)>& f) {
  if (i == vars.size()) {
    f(b);
    return;
  }
  auto it = typing.types.find(vars[i]);
  if (it == typing.types.end()) return;
  for (const auto& id : registry.ids_of(it->second)) {
    b[vars[i]] = id;
    enumerate(vars, typing, registry, b, i + 1, f);
  }
  b.erase(vars[i]);
}

/// Whether a ground context could hold in some world; contexts that depend
/// on unobserved RVs count as possibly true.
bool possibly_true(const Formula& ctx, const MTheory& theory, const EntityRegistry& registry) {
  static const FindingIndex none;
  try {
    auto r = resolve_context(ctx, theory, registry, none);
    return r.kind == ContextResolution::Kind::UncertainReference || r.value == ContextValue::True;
  } catch (const Error&) {
    return true;
  }
}

/// A cycle through `start` inside the strongly connected set `scc`.
std::vector<std::string> cycle_through(const std::string& start, const std::set<std::string>& scc,
                                       const std::map<std::string, std::set<std::string>>& children) {
  std::map<std::string, std::string> prev;
  std::queue<std::string> q;
  q.push(start);
  while (!q.empty()) {
    auto u = q.front();
    q.pop();
    auto it = children.find(u);
    if (it == children.end()) continue;
    for (const auto& v : it->second) {
      if (!scc.count(v)) continue;
      if (v == start) {
        std::vector<std::string> path = {start};
        for (std::string w = u; w != start; w = prev[w]) path.push_back(w);
        std::reverse(path.begin() + 1, path.end());
        path.push_back(start);
        return path;
      }
      if (!prev.count(v)) {
        prev[v] = u;
        q.push(v);
      }
    }
  }
  return {start};
}

}  // namespace

AcyclicityResult check_instance_acyclicity(const MTheory& theory, const EntityRegistry& registry,
                                           std::size_t depth_bound) {
  AcyclicityResult result;
  std::set<std::set<std::string>> reported;

  // Undeclared self-recursion at the template level.
  for (const auto& m : theory.mfrags) {
    if (m.recursion) continue;
    for (const auto& in : m.input)
      if (m.find_resident(in.name)) {
        add(result.report, Condition::NoCycles, {m.name, in.str()},
            in.name + " is both input and resident of " + m.name + " without a recursion declaration");
        reported.insert({in.name});
      }
  }

  InstanceGraph g;
  for (const auto& m : theory.mfrags) {
    auto typing = infer_variable_types(m, theory);
    auto vars_set = m.variables();
    std::vector<std::string> vars(vars_set.begin(), vars_set.end());
    std::map<std::string, std::string> b;
    enumerate(vars, typing, registry, b, 0, [&](const std::map<std::string, std::string>& binding) {
      std::set<std::string> ctx_instances;
      for (const auto& c : m.context) {
        auto ground = c.substitute(binding);
        if (!possibly_true(ground, theory, registry)) return;
        mentioned(ground, theory, registry, ctx_instances);
      }
      for (const auto& res : m.resident) {
        auto key = node_key(res.substitute(binding));
        g.node(key);
        for (const auto& p : m.parents_of(res)) g.edge(node_key(p.substitute(binding)), key);
        for (const auto& c : ctx_instances) g.edge(c, key);
      }
    });
  }
  for (const auto& d : theory.defines) {
    std::vector<std::string> vars;
    VariableTyping typing;
    for (const auto& p : d.params) {
      vars.push_back(p.name);
      typing.types[p.name] = p.type;
    }
    std::map<std::string, std::string> b;
    enumerate(vars, typing, registry, b, 0, [&](const std::map<std::string, std::string>& binding) {
      RVInstance inst{d.name, {}};
      for (const auto& p : d.params) inst.args.push_back(binding.at(p.name));
      std::set<std::string> deps;
      mentioned(d.body.substitute(binding), theory, registry, deps);
      g.node(inst.key());
      for (const auto& dep : deps) g.edge(dep, inst.key());
    });
  }

  // Kahn's algorithm, smallest key first; leftovers lie on or behind cycles.
  std::map<std::string, std::set<std::string>> children;
  std::map<std::string, std::size_t> indegree;
  for (const auto& [child, ps] : g.parents) {
    indegree[child] = ps.size();
    for (const auto& p : ps) children[p].insert(child);
  }
  std::set<std::string> ready;
  for (const auto& [k, n] : indegree)
    if (n == 0) ready.insert(k);
  std::map<std::string, std::size_t> depth;
  while (!ready.empty()) {
    auto k = *ready.begin();
    ready.erase(ready.begin());
    std::size_t dk = 1;
    for (const auto& p : g.parents[k]) dk = std::max(dk, depth[p] + 1);
    depth[k] = dk;
    result.order.push_back(k);
    for (const auto& c : children[k])
      if (--indegree[c] == 0) ready.insert(c);
  }
  result.depth.instances = g.parents.size();

  if (result.order.size() < g.parents.size()) {
    // Strongly connected components among the remaining nodes (Tarjan).
    std::set<std::string> rest;
    for (const auto& [k, _] : g.parents)
      if (!depth.count(k)) rest.insert(k);
    std::map<std::string, std::size_t> index, low;
    std::vector<std::string> stack;
    std::set<std::string> on_stack;
    std::size_t counter = 0;
    std::vector<std::set<std::string>> sccs;
    std::function<void(const std::string&)> strong = [&](const std::string& v) {
      index[v] = low[v] = counter++;
      stack.push_back(v);
      on_stack.insert(v);
      for (const auto& w : children[v]) {
        if (!rest.count(w)) continue;
        if (!index.count(w)) {
          strong(w);
          low[v] = std::min(low[v], low[w]);
        } else if (on_stack.count(w)) {
          low[v] = std::min(low[v], index[w]);
        }
      }
      if (low[v] == index[v]) {
        std::set<std::string> comp;
        std::string w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack.erase(w);
          comp.insert(w);
        } while (w != v);
        bool cyclic = comp.size() > 1 || children[v].count(v);
        if (cyclic) sccs.push_back(std::move(comp));
      }
    };
    for (const auto& v : rest)
      if (!index.count(v)) strong(v);
    for (const auto& comp : sccs) {
      std::set<std::string> templates;
      for (const auto& k : comp) templates.insert(parse_instance_key(k) ? parse_instance_key(k)->name : k);
      if (!reported.insert(templates).second) continue;
      auto path = cycle_through(*comp.begin(), comp, children);
      std::string text;
      for (std::size_t i = 0; i < path.size(); ++i) text += (i ? " -> " : "") + path[i];
      add(result.report, Condition::NoCycles, path, "instance cycle: " + text);
    }
    result.order.clear();
    return result;
  }

  for (const auto& [k, d] : depth) {
    auto name = parse_instance_key(k) ? parse_instance_key(k)->name : k;
    auto& m = result.depth.max_depth[name];
    m = std::max(m, d);
    result.depth.overall = std::max(result.depth.overall, d);
  }
  if (result.depth.overall > depth_bound) {
    auto deepest = std::max_element(depth.begin(), depth.end(),
                                    [](const auto& a, const auto& b) { return a.second < b.second; });
    add(result.report, Condition::BoundedDepth, {deepest->first},
        "ancestor chain of length " + std::to_string(deepest->second) + " exceeds the depth bound " +
            std::to_string(depth_bound));
  }
  return result;
}

ValidationOutcome validate(const MTheory& theory, const EntityRegistry& registry, std::size_t depth_bound) {
  ValidationOutcome out;
  out.report = check_unique_home(theory);
  out.report.merge(check_types(theory, registry));
  AcyclicityResult acyclic;
  try {
    acyclic = check_instance_acyclicity(theory, registry, depth_bound);
  } catch (const Error& e) {
    add(out.report, Condition::TypeCheck, {}, e.what());
  }
  out.report.merge(acyclic.report);
  if (out.report.ok())
    out.theory = ValidatedMTheory(theory, registry, std::move(acyclic.depth), std::move(acyclic.order));
  return out;
}

}  // namespace mebn
