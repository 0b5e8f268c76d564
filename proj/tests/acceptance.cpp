// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.
#include <algorithm>
#include <chrono>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "mebn/error.hpp"
#include "mebn/logical_builtins.hpp"
#include "random_theory.hpp"
#include "support.hpp"

using namespace mebn;
namespace mt = mebn::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

const EntityDecl* entities_of(const Evidence& ev, const MTheory& t, const std::string& type) {
  const auto& list = ev.entities.empty() ? t.entities : ev.entities;
  for (const auto& e : list)
    if (e.type == type) return &e;
  return nullptr;
}

// 1
Outcome oracle_equivalence() {
  const auto& t = mt::star_trek();
  auto start = std::chrono::steady_clock::now();
  double worst = 0;
  std::size_t checked = 0;
  for (const auto& sc : mt::corpus_scenarios()) {
    auto ev = mt::load_evidence(t, sc.evidence);
    const auto* ships = entities_of(ev, t, "Starship");
    const auto* steps = entities_of(ev, t, "TimeStep");
    if ((ships && ships->ids.size() > 5) || (steps && steps->ids.size() > 2)) continue;
    auto ve = mt::query(t, ev, sc.targets);
    auto bf = mt::query(t, ev, sc.targets, Engine::Oracle);
    worst = std::max(worst, mt::max_abs_diff(ve.posterior, bf.posterior));
    ++checked;
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {checked > 0 && worst <= 1e-9 && secs < 60,
          std::to_string(checked) + " scenarios, max |diff| " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// 2
Outcome default_semantics() {
  const auto& t = mt::star_trek();
  auto ev = mt::load_evidence(t, mt::corpus_file("evidence/no_contacts.mev"));
  auto r = mt::query(t, ev, {"DangerToSelf(!ST0, !T0)"});
  const auto& d = r.posterior.targets[0].distribution;
  bool exact = d.at("Absurd") == 1.0;
  for (const auto& s : {"Unacceptable", "High", "Medium", "Low"}) exact = exact && d.at(s) == 0.0;
  return {exact, "P(Absurd) = " + fmt(d.at("Absurd"))};
}

// 3
Outcome tri_valuation() {
  const auto& t = mt::star_trek();
  auto ev = mt::load_evidence(t, mt::corpus_file("evidence/five_ships.mev"));
  ev.entities.clear();  // the theory's registry includes !Z1
  auto reg = registry_from(t);
  auto facts = FindingIndex::from(ev);
  auto value = [&](const std::string& text) {
    auto r = resolve_context(mt::targets({text})[0], t, reg, facts);
    return r.kind == ContextResolution::Kind::Resolved ? std::string(to_string(r.value)) : std::string("uncertain");
  };
  auto a = value("IsOwnStarship(!ST0)"), b = value("IsOwnStarship(!ST1)"), c = value("IsOwnStarship(!Z1)");
  return {a == "True" && b == "False" && c == "Absurd", "!ST0 " + a + ", !ST1 " + b + ", !Z1 " + c};
}

// 4
Outcome count_invariance() {
  const auto& t = mt::star_trek();
  const auto* m = t.find_mfrag("DangerToSelf");
  const auto& expr = *m->local_for("DangerToSelf");
  StateSpace danger = t.find_rv("DangerToSelf")->states;
  StateSpace opspec = t.find_rv("OpSpec")->states;
  StateSpace subject({"!ST1", "!ST2", "!ST3"});

  std::vector<BindingWorld> bindings;
  std::vector<std::string> node_parents;
  std::vector<StateSpace> parent_states;
  for (const std::string id : {"!ST1", "!ST2", "!ST3"}) {
    BindingWorld b;
    b.parents = {"HarmPotential(" + id + ",!T0)", "OpSpec(" + id + ")"};
    b.contexts.push_back({ContextValue::True, "", "", false});
    if (id != "!ST1") b.contexts.push_back({ContextValue::True, "Subject(!SR4)", id, false});
    bindings.push_back(b);
    node_parents.insert(node_parents.end(), b.parents.begin(), b.parents.end());
  }
  node_parents.push_back("Subject(!SR4)");
  std::sort(node_parents.begin(), node_parents.end());
  for (const auto& p : node_parents)
    parent_states.push_back(p.rfind("OpSpec", 0) == 0 ? opspec : p.rfind("Subject", 0) == 0 ? subject
                                                                                            : StateSpace::boolean());
  std::vector<std::string> names = {"HarmPotential", "OpSpec"};
  auto reference = compile_cpt(expr, danger, bindings, names, node_parents, parent_states);

  std::mt19937 rng(2024);
  std::size_t identical = 0;
  for (int i = 0; i < 200; ++i) {
    auto shuffled = bindings;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (auto& b : shuffled) std::shuffle(b.contexts.begin(), b.contexts.end(), rng);
    auto cpt = compile_cpt(expr, danger, shuffled, names, node_parents, parent_states);
    if (cpt.size() == reference.size() && std::memcmp(cpt.data(), reference.data(), cpt.size() * sizeof(double)) == 0)
      ++identical;
  }
  return {identical == 200, std::to_string(identical) + "/200 bit-identical, " +
                                std::to_string(reference.size() / danger.size()) + " rows"};
}

// 5
Outcome local_finality() {
  const auto& t = mt::star_trek();
  std::size_t expressions = 0, comparisons = 0, mismatches = 0;
  for (const auto& m : t.mfrags) {
    for (const auto& local : m.locals) {
      const auto* rv = t.find_rv(local.resident);
      const auto* resident = m.find_resident(local.resident);
      auto reg = registry_from(t);
      StateSpace states = ground_states(*rv, reg);
      std::vector<std::string> names;
      std::vector<std::vector<std::string>> values;
      for (const auto& p : m.parents_of(*resident)) {
        names.push_back(p.name);
        const auto* prv = t.find_rv(p.name);
        auto s = ground_states(*prv, reg).declared();
        values.emplace_back(s.begin(), s.end());
      }
      std::vector<std::vector<std::string>> configs = {{}};
      for (const auto& vs : values) {
        std::vector<std::vector<std::string>> next;
        for (const auto& c : configs)
          for (const auto& v : vs) {
            next.push_back(c);
            next.back().push_back(v);
          }
        configs = std::move(next);
      }
      ++expressions;
      std::int64_t b = std::max<std::int64_t>(1, saturation_bound(local.expr));
      const std::int64_t steps[] = {b, b + 1, b + 10, b + 1000};
      auto eval = [&](const std::vector<std::pair<std::size_t, std::int64_t>>& tally) {
        InfluenceCounts c(names);
        for (auto [i, n] : tally) c.add(configs[i], n);
        return eval_local_distribution(local.expr, c, states);
      };
      for (std::size_t i = 0; i < configs.size(); ++i) {
        for (std::size_t j = i; j < configs.size(); ++j) {
          std::optional<ProbabilityVector> first;
          for (auto m1 : steps)
            for (auto m2 : steps) {
              if (i == j && m1 != m2) continue;
              auto d = i == j ? eval({{i, m1}}) : eval({{i, m1}, {j, m2}});
              ++comparisons;
              if (!first) first = d;
              else if (!(d == *first)) ++mismatches;
            }
        }
      }
    }
  }
  return {mismatches == 0, std::to_string(expressions) + " expressions, " + std::to_string(comparisons) +
                               " evaluations, " + std::to_string(mismatches) + " differences"};
}

// 6
Outcome mutation_suite() {
  auto text = SourceText::from_file(mt::corpus_file("star_trek.mtheory")).content;
  auto replaced = [](std::string s, const std::string& from, const std::string& to) {
    auto pos = s.find(from);
    if (pos == std::string::npos) throw std::runtime_error("mutation anchor missing: " + from);
    return s.replace(pos, from.size(), to);
  };
  auto report = [](const std::string& src) {
    auto t = mt::parse_theory_text(src);
    return validate(t, registry_from(t)).report;
  };
  auto only = [](const ValidationReport& r, Condition c) {
    return !r.ok() && std::all_of(r.violations.begin(), r.violations.end(),
                                  [&](const Violation& v) { return v.condition == c; });
  };

  auto self_loop = report(replaced(text, "graph: OpSpec(st) -> CloakMode(st)",
                                   "graph: OpSpec(st) -> CloakMode(st); CloakMode(st) -> CloakMode(st)"));
  auto two = replaced(text, "  resident: OpSpec(st); CloakMode(st)\n  graph: OpSpec(st) -> CloakMode(st)",
                      "  input: Exists(st)\n  resident: OpSpec(st); CloakMode(st)\n"
                      "  graph: OpSpec(st) -> CloakMode(st); Exists(st) -> OpSpec(st)");
  two = replaced(two, "  resident: Exists(st)\n", "  input: OpSpec(st)\n  resident: Exists(st)\n  graph: OpSpec(st) -> Exists(st)\n");
  auto cycle = report(two);
  auto dup = report(text + "\nmfrag Again\n  context: Isa(Starship, st)\n  resident: CloakMode(st)\n"
                           "  local CloakMode: {True: 0.5, False: 0.5}\nend\n");
  auto pristine = report(text);

  bool ok = only(self_loop, Condition::NoCycles) && self_loop.violations.size() == 1 &&
            only(cycle, Condition::NoCycles) && only(dup, Condition::UniqueHome) && pristine.ok();
  auto tags = [](const ValidationReport& r) {
    std::string s;
    for (const auto& v : r.violations) s += (s.empty() ? "" : "+") + std::string(to_string(v.condition));
    return s.empty() ? std::string("ok") : s;
  };
  return {ok, "self-loop " + tags(self_loop) + ", 2-cycle " + tags(cycle) + ", duplicate home " + tags(dup) +
                  ", pristine " + tags(pristine)};
}

// 7
Outcome association_existence() {
  const auto& t = mt::star_trek();
  auto base = mt::load_evidence(t, mt::corpus_file("evidence/five_ships.mev"));
  base.candidates.clear();
  std::size_t exact = 0, tried = 0;
  std::string worst;
  for (const auto& v : entities_of(base, t, "Starship")->ids) {
    if (v == "!ST4") continue;
    auto ev = base;
    ev.findings.push_back({{"Subject", {"!SR4"}}, v});
    auto r = mt::query(t, ev, {"Exists(!ST4)"});
    double p = r.posterior.targets[0].distribution.at("False");
    ++tried;
    if (p == 1.0) ++exact;
    else worst = v + " gives " + fmt(p);
  }
  return {tried > 0 && exact == tried,
          std::to_string(exact) + "/" + std::to_string(tried) + " values exactly 1" + (worst.empty() ? "" : "; " + worst)};
}

// 8
Outcome recursion_chain() {
  const auto& t = mt::star_trek();
  auto ev = mt::load_evidence(t, mt::corpus_file("evidence/zone_chain.mev"));
  auto v = mt::validated(t, ev);
  auto s = build_ssbn(v, ev, mt::targets({"ZoneMD(!Z0, !T3)"}));
  std::size_t zones = 0;
  for (const auto& n : s.nodes) zones += n.key.rfind("ZoneMD(", 0) == 0;
  auto ve = mt::query(t, ev, {"ZoneMD(!Z0, !T3)"});
  auto bf = mt::query(t, ev, {"ZoneMD(!Z0, !T3)"}, Engine::Oracle, false);
  double diff = mt::max_abs_diff(ve.posterior, bf.posterior);
  return {zones == 4 && diff <= 1e-9, std::to_string(zones) + " ZoneMD nodes, max |diff| " + fmt(diff)};
}

// 9
Outcome prune_invariance() {
  const auto& t = mt::star_trek();
  double worst = 0;
  std::size_t barren = 0, scenarios = 0, before = 0, after = 0;
  for (const auto& sc : mt::corpus_scenarios()) {
    auto ev = mt::load_evidence(t, sc.evidence);
    auto pruned = mt::query(t, ev, sc.targets, Engine::Elimination, true);
    auto full = mt::query(t, ev, sc.targets, Engine::Elimination, false);
    worst = std::max(worst, mt::max_abs_diff(pruned.posterior, full.posterior));
    barren += barren_nodes(pruned.ssbn).size();
    before += full.ssbn.nodes.size();
    after += pruned.ssbn.nodes.size();
    ++scenarios;
  }
  return {worst <= 1e-9 && barren == 0,
          std::to_string(scenarios) + " scenarios, max |diff| " + fmt(worst) + ", " + std::to_string(barren) +
              " barren nodes, " + std::to_string(before) + " -> " + std::to_string(after) + " nodes"};
}

// 10
Outcome logic_equivalences() {
  std::mt19937 rng(10);
  std::size_t pairs = 0;
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    auto lt = mt::random_logic_theory(rng);
    auto t = mt::parse_theory_text(lt.text);
    auto ev = mt::parse_evidence_text(t, lt.evidence);
    auto pick = [&] {
      std::uniform_int_distribution<std::size_t> e(0, lt.entities - 1);
      return std::string(std::bernoulli_distribution(0.5)(rng) ? "P" : "Q") + "(!E" + std::to_string(e(rng)) + ")";
    };
    auto a = pick(), b = pick();
    std::string all_q, any_p;
    for (std::size_t k = 0; k < lt.entities; ++k) {
      auto q = "Q(!E" + std::to_string(k) + ")", p = "P(!E" + std::to_string(k) + ")";
      all_q = all_q.empty() ? q : "And(" + all_q + ", " + q + ")";
      any_p = any_p.empty() ? p : "Or(" + any_p + ", " + p + ")";
    }
    std::vector<std::pair<std::string, std::string>> eq = {
        {"Not(And(" + a + ", " + b + "))", "Or(Not(" + a + "), Not(" + b + "))"},
        {"Not(Or(" + a + ", " + b + "))", "And(Not(" + a + "), Not(" + b + "))"},
        {"Implies(" + a + ", " + b + ")", "Or(Not(" + a + "), " + b + ")"},
        {"exists x: Thing . P(x)", "Not(forall x: Thing . Not(P(x)))"},
        {"forall x: Thing . Q(x)", "Not(exists x: Thing . Not(Q(x)))"},
        {"exists x: Thing . P(x)", any_p},
        {"forall x: Thing . Q(x)", all_q},
    };
    for (const auto& [lhs, rhs] : eq) {
      auto l = mt::query(t, ev, {lhs});
      auto r = mt::query(t, ev, {rhs});
      worst = std::max(worst, mt::max_abs_diff(l.posterior, r.posterior));
      ++pairs;
    }
  }
  return {worst <= 1e-9, "50 theories, " + std::to_string(pairs) + " equivalent pairs, max |diff| " + fmt(worst)};
}

// 11
Outcome round_trip() {
  std::size_t ok = 0, total = 0;
  const auto& corpus = mt::star_trek();
  ++total;
  ok += mt::parse_theory_text(serialize_mtheory(corpus)) == corpus;
  for (const auto& sc : mt::corpus_scenarios()) {
    auto ev = mt::load_evidence(corpus, sc.evidence);
    auto again = mt::parse_evidence_text(corpus, serialize_evidence(ev));
    ++total;
    ok += again.entities == ev.entities && again.candidates == ev.candidates && again.findings == ev.findings;
  }
  std::mt19937 rng(11);
  for (int i = 0; i < 100; ++i) {
    auto t = mt::random_theory(rng);
    auto r = parse_mtheory({serialize_mtheory(t), "random"});
    ++total;
    ok += r.ok() && *r.value == t;
  }
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) + " identical (corpus, evidence, 100 random)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"default distribution gives Absurd", default_semantics},
      {"context tri-valuation", tri_valuation},
      {"influence-count invariance", count_invariance},
      {"local finality", local_finality},
      {"mutation suite", mutation_suite},
      {"association and existence", association_existence},
      {"recursive chain", recursion_chain},
      {"prune invariance", prune_invariance},
      {"logic equivalences", logic_equivalences},
      {"parser round trip", round_trip},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << (i + 1 < 10 ? " " : "") << i + 1 << "  " << criteria[i].first
              << ": " << o.detail << std::endl;
  }
  return failed ? 1 : 0;
}
