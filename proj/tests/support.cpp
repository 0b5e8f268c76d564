#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "mebn/error.hpp"

#ifndef MEBN_CORPUS_DIR
#define MEBN_CORPUS_DIR "corpus"
#endif

namespace mebn::testing {

std::string corpus_file(const std::string& relative) { return std::string(MEBN_CORPUS_DIR) + "/" + relative; }

namespace {

template <class T>
T unwrap(ParseResult<T> r, const std::string& origin) {
  if (!r.ok()) throw std::runtime_error(r.render(origin));
  return std::move(*r.value);
}

}  // namespace

MTheory load_theory(const std::string& path) { return unwrap(parse_mtheory(SourceText::from_file(path)), path); }

MTheory parse_theory_text(const std::string& text) { return unwrap(parse_mtheory({text, "<text>"}), "<text>"); }

Evidence load_evidence(const MTheory& theory, const std::string& path) {
  return unwrap(parse_evidence(SourceText::from_file(path), theory), path);
}

Evidence parse_evidence_text(const MTheory& theory, const std::string& text) {
  return unwrap(parse_evidence({text, "<evidence>"}, theory), "<evidence>");
}

const MTheory& star_trek() {
  static const MTheory t = load_theory(corpus_file("star_trek.mtheory"));
  return t;
}

ValidatedMTheory validated(const MTheory& theory, const Evidence& evidence) {
  auto registry = registry_from(theory, evidence.entities.empty() ? theory.entities : evidence.entities);
  auto outcome = validate(theory, registry);
  if (!outcome.theory) throw std::runtime_error(outcome.report.to_text());
  return std::move(*outcome.theory);
}

std::vector<Formula> targets(const std::vector<std::string>& texts) {
  std::vector<Formula> out;
  for (const auto& t : texts) out.push_back(unwrap(parse_formula({t, "target"}), t));
  return out;
}

QueryResult query(const MTheory& theory, const Evidence& evidence, const std::vector<std::string>& texts,
                  Engine engine, bool prune) {
  auto v = validated(theory, evidence);
  return answer_query(v, evidence, targets(texts), {}, engine, prune);
}

double max_abs_diff(const Posterior& a, const Posterior& b) {
  if (a.targets.size() != b.targets.size()) return INFINITY;
  double worst = 0;
  for (std::size_t i = 0; i < a.targets.size(); ++i) {
    const auto& x = a.targets[i].distribution;
    const auto& y = b.targets[i].distribution;
    if (x.states != y.states) return INFINITY;
    for (std::size_t k = 0; k < x.probs.size(); ++k) worst = std::max(worst, std::abs(x.probs[k] - y.probs[k]));
  }
  return worst;
}

std::vector<Scenario> corpus_scenarios() {
  std::ifstream in(corpus_file("scenarios.json"));
  if (!in) throw std::runtime_error("cannot read scenarios.json");
  auto j = nlohmann::json::parse(in);
  std::vector<Scenario> out;
  for (const auto& s : j.at("scenarios")) {
    Scenario sc;
    sc.name = s.at("name").get<std::string>();
    if (s.contains("evidence")) sc.evidence = corpus_file(s.at("evidence").get<std::string>());
    sc.targets = s.at("targets").get<std::vector<std::string>>();
    out.push_back(std::move(sc));
  }
  return out;
}

}  // namespace mebn::testing
