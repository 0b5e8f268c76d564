#pragma once

#include <string>
#include <vector>

#include "mebn/inference.hpp"
#include "mebn/theory_format.hpp"
#include "mebn/validation.hpp"

namespace mebn::testing {

std::string corpus_file(const std::string& relative);

MTheory load_theory(const std::string& path);
MTheory parse_theory_text(const std::string& text);
Evidence load_evidence(const MTheory& theory, const std::string& path);
Evidence parse_evidence_text(const MTheory& theory, const std::string& text);

/// The Star Trek corpus theory.
const MTheory& star_trek();

/// Validates over the evidence's registry (or the theory's); throws on a bad report.
ValidatedMTheory validated(const MTheory& theory, const Evidence& evidence);

std::vector<Formula> targets(const std::vector<std::string>& texts);

QueryResult query(const MTheory& theory, const Evidence& evidence, const std::vector<std::string>& targets,
                  Engine engine = Engine::Elimination, bool prune = true);

double max_abs_diff(const Posterior& a, const Posterior& b);

struct Scenario {
  std::string name;
  std::string evidence;  // absolute path
  std::vector<std::string> targets;
};

/// Scenarios listed in corpus/scenarios.json.
std::vector<Scenario> corpus_scenarios();

}  // namespace mebn::testing
