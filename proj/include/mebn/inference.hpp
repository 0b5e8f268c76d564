#pragma once

#include <string>
#include <vector>

#include "mebn/grounding.hpp"

namespace mebn {

struct TargetPosterior {
  std::string target;  // node key
  ProbabilityVector distribution;
};

/// Marginals of each target given the SSBN's evidence.
struct Posterior {
  std::vector<TargetPosterior> targets;
  double evidence_probability = 1.0;
};

/// Variable elimination. Without `order`, variables are eliminated by
/// minimum degree, ties broken by key. Throws InconsistentEvidence.
Posterior eliminate(const SSBN& ssbn, const std::vector<std::string>* order = nullptr);

/// The elimination order eliminate() would use for `target`.
std::vector<std::string> min_degree_order(const SSBN& ssbn, const std::string& target);

inline constexpr double kOracleLimit = 16777216.0;  // 2^24 joint states

/// Enumeration of every joint state with positive probability. Throws
/// StateSpaceTooLarge when the product of the supports exceeds 2^24.
Posterior brute_force_posterior(const SSBN& ssbn);

enum class Engine { Elimination, Oracle };

struct QueryResult {
  std::vector<std::string> requested;  // target text as given
  Posterior posterior;
  SSBN ssbn;                           // after pruning
  std::size_t grounded_nodes = 0;      // before pruning
  double elapsed_ms = 0.0;
};

/// build_ssbn, prune_ssbn, then inference. Errors carry the stage tag
/// "ground" or "infer".
QueryResult answer_query(const ValidatedMTheory& theory, const Evidence& evidence,
                         const std::vector<Formula>& targets, const GroundingLimits& limits = {},
                         Engine engine = Engine::Elimination, bool prune = true);

}  // namespace mebn
