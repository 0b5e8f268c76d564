#pragma once

// Situation-specific network construction: backward chaining from targets
// and finding subjects through home MFrags, context resolution, CPT
// compilation from influence counts, and pruning.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mebn/core_model.hpp"
#include "mebn/validation.hpp"

namespace mebn {

struct GroundingLimits {
  std::size_t max_depth = 64;
  std::size_t max_nodes = 20000;
  double max_parent_product = 1e6;
};

/// Findings and candidate lists of a scenario, keyed by instance key.
struct FindingIndex {
  std::map<std::string, std::string, std::less<>> findings;
  std::map<std::string, std::vector<std::string>, std::less<>> candidates;

  /// Throws InvalidValue on two findings with different values for one instance.
  static FindingIndex from(const Evidence& evidence);
  const std::string* finding(std::string_view key) const;
  const std::vector<std::string>* candidates_of(std::string_view key) const;
};

struct ContextResolution {
  enum class Kind { Resolved, UncertainReference };
  Kind kind = Kind::Resolved;
  ContextValue value = ContextValue::True;
  // UncertainReference: the context holds iff `selector` takes `compared`
  // (or any other value, when negated).
  RVInstance selector;
  std::vector<std::string> candidates;
  std::string compared;
  bool negated = false;

  ContextCheck check() const;
};

/// Resolve one ground context formula. Builtins (Isa, identifier equality,
/// Prev) evaluate directly, finding-fixed atoms read the finding, and
/// `F(args) = c` with F unobserved becomes an uncertain reference.
/// Throws UnresolvableContext otherwise.
ContextResolution resolve_context(const Formula& ctx, const MTheory& theory, const EntityRegistry& registry,
                                  const FindingIndex& facts);

struct GroundNode {
  std::string key;
  StateSpace states;
  std::vector<std::size_t> parents;  // indices into SSBN::nodes
  /// Row-major: one row per joint parent state (last parent varies fastest),
  /// `states.size()` entries per row.
  std::vector<double> cpt;
  std::string provenance;

  std::size_t row_count() const { return cpt.size() / states.size(); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(cpt).subspan(r * states.size(), states.size());
  }
};

struct SSBN {
  std::vector<GroundNode> nodes;  // topological, ties by key
  std::vector<std::string> targets;
  std::map<std::string, std::string, std::less<>> evidence;  // key -> observed state
  GroundingLimits limits;

  std::optional<std::size_t> index_of(std::string_view key) const;
  std::vector<std::vector<std::size_t>> children() const;
  std::size_t arc_count() const;
};

/// CPT of a resident instance. `bindings` are the context-satisfying
/// bindings (selector checks unresolved), `parent_names` the template names
/// matched by patterns, `node_parents` the node's parent keys. Rows where an
/// active binding has an Absurd parent give Absurd unless the expression
/// mentions Absurd; rows with no active binding use the default distribution.
std::vector<double> compile_cpt(const LocalExpression& expr, const StateSpace& states,
                                std::span<const BindingWorld> bindings,
                                const std::vector<std::string>& parent_names,
                                const std::vector<std::string>& node_parents,
                                const std::vector<StateSpace>& parent_states,
                                double max_parent_product = GroundingLimits{}.max_parent_product);

/// Targets are formulas: a plain RV instance, or any closed formula, which is
/// compiled into logical nodes. The SSBN target keys follow `targets` order.
SSBN build_ssbn(const ValidatedMTheory& theory, const Evidence& evidence, const std::vector<Formula>& targets,
                const GroundingLimits& limits = {});

/// Canonical node key of a formula or term (`F(!A,!B)` for instances).
std::string node_key(const Formula& f);
std::string node_key(const Term& t);

/// Remove barren nodes and nodes d-separated from the targets given the
/// evidence. Observed nodes whose distribution is not needed keep only their
/// observed value.
SSBN prune_ssbn(const SSBN& ssbn);

/// Non-target, non-evidence nodes without children.
std::vector<std::string> barren_nodes(const SSBN& ssbn);

std::string export_dot(const SSBN& ssbn);
std::string ssbn_to_json(const SSBN& ssbn);

}  // namespace mebn
