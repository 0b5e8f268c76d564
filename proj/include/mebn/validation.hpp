#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mebn/core_model.hpp"

namespace mebn {

enum class Condition { NoCycles, BoundedDepth, UniqueHome, TypeCheck };

std::string_view to_string(Condition c);

struct Violation {
  Condition condition;
  std::vector<std::string> witnesses;  // instances, templates or MFrags
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(Condition c) const;
  void merge(ValidationReport other);
  std::string to_text() const;
  std::string to_json() const;
};

inline constexpr std::size_t kDefaultDepthBound = 1000;

/// Longest ancestor chain (in instances) per RV template over the registry.
struct DepthCertificate {
  std::map<std::string, std::size_t> max_depth;
  std::size_t overall = 0;
  std::size_t instances = 0;
};

struct AcyclicityResult {
  ValidationReport report;
  DepthCertificate depth;
  std::vector<std::string> order;  // topological order of all instances when acyclic
};

struct ValidationOutcome;

/// A theory that passed every check over a given registry.
class ValidatedMTheory {
 public:
  const MTheory& theory() const { return theory_; }
  const EntityRegistry& registry() const { return registry_; }
  const DepthCertificate& depth() const { return depth_; }
  const std::vector<std::string>& instance_order() const { return order_; }

 private:
  ValidatedMTheory(MTheory t, EntityRegistry r, DepthCertificate d, std::vector<std::string> order)
      : theory_(std::move(t)), registry_(std::move(r)), depth_(std::move(d)), order_(std::move(order)) {}
  friend ValidationOutcome validate(const MTheory&, const EntityRegistry&, std::size_t);

  MTheory theory_;
  EntityRegistry registry_;
  DepthCertificate depth_;
  std::vector<std::string> order_;
};

struct ValidationOutcome {
  ValidationReport report;
  std::optional<ValidatedMTheory> theory;
};

ValidationOutcome validate(const MTheory& theory, const EntityRegistry& registry,
                           std::size_t depth_bound = kDefaultDepthBound);

/// Every RV template is resident in exactly one MFrag.
ValidationReport check_unique_home(const MTheory& theory);

/// Variable typing, term arity, recursion annotations and local-distribution
/// well-formedness.
ValidationReport check_types(const MTheory& theory, const EntityRegistry& registry);

/// Instance-level dependency graph over all instances formable from the
/// registry: cycles, undeclared self-recursion and the depth bound.
AcyclicityResult check_instance_acyclicity(const MTheory& theory, const EntityRegistry& registry,
                                           std::size_t depth_bound = kDefaultDepthBound);

}  // namespace mebn
