#pragma once

// Local distribution language: threshold guards over influence counts and
// saturated-linear probability terms. Every expression is eventually constant
// in each count, so the distribution stops changing once all counts pass the
// largest bound in the expression.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mebn/values.hpp"

namespace mebn {

/// `Parent = Value`
struct Constraint {
  std::string parent;
  std::string value;
  bool operator==(const Constraint&) const = default;
};

/// Conjunction of constraints; empty matches every configuration.
struct Pattern {
  std::vector<Constraint> constraints;
  bool operator==(const Pattern&) const = default;
};

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

std::string_view to_string(CmpOp op);

struct Guard {
  enum class Kind { Compare, And, Or, Not };
  Kind kind = Kind::Compare;
  Pattern pattern;
  CmpOp op = CmpOp::Ge;
  std::int64_t threshold = 0;
  std::vector<Guard> children;

  static Guard compare(Pattern p, CmpOp op, std::int64_t k);
  static Guard conj(Guard a, Guard b);
  static Guard disj(Guard a, Guard b);
  static Guard negate(Guard a);

  bool operator==(const Guard&) const = default;
};

/// A probability term is a constant, the remainder marker `*`, or
/// `min(cap, base + slope * sat(pattern, bound))`.
struct ProbTerm {
  enum class Kind { Constant, Saturated, Remainder };
  Kind kind = Kind::Constant;
  double constant = 0.0;
  double cap = 0.0;
  double base = 0.0;
  double slope = 0.0;
  Pattern pattern;
  std::int64_t bound = 0;

  static ProbTerm constant_of(double p);
  static ProbTerm remainder();
  static ProbTerm saturated(double cap, double base, double slope, Pattern p, std::int64_t bound);

  bool operator==(const ProbTerm&) const = default;
};

struct Distribution {
  bool uniform = false;
  std::vector<std::pair<std::string, ProbTerm>> entries;
  bool operator==(const Distribution&) const = default;
};

struct Clause {
  Guard guard;
  Distribution distribution;
  bool operator==(const Clause&) const = default;
};

/// Ordered `if/elif` clauses plus the mandatory `else` branch, which is the
/// default distribution.
struct LocalExpression {
  std::vector<Clause> clauses;
  Distribution otherwise;
  bool operator==(const LocalExpression&) const = default;
};

/// Tallies of parent-value configurations over context-satisfying bindings.
/// Configuration tuples follow `parents` order.
class InfluenceCounts {
 public:
  InfluenceCounts() = default;
  explicit InfluenceCounts(std::vector<std::string> parents) : parents_(std::move(parents)) {}

  void add(std::vector<std::string> configuration, std::int64_t n = 1);
  std::int64_t count(const Pattern& p) const;
  std::int64_t total() const;
  bool empty() const { return tallies_.empty(); }
  bool any_value(std::string_view value) const;

  const std::vector<std::string>& parents() const { return parents_; }
  const std::map<std::vector<std::string>, std::int64_t>& tallies() const { return tallies_; }

  bool operator==(const InfluenceCounts&) const = default;

 private:
  std::vector<std::string> parents_;
  std::map<std::vector<std::string>, std::int64_t> tallies_;
};

/// One context term of one binding: either already resolved, or an
/// equality `selector = candidate` whose truth depends on the selector's value.
struct ContextCheck {
  ContextValue fixed = ContextValue::True;
  std::string selector;  // empty when resolved
  std::string candidate;
  bool negated = false;

  bool uncertain() const { return !selector.empty(); }
};

/// A binding of an MFrag's free variables, after context resolution:
/// its context checks and the instance keys of the resident's parents in
/// declaration order.
struct BindingWorld {
  std::vector<ContextCheck> contexts;
  std::vector<std::string> parents;
};

/// Assignment of values to instance keys (parents and selectors).
using PartialWorldState = std::map<std::string, std::string, std::less<>>;

/// Tally each binding whose contexts all evaluate True under `world`.
/// Throws IncompleteWorld if a required instance is unassigned.
InfluenceCounts compute_influence_counts(std::span<const BindingWorld> bindings,
                                         const PartialWorldState& world,
                                         std::vector<std::string> parent_names);

struct ProbabilityVector {
  std::vector<std::string> states;  // declared states, Absurd last
  std::vector<double> probs;

  double at(std::string_view state) const;
  bool operator==(const ProbabilityVector&) const = default;
};

ProbabilityVector eval_local_distribution(const LocalExpression& expr,
                                          const InfluenceCounts& counts,
                                          const StateSpace& states);

ProbabilityVector default_distribution(const LocalExpression& expr, const StateSpace& states);

/// Largest count beyond which the expression is constant in every pattern.
std::int64_t saturation_bound(const LocalExpression& expr);

/// Whether any pattern matches the value Absurd explicitly.
bool mentions_absurd(const LocalExpression& expr);

/// Every distinct pattern in guards and probability terms, in first-use order.
std::vector<Pattern> patterns_of(const LocalExpression& expr);

struct LdlDiagnostic {
  enum class Kind { UnknownState, UnknownParent, DuplicateState, MultipleRemainder, MassError,
                    NegativeResidual, BadTerm, LatticeTooLarge };
  Kind kind;
  std::string message;
};

std::string_view to_string(LdlDiagnostic::Kind k);

/// Static check: state membership, parent references, term shape, and
/// mass over the finite lattice of count vectors up to each bound.
std::vector<LdlDiagnostic> check_ldl_wellformed(const LocalExpression& expr,
                                                const StateSpace& states,
                                                std::span<const std::string> parents,
                                                std::span<const StateSpace> parent_states = {});

}  // namespace mebn
