#include "mebn/local_distribution.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "mebn/error.hpp"

namespace mebn {

namespace {

constexpr double kMassTolerance = 1e-9;

using CountFn = std::function<std::int64_t(const Pattern&)>;

bool compare(std::int64_t lhs, CmpOp op, std::int64_t rhs) {
  switch (op) {
    case CmpOp::Eq: return lhs == rhs;
    case CmpOp::Ne: return lhs != rhs;
    case CmpOp::Lt: return lhs < rhs;
    case CmpOp::Le: return lhs <= rhs;
    case CmpOp::Gt: return lhs > rhs;
    case CmpOp::Ge: return lhs >= rhs;
  }
  return false;
}

bool eval_guard(const Guard& g, const CountFn& count) {
  switch (g.kind) {
    case Guard::Kind::Compare: return compare(count(g.pattern), g.op, g.threshold);
    case Guard::Kind::And: return eval_guard(g.children[0], count) && eval_guard(g.children[1], count);
    case Guard::Kind::Or: return eval_guard(g.children[0], count) || eval_guard(g.children[1], count);
    case Guard::Kind::Not: return !eval_guard(g.children[0], count);
  }
  return false;
}

double eval_term(const ProbTerm& t, const CountFn& count) {
  switch (t.kind) {
    case ProbTerm::Kind::Constant: return t.constant;
    case ProbTerm::Kind::Saturated: {
      auto sat = std::min(count(t.pattern), t.bound);
      return std::min(t.cap, t.base + t.slope * static_cast<double>(sat));
    }
    case ProbTerm::Kind::Remainder: return 0.0;
  }
  return 0.0;
}

const Distribution& select(const LocalExpression& expr, const CountFn& count) {
  for (const auto& c : expr.clauses)
    if (eval_guard(c.guard, count)) return c.distribution;
  return expr.otherwise;
}

/// Raw (un-normalized) masses per state; throws on mass violations.
std::vector<double> masses(const Distribution& d, const StateSpace& states, const CountFn& count) {
  std::vector<double> p(states.size(), 0.0);
  if (d.uniform) {
    const auto n = states.declared().size();
    for (std::size_t i = 0; i < n; ++i) p[i] = 1.0 / static_cast<double>(n);
    return p;
  }
  std::optional<std::size_t> remainder;
  double total = 0.0;
  for (const auto& [state, term] : d.entries) {
    auto idx = states.index_of(state);
    if (!idx) throw Error(ErrorCode::InvalidValue, "state '" + state + "' is not in the resident's state space");
    if (term.kind == ProbTerm::Kind::Remainder) {
      remainder = *idx;
      continue;
    }
    double v = eval_term(term, count);
    if (v < -kMassTolerance) throw Error(ErrorCode::MassError, "negative probability for state '" + state + "'");
    v = std::max(v, 0.0);
    p[*idx] += v;
    total += v;
  }
  if (remainder) {
    double rest = 1.0 - total;
    if (rest < -kMassTolerance)
      throw Error(ErrorCode::NegativeResidual, "remainder state receives negative mass " + std::to_string(rest));
    p[*remainder] += std::max(rest, 0.0);
  } else if (std::abs(total - 1.0) > kMassTolerance) {
    throw Error(ErrorCode::MassError, "distribution sums to " + std::to_string(total));
  }
  return p;
}

bool pattern_subsumes(const Pattern& narrow, const Pattern& wide) {
  // every constraint of `wide` appears in `narrow`, so count(narrow) <= count(wide)
  return std::all_of(wide.constraints.begin(), wide.constraints.end(), [&](const Constraint& c) {
    return std::find(narrow.constraints.begin(), narrow.constraints.end(), c) != narrow.constraints.end();
  });
}

void guard_patterns(const Guard& g, std::vector<Pattern>& out) {
  if (g.kind == Guard::Kind::Compare) {
    if (std::find(out.begin(), out.end(), g.pattern) == out.end()) out.push_back(g.pattern);
    return;
  }
  for (const auto& c : g.children) guard_patterns(c, out);
}

void distribution_patterns(const Distribution& d, std::vector<Pattern>& out) {
  for (const auto& [_, t] : d.entries)
    if (t.kind == ProbTerm::Kind::Saturated && std::find(out.begin(), out.end(), t.pattern) == out.end())
      out.push_back(t.pattern);
}

std::int64_t pattern_bound(const LocalExpression& expr, const Pattern& p) {
  std::int64_t b = 1;
  std::function<void(const Guard&)> walk = [&](const Guard& g) {
    if (g.kind == Guard::Kind::Compare) {
      if (g.pattern == p) b = std::max(b, g.threshold + 1);
      return;
    }
    for (const auto& c : g.children) walk(c);
  };
  auto dist = [&](const Distribution& d) {
    for (const auto& [_, t] : d.entries)
      if (t.kind == ProbTerm::Kind::Saturated && t.pattern == p) b = std::max(b, t.bound);
  };
  for (const auto& c : expr.clauses) {
    walk(c.guard);
    dist(c.distribution);
  }
  dist(expr.otherwise);
  return b;
}

}  // namespace

std::string_view to_string(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
  }
  return "?";
}

Guard Guard::compare(Pattern p, CmpOp op, std::int64_t k) {
  Guard g;
  g.kind = Kind::Compare;
  g.pattern = std::move(p);
  g.op = op;
  g.threshold = k;
  return g;
}

Guard Guard::conj(Guard a, Guard b) {
  Guard g;
  g.kind = Kind::And;
  g.children = {std::move(a), std::move(b)};
  return g;
}

Guard Guard::disj(Guard a, Guard b) {
  Guard g;
  g.kind = Kind::Or;
  g.children = {std::move(a), std::move(b)};
  return g;
}

Guard Guard::negate(Guard a) {
  Guard g;
  g.kind = Kind::Not;
  g.children = {std::move(a)};
  return g;
}

ProbTerm ProbTerm::constant_of(double p) {
  ProbTerm t;
  t.kind = Kind::Constant;
  t.constant = p;
  return t;
}

ProbTerm ProbTerm::remainder() {
  ProbTerm t;
  t.kind = Kind::Remainder;
  return t;
}

ProbTerm ProbTerm::saturated(double cap, double base, double slope, Pattern p, std::int64_t bound) {
  ProbTerm t;
  t.kind = Kind::Saturated;
  t.cap = cap;
  t.base = base;
  t.slope = slope;
  t.pattern = std::move(p);
  t.bound = bound;
  return t;
}

// ---------------------------------------------------------------------------
// influence counts

void InfluenceCounts::add(std::vector<std::string> configuration, std::int64_t n) {
  tallies_[std::move(configuration)] += n;
}

std::int64_t InfluenceCounts::count(const Pattern& p) const {
  std::vector<std::pair<std::size_t, const std::string*>> fixed;
  for (const auto& c : p.constraints) {
    auto it = std::find(parents_.begin(), parents_.end(), c.parent);
    if (it == parents_.end()) return 0;
    fixed.emplace_back(static_cast<std::size_t>(it - parents_.begin()), &c.value);
  }
  std::int64_t n = 0;
  for (const auto& [config, tally] : tallies_) {
    bool ok = std::all_of(fixed.begin(), fixed.end(), [&](const auto& f) { return config[f.first] == *f.second; });
    if (ok) n += tally;
  }
  return n;
}

std::int64_t InfluenceCounts::total() const {
  std::int64_t n = 0;
  for (const auto& [_, tally] : tallies_) n += tally;
  return n;
}

bool InfluenceCounts::any_value(std::string_view value) const {
  for (const auto& [config, _] : tallies_)
    if (std::find(config.begin(), config.end(), value) != config.end()) return true;
  return false;
}

InfluenceCounts compute_influence_counts(std::span<const BindingWorld> bindings, const PartialWorldState& world,
                                         std::vector<std::string> parent_names) {
  InfluenceCounts counts(std::move(parent_names));
  auto lookup = [&](const std::string& key) -> const std::string& {
    auto it = world.find(key);
    if (it == world.end()) throw Error(ErrorCode::IncompleteWorld, "partial world does not assign " + key);
    return it->second;
  };
  for (const auto& b : bindings) {
    bool satisfied = true;
    for (const auto& c : b.contexts) {
      ContextValue v = c.fixed;
      if (c.uncertain()) {
        const auto& value = lookup(c.selector);
        if (value == kAbsurd) v = ContextValue::Absurd;
        else v = (value == c.candidate) != c.negated ? ContextValue::True : ContextValue::False;
      }
      if (v != ContextValue::True) {
        satisfied = false;
        break;
      }
    }
    if (!satisfied) continue;
    std::vector<std::string> config;
    config.reserve(b.parents.size());
    for (const auto& p : b.parents) config.push_back(lookup(p));
    counts.add(std::move(config));
  }
  return counts;
}

// ---------------------------------------------------------------------------
// evaluation

double ProbabilityVector::at(std::string_view state) const {
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i] == state) return probs[i];
  return 0.0;
}

ProbabilityVector eval_local_distribution(const LocalExpression& expr, const InfluenceCounts& counts,
                                          const StateSpace& states) {
  CountFn count = [&](const Pattern& p) { return counts.count(p); };
  auto p = masses(select(expr, count), states, count);
  double sum = 0.0;
  for (double v : p) sum += v;
  if (std::abs(sum - 1.0) > 1e-12)
    for (double& v : p) v /= sum;
  return {states.all(), std::move(p)};
}

ProbabilityVector default_distribution(const LocalExpression& expr, const StateSpace& states) {
  return eval_local_distribution(expr, InfluenceCounts{}, states);
}

std::int64_t saturation_bound(const LocalExpression& expr) {
  std::int64_t b = 0;
  for (const auto& p : patterns_of(expr)) b = std::max(b, pattern_bound(expr, p));
  return b;
}

bool mentions_absurd(const LocalExpression& expr) {
  for (const auto& p : patterns_of(expr))
    for (const auto& c : p.constraints)
      if (c.value == kAbsurd) return true;
  return false;
}

std::vector<Pattern> patterns_of(const LocalExpression& expr) {
  std::vector<Pattern> out;
  for (const auto& c : expr.clauses) {
    guard_patterns(c.guard, out);
    distribution_patterns(c.distribution, out);
  }
  distribution_patterns(expr.otherwise, out);
  return out;
}

// ---------------------------------------------------------------------------
// static checking

std::string_view to_string(LdlDiagnostic::Kind k) {
  switch (k) {
    case LdlDiagnostic::Kind::UnknownState: return "UnknownState";
    case LdlDiagnostic::Kind::UnknownParent: return "UnknownParent";
    case LdlDiagnostic::Kind::DuplicateState: return "DuplicateState";
    case LdlDiagnostic::Kind::MultipleRemainder: return "MultipleRemainder";
    case LdlDiagnostic::Kind::MassError: return "MassError";
    case LdlDiagnostic::Kind::NegativeResidual: return "NegativeResidual";
    case LdlDiagnostic::Kind::BadTerm: return "BadTerm";
    case LdlDiagnostic::Kind::LatticeTooLarge: return "LatticeTooLarge";
  }
  return "?";
}

std::vector<LdlDiagnostic> check_ldl_wellformed(const LocalExpression& expr, const StateSpace& states,
                                                std::span<const std::string> parents,
                                                std::span<const StateSpace> parent_states) {
  using K = LdlDiagnostic::Kind;
  std::vector<LdlDiagnostic> out;
  const auto patterns = patterns_of(expr);

  for (const auto& p : patterns) {
    for (const auto& c : p.constraints) {
      auto it = std::find(parents.begin(), parents.end(), c.parent);
      if (it == parents.end()) {
        out.push_back({K::UnknownParent, "pattern references '" + c.parent + "', which is not a parent"});
        continue;
      }
      auto idx = static_cast<std::size_t>(it - parents.begin());
      if (idx < parent_states.size() && !parent_states[idx].contains(c.value))
        out.push_back({K::UnknownState, "'" + c.value + "' is not a state of parent " + c.parent});
    }
  }

  std::vector<const Distribution*> dists;
  for (const auto& c : expr.clauses) dists.push_back(&c.distribution);
  dists.push_back(&expr.otherwise);
  bool shape_ok = true;
  for (const auto* d : dists) {
    std::set<std::string> seen;
    int remainders = 0;
    for (const auto& [state, t] : d->entries) {
      if (!states.contains(state)) {
        out.push_back({K::UnknownState, "'" + state + "' is not a state of the resident"});
        shape_ok = false;
      }
      if (!seen.insert(state).second) out.push_back({K::DuplicateState, "state '" + state + "' listed twice"});
      if (t.kind == ProbTerm::Kind::Remainder) ++remainders;
      if (t.kind == ProbTerm::Kind::Saturated && (t.bound < 0 || t.cap < 0.0 || t.cap > 1.0)) {
        out.push_back({K::BadTerm, "saturated term for '" + state + "' needs bound >= 0 and cap in [0,1]"});
        shape_ok = false;
      }
      if (t.kind == ProbTerm::Kind::Constant && (t.constant < 0.0 || t.constant > 1.0)) {
        out.push_back({K::BadTerm, "constant for '" + state + "' lies outside [0,1]"});
        shape_ok = false;
      }
    }
    if (remainders > 1) {
      out.push_back({K::MultipleRemainder, "at most one state may carry '*'"});
      shape_ok = false;
    }
  }
  if (!shape_ok) return out;

  // Enumerate count vectors up to each pattern's bound; beyond it every guard
  // and term is constant. Narrower patterns never out-count wider ones.
  std::vector<std::int64_t> bounds;
  double lattice = 1.0;
  for (const auto& p : patterns) {
    bounds.push_back(pattern_bound(expr, p));
    lattice *= static_cast<double>(bounds.back() + 1);
  }
  if (lattice > 1e6) {
    out.push_back({K::LatticeTooLarge, "count lattice has more than 1e6 points"});
    return out;
  }
  std::vector<std::int64_t> vec(patterns.size(), 0);
  std::set<const Distribution*> reported;
  CountFn count = [&](const Pattern& p) {
    auto it = std::find(patterns.begin(), patterns.end(), p);
    return it == patterns.end() ? std::int64_t{0} : vec[static_cast<std::size_t>(it - patterns.begin())];
  };
  while (true) {
    bool feasible = true;
    for (std::size_t i = 0; i < patterns.size() && feasible; ++i)
      for (std::size_t j = 0; j < patterns.size() && feasible; ++j)
        if (i != j && pattern_subsumes(patterns[i], patterns[j]) && vec[i] > vec[j]) feasible = false;
    if (feasible) {
      const Distribution& d = select(expr, count);
      if (!reported.count(&d)) {
        try {
          masses(d, states, count);
        } catch (const Error& e) {
          out.push_back({e.code() == ErrorCode::NegativeResidual ? K::NegativeResidual : K::MassError, e.what()});
          reported.insert(&d);
        }
      }
    }
    std::size_t i = 0;
    for (; i < vec.size(); ++i) {
      if (vec[i] < bounds[i]) {
        ++vec[i];
        break;
      }
      vec[i] = 0;
    }
    if (i == vec.size()) break;
  }
  return out;
}

}  // namespace mebn
