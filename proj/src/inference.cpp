#include "mebn/inference.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <set>

#include "mebn/error.hpp"

namespace mebn {

namespace {

/// Allowed state indices per node: everything, or the observed state.
std::vector<std::vector<std::size_t>> domains(const SSBN& s) {
  std::vector<std::vector<std::size_t>> dom(s.nodes.size());
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    const auto& n = s.nodes[i];
    auto ev = s.evidence.find(n.key);
    if (ev != s.evidence.end()) {
      auto idx = n.states.index_of(ev->second);
      if (!idx) throw Error(ErrorCode::InvalidValue, "observed value " + ev->second + " is not a state of " + n.key);
      dom[i] = {*idx};
    } else {
      for (std::size_t k = 0; k < n.states.size(); ++k) dom[i].push_back(k);
    }
  }
  return dom;
}

std::size_t row_index(const GroundNode& n, const SSBN& s, const std::vector<std::size_t>& assignment) {
  std::size_t r = 0;
  for (auto p : n.parents) r = r * s.nodes[p].states.size() + assignment[p];
  return r;
}

/// Table over `vars` (ascending node index), indexed by positions in each
/// variable's domain, last variable fastest.
struct Factor {
  std::vector<std::size_t> vars;
  std::vector<std::size_t> card;
  std::vector<double> values;
};

Factor cpt_factor(const SSBN& s, std::size_t i, const std::vector<std::vector<std::size_t>>& dom) {
  const auto& n = s.nodes[i];
  std::vector<std::size_t> scope = n.parents;
  scope.push_back(i);
  std::vector<std::size_t> order(scope.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scope[a] < scope[b]; });
  Factor f;
  for (auto k : order) {
    f.vars.push_back(scope[k]);
    f.card.push_back(dom[scope[k]].size());
  }
  std::size_t total = 1;
  for (auto c : f.card) total *= c;
  f.values.assign(total, 0.0);
  std::vector<std::size_t> pos(f.vars.size(), 0);
  std::vector<std::size_t> assignment(s.nodes.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    for (std::size_t k = f.vars.size(); k-- > 0;) {
      pos[k] = rem % f.card[k];
      rem /= f.card[k];
      assignment[f.vars[k]] = dom[f.vars[k]][pos[k]];
    }
    f.values[flat] = n.row(row_index(n, s, assignment))[assignment[i]];
  }
  return f;
}

Factor multiply(const Factor& a, const Factor& b) {
  Factor f;
  std::set_union(a.vars.begin(), a.vars.end(), b.vars.begin(), b.vars.end(), std::back_inserter(f.vars));
  std::map<std::size_t, std::size_t> card;
  for (std::size_t k = 0; k < a.vars.size(); ++k) card[a.vars[k]] = a.card[k];
  for (std::size_t k = 0; k < b.vars.size(); ++k) card[b.vars[k]] = b.card[k];
  for (auto v : f.vars) f.card.push_back(card[v]);
  std::size_t total = 1;
  for (auto c : f.card) total *= c;
  f.values.resize(total);
  // strides of a and b in terms of f's variables
  auto strides = [&](const Factor& g) {
    std::vector<std::size_t> st(f.vars.size(), 0);
    std::size_t s = 1;
    for (std::size_t k = g.vars.size(); k-- > 0;) {
      auto pos = std::lower_bound(f.vars.begin(), f.vars.end(), g.vars[k]) - f.vars.begin();
      st[static_cast<std::size_t>(pos)] = s;
      s *= g.card[k];
    }
    return st;
  };
  auto sa = strides(a), sb = strides(b);
  std::vector<std::size_t> idx(f.vars.size(), 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    f.values[flat] = a.values[ia] * b.values[ib];
    for (std::size_t k = f.vars.size(); k-- > 0;) {
      if (++idx[k] < f.card[k]) {
        ia += sa[k];
        ib += sb[k];
        break;
      }
      ia -= sa[k] * (f.card[k] - 1);
      ib -= sb[k] * (f.card[k] - 1);
      idx[k] = 0;
    }
  }
  return f;
}

Factor sum_out(const Factor& a, std::size_t var) {
  auto it = std::find(a.vars.begin(), a.vars.end(), var);
  auto k = static_cast<std::size_t>(it - a.vars.begin());
  Factor f;
  f.vars = a.vars;
  f.card = a.card;
  f.vars.erase(f.vars.begin() + static_cast<std::ptrdiff_t>(k));
  f.card.erase(f.card.begin() + static_cast<std::ptrdiff_t>(k));
  std::size_t inner = 1;
  for (std::size_t j = k + 1; j < a.vars.size(); ++j) inner *= a.card[j];
  std::size_t outer = a.values.size() / (inner * a.card[k]);
  f.values.assign(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t c = 0; c < a.card[k]; ++c)
      for (std::size_t i = 0; i < inner; ++i) f.values[o * inner + i] += a.values[(o * a.card[k] + c) * inner + i];
  return f;
}

std::size_t pick_min_degree(const std::vector<Factor>& factors, const std::set<std::size_t>& remaining,
                            const SSBN& s) {
  std::size_t best = *remaining.begin();
  std::size_t best_deg = SIZE_MAX;
  for (auto v : remaining) {
    std::set<std::size_t> nb;
    for (const auto& f : factors)
      if (std::binary_search(f.vars.begin(), f.vars.end(), v)) nb.insert(f.vars.begin(), f.vars.end());
    nb.erase(v);
    std::size_t deg = nb.size();
    if (deg < best_deg || (deg == best_deg && s.nodes[v].key < s.nodes[best].key)) {
      best = v;
      best_deg = deg;
    }
  }
  return best;
}

void eliminate_var(std::vector<Factor>& factors, std::size_t v) {
  std::vector<Factor> keep;
  std::optional<Factor> prod;
  for (auto& f : factors) {
    if (std::binary_search(f.vars.begin(), f.vars.end(), v)) prod = prod ? multiply(*prod, f) : f;
    else keep.push_back(std::move(f));
  }
  if (prod) keep.push_back(sum_out(*prod, v));
  factors = std::move(keep);
}

std::vector<std::size_t> target_indices(const SSBN& s) {
  std::vector<std::size_t> out;
  for (const auto& t : s.targets) {
    auto i = s.index_of(t);
    if (!i) throw Error(ErrorCode::UnknownTarget, "target " + t + " is not in the network");
    out.push_back(*i);
  }
  return out;
}

std::string evidence_text(const SSBN& s) {
  std::string text;
  for (const auto& [k, v] : s.evidence) text += (text.empty() ? "" : ", ") + k + "=" + v;
  return text;
}

[[noreturn]] void inconsistent(const SSBN& s) {
  throw Error(ErrorCode::InconsistentEvidence, "evidence has probability zero: {" + evidence_text(s) + "}");
}

}  // namespace

std::vector<std::string> min_degree_order(const SSBN& ssbn, const std::string& target) {
  auto dom = domains(ssbn);
  std::vector<Factor> factors;
  for (std::size_t i = 0; i < ssbn.nodes.size(); ++i) factors.push_back(cpt_factor(ssbn, i, dom));
  std::set<std::size_t> remaining;
  for (std::size_t i = 0; i < ssbn.nodes.size(); ++i)
    if (ssbn.nodes[i].key != target) remaining.insert(i);
  std::vector<std::string> order;
  while (!remaining.empty()) {
    auto v = pick_min_degree(factors, remaining, ssbn);
    order.push_back(ssbn.nodes[v].key);
    eliminate_var(factors, v);
    remaining.erase(v);
  }
  return order;
}

Posterior eliminate(const SSBN& ssbn, const std::vector<std::string>* order) {
  auto dom = domains(ssbn);
  std::vector<Factor> base;
  for (std::size_t i = 0; i < ssbn.nodes.size(); ++i) base.push_back(cpt_factor(ssbn, i, dom));
  Posterior post;
  bool first = true;
  for (auto t : target_indices(ssbn)) {
    auto factors = base;
    std::set<std::size_t> remaining;
    for (std::size_t i = 0; i < ssbn.nodes.size(); ++i)
      if (i != t) remaining.insert(i);
    if (order) {
      for (const auto& key : *order) {
        auto v = ssbn.index_of(key);
        if (!v) throw Error(ErrorCode::UnknownTarget, "elimination order names unknown node " + key);
        if (*v == t || !remaining.count(*v)) continue;
        eliminate_var(factors, *v);
        remaining.erase(*v);
      }
    }
    while (!remaining.empty()) {
      auto v = pick_min_degree(factors, remaining, ssbn);
      eliminate_var(factors, v);
      remaining.erase(v);
    }
    Factor result{{t}, {dom[t].size()}, std::vector<double>(dom[t].size(), 1.0)};
    for (const auto& f : factors) result = multiply(result, f);
    double z = 0.0;
    for (double v : result.values) z += v;
    if (!(z > 0.0)) inconsistent(ssbn);
    const auto& node = ssbn.nodes[t];
    ProbabilityVector pv{node.states.all(), std::vector<double>(node.states.size(), 0.0)};
    for (std::size_t k = 0; k < dom[t].size(); ++k) pv.probs[dom[t][k]] = result.values[k] / z;
    post.targets.push_back({node.key, std::move(pv)});
    if (first) post.evidence_probability = z;
    first = false;
  }
  return post;
}

Posterior brute_force_posterior(const SSBN& ssbn) {
  auto dom = domains(ssbn);
  const std::size_t n = ssbn.nodes.size();
  // Forward support: states reachable with positive probability.
  std::vector<std::vector<std::size_t>> support(n);
  double product = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = ssbn.nodes[i];
    std::vector<bool> possible(node.states.size(), false);
    std::vector<std::size_t> assignment(n, 0);
    std::function<void(std::size_t)> rows = [&](std::size_t k) {
      if (k == node.parents.size()) {
        auto row = node.row(row_index(node, ssbn, assignment));
        for (std::size_t s = 0; s < row.size(); ++s)
          if (row[s] > 0.0) possible[s] = true;
        return;
      }
      for (auto v : support[node.parents[k]]) {
        assignment[node.parents[k]] = v;
        rows(k + 1);
      }
    };
    rows(0);
    for (auto s : dom[i])
      if (possible[s]) support[i].push_back(s);
    if (support[i].empty()) inconsistent(ssbn);
    product *= static_cast<double>(support[i].size());
    if (product > kOracleLimit)
      throw Error(ErrorCode::StateSpaceTooLarge,
                  "enumeration would visit more than 2^24 joint states (at " + node.key + ")");
  }

  auto targets = target_indices(ssbn);
  std::vector<std::vector<double>> acc;
  for (auto t : targets) acc.emplace_back(ssbn.nodes[t].states.size(), 0.0);
  double z = 0.0;
  std::vector<std::size_t> assignment(n, 0);
  std::function<void(std::size_t, double)> walk = [&](std::size_t i, double w) {
    if (i == n) {
      z += w;
      for (std::size_t k = 0; k < targets.size(); ++k) acc[k][assignment[targets[k]]] += w;
      return;
    }
    const auto& node = ssbn.nodes[i];
    auto row = node.row(row_index(node, ssbn, assignment));
    for (auto s : support[i]) {
      if (row[s] == 0.0) continue;
      assignment[i] = s;
      walk(i + 1, w * row[s]);
    }
  };
  walk(0, 1.0);
  if (!(z > 0.0)) inconsistent(ssbn);
  Posterior post;
  post.evidence_probability = z;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const auto& node = ssbn.nodes[targets[k]];
    ProbabilityVector pv{node.states.all(), acc[k]};
    for (auto& p : pv.probs) p /= z;
    post.targets.push_back({node.key, std::move(pv)});
  }
  return post;
}

QueryResult answer_query(const ValidatedMTheory& theory, const Evidence& evidence, const std::vector<Formula>& targets,
                         const GroundingLimits& limits, Engine engine, bool prune) {
  auto start = std::chrono::steady_clock::now();
  QueryResult r;
  for (const auto& t : targets) r.requested.push_back(t.str());
  try {
    r.ssbn = build_ssbn(theory, evidence, targets, limits);
    r.grounded_nodes = r.ssbn.nodes.size();
    if (prune) r.ssbn = prune_ssbn(r.ssbn);
  } catch (const Error& e) {
    throw Error(e.code(), "ground", e.what());
  }
  try {
    r.posterior = engine == Engine::Oracle ? brute_force_posterior(r.ssbn) : eliminate(r.ssbn);
  } catch (const Error& e) {
    throw Error(e.code(), "infer", e.what());
  }
  r.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace mebn
