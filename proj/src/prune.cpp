#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mebn/grounding.hpp"

namespace mebn {

std::vector<std::string> barren_nodes(const SSBN& ssbn) {
  auto children = ssbn.children();
  std::set<std::string, std::less<>> targets(ssbn.targets.begin(), ssbn.targets.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ssbn.nodes.size(); ++i) {
    const auto& key = ssbn.nodes[i].key;
    if (children[i].empty() && !targets.count(key) && !ssbn.evidence.count(key)) out.push_back(key);
  }
  return out;
}

namespace {

/// Keep only `keep` (closed under parents for nodes in `full_cpt`); nodes in
/// keep but not in full_cpt must be evidence and become point masses.
SSBN restrict(const SSBN& s, const std::vector<bool>& keep, const std::vector<bool>& full_cpt) {
  SSBN out;
  out.limits = s.limits;
  out.targets = s.targets;
  std::vector<std::size_t> remap(s.nodes.size(), 0);
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    if (!keep[i]) continue;
    remap[i] = out.nodes.size();
    GroundNode n = s.nodes[i];
    if (full_cpt[i]) {
      for (auto& p : n.parents) p = remap[p];
    } else {
      const auto& value = s.evidence.find(n.key)->second;
      n.parents.clear();
      n.cpt.assign(n.states.size(), 0.0);
      n.cpt[*n.states.index_of(value)] = 1.0;
      n.provenance += " (observed)";
    }
    out.nodes.push_back(std::move(n));
  }
  for (const auto& [k, v] : s.evidence)
    if (auto i = s.index_of(k); i && keep[*i]) out.evidence[k] = v;
  return out;
}

}  // namespace

SSBN prune_ssbn(const SSBN& ssbn) {
  SSBN cur = ssbn;
  while (true) {
    const std::size_t n = cur.nodes.size();
    auto children = cur.children();
    std::vector<bool> observed(n, false), is_target(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      observed[i] = cur.evidence.count(cur.nodes[i].key) > 0;
      is_target[i] = std::find(cur.targets.begin(), cur.targets.end(), cur.nodes[i].key) != cur.targets.end();
    }

    // Bayes ball from the targets: `top` marks nodes whose distribution is
    // needed, `visited` observed nodes whose value is needed.
    std::vector<bool> top(n, false), bottom(n, false), visited(n, false);
    std::deque<std::pair<std::size_t, bool>> queue;  // (node, arrived from a child)
    for (std::size_t i = 0; i < n; ++i)
      if (is_target[i]) queue.emplace_back(i, true);
    while (!queue.empty()) {
      auto [j, from_child] = queue.front();
      queue.pop_front();
      visited[j] = true;
      if (from_child && !observed[j]) {
        if (!top[j]) {
          top[j] = true;
          for (auto p : cur.nodes[j].parents) queue.emplace_back(p, true);
        }
        if (!bottom[j]) {
          bottom[j] = true;
          for (auto c : children[j]) queue.emplace_back(c, false);
        }
      } else if (!from_child) {
        if (observed[j] && !top[j]) {
          top[j] = true;
          for (auto p : cur.nodes[j].parents) queue.emplace_back(p, true);
        }
        if (!observed[j] && !bottom[j]) {
          bottom[j] = true;
          for (auto c : children[j]) queue.emplace_back(c, false);
        }
      }
    }
    std::vector<bool> keep(n, false), full(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      full[i] = top[i];
      keep[i] = top[i] || (observed[i] && visited[i]);
    }
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i)
      changed = changed || !keep[i] || (!full[i] && !cur.nodes[i].parents.empty());
    if (!changed) return cur;
    cur = restrict(cur, keep, full);
  }
}

std::string export_dot(const SSBN& ssbn) {
  std::ostringstream out;
  out << "digraph SSBN {\n  rankdir=TB;\n  node [shape=ellipse, fontname=\"Helvetica\"];\n";
  for (std::size_t i = 0; i < ssbn.nodes.size(); ++i) {
    const auto& n = ssbn.nodes[i];
    bool is_target = std::find(ssbn.targets.begin(), ssbn.targets.end(), n.key) != ssbn.targets.end();
    auto ev = ssbn.evidence.find(n.key);
    std::string label = n.key;
    if (ev != ssbn.evidence.end()) label += "\\n= " + ev->second;
    out << "  n" << i << " [label=\"" << label << "\"";
    if (is_target) out << ", shape=doubleoctagon, style=filled, fillcolor=\"#ffe08a\"";
    else if (ev != ssbn.evidence.end()) out << ", shape=box, style=filled, fillcolor=\"#b8d8f0\"";
    out << "];\n";
  }
  for (std::size_t i = 0; i < ssbn.nodes.size(); ++i)
    for (auto p : ssbn.nodes[i].parents) out << "  n" << p << " -> n" << i << ";\n";
  out << "}\n";
  return out.str();
}

std::string ssbn_to_json(const SSBN& ssbn) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["targets"] = ssbn.targets;
  ordered_json ev = ordered_json::object();
  for (const auto& [k, v] : ssbn.evidence) ev[k] = v;
  j["evidence"] = ev;
  ordered_json nodes = ordered_json::array();
  for (const auto& n : ssbn.nodes) {
    ordered_json node;
    node["key"] = n.key;
    node["states"] = n.states.all();
    std::vector<std::string> parents;
    for (auto p : n.parents) parents.push_back(ssbn.nodes[p].key);
    node["parents"] = parents;
    ordered_json rows = ordered_json::array();
    for (std::size_t r = 0; r < n.row_count(); ++r) {
      auto row = n.row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    node["cpt"] = rows;
    node["provenance"] = n.provenance;
    nodes.push_back(node);
  }
  j["nodes"] = nodes;
  ordered_json arcs = ordered_json::array();
  for (const auto& n : ssbn.nodes)
    for (auto p : n.parents) arcs.push_back({ssbn.nodes[p].key, n.key});
  j["arcs"] = arcs;
  return j.dump(2);
}

}  // namespace mebn
