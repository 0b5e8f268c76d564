// mebn command-line tool. Links only the C interface.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mebn/mebn.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kDomainError = 2;
constexpr int kIoError = 3;

int exit_code(mebn_status s) {
  if (s == MEBN_OK) return kOk;
  if (s == MEBN_ERR_IO || s == MEBN_ERR_ARGUMENT) return kIoError;
  return kDomainError;
}

int report(mebn_status s) {
  std::cerr << "mebn: " << mebn_status_name(s) << " error: " << mebn_last_error() << "\n";
  return exit_code(s);
}

struct Theory {
  mebn_theory* h = nullptr;
  ~Theory() { mebn_theory_close(h); }
};

struct Evidence {
  mebn_evidence* h = nullptr;
  ~Evidence() { mebn_evidence_close(h); }
};

struct Owned {
  char* p = nullptr;
  ~Owned() { mebn_free(p); }
  std::string str() const { return p ? p : ""; }
};

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  return static_cast<bool>(out);
}

struct Options {
  std::string theory;
  std::string evidence;
  std::vector<std::string> targets;
  std::size_t max_depth = 0;
  std::size_t max_nodes = 0;
  bool oracle = false;
  bool json = false;
  bool no_timing = false;
  bool no_prune = false;
  bool dot_format = false;
  std::string dot_path;
  std::string corpus_dir = "corpus";
  bool regen = false;
};

/// Opens the theory and, when given, the evidence. Returns an exit code or -1 on success.
int open_inputs(const Options& o, Theory& t, Evidence& e) {
  if (auto s = mebn_theory_open(o.theory.c_str(), &t.h); s != MEBN_OK) return report(s);
  if (!o.evidence.empty())
    if (auto s = mebn_evidence_open(t.h, o.evidence.c_str(), &e.h); s != MEBN_OK) return report(s);
  return -1;
}

mebn_limits limits_of(const Options& o) {
  auto l = mebn_limits_default();
  if (o.max_depth) l.max_depth = o.max_depth;
  if (o.max_nodes) l.max_nodes = o.max_nodes;
  return l;
}

int cmd_validate(const Options& o) {
  Theory t;
  Evidence e;
  if (int rc = open_inputs(o, t, e); rc >= 0) return rc;
  Owned out;
  auto s = mebn_theory_validate(t.h, e.h, o.json ? 1 : 0, &out.p);
  if (!out.p) return report(s);
  std::cout << out.str();
  if (o.json) std::cout << "\n";
  return exit_code(s);
}

int cmd_query(const Options& o) {
  Theory t;
  Evidence e;
  if (int rc = open_inputs(o, t, e); rc >= 0) return rc;
  auto targets = c_strings(o.targets);
  auto limits = limits_of(o);
  unsigned flags = 0;
  if (o.oracle) flags |= MEBN_QUERY_ORACLE;
  if (o.no_timing) flags |= MEBN_QUERY_NO_TIMING;
  if (o.no_prune) flags |= MEBN_QUERY_NO_PRUNE;
  Owned out, dot;
  auto s = mebn_query(t.h, e.h, targets.data(), targets.size(), &limits, flags, &out.p,
                      o.dot_path.empty() ? nullptr : &dot.p);
  if (s != MEBN_OK) return report(s);
  std::cout << out.str();
  if (!o.dot_path.empty() && !write_file(o.dot_path, dot.str())) {
    std::cerr << "mebn: cannot write " << o.dot_path << "\n";
    return kIoError;
  }
  return kOk;
}

int cmd_ground(const Options& o) {
  Theory t;
  Evidence e;
  if (int rc = open_inputs(o, t, e); rc >= 0) return rc;
  auto targets = c_strings(o.targets);
  auto limits = limits_of(o);
  Owned out;
  auto s = mebn_ground(t.h, e.h, targets.data(), targets.size(), &limits,
                       o.dot_format ? MEBN_FORMAT_DOT : MEBN_FORMAT_JSON, o.no_prune ? 0 : 1, &out.p);
  if (s != MEBN_OK) return report(s);
  std::cout << out.str();
  return kOk;
}

/// Largest per-state difference between two posterior documents, or NaN
/// when their shape differs.
double max_difference(const json& a, const json& b) {
  auto as = a.is_array() ? a : json::array({a});
  auto bs = b.is_array() ? b : json::array({b});
  if (as.size() != bs.size()) return NAN;
  double worst = 0.0;
  for (std::size_t i = 0; i < as.size(); ++i) {
    if (as[i]["target"] != bs[i]["target"] || as[i]["states"] != bs[i]["states"]) return NAN;
    const auto& pa = as[i]["probs"];
    const auto& pb = bs[i]["probs"];
    for (std::size_t k = 0; k < pa.size(); ++k)
      worst = std::max(worst, std::fabs(pa[k].get<double>() - pb[k].get<double>()));
  }
  return worst;
}

int cmd_corpus(const Options& o) {
  const fs::path dir = o.corpus_dir;
  std::ifstream manifest_in(dir / "scenarios.json");
  if (!manifest_in) {
    std::cerr << "mebn: cannot read " << (dir / "scenarios.json").string() << "\n";
    return kIoError;
  }
  json manifest;
  try {
    manifest = json::parse(manifest_in);
  } catch (const json::exception& e) {
    std::cerr << "mebn: " << (dir / "scenarios.json").string() << ": " << e.what() << "\n";
    return kIoError;
  }
  const double tolerance = manifest.value("tolerance", 1e-9);
  Theory t;
  const auto theory_path = (dir / manifest.at("theory").get<std::string>()).string();
  if (auto s = mebn_theory_open(theory_path.c_str(), &t.h); s != MEBN_OK) return report(s);

  int failures = 0;
  std::printf("%-16s %-8s %-8s %-12s %s\n", "scenario", "oracle", "golden", "max |diff|", "nodes");
  for (const auto& sc : manifest.at("scenarios")) {
    const auto name = sc.at("name").get<std::string>();
    Evidence e;
    if (sc.contains("evidence")) {
      const auto path = (dir / sc["evidence"].get<std::string>()).string();
      if (auto s = mebn_evidence_open(t.h, path.c_str(), &e.h); s != MEBN_OK) {
        std::printf("%-16s ERROR %s\n", name.c_str(), mebn_last_error());
        ++failures;
        continue;
      }
    }
    auto target_list = sc.at("targets").get<std::vector<std::string>>();
    auto targets = c_strings(target_list);
    auto limits = mebn_limits_default();
    Owned ve, oracle;
    auto s1 = mebn_query(t.h, e.h, targets.data(), targets.size(), &limits, MEBN_QUERY_NO_TIMING, &ve.p, nullptr);
    auto s2 = mebn_query(t.h, e.h, targets.data(), targets.size(), &limits, MEBN_QUERY_NO_TIMING | MEBN_QUERY_ORACLE,
                         &oracle.p, nullptr);
    if (s1 != MEBN_OK || s2 != MEBN_OK) {
      std::printf("%-16s ERROR %s\n", name.c_str(), mebn_last_error());
      ++failures;
      continue;
    }
    auto jv = json::parse(ve.str());
    auto jo = json::parse(oracle.str());
    double d_oracle = max_difference(jv, jo);
    bool oracle_ok = d_oracle <= tolerance;

    std::string golden_status = "-";
    double d_golden = 0.0;
    if (sc.contains("golden")) {
      const auto gpath = dir / sc["golden"].get<std::string>();
      if (o.regen) {
        write_file(gpath.string(), oracle.str());
        golden_status = "written";
      } else {
        std::ifstream gin(gpath);
        if (!gin) {
          golden_status = "missing";
        } else {
          try {
            d_golden = max_difference(jv, json::parse(gin));
            golden_status = d_golden <= tolerance ? "pass" : "FAIL";
          } catch (const json::exception&) {
            golden_status = "corrupt";
          }
        }
      }
    }
    bool ok = oracle_ok && (golden_status == "pass" || golden_status == "-" || golden_status == "written");
    if (!ok) ++failures;
    auto first = jv.is_array() ? jv[0] : jv;
    std::printf("%-16s %-8s %-8s %-12.3g %d\n", name.c_str(), oracle_ok ? "pass" : "FAIL", golden_status.c_str(),
                std::max(std::isnan(d_oracle) ? 1.0 : d_oracle, d_golden), first["ssbn_nodes"].get<int>());
  }
  std::printf("%d scenario(s) failed\n", failures);
  return failures ? kDomainError : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-entity Bayesian network engine"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* c) {
    c->add_option("theory", o.theory, "Theory file (.mtheory)")->required();
    c->add_option("--evidence,-e", o.evidence, "Evidence file (.mev)");
  };
  auto add_query = [&](CLI::App* c) {
    add_common(c);
    c->add_option("--target,-t", o.targets, "Target RV instance or formula (repeatable)")->required();
    c->add_option("--max-depth", o.max_depth, "Grounding depth limit");
    c->add_option("--max-nodes", o.max_nodes, "Grounding node limit");
    c->add_flag("--no-prune", o.no_prune, "Skip pruning");
  };

  auto* validate = app.add_subcommand("validate", "Check a theory");
  add_common(validate);
  validate->add_flag("--json", o.json, "JSON report");

  auto* query = app.add_subcommand("query", "Posterior of targets given evidence");
  add_query(query);
  query->add_flag("--oracle", o.oracle, "Brute-force enumeration instead of variable elimination");
  query->add_option("--dot", o.dot_path, "Also write the pruned network as DOT");
  query->add_flag("--no-timing", o.no_timing, "Report elapsed_ms as 0");

  auto* ground = app.add_subcommand("ground", "Print the situation-specific network");
  add_query(ground);
  ground->add_flag("--dot", o.dot_format, "DOT instead of JSON");
  ground->add_flag("--json", o.json, "JSON (default)");

  auto* corpus = app.add_subcommand("corpus", "Run every corpus scenario against its golden file");
  corpus->add_option("dir", o.corpus_dir, "Corpus directory")->capture_default_str();
  corpus->add_flag("--regen", o.regen, "Rewrite golden files from the enumeration oracle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kIoError;
  }
  if (*validate) return cmd_validate(o);
  if (*query) return cmd_query(o);
  if (*ground) return cmd_ground(o);
  return cmd_corpus(o);
}
