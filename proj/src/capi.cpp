#include "mebn/mebn.h"

#include <cstdlib>
#include <cstring>
#include <new>

#include "json.hpp"
#include "mebn/error.hpp"
#include "mebn/inference.hpp"
#include "mebn/theory_format.hpp"

struct mebn_theory {
  mebn::MTheory theory;
  std::string origin;
};

struct mebn_evidence {
  mebn::Evidence evidence;
  std::string origin;
};

namespace {

thread_local std::string g_last_error;

mebn_status fail(mebn_status s, const std::string& message) {
  g_last_error = message;
  return s;
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

mebn_status status_for(const mebn::Error& e) {
  using mebn::ErrorCode;
  if (e.code() == ErrorCode::Io) return MEBN_ERR_IO;
  if (e.stage() == "ground") return MEBN_ERR_GROUNDING;
  if (e.stage() == "infer") return MEBN_ERR_INFERENCE;
  if (e.stage() == "validate") return MEBN_ERR_VALIDATION;
  if (e.stage() == "parse") return MEBN_ERR_PARSE;
  switch (e.code()) {
    case ErrorCode::Parse:
    case ErrorCode::UnknownRV:
    case ErrorCode::UnknownIdentifier: return MEBN_ERR_PARSE;
    case ErrorCode::Validation: return MEBN_ERR_VALIDATION;
    case ErrorCode::InconsistentEvidence:
    case ErrorCode::StateSpaceTooLarge: return MEBN_ERR_INFERENCE;
    default: return MEBN_ERR_GROUNDING;
  }
}

template <class F>
mebn_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const mebn::Error& e) {
    std::string stage = e.stage().empty() ? "" : e.stage() + ": ";
    return fail(status_for(e), stage + std::string(mebn::to_string(e.code())) + ": " + e.what());
  } catch (const std::bad_alloc&) {
    return fail(MEBN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MEBN_ERR_INTERNAL, e.what());
  }
}

mebn_status load_theory(mebn::SourceText src, mebn_theory** out) {
  auto r = mebn::parse_mtheory(src);
  if (!r.ok()) return fail(MEBN_ERR_PARSE, r.render(src.origin));
  *out = new mebn_theory{std::move(*r.value), src.origin};
  return MEBN_OK;
}

mebn_status load_evidence(const mebn_theory* theory, mebn::SourceText src, mebn_evidence** out) {
  auto r = mebn::parse_evidence(src, theory->theory);
  if (!r.ok()) return fail(MEBN_ERR_PARSE, r.render(src.origin));
  *out = new mebn_evidence{std::move(*r.value), src.origin};
  return MEBN_OK;
}

mebn::GroundingLimits to_limits(const mebn_limits* l) {
  mebn::GroundingLimits g;
  if (l) {
    g.max_depth = l->max_depth;
    g.max_nodes = l->max_nodes;
    g.max_parent_product = l->max_parent_product;
  }
  return g;
}

/// Validates the theory over the scenario's registry; throws a validate-stage error.
mebn::ValidatedMTheory validated(const mebn_theory* theory, const mebn_evidence* evidence) {
  const auto& entities =
      evidence && !evidence->evidence.entities.empty() ? evidence->evidence.entities : theory->theory.entities;
  mebn::EntityRegistry registry;
  try {
    registry = mebn::registry_from(theory->theory, entities);
  } catch (const mebn::Error& e) {
    throw mebn::Error(e.code(), "validate", e.what());
  }
  auto outcome = mebn::validate(theory->theory, registry);
  if (!outcome.theory) throw mebn::Error(mebn::ErrorCode::Validation, "validate", outcome.report.to_text());
  return std::move(*outcome.theory);
}

std::vector<mebn::Formula> parse_targets(const char* const* targets, size_t n) {
  std::vector<mebn::Formula> out;
  for (size_t i = 0; i < n; ++i) {
    if (!targets[i]) throw mebn::Error(mebn::ErrorCode::InvalidValue, "parse", "null target");
    auto r = mebn::parse_formula({targets[i], "target"});
    if (!r.ok()) throw mebn::Error(mebn::ErrorCode::Parse, "parse", r.render("target '" + std::string(targets[i]) + "'"));
    out.push_back(std::move(*r.value));
  }
  return out;
}

}  // namespace

extern "C" {

mebn_limits mebn_limits_default(void) {
  mebn::GroundingLimits g;
  return {g.max_depth, g.max_nodes, g.max_parent_product};
}

mebn_status mebn_theory_open(const char* path, mebn_theory** out) {
  if (!path || !out) return fail(MEBN_ERR_ARGUMENT, "null argument");
  return guarded([&] { return load_theory(mebn::SourceText::from_file(path), out); });
}

mebn_status mebn_theory_parse(const char* text, const char* origin, mebn_theory** out) {
  if (!text || !out) return fail(MEBN_ERR_ARGUMENT, "null argument");
  return guarded([&] { return load_theory({text, origin ? origin : "<string>"}, out); });
}

void mebn_theory_close(mebn_theory* theory) { delete theory; }

mebn_status mebn_theory_serialize(const mebn_theory* theory, char** text) {
  if (!theory || !text) return fail(MEBN_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *text = dup(mebn::serialize_mtheory(theory->theory));
    return MEBN_OK;
  });
}

mebn_status mebn_theory_validate(const mebn_theory* theory, const mebn_evidence* evidence, int json, char** report) {
  if (!theory || !report) return fail(MEBN_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    const auto& entities =
        evidence && !evidence->evidence.entities.empty() ? evidence->evidence.entities : theory->theory.entities;
    auto registry = mebn::registry_from(theory->theory, entities);
    auto outcome = mebn::validate(theory->theory, registry);
    *report = dup(json ? outcome.report.to_json() : outcome.report.to_text());
    if (outcome.report.ok()) return MEBN_OK;
    return fail(MEBN_ERR_VALIDATION, outcome.report.to_text());
  });
}

mebn_status mebn_evidence_open(const mebn_theory* theory, const char* path, mebn_evidence** out) {
  if (!theory || !path || !out) return fail(MEBN_ERR_ARGUMENT, "null argument");
  return guarded([&] { return load_evidence(theory, mebn::SourceText::from_file(path), out); });
}

mebn_status mebn_evidence_parse(const mebn_theory* theory, const char* text, const char* origin, mebn_evidence** out) {
  if (!theory || !text || !out) return fail(MEBN_ERR_ARGUMENT, "null argument");
  return guarded([&] { return load_evidence(theory, {text, origin ? origin : "<string>"}, out); });
}

void mebn_evidence_close(mebn_evidence* evidence) { delete evidence; }

mebn_status mebn_query(const mebn_theory* theory, const mebn_evidence* evidence, const char* const* targets,
                       size_t target_count, const mebn_limits* limits, unsigned flags, char** json, char** dot) {
  if (!theory || !targets || !json) return fail(MEBN_ERR_ARGUMENT, "null argument");
  if (target_count == 0) return fail(MEBN_ERR_ARGUMENT, "no targets given");
  return guarded([&] {
    auto parsed = parse_targets(targets, target_count);
    auto v = validated(theory, evidence);
    static const mebn::Evidence kNone;
    auto result = mebn::answer_query(v, evidence ? evidence->evidence : kNone, parsed, to_limits(limits),
                                     (flags & MEBN_QUERY_ORACLE) ? mebn::Engine::Oracle : mebn::Engine::Elimination,
                                     !(flags & MEBN_QUERY_NO_PRUNE));
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < result.posterior.targets.size(); ++i) {
      const auto& t = result.posterior.targets[i];
      nlohmann::ordered_json j;
      j["target"] = targets[i];
      j["states"] = t.distribution.states;
      j["probs"] = t.distribution.probs;
      j["evidence_probability"] = result.posterior.evidence_probability;
      j["ssbn_nodes"] = result.ssbn.nodes.size();
      j["elapsed_ms"] = (flags & MEBN_QUERY_NO_TIMING) ? 0.0 : result.elapsed_ms;
      out.push_back(std::move(j));
    }
    std::string text = out.size() == 1 ? out[0].dump(2) : out.dump(2);
    if (dot) *dot = dup(mebn::export_dot(result.ssbn));
    *json = dup(text + "\n");
    return MEBN_OK;
  });
}

mebn_status mebn_ground(const mebn_theory* theory, const mebn_evidence* evidence, const char* const* targets,
                        size_t target_count, const mebn_limits* limits, int format, int prune, char** out) {
  if (!theory || !targets || !out) return fail(MEBN_ERR_ARGUMENT, "null argument");
  if (target_count == 0) return fail(MEBN_ERR_ARGUMENT, "no targets given");
  return guarded([&] {
    auto parsed = parse_targets(targets, target_count);
    auto v = validated(theory, evidence);
    static const mebn::Evidence kNone;
    mebn::SSBN s;
    try {
      s = mebn::build_ssbn(v, evidence ? evidence->evidence : kNone, parsed, to_limits(limits));
      if (prune) s = mebn::prune_ssbn(s);
    } catch (const mebn::Error& e) {
      throw mebn::Error(e.code(), "ground", e.what());
    }
    *out = dup(format == MEBN_FORMAT_DOT ? mebn::export_dot(s) : mebn::ssbn_to_json(s) + "\n");
    return MEBN_OK;
  });
}

void mebn_free(void* p) { std::free(p); }

const char* mebn_last_error(void) { return g_last_error.c_str(); }

const char* mebn_status_name(mebn_status status) {
  switch (status) {
    case MEBN_OK: return "ok";
    case MEBN_ERR_IO: return "io";
    case MEBN_ERR_PARSE: return "parse";
    case MEBN_ERR_VALIDATION: return "validation";
    case MEBN_ERR_GROUNDING: return "grounding";
    case MEBN_ERR_INFERENCE: return "inference";
    case MEBN_ERR_ARGUMENT: return "argument";
    case MEBN_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

}  // extern "C"
