// Exercises the shared library through its C interface only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "mebn/mebn.h"

namespace {

std::string corpus(const char* rel) { return std::string(MEBN_CORPUS_DIR) + "/" + rel; }

struct Owned {
  char* p = nullptr;
  ~Owned() { mebn_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Loaded {
  mebn_theory* theory = nullptr;
  mebn_evidence* evidence = nullptr;
  Loaded(const char* evidence_file = nullptr) {
    REQUIRE(mebn_theory_open(corpus("star_trek.mtheory").c_str(), &theory) == MEBN_OK);
    if (evidence_file) REQUIRE(mebn_evidence_open(theory, corpus(evidence_file).c_str(), &evidence) == MEBN_OK);
  }
  ~Loaded() {
    mebn_evidence_close(evidence);
    mebn_theory_close(theory);
  }
};

}  // namespace

TEST_CASE("query through the C interface") {
  Loaded l("evidence/five_ships.mev");
  const char* targets[] = {"DangerToSelf(!ST0, !T0)"};
  Owned json, dot;
  auto limits = mebn_limits_default();
  REQUIRE(mebn_query(l.theory, l.evidence, targets, 1, &limits, MEBN_QUERY_NO_TIMING, &json.p, &dot.p) == MEBN_OK);
  auto j = nlohmann::json::parse(json.str());
  CHECK(j["target"] == "DangerToSelf(!ST0, !T0)");
  CHECK(j["states"].size() == 5);
  double sum = 0;
  for (double p : j["probs"]) sum += p;
  CHECK(sum == doctest::Approx(1.0));
  CHECK(j["elapsed_ms"] == 0.0);
  CHECK(dot.str().rfind("digraph", 0) == 0);

  Owned oracle;
  REQUIRE(mebn_query(l.theory, l.evidence, targets, 1, nullptr, MEBN_QUERY_NO_TIMING | MEBN_QUERY_ORACLE, &oracle.p,
                     nullptr) == MEBN_OK);
  auto o = nlohmann::json::parse(oracle.str());
  for (std::size_t i = 0; i < 5; ++i) CHECK(o["probs"][i].get<double>() == doctest::Approx(j["probs"][i].get<double>()));
}

TEST_CASE("several targets give an array") {
  Loaded l("evidence/five_ships.mev");
  const char* targets[] = {"DangerToSelf(!ST0, !T0)", "Exists(!ST4)"};
  Owned json;
  REQUIRE(mebn_query(l.theory, l.evidence, targets, 2, nullptr, 0, &json.p, nullptr) == MEBN_OK);
  auto j = nlohmann::json::parse(json.str());
  REQUIRE(j.is_array());
  CHECK(j[1]["target"] == "Exists(!ST4)");
}

TEST_CASE("validate, serialize and ground") {
  Loaded l;
  Owned report, text, ground;
  CHECK(mebn_theory_validate(l.theory, nullptr, 0, &report.p) == MEBN_OK);
  CHECK(report.str() == "ok\n");
  REQUIRE(mebn_theory_serialize(l.theory, &text.p) == MEBN_OK);
  mebn_theory* again = nullptr;
  REQUIRE(mebn_theory_parse(text.p, "copy", &again) == MEBN_OK);
  Owned text2;
  REQUIRE(mebn_theory_serialize(again, &text2.p) == MEBN_OK);
  CHECK(text.str() == text2.str());
  mebn_theory_close(again);

  const char* targets[] = {"ZoneMD(!Z0, !T3)"};
  REQUIRE(mebn_ground(l.theory, nullptr, targets, 1, nullptr, MEBN_FORMAT_JSON, 0, &ground.p) == MEBN_OK);
  auto j = nlohmann::json::parse(ground.str());
  CHECK(j["nodes"].size() == 4);
}

TEST_CASE("errors map to status codes") {
  mebn_theory* t = nullptr;
  CHECK(mebn_theory_open("/no/such/file", &t) == MEBN_ERR_IO);
  CHECK(std::string(mebn_last_error()).find("/no/such/file") != std::string::npos);
  CHECK(mebn_theory_parse("mtheory X\nrv P(x: Nope) : Bool\n", "bad", &t) == MEBN_ERR_PARSE);
  CHECK(std::string(mebn_last_error()).find("bad:2:") == 0);
  CHECK(mebn_theory_open(nullptr, &t) == MEBN_ERR_ARGUMENT);

  Loaded l;
  mebn_evidence* e = nullptr;
  CHECK(mebn_evidence_parse(l.theory, "Nope(!ST0) = True\n", "ev", &e) == MEBN_ERR_PARSE);

  Owned json;
  const char* unknown[] = {"OpSpec(!ST9)"};
  CHECK(mebn_query(l.theory, nullptr, unknown, 1, nullptr, 0, &json.p, nullptr) == MEBN_ERR_GROUNDING);
  const char* malformed[] = {"OpSpec(!ST1"};
  CHECK(mebn_query(l.theory, nullptr, malformed, 1, nullptr, 0, &json.p, nullptr) == MEBN_ERR_PARSE);
  CHECK(mebn_query(l.theory, nullptr, unknown, 0, nullptr, 0, &json.p, nullptr) == MEBN_ERR_ARGUMENT);
  CHECK(json.p == nullptr);

  mebn_limits tiny = mebn_limits_default();
  tiny.max_nodes = 2;
  const char* deep[] = {"ZoneMD(!Z0, !T3)"};
  CHECK(mebn_query(l.theory, nullptr, deep, 1, &tiny, 0, &json.p, nullptr) == MEBN_ERR_GROUNDING);
  CHECK(std::string(mebn_last_error()).find("LimitExceeded") != std::string::npos);
  CHECK(std::string(mebn_status_name(MEBN_ERR_VALIDATION)) == "validation");
}

TEST_CASE("validation failure") {
  mebn_theory* t = nullptr;
  REQUIRE(mebn_theory_open((std::string(MEBN_TESTS_DIR) + "/data/cyclic.mtheory").c_str(), &t) == MEBN_OK);
  Owned report, json;
  CHECK(mebn_theory_validate(t, nullptr, 1, &report.p) == MEBN_ERR_VALIDATION);
  auto j = nlohmann::json::parse(report.str());
  CHECK(j.dump().find("NoCycles") != std::string::npos);
  const char* targets[] = {"Left(!A)"};
  CHECK(mebn_query(t, nullptr, targets, 1, nullptr, 0, &json.p, nullptr) == MEBN_ERR_VALIDATION);
  mebn_theory_close(t);
}
