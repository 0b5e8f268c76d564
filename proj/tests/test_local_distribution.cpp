#include <algorithm>

#include "doctest.h"
#include "mebn/error.hpp"
#include "support.hpp"

using namespace mebn;

namespace {

LocalExpression ldl(const std::string& text) {
  auto r = parse_local_expression({text, "test"});
  REQUIRE_MESSAGE(r.ok(), r.render("test"));
  return *r.value;
}

const StateSpace kDanger({"Unacceptable", "High", "Medium", "Low"});

const LocalExpression& danger() { return *testing::star_trek().find_mfrag("DangerToSelf")->local_for("DangerToSelf"); }

InfluenceCounts danger_counts(std::int64_t klingon_harm, std::int64_t romulan_harm = 0, std::int64_t quiet = 0) {
  InfluenceCounts c({"HarmPotential", "OpSpec"});
  if (klingon_harm) c.add({"True", "Klingon"}, klingon_harm);
  if (romulan_harm) c.add({"True", "Romulan"}, romulan_harm);
  if (quiet) c.add({"False", "Friend"}, quiet);
  return c;
}

}  // namespace

TEST_CASE("saturated term grows then caps") {
  auto one = eval_local_distribution(danger(), danger_counts(1), kDanger);
  CHECK(one.at("Unacceptable") == doctest::Approx(0.7));
  CHECK(one.at("High") == doctest::Approx(0.25));
  auto two = eval_local_distribution(danger(), danger_counts(2), kDanger);
  CHECK(two.at("Unacceptable") == doctest::Approx(0.9));
  CHECK(two.at("High") == doctest::Approx(0.05));
  auto many = eval_local_distribution(danger(), danger_counts(7, 3, 2), kDanger);
  CHECK(many == two);
}

TEST_CASE("clauses are tried in order") {
  auto rom = eval_local_distribution(danger(), danger_counts(0, 1), kDanger);
  CHECK(rom.probs == std::vector<double>{0.1, 0.5, 0.3, 0.1, 0});
  auto quiet = eval_local_distribution(danger(), danger_counts(0, 0, 3), kDanger);
  CHECK(quiet.probs == std::vector<double>{0, 0.01, 0.09, 0.9, 0});
}

TEST_CASE("empty counts give the default distribution") {
  auto d = eval_local_distribution(danger(), InfluenceCounts({"HarmPotential", "OpSpec"}), kDanger);
  CHECK(d.at("Absurd") == 1.0);
  CHECK(d == default_distribution(danger(), kDanger));
}

TEST_CASE("uniform and remainder") {
  auto e = ldl("if count(A = X) >= 2 then uniform\nelse {Lo: 0.25, Hi: *}\n");
  StateSpace s({"Lo", "Mid", "Hi"});
  InfluenceCounts c({"A"});
  auto d0 = eval_local_distribution(e, c, s);
  CHECK(d0.probs == std::vector<double>{0.25, 0, 0.75, 0});
  c.add({"X"}, 2);
  auto d1 = eval_local_distribution(e, c, s);
  CHECK(d1.at("Mid") == doctest::Approx(1.0 / 3));
  CHECK(d1.at("Absurd") == 0.0);
}

TEST_CASE("guard connectives and comparison operators") {
  auto e = ldl("if not count(A = X) > 1 and (count(A = Y) = 0 or count() != 3) then {T: 1}\nelse {F: 1}\n");
  StateSpace s({"T", "F"});
  auto eval = [&](std::int64_t x, std::int64_t y) {
    InfluenceCounts c({"A"});
    if (x) c.add({"X"}, x);
    if (y) c.add({"Y"}, y);
    return eval_local_distribution(e, c, s).at("T");
  };
  CHECK(eval(1, 0) == 1.0);
  CHECK(eval(2, 0) == 0.0);
  CHECK(eval(1, 2) == 0.0);  // Y present and total is 3
  CHECK(eval(0, 2) == 1.0);
}

TEST_CASE("saturation bound and Absurd mentions") {
  CHECK(saturation_bound(danger()) == 2);
  CHECK_FALSE(mentions_absurd(danger()));  // an Absurd entry is not a pattern
  CHECK(mentions_absurd(ldl("if count(A = Absurd) >= 1 then {T: 1}\nelse {F: 1}\n")));
  const auto& cloak = *testing::star_trek().find_mfrag("Starship")->local_for("CloakMode");
  CHECK(saturation_bound(cloak) == 2);
  CHECK(patterns_of(cloak).size() == 2);
}

TEST_CASE("influence counts depend only on satisfying bindings") {
  std::vector<BindingWorld> bindings(3);
  bindings[0].parents = {"OpSpec(!ST1)"};
  bindings[1].parents = {"OpSpec(!ST2)"};
  bindings[1].contexts.push_back({ContextValue::False, "", "", false});
  bindings[2].parents = {"OpSpec(!ST3)"};
  bindings[2].contexts.push_back({ContextValue::True, "Subject(!SR1)", "!ST3", false});
  PartialWorldState w{{"OpSpec(!ST1)", "Klingon"},
                      {"OpSpec(!ST2)", "Klingon"},
                      {"OpSpec(!ST3)", "Friend"},
                      {"Subject(!SR1)", "!ST3"}};
  auto c = compute_influence_counts(bindings, w, {"OpSpec"});
  CHECK(c.total() == 2);
  CHECK(c.count(Pattern{{{"OpSpec", "Klingon"}}}) == 1);
  w["Subject(!SR1)"] = "!ST1";
  CHECK(compute_influence_counts(bindings, w, {"OpSpec"}).total() == 1);
  w.erase("OpSpec(!ST1)");
  CHECK_THROWS_AS(compute_influence_counts(bindings, w, {"OpSpec"}), Error);
}

TEST_CASE("negated uncertain context") {
  std::vector<BindingWorld> bindings(1);
  bindings[0].contexts.push_back({ContextValue::True, "Subject(!SR1)", "!ST3", true});
  PartialWorldState w{{"Subject(!SR1)", "!ST3"}};
  CHECK(compute_influence_counts(bindings, w, {}).total() == 0);
  w["Subject(!SR1)"] = "!ST2";
  CHECK(compute_influence_counts(bindings, w, {}).total() == 1);
}

TEST_CASE("well-formedness diagnostics") {
  StateSpace s({"A", "B"});
  std::vector<std::string> parents = {"P"};
  std::vector<StateSpace> pstates = {StateSpace::boolean()};
  auto kinds = [&](const std::string& text) {
    std::vector<LdlDiagnostic::Kind> out;
    for (const auto& d : check_ldl_wellformed(ldl(text), s, parents, pstates)) out.push_back(d.kind);
    return out;
  };
  auto has = [](const std::vector<LdlDiagnostic::Kind>& v, LdlDiagnostic::Kind k) {
    return std::find(v.begin(), v.end(), k) != v.end();
  };
  CHECK(kinds("if count(P = True) >= 1 then {A: 0.3, B: *}\nelse {A: 1}\n").empty());
  CHECK(has(kinds("else {C: 1}\n"), LdlDiagnostic::Kind::UnknownState));
  CHECK(has(kinds("if count(Q = True) >= 1 then {A: 1}\nelse {A: 1}\n"), LdlDiagnostic::Kind::UnknownParent));
  CHECK(has(kinds("else {A: *, B: *}\n"), LdlDiagnostic::Kind::MultipleRemainder));
  CHECK(has(kinds("else {A: 0.7, B: 0.7}\n"), LdlDiagnostic::Kind::MassError));
  CHECK(has(kinds("else {A: 0.7, A: 0.1, B: *}\n"), LdlDiagnostic::Kind::DuplicateState));
  CHECK(has(kinds("if count(P = True) >= 1 then {A: min(1, 0.5 + 0.2 * sat(P = True, 3)), Absurd: 0.2, B: *}\nelse {A: 1}\n"),
            LdlDiagnostic::Kind::NegativeResidual));
}
