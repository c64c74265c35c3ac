#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "case6.hpp"
#include "olfc/error.hpp"
#include "olfc/scenario_io.hpp"

using namespace olfc;
using nlohmann::json;

namespace {

std::filesystem::path scenario_file(const std::string& stem) {
  return std::filesystem::path(OLFC_SCENARIO_DIR) / (stem + ".json");
}

json nominal() {
  std::ifstream in(scenario_file("case6_nominal"));
  return json::parse(in);
}

std::string failure_path(const json& doc, const LoadOptions& opts = {}) {
  try {
    parse_scenario(doc, opts);
  } catch (const ValidationError& e) {
    return e.path();
  }
  return "<accepted>";
}

}  // namespace

TEST(ScenarioIo, BundledFilesLoad) {
  for (const auto& entry : std::filesystem::directory_iterator(OLFC_SCENARIO_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_scenario(entry.path())) << entry.path();
  }
}

TEST(ScenarioIo, NominalMatchesInCodeCase) {
  const auto loaded = load_scenario(scenario_file("case6_nominal"));
  const auto ref = case6::scenario();
  const auto& sc = loaded.scenario;
  EXPECT_EQ(sc.name, "case6_nominal");
  EXPECT_EQ(sc.family, ControllerFamily::consensus);
  ASSERT_EQ(sc.units.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(sc.units[i].governor.turbine_time, ref.units[i].governor.turbine_time);
    EXPECT_DOUBLE_EQ(sc.units[i].governor.governor_time, ref.units[i].governor.governor_time);
    EXPECT_DOUBLE_EQ(sc.units[i].governor.droop_inverse, 0.5);
    EXPECT_DOUBLE_EQ(sc.units[i].cost.q, ref.units[i].cost.q);
  }
  EXPECT_LT((sc.network.gamma() - ref.network.gamma()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(sc.initial_loads, case6::pre_loads());
  ASSERT_EQ(sc.events.size(), 1u);
  EXPECT_DOUBLE_EQ(sc.events[0].time, 10.0);
  EXPECT_EQ(sc.events[0].loads, case6::post_loads());
  EXPECT_TRUE(loaded.warnings.empty());
  EXPECT_TRUE(loaded.notices.empty());
}

TEST(ScenarioIo, OverrideProducesNotice) {
  const auto loaded = load_scenario(scenario_file("case6_unstable"));
  ASSERT_EQ(loaded.notices.size(), 1u);
  EXPECT_NE(loaded.notices[0].find("destabilization override: unit 3"), std::string::npos);
  ASSERT_EQ(loaded.scenario.overrides.size(), 1u);
  EXPECT_EQ(loaded.scenario.overrides[0].unit, 2u);
  EXPECT_DOUBLE_EQ(loaded.scenario.overrides[0].gain_multiplier, 5.0);
}

TEST(ScenarioIo, GainReadingWarnsAndStrictRejects) {
  const auto loaded = load_scenario(scenario_file("case6_nominal_alt_k"));
  ASSERT_EQ(loaded.droop.size(), 3u);
  for (const auto& d : loaded.droop) {
    EXPECT_EQ(d.reading, DroopReading::gain);
    EXPECT_DOUBLE_EQ(d.droop_inverse, 2.0);
  }
  ASSERT_EQ(loaded.warnings.size(), 2u);
  EXPECT_EQ(loaded.warnings[0].rfind("units[1].droop:", 0), 0u);
  EXPECT_EQ(loaded.warnings[1].rfind("units[2].droop:", 0), 0u);
  try {
    load_scenario(scenario_file("case6_nominal_alt_k"), {.strict = true});
    FAIL() << "strict load accepted an out-of-interval droop";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.path(), "units[1].droop");
  }
}

TEST(ScenarioIo, DroopReadings) {
  EXPECT_DOUBLE_EQ(droop_inverse_from(0.5, DroopReading::inverse), 0.5);
  EXPECT_DOUBLE_EQ(droop_inverse_from(0.5, DroopReading::gain), 2.0);
  EXPECT_STREQ(to_string(DroopReading::inverse), "K_inv");
  EXPECT_STREQ(to_string(DroopReading::gain), "K");
  auto doc = nominal();
  doc["units"][0]["droop"] = 0.25;
  EXPECT_DOUBLE_EQ(parse_scenario(doc).scenario.units[0].governor.droop_inverse, 0.25);
  doc["units"][0]["droop"] = {{"value", 0.25}, {"read_as", "gain"}};
  EXPECT_EQ(failure_path(doc), "units[0].droop.read_as");
}

TEST(ScenarioIo, FieldPaths) {
  auto doc = nominal();
  doc["network"]["lines"][0]["to"] = 9;
  EXPECT_EQ(failure_path(doc), "network.lines[0].to");

  doc = nominal();
  doc["network"]["buses"][2]["inertia"] = -1.0;
  EXPECT_EQ(failure_path(doc), "network.buses[2].inertia");

  doc = nominal();
  doc["units"][1]["colour"] = "red";
  EXPECT_EQ(failure_path(doc), "units[1].colour");

  doc = nominal();
  doc["units"][1].erase("T_m");
  EXPECT_EQ(failure_path(doc), "units[1].T_m");

  doc = nominal();
  doc["schedule"]["initial_loads"][1] = "x";
  EXPECT_EQ(failure_path(doc), "schedule.initial_loads[1]");

  doc = nominal();
  doc["controllers"]["family"] = "pid";
  EXPECT_EQ(failure_path(doc), "controllers.family");

  doc = nominal();
  doc["integrator"]["dt"] = 0.0;
  EXPECT_EQ(failure_path(doc), "integrator.dt");
}

TEST(ScenarioIo, DisconnectedGraphsRejected) {
  auto doc = nominal();
  doc["controllers"]["comm_edges"] = json::array({json::array({1, 2})});
  EXPECT_EQ(failure_path(doc), "controllers.comm_edges");

  doc = nominal();
  json lines = json::array();
  for (const auto& l : doc["network"]["lines"])
    if (l["from"] != 3 && l["to"] != 3) lines.push_back(l);
  doc["network"]["lines"] = lines;
  EXPECT_EQ(failure_path(doc), "network.lines");
}

TEST(ScenarioIo, InfeasibleLoadRejected) {
  auto doc = nominal();
  doc["schedule"]["events"][0]["loads"] = {40.0, 40.0, 40.0};
  const auto p = failure_path(doc);
  EXPECT_EQ(p.rfind("schedule.events[0]", 0), 0u) << p;
}

TEST(ScenarioIo, CommandLineOverridesAndDigest) {
  const auto a = load_scenario(scenario_file("case6_nominal"));
  const auto b = load_scenario(scenario_file("case6_nominal"));
  EXPECT_EQ(a.digest, b.digest);
  EXPECT_EQ(a.digest.size(), 16u);
  const auto c = load_scenario(scenario_file("case6_nominal"), {.dt = 0.002, .horizon = 20.0});
  EXPECT_DOUBLE_EQ(c.scenario.integrator.dt, 0.002);
  EXPECT_DOUBLE_EQ(c.scenario.integrator.horizon, 20.0);
  EXPECT_DOUBLE_EQ(c.document["integrator"]["dt"].get<double>(), 0.002);
  EXPECT_NE(a.digest, c.digest);
}

TEST(ScenarioIo, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(ScenarioIo, MissingFileAndBadJson) {
  EXPECT_THROW(load_scenario("/nonexistent/file.json"), ValidationError);
  const auto tmp = std::filesystem::temp_directory_path() / "olfc_bad.json";
  std::ofstream(tmp) << "{ \"name\": ";
  EXPECT_THROW(load_scenario(tmp), ValidationError);
  std::filesystem::remove(tmp);
}
