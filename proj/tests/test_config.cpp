#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "aoiopt/config.hpp"

using namespace aoiopt;
using namespace aoiopt::config;

TEST_CASE("defaults are valid and round-trip through json", "[config]") {
  RunConfig c;
  REQUIRE_NOTHROW(c.validate());
  const auto j = c.to_json();
  const RunConfig back = RunConfig::from_json(j);
  REQUIRE(back.to_json() == j);
  REQUIRE(back.scenario.flow_veh_h == c.scenario.flow_veh_h);
  REQUIRE(back.ddpg.tau == c.ddpg.tau);
  REQUIRE(back.llm.api_key_env == c.llm.api_key_env);
}

TEST_CASE("partial config overrides only the mentioned keys", "[config]") {
  const nlohmann::json j = {
      {"seed", 99},
      {"scenario", {{"flow_veh_h", 4000.0}, {"speed_kmh", {40.0, 100.0}}}},
      {"ddpg", {{"episodes", 10}}},
      {"reward", {{"mode", "verbatim"}}}};
  const RunConfig c = RunConfig::from_json(j);
  REQUIRE(c.seed == 99);
  REQUIRE(c.scenario.flow_veh_h == 4000.0);
  REQUIRE(c.scenario.speed_kmh.lo == 40.0);
  REQUIRE(c.scenario.speed_kmh.hi == 100.0);
  REQUIRE(c.scenario.sensing_range_m == RunConfig{}.scenario.sensing_range_m);
  REQUIRE(c.ddpg.episodes == 10);
  REQUIRE(c.ddpg.gamma == RunConfig{}.ddpg.gamma);
  REQUIRE(c.reward.mode == rl::RewardConfig::Mode::verbatim);
}

TEST_CASE("malformed config values are rejected", "[config]") {
  REQUIRE_THROWS_AS(
      RunConfig::from_json({{"scenario", {{"speed_kmh", {1.0, 2.0, 3.0}}}}}),
      ConfigError);
  REQUIRE_THROWS_AS(RunConfig::from_json({{"reward", {{"mode", "sometimes"}}}}),
                    ConfigError);
  RunConfig c;
  c.grid_rri_step_ms = 0.0;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("config file loading", "[config]") {
  const std::string path = "/tmp/aoiopt_test_config.json";
  {
    std::ofstream out(path);
    out << R"({"scenario": {"flow_veh_h": 5000}, "grid": {"rri_step_ms": 2.5}})";
  }
  const RunConfig c = RunConfig::load(path);
  REQUIRE(c.scenario.flow_veh_h == 5000.0);
  REQUIRE(c.grid_rri_step_ms == 2.5);
  std::remove(path.c_str());
  REQUIRE_THROWS_AS(RunConfig::load("/nonexistent/nope.json"), ConfigError);
  {
    std::ofstream out(path);
    out << "{not json";
  }
  REQUIRE_THROWS_AS(RunConfig::load(path), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("search_space carries the grid steps", "[config]") {
  RunConfig c;
  c.grid_rri_step_ms = 10.0;
  c.grid_speed_step_kmh = 2.0;
  const auto s = c.search_space();
  REQUIRE(s.rri_step_ms == 10.0);
  REQUIRE(s.speed_step_kmh == 2.0);
  REQUIRE(s.scenario.flow_veh_h == c.scenario.flow_veh_h);
}
