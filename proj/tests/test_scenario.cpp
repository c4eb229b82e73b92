#include <doctest.h>

#include "defeat/ingest.hpp"
#include "defeat/scenario.hpp"
#include "helpers.hpp"

using namespace defeat;

TEST_CASE("intention codes are pinned") {
  CHECK(static_cast<int>(Intention::KL) == 0);
  CHECK(static_cast<int>(Intention::LC) == 1);
  CHECK(static_cast<int>(Intention::RC) == 2);
}

TEST_CASE("validate accepts a well-formed scenario") {
  const DrivingScenario s = testing::example_scenario();
  const Validation v = validate(s);
  CHECK(v.ok());
}

TEST_CASE("validate flags a short history") {
  DrivingScenario s = testing::example_scenario();
  s.ego.history.pop_back();
  const Validation v = validate(s);
  REQUIRE_FALSE(v.ok());
  CHECK(v.violations.front().find("length != 6") != std::string::npos);
}

TEST_CASE("validate flags a history not ending at the origin") {
  DrivingScenario s = testing::example_scenario();
  s.ego.history.back() = {1.0, 0.0};
  CHECK_FALSE(validate(s).ok());
}

TEST_CASE("validate flags a neighbor outside the sensing range") {
  DrivingScenario s = testing::example_scenario();
  s.neighbors.at(Direction::LeftFront).distance = 250.0;
  const Validation v = validate(s);
  REQUIRE_FALSE(v.ok());
  CHECK(v.violations.front().find("200 m sensing range") != std::string::npos);
}

TEST_CASE("validate flags non-positive distances and bad lane setups") {
  DrivingScenario s = testing::example_scenario();
  s.neighbors.at(Direction::LeftBehind).distance = 0.0;
  CHECK_FALSE(validate(s).ok());

  DrivingScenario lanes = testing::example_scenario();
  lanes.map.lane_count = 1;
  CHECK_FALSE(validate(lanes).ok());

  DrivingScenario middle = testing::example_scenario();
  middle.map.ego_lane = LanePosition::Middle;
  middle.map.ego_lane_index = 4;  // rightmost index on a 4-lane road is not "middle"
  CHECK_FALSE(validate(middle).ok());
}

TEST_CASE("canonical JSON has the documented key order") {
  const std::string dump = canonical_string(testing::example_scenario());
  const std::size_t id_at = dump.find("\"id\"");
  const std::size_t map_at = dump.find("\"map\"");
  const std::size_t ego_at = dump.find("\"ego\"");
  const std::size_t neighbors_at = dump.find("\"neighbors\"");
  REQUIRE(id_at != std::string::npos);
  CHECK(id_at < map_at);
  CHECK(map_at < ego_at);
  CHECK(ego_at < neighbors_at);
}

TEST_CASE("canonical serialization round-trips the corpus") {
  SyntheticSpec spec;
  spec.size = 60;
  const auto corpus = generate_synthetic(spec, 11);
  for (const DrivingScenario& s : corpus) {
    const DrivingScenario back = scenario_from_json(json::parse(canonical_string(s)));
    CHECK(back == s);
    CHECK(canonical_string(back) == canonical_string(s));
  }
}

TEST_CASE("equal scenarios produce byte-identical canonical JSON") {
  const DrivingScenario a = testing::example_scenario();
  const DrivingScenario b = testing::example_scenario();
  REQUIRE(a == b);
  CHECK(canonical_string(a) == canonical_string(b));
}

TEST_CASE("corpus files hold one scenario per line") {
  SyntheticSpec spec;
  spec.size = 5;
  const auto corpus = generate_synthetic(spec, 3);
  std::ostringstream out;
  save_corpus(corpus, out);
  const std::string text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);

  std::istringstream in(text);
  const auto back = load_corpus(in);
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == corpus[i]);
}

TEST_CASE("duplicate neighbor directions are rejected at parse time") {
  json j = to_canonical_json(testing::example_scenario());
  j["neighbors"].push_back(j["neighbors"][0]);
  CHECK_THROWS_AS((void)scenario_from_json(j), std::invalid_argument);
}
