#include <doctest.h>

#include <set>

#include "defeat/predictor.hpp"
#include "helpers.hpp"

using namespace defeat;

TEST_CASE("surrogate keeps lane without a lateral motive") {
  DrivingScenario s = testing::example_scenario();
  s.ego.vy = 0.0;
  SurrogatePredictor surrogate;
  const PredictOutcome o = surrogate.predict(s);
  REQUIRE(o.ok());
  CHECK(o.result->intention == Intention::KL);
  for (const Vec2& p : o.result->trajectory) CHECK(p.y == 0.0);
}

TEST_CASE("surrogate calls the left change on the example scenario") {
  // v_y = 2.05 over the lateral threshold, left-front gap 103 >= 70,
  // left-rear gap 60 >= 30.
  SurrogatePredictor surrogate;
  const PredictOutcome o = surrogate.predict(testing::example_scenario());
  REQUIRE(o.ok());
  CHECK(o.result->intention == Intention::LC);
  CHECK(o.result->trajectory[3].y == doctest::Approx(3.5));
}

TEST_CASE("closing the left-front gap flips the call to keep-lane") {
  DrivingScenario s = testing::example_scenario();
  s.neighbors.at(Direction::LeftFront).distance = 62.0;  // below the 70 m acceptance gap
  SurrogatePredictor surrogate;
  const PredictOutcome o = surrogate.predict(s);
  REQUIRE(o.ok());
  CHECK(o.result->intention == Intention::KL);
}

TEST_CASE("a blocked left-rear gap also suppresses the change") {
  DrivingScenario s = testing::example_scenario();
  s.neighbors.at(Direction::LeftBehind).distance = 20.0;
  SurrogatePredictor surrogate;
  const PredictOutcome o = surrogate.predict(s);
  REQUIRE(o.ok());
  CHECK(o.result->intention == Intention::KL);
}

TEST_CASE("mirrored rule fires the right change") {
  DrivingScenario s = testing::example_scenario();
  s.ego.vy = -2.05;
  s.neighbors.clear();
  SurrogatePredictor surrogate;
  const PredictOutcome o = surrogate.predict(s);
  REQUIRE(o.ok());
  CHECK(o.result->intention == Intention::RC);
  CHECK(o.result->trajectory[3].y == doctest::Approx(-3.5));
}

TEST_CASE("a slow close lead vehicle triggers the overtaking motive") {
  DrivingScenario s = testing::example_scenario();
  s.ego.vy = 0.0;
  NeighborState front;
  front.direction = Direction::Front;
  front.speed_x = 60.0;  // ego 78.52 - 5 = 73.52 >= 60
  front.distance = 35.0;
  s.neighbors.emplace(front.direction, front);
  SurrogatePredictor surrogate;
  const PredictOutcome o = surrogate.predict(s);
  REQUIRE(o.ok());
  CHECK(o.result->intention == Intention::LC);

  // A fast lead vehicle does not.
  s.neighbors.at(Direction::Front).speed_x = 85.0;
  const PredictOutcome o2 = surrogate.predict(s);
  REQUIRE(o2.ok());
  CHECK(o2.result->intention == Intention::KL);
}

TEST_CASE("surrogate trajectory follows constant-acceleration extrapolation") {
  EgoState ego;
  ego.vx = 90.0;  // 25 m/s
  ego.ax = 0.0;
  ego.history = {{0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}};

  const auto straight = surrogate_trajectory(ego, Intention::KL);
  CHECK(straight[0] == Vec2{25.0, 0.0});
  CHECK(straight[1] == Vec2{50.0, 0.0});
  CHECK(straight[2] == Vec2{75.0, 0.0});
  CHECK(straight[3] == Vec2{100.0, 0.0});

  ego.ax = 1.0;
  const auto accelerating = surrogate_trajectory(ego, Intention::KL);
  CHECK(accelerating[0].x == doctest::Approx(25.5));
  CHECK(accelerating[1].x == doctest::Approx(52.0));
  CHECK(accelerating[2].x == doctest::Approx(79.5));
  CHECK(accelerating[3].x == doctest::Approx(108.0));

  const auto left = surrogate_trajectory(ego, Intention::LC, 3.5);
  CHECK(left[3].y == 3.5);  // ramp endpoint is exact
  CHECK(left[0].y > 0.0);
  CHECK(left[0].y < left[1].y);
}

TEST_CASE("surrogate is deterministic over repeated evaluations") {
  SurrogatePredictor surrogate;
  const DrivingScenario s = testing::example_scenario();
  const PredictOutcome first = surrogate.predict(s);
  REQUIRE(first.ok());
  for (int i = 0; i < 1000; ++i) {
    const PredictOutcome o = surrogate.predict(s);
    REQUIRE(o.ok());
    REQUIRE(*o.result == *first.result);
    REQUIRE(o.raw == first.raw);
  }
}

TEST_CASE("surrogate emits thought lines only in CoT mode") {
  SurrogatePredictor plain(PromptMode::Plain);
  SurrogatePredictor cot(PromptMode::CoT);
  const DrivingScenario s = testing::example_scenario();

  const PredictOutcome po = plain.predict(s);
  REQUIRE(po.ok());
  CHECK(po.result->thought.empty());

  const PredictOutcome co = cot.predict(s);
  REQUIRE(co.ok());
  REQUIRE_FALSE(co.result->thought.empty());
  CHECK(co.result->thought.front().find("v_y = 2.05") != std::string::npos);
  CHECK(co.raw.find("Thought:") != std::string::npos);
}

TEST_CASE("surrogate reads prompt-rounded values") {
  // Values that agree after two-decimal rounding must yield identical
  // predictions: the surrogate behaves as a function of the rendered prompt.
  DrivingScenario a = testing::example_scenario();
  DrivingScenario b = testing::example_scenario();
  a.neighbors.at(Direction::LeftFront).distance = 80.001;
  b.neighbors.at(Direction::LeftFront).distance = 80.004;
  REQUIRE(render_user(a) == render_user(b));
  SurrogatePredictor surrogate;
  CHECK(surrogate.predict(a).raw == surrogate.predict(b).raw);
}

TEST_CASE("cache answers identical queries with one inner call") {
  SurrogatePredictor surrogate;
  QueryLog log;
  CachingPredictor cache(surrogate, &log);
  const DrivingScenario s = testing::example_scenario();

  const PredictOutcome a = cache.predict(s);
  const PredictOutcome b = cache.predict(s);
  CHECK(cache.inner_calls() == 1);
  CHECK(a.raw == b.raw);
  CHECK(log.size() == 2);
  CHECK(log.billed() == 1);

  const auto records = log.snapshot();
  CHECK_FALSE(records[0].cache_hit);
  CHECK(records[1].cache_hit);
}

TEST_CASE("scenarios differing in one feature miss the cache") {
  SurrogatePredictor surrogate;
  CachingPredictor cache(surrogate);
  DrivingScenario a = testing::example_scenario();
  DrivingScenario b = testing::example_scenario();
  b.neighbors.at(Direction::LeftFront).distance = 95.0;

  (void)cache.predict(a);
  (void)cache.predict(b);
  CHECK(cache.inner_calls() == 2);
}

TEST_CASE("budget accounting: duplicates never reach the inner predictor") {
  SurrogatePredictor surrogate;
  QueryLog log;
  CachingPredictor cache(surrogate, &log);

  // 50 queries over 42 distinct scenarios: 8 are repeats.
  std::vector<DrivingScenario> queries;
  for (int i = 0; i < 42; ++i) {
    DrivingScenario s = testing::example_scenario();
    s.neighbors.at(Direction::LeftFront).distance = 100.0 + i;
    queries.push_back(s);
  }
  for (int i = 0; i < 8; ++i) queries.push_back(queries[static_cast<std::size_t>(i)]);

  std::set<std::string> distinct;
  for (const DrivingScenario& s : queries) {
    distinct.insert(canonical_string(s));
    (void)cache.predict(s);
  }
  CHECK(distinct.size() == 42);
  CHECK(cache.inner_calls() == 42);
  CHECK(log.size() == 50);
  CHECK(log.billed() == 42);
}

TEST_CASE("cache refuses non-deterministic predictors") {
  struct Flaky : Predictor {
    PredictOutcome predict(const DrivingScenario&) override { return {}; }
    PredictorCapabilities capabilities() const override { return {PromptMode::Plain, 1, false}; }
  };
  Flaky flaky;
  CHECK_THROWS_AS(CachingPredictor{flaky}, std::invalid_argument);
}
