#include <doctest.h>

#include <map>
#include <sstream>

#include "defeat/ingest.hpp"
#include "helpers.hpp"

using namespace defeat;

namespace {

constexpr const char* kHeader =
    "frame,id,x,y,xVelocity,yVelocity,xAcceleration,yAcceleration,laneId,width,height\n";

struct VehicleSpec {
  long id;
  double x0;
  double y;
  double speed;  // m/s
  int lane;
  long lane_change_frame = 0;  // 0: none
  int lane_after = 0;
};

// Constant-velocity tracks over [1, frames], 25 Hz, one row per frame.
std::string synth_csv(const std::vector<VehicleSpec>& vehicles, long frames) {
  std::ostringstream out;
  out << kHeader;
  for (long f = 1; f <= frames; ++f) {
    for (const VehicleSpec& v : vehicles) {
      const int lane = (v.lane_change_frame != 0 && f >= v.lane_change_frame) ? v.lane_after : v.lane;
      out << f << "," << v.id << "," << (v.x0 + v.speed * static_cast<double>(f - 1) / 25.0)
          << "," << v.y << "," << v.speed << ",0,0,0," << lane << ",4.5,2.0\n";
    }
  }
  return out.str();
}

const DrivingScenario* find_scenario(const std::vector<DrivingScenario>& corpus,
                                     const std::string& id) {
  for (const DrivingScenario& s : corpus) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("a well-formed CSV loads into frame-sorted tracks") {
  std::istringstream in(synth_csv({{1, 0.0, 5.0, 25.0, 2}}, 10));
  const auto tracks = load_tracks(in);
  REQUIRE(tracks.size() == 1);
  REQUIRE(tracks.at(1).records.size() == 10);
  CHECK(tracks.at(1).records.front().frame == 1);
  CHECK(tracks.at(1).records.back().frame == 10);
  CHECK(tracks.at(1).records[3].x == doctest::Approx(3.0));
}

TEST_CASE("a missing column is reported by name") {
  std::istringstream in(
      "frame,id,x,y,xVelocity,yVelocity,xAcceleration,yAcceleration,width,height\n"
      "1,1,0,0,25,0,0,0,4.5,2.0\n");
  try {
    (void)load_tracks(in);
    FAIL("expected MissingColumn");
  } catch (const IngestError& e) {
    CHECK(e.kind == IngestError::Kind::MissingColumn);
    CHECK(std::string(e.what()).find("laneId") != std::string::npos);
  }
}

TEST_CASE("shuffled frames raise NonMonotoneFrames") {
  std::string csv = kHeader;
  csv += "2,1,1,5,25,0,0,0,2,4.5,2.0\n";
  csv += "1,1,0,5,25,0,0,0,2,4.5,2.0\n";
  std::istringstream in(csv);
  try {
    (void)load_tracks(in);
    FAIL("expected NonMonotoneFrames");
  } catch (const IngestError& e) {
    CHECK(e.kind == IngestError::Kind::NonMonotoneFrames);
  }
}

TEST_CASE("a malformed number is reported with its row") {
  std::string csv = kHeader;
  csv += "1,1,0,5,25,0,0,0,2,4.5,2.0\n";
  csv += "2,1,abc,5,25,0,0,0,2,4.5,2.0\n";
  std::istringstream in(csv);
  try {
    (void)load_tracks(in);
    FAIL("expected MalformedNumber");
  } catch (const IngestError& e) {
    CHECK(e.kind == IngestError::Kind::MalformedNumber);
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("a constant-velocity lane keeper extracts analytic waypoints") {
  std::istringstream in(synth_csv({{1, 100.0, 5.0, 25.0, 2}}, 250));
  const auto tracks = load_tracks(in);
  ExtractionConfig cfg;
  ExtractionStats stats;
  const auto corpus = extract_scenarios(tracks, cfg, &stats);
  REQUIRE(corpus.size() == 1);
  CHECK(stats.extracted == 1);

  const DrivingScenario& s = corpus.front();
  CHECK(validate(s).ok());
  REQUIRE(s.truth.has_value());
  CHECK(s.truth->intention == Intention::KL);
  CHECK(s.truth->trajectory[0] == Vec2{25.0, 0.0});
  CHECK(s.truth->trajectory[1] == Vec2{50.0, 0.0});
  CHECK(s.truth->trajectory[2] == Vec2{75.0, 0.0});
  CHECK(s.truth->trajectory[3] == Vec2{100.0, 0.0});

  REQUIRE(s.ego.history.size() == 6);
  CHECK(s.ego.history.back() == Vec2{0.0, 0.0});
  CHECK(s.ego.history.front() == Vec2{-50.0, 0.0});
  CHECK(s.ego.vx == doctest::Approx(90.0));  // 25 m/s
}

TEST_CASE("a lane decrement inside the horizon labels a left change") {
  std::istringstream in(synth_csv({{1, 100.0, 9.0, 25.0, 3, 140, 2}}, 250));
  const auto tracks = load_tracks(in);
  const auto corpus = extract_scenarios(tracks, ExtractionConfig{});
  REQUIRE(corpus.size() == 1);
  CHECK(corpus.front().truth->intention == Intention::LC);
  // Anchored one second before the change: the lane-change frame sits inside
  // the four-second horizon.
  CHECK(corpus.front().id == "track-1-f115");
}

TEST_CASE("a lane increment labels a right change under the default convention") {
  std::istringstream in(synth_csv({{1, 100.0, 9.0, 25.0, 3, 140, 4}}, 250));
  const auto tracks = load_tracks(in);
  const auto corpus = extract_scenarios(tracks, ExtractionConfig{});
  REQUIRE(corpus.size() == 1);
  CHECK(corpus.front().truth->intention == Intention::RC);
}

TEST_CASE("neighbors resolve to directional cells within the sensing range") {
  const std::vector<VehicleSpec> vehicles = {
      {1, 500.0, 5.0, 25.0, 2},   // ego
      {2, 530.0, 5.0, 25.0, 2},   // 30 m ahead, same lane
      {3, 550.0, 1.0, 26.0, 1},   // 50 m ahead, one lane left
      {4, 710.0, 5.0, 25.0, 2},   // 210 m ahead: outside the sensing range
      {5, 470.0, 5.0, 24.0, 2},   // 30 m behind, same lane
  };
  std::istringstream in(synth_csv(vehicles, 250));
  const auto tracks = load_tracks(in);
  const auto corpus = extract_scenarios(tracks, ExtractionConfig{});
  const DrivingScenario* ego = find_scenario(corpus, "track-1-f126");
  REQUIRE(ego != nullptr);

  REQUIRE(ego->neighbor(Direction::Front) != nullptr);
  CHECK(ego->neighbor(Direction::Front)->distance == doctest::Approx(30.0));
  CHECK(ego->neighbor(Direction::Front)->speed_x == doctest::Approx(90.0));

  // Vehicle 3 runs 1 m/s faster: by the anchor frame (125 frames in) it has
  // drifted 5 m further ahead of the ego.
  REQUIRE(ego->neighbor(Direction::LeftFront) != nullptr);
  CHECK(ego->neighbor(Direction::LeftFront)->distance ==
        doctest::Approx(std::hypot(55.0, 4.0)).epsilon(1e-3));

  REQUIRE(ego->neighbor(Direction::Behind) != nullptr);

  // Vehicle 4 is 210 m away: no right/other cells, and front picked the
  // nearest candidate.
  CHECK(ego->neighbor(Direction::RightFront) == nullptr);
  for (const auto& [dir, n] : ego->neighbors) CHECK(n.distance <= 200.0);
}

TEST_CASE("the nearest vehicle wins a contested cell") {
  const std::vector<VehicleSpec> vehicles = {
      {1, 500.0, 5.0, 25.0, 2},
      {2, 560.0, 5.0, 25.0, 2},  // 60 m ahead
      {3, 530.0, 5.0, 25.0, 2},  // 30 m ahead: nearer
  };
  std::istringstream in(synth_csv(vehicles, 250));
  const auto tracks = load_tracks(in);
  const auto corpus = extract_scenarios(tracks, ExtractionConfig{});
  const DrivingScenario* ego = find_scenario(corpus, "track-1-f126");
  REQUIRE(ego != nullptr);
  REQUIRE(ego->neighbor(Direction::Front) != nullptr);
  CHECK(ego->neighbor(Direction::Front)->distance == doctest::Approx(30.0));
}

TEST_CASE("anchors without the full span are skipped and counted") {
  std::istringstream in(synth_csv({{1, 0.0, 5.0, 25.0, 2}}, 60));  // too short for 2s+4s
  const auto tracks = load_tracks(in);
  ExtractionStats stats;
  const auto corpus = extract_scenarios(tracks, ExtractionConfig{}, &stats);
  CHECK(corpus.empty());
  CHECK(stats.skipped_insufficient_span == 1);
}

TEST_CASE("sliding-window extraction yields multiple anchors per vehicle") {
  std::istringstream in(synth_csv({{1, 0.0, 5.0, 25.0, 2}}, 400));
  const auto tracks = load_tracks(in);
  ExtractionConfig cfg;
  cfg.sliding_window = true;
  cfg.window_stride_frames = 50;
  const auto corpus = extract_scenarios(tracks, cfg);
  CHECK(corpus.size() > 1);
  for (const DrivingScenario& s : corpus) CHECK(validate(s).ok());
}

TEST_CASE("synthetic corpus: seeded determinism") {
  SyntheticSpec spec;
  spec.size = 100;
  const auto a = generate_synthetic(spec, 7);
  const auto b = generate_synthetic(spec, 7);
  REQUIRE(a.size() == 100);
  REQUIRE(b.size() == 100);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(canonical_string(a[i]) == canonical_string(b[i]));
  }
  const auto c = generate_synthetic(spec, 8);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    any_diff |= canonical_string(a[i]) != canonical_string(c[i]);
  }
  CHECK(any_diff);
}

TEST_CASE("synthetic corpus: exact class mix on round sizes") {
  SyntheticSpec spec;
  spec.size = 100;
  spec.mix_kl = 0.4;
  spec.mix_lc = 0.3;
  spec.mix_rc = 0.3;
  const auto corpus = generate_synthetic(spec, 7);
  std::map<Intention, int> counts;
  for (const DrivingScenario& s : corpus) ++counts[s.truth->intention];
  CHECK(counts[Intention::KL] == 40);
  CHECK(counts[Intention::LC] == 30);
  CHECK(counts[Intention::RC] == 30);
}

TEST_CASE("synthetic corpus: every scenario passes validation") {
  SyntheticSpec spec;
  spec.size = 100;
  const auto corpus = generate_synthetic(spec, 13);
  for (const DrivingScenario& s : corpus) {
    CHECK(validate(s).ok());
    REQUIRE(s.truth.has_value());
    CHECK(s.truth->trajectory.size() == 4);
  }
}

TEST_CASE("synthetic corpus: planted scenarios carry a grid-discoverable flip") {
  SyntheticSpec spec;
  spec.size = 100;
  spec.planted_fraction = 0.5;
  const auto corpus = generate_synthetic(spec, 7);

  SurrogatePredictor surrogate;
  int flippable = 0;
  for (const DrivingScenario& s : corpus) {
    const auto grid = testing::grid_search(s, *s.truth, surrogate, 0.1);
    if (grid.best_fitness > grid.clean_fitness && grid.flips_intention) ++flippable;
  }
  CHECK(flippable >= 50);
}

TEST_CASE("synthetic corpus: clean surrogate accuracy is exactly 100%") {
  SyntheticSpec spec;
  spec.size = 60;
  const auto corpus = generate_synthetic(spec, 29);
  SurrogatePredictor surrogate;
  for (const DrivingScenario& s : corpus) {
    const PredictOutcome o = surrogate.predict(s);
    REQUIRE(o.ok());
    CHECK(o.result->intention == s.truth->intention);
    for (std::size_t t = 0; t < 4; ++t) CHECK(o.result->trajectory[t] == s.truth->trajectory[t]);
  }
}

TEST_CASE("synthetic corpus: invalid specs are rejected") {
  SyntheticSpec bad_mix;
  bad_mix.mix_kl = 0.9;
  CHECK_THROWS_AS((void)generate_synthetic(bad_mix, 1), std::invalid_argument);

  SyntheticSpec bad_planted;
  bad_planted.planted_fraction = 0.9;  // exceeds KL+LC capacity
  CHECK_THROWS_AS((void)generate_synthetic(bad_planted, 1), std::invalid_argument);
}
