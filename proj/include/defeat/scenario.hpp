#pragma once

// Driving-scene data model: map info, ego state, up to eight directional
// neighbors, optional ground truth. All types are immutable value objects and
// safe to share across threads. Scenarios serialize to a canonical JSON form
// with a stable key order; corpora are stored one scenario per line (.jsonl).

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "defeat/format.hpp"
#include "defeat/rng.hpp"

namespace defeat {

using json = nlohmann::ordered_json;

enum class VehicleKind { Car, Truck };

// Integer codes are fixed and never reassigned.
enum class Intention : int { KL = 0, LC = 1, RC = 2 };

enum class Direction : int {
  Front = 0,
  Behind,
  Left,
  Right,
  LeftFront,
  LeftBehind,
  RightFront,
  RightBehind,
};

inline constexpr std::array<Direction, 8> kDirectionOrder = {
    Direction::Front,     Direction::Behind,     Direction::Left,       Direction::Right,
    Direction::LeftFront, Direction::LeftBehind, Direction::RightFront, Direction::RightBehind,
};

inline const char* to_string(VehicleKind k) {
  return k == VehicleKind::Car ? "Car" : "Truck";
}

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::Front: return "front";
    case Direction::Behind: return "behind";
    case Direction::Left: return "left";
    case Direction::Right: return "right";
    case Direction::LeftFront: return "left_front";
    case Direction::LeftBehind: return "left_behind";
    case Direction::RightFront: return "right_front";
    case Direction::RightBehind: return "right_behind";
  }
  return "?";
}

inline const char* intention_name(Intention i) {
  switch (i) {
    case Intention::KL: return "KL";
    case Intention::LC: return "LC";
    case Intention::RC: return "RC";
  }
  return "?";
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

struct EgoState {
  double vx = 0.0;  // km/h, as rendered in prompts
  double vy = 0.0;  // km/h
  double ax = 0.0;  // m/s^2
  double ay = 0.0;  // m/s^2
  VehicleKind kind = VehicleKind::Car;
  double width = 2.0;   // m
  double length = 4.5;  // m
  // Exactly 6 points, 0.4 s apart, ego-centered, newest last at (0, 0).
  std::vector<Vec2> history;
  bool operator==(const EgoState&) const = default;
};

struct NeighborState {
  Direction direction = Direction::Front;
  VehicleKind kind = VehicleKind::Car;
  double speed_x = 0.0;   // km/h
  double distance = 0.0;  // m, within the (0, 200] sensing range
  bool operator==(const NeighborState&) const = default;
};

enum class LanePosition { Leftmost, Rightmost, Middle };

struct MapInfo {
  int lane_count = 2;
  LanePosition ego_lane = LanePosition::Rightmost;
  int ego_lane_index = 0;  // 1-based from the left; meaningful only for Middle
  bool operator==(const MapInfo&) const = default;
};

struct GroundTruth {
  Intention intention = Intention::KL;
  std::vector<Vec2> trajectory;  // exactly 4 waypoints at t = 1, 2, 3, 4 s
  bool operator==(const GroundTruth&) const = default;
};

struct PredictionResult {
  Intention intention = Intention::KL;
  std::array<Vec2, 4> trajectory{};
  std::vector<std::string> thought;  // CoT mode only; empty otherwise
  bool operator==(const PredictionResult&) const = default;
};

struct DrivingScenario {
  std::string id;
  MapInfo map;
  EgoState ego;
  std::map<Direction, NeighborState> neighbors;  // keyed by direction: at most one each
  std::optional<GroundTruth> truth;
  bool operator==(const DrivingScenario&) const = default;

  const NeighborState* neighbor(Direction d) const {
    auto it = neighbors.find(d);
    return it == neighbors.end() ? nullptr : &it->second;
  }
};

struct Validation {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

inline Validation validate(const DrivingScenario& s) {
  Validation v;
  auto fail = [&v](const std::string& msg) { v.violations.push_back(msg); };

  if (s.ego.history.size() != 6) {
    fail("ego.history: length != 6 (one point every 0.4 s over 2 s)");
  } else if (s.ego.history.back() != Vec2{0.0, 0.0}) {
    fail("ego.history: last point must be the ego origin (0, 0)");
  }
  if (!(s.ego.width > 0.0)) fail("ego.width: must be positive");
  if (!(s.ego.length > 0.0)) fail("ego.length: must be positive");

  for (const auto& [dir, n] : s.neighbors) {
    const std::string base = std::string("neighbors.") + to_string(dir);
    if (n.direction != dir) fail(base + ".direction: inconsistent with map key");
    if (!(n.distance > 0.0)) fail(base + ".distance: must be positive");
    if (n.distance > 200.0) fail(base + ".distance: exceeds 200 m sensing range");
  }

  if (s.map.lane_count < 2) fail("map.lane_count: must be >= 2");
  if (s.map.ego_lane == LanePosition::Middle) {
    if (s.map.lane_count < 3) {
      fail("map.ego_lane: middle lane requires lane_count >= 3");
    } else if (s.map.ego_lane_index < 2 || s.map.ego_lane_index > s.map.lane_count - 1) {
      fail("map.ego_lane_index: middle index out of range");
    }
  }

  if (s.truth && s.truth->trajectory.size() != 4) {
    fail("truth.trajectory: must hold exactly 4 waypoints");
  }
  return v;
}

// --- canonical JSON -------------------------------------------------------

namespace detail {

inline json vec2_json(const Vec2& p) {
  return json::array({round2(p.x), round2(p.y)});
}

inline Vec2 vec2_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected [x, y] pair");
  return Vec2{j[0].get<double>(), j[1].get<double>()};
}

inline Direction direction_from(const std::string& name) {
  for (Direction d : kDirectionOrder) {
    if (name == to_string(d)) return d;
  }
  throw std::invalid_argument("unknown direction: " + name);
}

inline VehicleKind kind_from(const std::string& name) {
  if (name == "Car") return VehicleKind::Car;
  if (name == "Truck") return VehicleKind::Truck;
  throw std::invalid_argument("unknown vehicle kind: " + name);
}

inline Intention intention_from(int code) {
  if (code < 0 || code > 2) throw std::invalid_argument("intention code out of range");
  return static_cast<Intention>(code);
}

}  // namespace detail

// Stable key order, prompt-visible numbers rounded to two decimals. Equal
// scenarios dump byte-identical text.
inline json to_canonical_json(const DrivingScenario& s) {
  json j;
  j["id"] = s.id;

  json map;
  map["lane_count"] = s.map.lane_count;
  switch (s.map.ego_lane) {
    case LanePosition::Leftmost: map["ego_lane"] = "leftmost"; break;
    case LanePosition::Rightmost: map["ego_lane"] = "rightmost"; break;
    case LanePosition::Middle: map["ego_lane"] = s.map.ego_lane_index; break;
  }
  j["map"] = std::move(map);

  json ego;
  ego["vx"] = round2(s.ego.vx);
  ego["vy"] = round2(s.ego.vy);
  ego["ax"] = round2(s.ego.ax);
  ego["ay"] = round2(s.ego.ay);
  ego["kind"] = to_string(s.ego.kind);
  ego["width"] = round2(s.ego.width);
  ego["length"] = round2(s.ego.length);
  json hist = json::array();
  for (const Vec2& p : s.ego.history) hist.push_back(detail::vec2_json(p));
  ego["history"] = std::move(hist);
  j["ego"] = std::move(ego);

  json neighbors = json::array();
  for (Direction d : kDirectionOrder) {
    if (const NeighborState* n = s.neighbor(d)) {
      json nj;
      nj["direction"] = to_string(d);
      nj["kind"] = to_string(n->kind);
      nj["speed_x"] = round2(n->speed_x);
      nj["distance"] = round2(n->distance);
      neighbors.push_back(std::move(nj));
    }
  }
  j["neighbors"] = std::move(neighbors);

  if (s.truth) {
    json t;
    t["intention"] = static_cast<int>(s.truth->intention);
    json traj = json::array();
    for (const Vec2& p : s.truth->trajectory) traj.push_back(detail::vec2_json(p));
    t["trajectory"] = std::move(traj);
    j["truth"] = std::move(t);
  }
  return j;
}

inline std::string canonical_string(const DrivingScenario& s) {
  return to_canonical_json(s).dump();
}

inline std::uint64_t scenario_hash(const DrivingScenario& s) {
  return fnv1a64(canonical_string(s));
}

inline DrivingScenario scenario_from_json(const json& j) {
  DrivingScenario s;
  s.id = j.at("id").get<std::string>();

  const json& map = j.at("map");
  s.map.lane_count = map.at("lane_count").get<int>();
  const json& lane = map.at("ego_lane");
  if (lane.is_string()) {
    const std::string text = lane.get<std::string>();
    if (text == "leftmost") {
      s.map.ego_lane = LanePosition::Leftmost;
    } else if (text == "rightmost") {
      s.map.ego_lane = LanePosition::Rightmost;
    } else {
      throw std::invalid_argument("unknown ego_lane: " + text);
    }
  } else {
    s.map.ego_lane = LanePosition::Middle;
    s.map.ego_lane_index = lane.get<int>();
  }

  const json& ego = j.at("ego");
  s.ego.vx = ego.at("vx").get<double>();
  s.ego.vy = ego.at("vy").get<double>();
  s.ego.ax = ego.at("ax").get<double>();
  s.ego.ay = ego.at("ay").get<double>();
  s.ego.kind = detail::kind_from(ego.at("kind").get<std::string>());
  s.ego.width = ego.at("width").get<double>();
  s.ego.length = ego.at("length").get<double>();
  for (const json& p : ego.at("history")) s.ego.history.push_back(detail::vec2_from(p));

  for (const json& nj : j.at("neighbors")) {
    NeighborState n;
    n.direction = detail::direction_from(nj.at("direction").get<std::string>());
    n.kind = detail::kind_from(nj.at("kind").get<std::string>());
    n.speed_x = nj.at("speed_x").get<double>();
    n.distance = nj.at("distance").get<double>();
    if (s.neighbors.count(n.direction)) {
      throw std::invalid_argument(std::string("duplicate neighbor direction: ") +
                                  to_string(n.direction));
    }
    s.neighbors.emplace(n.direction, n);
  }

  if (j.contains("truth")) {
    GroundTruth t;
    t.intention = detail::intention_from(j.at("truth").at("intention").get<int>());
    for (const json& p : j.at("truth").at("trajectory")) t.trajectory.push_back(detail::vec2_from(p));
    s.truth = std::move(t);
  }
  return s;
}

// --- corpus IO (.jsonl, one scenario per line) ------------------------------

inline std::vector<DrivingScenario> load_corpus(std::istream& in) {
  std::vector<DrivingScenario> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(scenario_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<DrivingScenario> load_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open corpus file: " + path);
  return load_corpus(in);
}

inline void save_corpus(const std::vector<DrivingScenario>& corpus, std::ostream& out) {
  for (const DrivingScenario& s : corpus) out << canonical_string(s) << '\n';
}

inline void save_corpus_file(const std::vector<DrivingScenario>& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open output file: " + path);
  save_corpus(corpus, out);
}

}  // namespace defeat
