#pragma once

// Scenario sources: extraction from highD-schema trajectory CSVs and a seeded
// synthetic generator for desk-scale corpora. Every produced scenario passes
// validate(); prompt-visible numbers are quantized to two decimals at
// ingestion so canonical serialization round-trips exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "defeat/format.hpp"
#include "defeat/predictor.hpp"
#include "defeat/rng.hpp"
#include "defeat/scenario.hpp"

namespace defeat {

// --- track loading -------------------------------------------------------------

struct TrackRecord {
  long frame = 0;  // 25 Hz
  long vehicle_id = 0;
  double x = 0.0;  // m, road frame
  double y = 0.0;
  double x_velocity = 0.0;  // m/s
  double y_velocity = 0.0;
  double x_acceleration = 0.0;  // m/s^2
  double y_acceleration = 0.0;
  int lane_id = 0;
  double width = 0.0;   // bounding box x extent (vehicle length)
  double height = 0.0;  // bounding box y extent (vehicle width)
};

struct Track {
  long vehicle_id = 0;
  std::vector<TrackRecord> records;  // strictly increasing frames
};

struct IngestError : std::runtime_error {
  enum class Kind { MissingColumn, NonMonotoneFrames, MalformedNumber };
  Kind kind;
  IngestError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  return cells;
}

}  // namespace detail

inline std::map<long, Track> load_tracks(std::istream& in) {
  static constexpr const char* kColumns[] = {"frame",      "id",          "x",
                                             "y",          "xVelocity",   "yVelocity",
                                             "xAcceleration", "yAcceleration", "laneId",
                                             "width",      "height"};
  std::string line;
  if (!std::getline(in, line)) {
    throw IngestError(IngestError::Kind::MissingColumn, "empty CSV: no header row");
  }
  const std::vector<std::string> header = detail::split_csv_row(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
  for (const char* col : kColumns) {
    if (!index.count(col)) {
      throw IngestError(IngestError::Kind::MissingColumn,
                        std::string("missing column: ") + col);
    }
  }

  std::map<long, Track> tracks;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = detail::split_csv_row(line);
    auto number = [&](const char* col) {
      const std::size_t i = index.at(col);
      double v = 0.0;
      if (i >= cells.size() || !parse_double(cells[i], v)) {
        throw IngestError(IngestError::Kind::MalformedNumber,
                          "row " + std::to_string(row_no) + ": malformed value for " + col);
      }
      return v;
    };
    TrackRecord r;
    r.frame = static_cast<long>(number("frame"));
    r.vehicle_id = static_cast<long>(number("id"));
    r.x = number("x");
    r.y = number("y");
    r.x_velocity = number("xVelocity");
    r.y_velocity = number("yVelocity");
    r.x_acceleration = number("xAcceleration");
    r.y_acceleration = number("yAcceleration");
    r.lane_id = static_cast<int>(number("laneId"));
    r.width = number("width");
    r.height = number("height");

    Track& t = tracks[r.vehicle_id];
    t.vehicle_id = r.vehicle_id;
    if (!t.records.empty() && r.frame <= t.records.back().frame) {
      throw IngestError(IngestError::Kind::NonMonotoneFrames,
                        "row " + std::to_string(row_no) + ": frames of vehicle " +
                            std::to_string(r.vehicle_id) + " are not strictly increasing");
    }
    t.records.push_back(r);
  }
  return tracks;
}

inline std::map<long, Track> load_tracks_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open CSV file: " + path);
  return load_tracks(in);
}

// --- scenario extraction ----------------------------------------------------------

struct ExtractionConfig {
  int frame_rate = 25;
  double history_window_s = 2.0;   // 6 history points at 0.4 s stride
  double history_stride_s = 0.4;
  double horizon_s = 4.0;          // 4 truth points at 1 s stride
  double horizon_stride_s = 1.0;
  double sensing_range_m = 200.0;

  // Lane geometry conventions differ between carriageways; both are flags.
  bool left_lane_decreasing = true;  // lane index decreases toward the left
  double lateral_sign = -1.0;        // road-frame y -> prompt frame (positive = left)
  double abeam_threshold_m = 5.0;    // |dx| below which an adjacent vehicle is abeam

  bool sliding_window = false;       // anchors at a fixed stride instead of one per event
  int window_stride_frames = 25;
};

struct ExtractionStats {
  long anchors_considered = 0;
  long skipped_insufficient_span = 0;
  long extracted = 0;
};

namespace detail {

struct FrameIndex {
  const Track* track;
  std::map<long, std::size_t> by_frame;
};

inline const TrackRecord* at_frame(const FrameIndex& fi, long frame) {
  auto it = fi.by_frame.find(frame);
  return it == fi.by_frame.end() ? nullptr : &fi.track->records[it->second];
}

inline VehicleKind classify_kind(const TrackRecord& r) {
  return r.width > 8.0 ? VehicleKind::Truck : VehicleKind::Car;  // box x extent
}

}  // namespace detail

inline std::vector<DrivingScenario> extract_scenarios(const std::map<long, Track>& tracks,
                                                      const ExtractionConfig& cfg,
                                                      ExtractionStats* stats = nullptr) {
  const int history_frames = static_cast<int>(std::lround(cfg.history_window_s * cfg.frame_rate));
  const int history_stride = static_cast<int>(std::lround(cfg.history_stride_s * cfg.frame_rate));
  const int horizon_frames = static_cast<int>(std::lround(cfg.horizon_s * cfg.frame_rate));
  const int horizon_stride = static_cast<int>(std::lround(cfg.horizon_stride_s * cfg.frame_rate));
  if (history_stride <= 0 || history_frames % history_stride != 0) {
    throw std::invalid_argument("history window must be a multiple of the history stride");
  }

  std::map<long, detail::FrameIndex> indexed;
  for (const auto& [id, track] : tracks) {
    detail::FrameIndex fi;
    fi.track = &track;
    for (std::size_t i = 0; i < track.records.size(); ++i) fi.by_frame[track.records[i].frame] = i;
    indexed.emplace(id, std::move(fi));
  }

  ExtractionStats local;
  std::vector<DrivingScenario> out;

  for (const auto& [ego_id, ego_track] : tracks) {
    if (ego_track.records.empty()) continue;

    // Driving direction per vehicle: normalize so the ego always drives +x.
    double mean_vx = 0.0;
    for (const TrackRecord& r : ego_track.records) mean_vx += r.x_velocity;
    mean_vx /= static_cast<double>(ego_track.records.size());
    const double drive_sign = mean_vx < 0.0 ? -1.0 : 1.0;

    // Candidate anchors: lane-change frames, or the track midpoint for a
    // lane-keeping vehicle; a sliding window covers the whole span instead.
    std::vector<long> anchors;
    if (cfg.sliding_window) {
      for (std::size_t i = 0; i < ego_track.records.size();
           i += static_cast<std::size_t>(std::max(cfg.window_stride_frames, 1))) {
        anchors.push_back(ego_track.records[i].frame);
      }
    } else {
      bool changed = false;
      for (std::size_t i = 1; i < ego_track.records.size(); ++i) {
        if (ego_track.records[i].lane_id != ego_track.records[i - 1].lane_id) {
          // Anchor one second before the lane-change frame so the change
          // falls inside the prediction horizon.
          anchors.push_back(ego_track.records[i].frame - cfg.frame_rate);
          changed = true;
        }
      }
      if (!changed) {
        anchors.push_back(ego_track.records[ego_track.records.size() / 2].frame);
      }
    }

    const detail::FrameIndex& ego_index = indexed.at(ego_id);
    for (long anchor : anchors) {
      ++local.anchors_considered;

      const TrackRecord* at_anchor = detail::at_frame(ego_index, anchor);
      bool span_ok = at_anchor != nullptr;
      for (int k = 0; span_ok && k <= history_frames / history_stride; ++k) {
        span_ok = detail::at_frame(ego_index, anchor - history_frames + k * history_stride) != nullptr;
      }
      for (int k = 1; span_ok && k <= horizon_frames / horizon_stride; ++k) {
        span_ok = detail::at_frame(ego_index, anchor + k * horizon_stride) != nullptr;
      }
      if (!span_ok) {
        ++local.skipped_insufficient_span;
        continue;
      }

      const auto to_prompt = [&](double road_x, double road_y) {
        return Vec2{round2((road_x - at_anchor->x) * drive_sign),
                    round2((road_y - at_anchor->y) * cfg.lateral_sign)};
      };

      DrivingScenario s;
      s.id = "track-" + std::to_string(ego_id) + "-f" + std::to_string(anchor);

      s.ego.vx = round2(std::abs(at_anchor->x_velocity) * 3.6);
      s.ego.vy = round2(at_anchor->y_velocity * cfg.lateral_sign * 3.6);
      s.ego.ax = round2(at_anchor->x_acceleration * drive_sign);
      s.ego.ay = round2(at_anchor->y_acceleration * cfg.lateral_sign);
      s.ego.kind = detail::classify_kind(*at_anchor);
      s.ego.length = round2(at_anchor->width);
      s.ego.width = round2(at_anchor->height);
      for (int k = 0; k <= history_frames / history_stride; ++k) {
        const TrackRecord* r =
            detail::at_frame(ego_index, anchor - history_frames + k * history_stride);
        s.ego.history.push_back(to_prompt(r->x, r->y));
      }

      // Lanes on the ego's carriageway.
      std::set<int> lane_ids;
      for (const auto& [other_id, other_track] : tracks) {
        double other_mean = 0.0;
        for (const TrackRecord& r : other_track.records) other_mean += r.x_velocity;
        if ((other_mean < 0.0 ? -1.0 : 1.0) == drive_sign) {
          for (const TrackRecord& r : other_track.records) lane_ids.insert(r.lane_id);
        }
      }
      lane_ids.insert(at_anchor->lane_id);
      s.map.lane_count = std::max<int>(2, static_cast<int>(lane_ids.size()));
      {
        std::vector<int> sorted(lane_ids.begin(), lane_ids.end());
        if (!cfg.left_lane_decreasing) std::reverse(sorted.begin(), sorted.end());
        const int rank = static_cast<int>(
            std::find(sorted.begin(), sorted.end(), at_anchor->lane_id) - sorted.begin() + 1);
        if (rank <= 1) {
          s.map.ego_lane = LanePosition::Leftmost;
        } else if (rank >= static_cast<int>(sorted.size())) {
          s.map.ego_lane = LanePosition::Rightmost;
        } else {
          s.map.ego_lane = LanePosition::Middle;
          s.map.ego_lane_index = rank;
        }
      }

      // Nearest vehicle per directional cell within the sensing range.
      std::map<Direction, std::pair<double, NeighborState>> best;
      for (const auto& [other_id, fi] : indexed) {
        if (other_id == ego_id) continue;
        const TrackRecord* o = detail::at_frame(fi, anchor);
        if (o == nullptr) continue;
        const double dist = std::hypot(o->x - at_anchor->x, o->y - at_anchor->y);
        if (dist <= 0.0 || dist > cfg.sensing_range_m) continue;

        const int lane_offset = cfg.left_lane_decreasing
                                    ? at_anchor->lane_id - o->lane_id
                                    : o->lane_id - at_anchor->lane_id;  // +1 = one lane left
        const double dx = (o->x - at_anchor->x) * drive_sign;
        std::optional<Direction> dir;
        if (lane_offset == 0) {
          if (dx > 0.0) dir = Direction::Front;
          else if (dx < 0.0) dir = Direction::Behind;
        } else if (lane_offset == 1) {
          if (std::abs(dx) <= cfg.abeam_threshold_m) dir = Direction::Left;
          else dir = dx > 0.0 ? Direction::LeftFront : Direction::LeftBehind;
        } else if (lane_offset == -1) {
          if (std::abs(dx) <= cfg.abeam_threshold_m) dir = Direction::Right;
          else dir = dx > 0.0 ? Direction::RightFront : Direction::RightBehind;
        }
        if (!dir) continue;

        auto it = best.find(*dir);
        if (it == best.end() || dist < it->second.first) {
          NeighborState n;
          n.direction = *dir;
          n.kind = detail::classify_kind(*o);
          n.speed_x = round2(o->x_velocity * drive_sign * 3.6);
          n.distance = round2(dist);
          best[*dir] = {dist, n};
        }
      }
      for (const auto& [dir, entry] : best) s.neighbors.emplace(dir, entry.second);

      // Truth label: first lane change inside the horizon decides LC/RC.
      GroundTruth truth;
      truth.intention = Intention::KL;
      for (long f = anchor + 1; f <= anchor + horizon_frames; ++f) {
        const TrackRecord* r = detail::at_frame(ego_index, f);
        if (r == nullptr || r->lane_id == at_anchor->lane_id) continue;
        const int offset = cfg.left_lane_decreasing ? at_anchor->lane_id - r->lane_id
                                                    : r->lane_id - at_anchor->lane_id;
        truth.intention = offset > 0 ? Intention::LC : Intention::RC;
        break;
      }
      for (int k = 1; k <= horizon_frames / horizon_stride; ++k) {
        const TrackRecord* r = detail::at_frame(ego_index, anchor + k * horizon_stride);
        truth.trajectory.push_back(to_prompt(r->x, r->y));
      }
      s.truth = std::move(truth);

      const Validation v = validate(s);
      if (!v.ok()) {
        throw std::logic_error("extracted scenario " + s.id +
                               " violates the data model: " + v.violations.front());
      }
      out.push_back(std::move(s));
      ++local.extracted;
    }
  }

  if (stats != nullptr) *stats = local;
  return out;
}

// --- synthetic corpus -----------------------------------------------------------

struct SyntheticSpec {
  int size = 100;
  double mix_kl = 0.4;
  double mix_lc = 0.3;
  double mix_rc = 0.3;
  // Fraction of scenarios holding a near-threshold left-front gap: the
  // surrogate's decision boundary sits within the default perturbation reach,
  // guaranteeing the attack has signal to find.
  double planted_fraction = 0.5;
};

namespace detail {

struct PlanEntry {
  Intention intention;
  bool planted;
};

inline NeighborState make_neighbor(Direction d, double dist_lo, double dist_hi, Rng& rng) {
  NeighborState n;
  n.direction = d;
  n.kind = rng.uniform01() < 0.15 ? VehicleKind::Truck : VehicleKind::Car;
  n.speed_x = round2(rng.uniform(60.0, 140.0));
  n.distance = round2(rng.uniform(dist_lo, dist_hi));
  return n;
}

}  // namespace detail

// Seeded generator; truths are computed by the surrogate itself so clean
// surrogate accuracy is exactly 100% and any degradation is attributable to
// the attack.
inline std::vector<DrivingScenario> generate_synthetic(const SyntheticSpec& spec,
                                                       std::uint64_t seed,
                                                       const SurrogateParams& params = {}) {
  if (spec.size <= 0) throw std::invalid_argument("corpus size must be positive");
  if (spec.mix_kl < 0.0 || spec.mix_lc < 0.0 || spec.mix_rc < 0.0 ||
      std::abs(spec.mix_kl + spec.mix_lc + spec.mix_rc - 1.0) > 1e-9) {
    throw std::invalid_argument("class mix must be non-negative and sum to 1");
  }
  const int n_kl = static_cast<int>(std::llround(spec.size * spec.mix_kl));
  const int n_lc = static_cast<int>(std::llround(spec.size * spec.mix_lc));
  const int n_rc = spec.size - n_kl - n_lc;
  if (n_rc < 0) throw std::invalid_argument("class mix does not fit the corpus size");

  int planted = static_cast<int>(std::llround(spec.size * spec.planted_fraction));
  if (planted > n_kl + n_lc) {
    throw std::invalid_argument("planted fraction exceeds the KL+LC capacity");
  }
  const int planted_lc = std::min(n_lc, (2 * planted) / 3);
  const int planted_kl = std::min(n_kl, planted - planted_lc);
  if (planted_lc + planted_kl < planted) {
    throw std::invalid_argument("planted fraction does not fit the class mix");
  }

  std::vector<detail::PlanEntry> plan;
  plan.reserve(static_cast<std::size_t>(spec.size));
  for (int i = 0; i < n_kl; ++i) plan.push_back({Intention::KL, i < planted_kl});
  for (int i = 0; i < n_lc; ++i) plan.push_back({Intention::LC, i < planted_lc});
  for (int i = 0; i < n_rc; ++i) plan.push_back({Intention::RC, false});

  Rng shuffle_rng(fnv1a64(seed));
  for (std::size_t i = plan.size(); i > 1; --i) {
    std::swap(plan[i - 1], plan[static_cast<std::size_t>(shuffle_rng.below(i))]);
  }

  SurrogatePredictor surrogate(PromptMode::Plain, params);
  std::vector<DrivingScenario> out;
  out.reserve(plan.size());

  for (std::size_t idx = 0; idx < plan.size(); ++idx) {
    const detail::PlanEntry entry = plan[idx];
    char id[32];
    std::snprintf(id, sizeof(id), "syn-%04zu", idx);
    Rng rng(derive_stream_seed(seed, id));

    DrivingScenario s;
    s.id = id;

    s.ego.vx = round2(rng.uniform(75.0, 130.0));
    s.ego.ax = round2(rng.uniform(-1.0, 2.0));
    s.ego.ay = round2(rng.uniform(-0.3, 0.3));
    switch (entry.intention) {
      case Intention::KL:
        s.ego.vy = entry.planted ? round2(rng.uniform(1.3, 2.5))
                                 : round2(rng.uniform(-0.6, 0.6));
        break;
      case Intention::LC: s.ego.vy = round2(rng.uniform(1.3, 3.0)); break;
      case Intention::RC: s.ego.vy = round2(rng.uniform(-3.0, -1.3)); break;
    }
    if (rng.uniform01() < 0.15) {
      s.ego.kind = VehicleKind::Truck;
      s.ego.width = round2(rng.uniform(2.4, 2.55));
      s.ego.length = round2(rng.uniform(8.0, 14.0));
    } else {
      s.ego.kind = VehicleKind::Car;
      s.ego.width = round2(rng.uniform(1.8, 2.1));
      s.ego.length = round2(rng.uniform(4.2, 5.1));
    }
    const double vx_ms = s.ego.vx / 3.6;
    const double vy_ms = s.ego.vy / 3.6;
    for (int k = 5; k >= 0; --k) {
      const double tau = 0.4 * k;
      s.ego.history.push_back(
          {round2(-vx_ms * tau + 0.5 * s.ego.ax * tau * tau), round2(-vy_ms * tau)});
    }

    s.map.lane_count = 3 + rng.below_int(3);
    const bool needs_left = entry.intention == Intention::LC ||
                            (entry.intention == Intention::KL && entry.planted);
    const bool needs_right = entry.intention == Intention::RC;
    if (needs_left) {
      if (rng.uniform01() < 0.6) {
        s.map.ego_lane = LanePosition::Rightmost;
      } else {
        s.map.ego_lane = LanePosition::Middle;
        s.map.ego_lane_index = 2 + rng.below_int(s.map.lane_count - 2);
      }
    } else if (needs_right) {
      if (rng.uniform01() < 0.6) {
        s.map.ego_lane = LanePosition::Leftmost;
      } else {
        s.map.ego_lane = LanePosition::Middle;
        s.map.ego_lane_index = 2 + rng.below_int(s.map.lane_count - 2);
      }
    } else {
      const int rank = 1 + rng.below_int(s.map.lane_count);
      if (rank == 1) {
        s.map.ego_lane = LanePosition::Leftmost;
      } else if (rank == s.map.lane_count) {
        s.map.ego_lane = LanePosition::Rightmost;
      } else {
        s.map.ego_lane = LanePosition::Middle;
        s.map.ego_lane_index = rank;
      }
    }

    // Gap layout per class. Robust scenarios keep every rule-relevant gap far
    // enough from its threshold that no within-budget perturbation can cross
    // it; planted scenarios put the left-front gap just across the boundary.
    const auto add = [&s](NeighborState n) { s.neighbors.emplace(n.direction, n); };
    switch (entry.intention) {
      case Intention::LC:
        if (entry.planted) {
          add(detail::make_neighbor(Direction::LeftFront, 71.0, 73.5, rng));
          add(detail::make_neighbor(Direction::LeftBehind, 50.0, 150.0, rng));
        } else {
          if (rng.uniform01() < 0.7) add(detail::make_neighbor(Direction::LeftFront, 78.0, 190.0, rng));
          if (rng.uniform01() < 0.7) add(detail::make_neighbor(Direction::LeftBehind, 50.0, 150.0, rng));
          if (rng.uniform01() < 0.5) add(detail::make_neighbor(Direction::Front, 70.0, 190.0, rng));
          if (rng.uniform01() < 0.4) add(detail::make_neighbor(Direction::RightFront, 40.0, 190.0, rng));
          if (rng.uniform01() < 0.3) add(detail::make_neighbor(Direction::Behind, 40.0, 190.0, rng));
        }
        break;
      case Intention::KL:
        if (entry.planted) {
          add(detail::make_neighbor(Direction::LeftFront, 66.5, 68.0, rng));
          add(detail::make_neighbor(Direction::LeftBehind, 50.0, 150.0, rng));
        } else {
          if (rng.uniform01() < 0.6) add(detail::make_neighbor(Direction::Front, 70.0, 190.0, rng));
          if (rng.uniform01() < 0.5) add(detail::make_neighbor(Direction::LeftFront, 40.0, 190.0, rng));
          if (rng.uniform01() < 0.4) add(detail::make_neighbor(Direction::RightBehind, 40.0, 190.0, rng));
          if (rng.uniform01() < 0.4) add(detail::make_neighbor(Direction::Left, 20.0, 190.0, rng));
          if (rng.uniform01() < 0.3) add(detail::make_neighbor(Direction::Behind, 40.0, 190.0, rng));
        }
        break;
      case Intention::RC:
        if (rng.uniform01() < 0.7) add(detail::make_neighbor(Direction::RightFront, 78.0, 190.0, rng));
        if (rng.uniform01() < 0.7) add(detail::make_neighbor(Direction::RightBehind, 50.0, 150.0, rng));
        if (rng.uniform01() < 0.5) add(detail::make_neighbor(Direction::Front, 70.0, 190.0, rng));
        if (rng.uniform01() < 0.3) add(detail::make_neighbor(Direction::LeftFront, 40.0, 190.0, rng));
        break;
    }
    if (s.neighbors.empty()) {
      // Every generated scenario offers at least one attackable feature.
      add(detail::make_neighbor(Direction::Behind, 40.0, 190.0, rng));
    }

    SurrogatePredictor scorer(PromptMode::Plain, params);
    const PredictOutcome labeled = scorer.predict(s);
    if (!labeled.ok() || labeled.result->intention != entry.intention) {
      throw std::logic_error("synthetic generator produced a scenario off its target class: " +
                             s.id);
    }
    GroundTruth truth;
    truth.intention = labeled.result->intention;
    truth.trajectory.assign(labeled.result->trajectory.begin(), labeled.result->trajectory.end());
    s.truth = std::move(truth);

    const Validation v = validate(s);
    if (!v.ok()) {
      throw std::logic_error("synthetic generator produced an invalid scenario: " +
                             v.violations.front());
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace defeat
