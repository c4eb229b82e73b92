#pragma once

// Renders scenarios into the predictor's system/user messages (plain and CoT
// variants) and parses predictor responses back into structured results. All
// functions are pure; equal scenarios render identical bytes.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "defeat/format.hpp"
#include "defeat/scenario.hpp"

namespace defeat {

enum class PromptMode { Plain, CoT };

struct PromptPair {
  std::string system;
  std::string user;
};

inline const char* prompt_direction_label(Direction d) {
  switch (d) {
    case Direction::Front: return "Front";
    case Direction::Behind: return "Rear";
    case Direction::Left: return "Left";
    case Direction::Right: return "Right";
    case Direction::LeftFront: return "Left front";
    case Direction::LeftBehind: return "Left rear";
    case Direction::RightFront: return "Right front";
    case Direction::RightBehind: return "Right rear";
  }
  return "?";
}

inline const char* intention_label(Intention i) {
  switch (i) {
    case Intention::KL: return "Keep lane";
    case Intention::LC: return "Left lane change";
    case Intention::RC: return "Right lane change";
  }
  return "?";
}

inline constexpr std::string_view kSystemTemplate =
    "Role: You are an expert driving prediction model of an autonomous driving system, "
    "that can predict the future driving intention and future 4-second driving trajectory "
    "for a given ego vehicle, avoiding collision with other vehicles and obstacles on the "
    "road.\n"
    "Context:\n"
    "- Coordinates:\n"
    "Y-axis is perpendicular, and X-axis is parallel to the direction ego vehicle is "
    "facing. Ego vehicle’s current position is (0,0). Positive values on the y-axis "
    "represent the left side of the ego vehicle, and negative values on the y-axis "
    "represent the right side of the vehicle.\n"
    "- Output:\n"
    " - Final Answer:\n"
    "Intention: 0 (Keep lane), 1 (Left lane change), 2 (Right lane change). The final "
    "answer should be one of the three modes.";

inline constexpr std::string_view kCotRequirement =
    "\n - Thought:\n"
    "Before the final answer, give the reasoning leading to it: the notable features of "
    "the scene and the potential behavior they suggest (Notable features; Potential "
    "behavior).";

inline std::string render_system(PromptMode mode) {
  std::string out(kSystemTemplate);
  if (mode == PromptMode::CoT) out += kCotRequirement;
  return out;
}

namespace detail {

// History coordinates print with two decimals; an exact zero prints as "0.0",
// matching the pinned ego origin.
inline std::string history_coord(double v) {
  const double r = round2(v);
  return r == 0.0 ? std::string("0.0") : fmt2(r);
}

inline std::string lane_phrase(const MapInfo& map) {
  switch (map.ego_lane) {
    case LanePosition::Leftmost: return "leftmost";
    case LanePosition::Rightmost: return "rightmost";
    case LanePosition::Middle: return ordinal(map.ego_lane_index) + " from the left";
  }
  return "?";
}

}  // namespace detail

inline std::string render_user(const DrivingScenario& s) {
  std::string out;
  out += "The ego vehicle is driving on a " + number_word(s.map.lane_count) +
         "-lane highway, located at the " + detail::lane_phrase(s.map) + " lane.\n\n";

  out += "- The information of ego vehicle is as follow:\n";
  out += " - Velocity(km/h): v_x=" + fmt2(round2(s.ego.vx)) + ", v_y=" + fmt2(round2(s.ego.vy)) + ";\n";
  out += " - Acceleration(m/s^2): a_x=" + fmt2(round2(s.ego.ax)) + ", a_y=" + fmt2(round2(s.ego.ay)) + ";\n";
  out += " - Type: " + std::string(to_string(s.ego.kind)) + ", with width of " +
         fmt2(round2(s.ego.width)) + " m and length of " + fmt2(round2(s.ego.length)) + " m;\n";
  out += " - Historical position of the last 2 seconds (One point every 0.4s): [";
  for (std::size_t i = 0; i < s.ego.history.size(); ++i) {
    if (i > 0) out += ", ";
    out += "(" + detail::history_coord(s.ego.history[i].x) + "," +
           detail::history_coord(s.ego.history[i].y) + ")";
  }
  out += "].\n";

  out += "- The information of its surrounding vehicles (with a range of 200m) are listed as follow:";
  bool first = true;
  for (Direction d : kDirectionOrder) {
    const NeighborState* n = s.neighbor(d);
    if (!n) continue;
    if (!first) out += ";";
    out += "\n - " + std::string(prompt_direction_label(d)) + ": a " + to_string(n->kind) +
           " traveling at " + fmt2(round2(n->speed_x)) + " km/h of X-axis, with a distance of " +
           fmt_minimal(n->distance) + " m";
    first = false;
  }
  if (!first) out += ".";
  return out;
}

inline PromptPair render_prompt(const DrivingScenario& s, PromptMode mode) {
  return {render_system(mode), render_user(s)};
}

// --- response grammar -------------------------------------------------------

enum class ParseErrorKind {
  MissingIntention,
  InvalidIntentionCode,
  WaypointCountMismatch,
  MalformedNumber,
};

inline const char* to_string(ParseErrorKind k) {
  switch (k) {
    case ParseErrorKind::MissingIntention: return "missing_intention";
    case ParseErrorKind::InvalidIntentionCode: return "invalid_intention_code";
    case ParseErrorKind::WaypointCountMismatch: return "waypoint_count_mismatch";
    case ParseErrorKind::MalformedNumber: return "malformed_number";
  }
  return "?";
}

struct ParseError {
  ParseErrorKind kind = ParseErrorKind::MissingIntention;
  std::string detail;
};

struct ParseOutcome {
  std::optional<PredictionResult> result;
  std::optional<ParseError> error;
  bool ok() const { return result.has_value(); }
};

inline std::string format_response(const PredictionResult& p, PromptMode mode) {
  std::string out;
  if (mode == PromptMode::CoT && !p.thought.empty()) {
    out += "Thought:\n";
    for (const std::string& line : p.thought) out += line + "\n";
  }
  out += "Final Answer:\n";
  out += "Intention: " + std::to_string(static_cast<int>(p.intention)) + ": " +
         intention_label(p.intention) + ";\n";
  out += "Trajectory: [";
  for (std::size_t i = 0; i < p.trajectory.size(); ++i) {
    if (i > 0) out += ", ";
    out += "(" + fmt2(p.trajectory[i].x) + "," + fmt2(p.trajectory[i].y) + ")";
  }
  out += "].";
  return out;
}

namespace detail {

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.emplace_back(text.substr(pos));
      break;
    }
    lines.emplace_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// Parses the "(x,y)" list after the Trajectory marker. Returns false and sets
// `malformed` when a coordinate fails to parse as a number.
inline bool parse_waypoints(std::string_view tail, std::vector<Vec2>& out, bool& malformed) {
  std::size_t i = 0;
  auto skip_filler = [&] {
    while (i < tail.size() &&
           (tail[i] == ' ' || tail[i] == '\t' || tail[i] == '\r' || tail[i] == '\n' ||
            tail[i] == ',' || tail[i] == '[')) {
      ++i;
    }
  };
  while (true) {
    skip_filler();
    if (i >= tail.size() || tail[i] != '(') break;
    ++i;
    const std::size_t comma = tail.find(',', i);
    if (comma == std::string_view::npos) {
      malformed = true;
      return false;
    }
    const std::size_t close = tail.find(')', comma + 1);
    if (close == std::string_view::npos) {
      malformed = true;
      return false;
    }
    Vec2 p;
    if (!parse_double(trim(tail.substr(i, comma - i)), p.x) ||
        !parse_double(trim(tail.substr(comma + 1, close - comma - 1)), p.y)) {
      malformed = true;
      return false;
    }
    out.push_back(p);
    i = close + 1;
  }
  return true;
}

}  // namespace detail

// Lenient on surrounding prose, strict on the Intention/Trajectory payloads.
// Accepts arbitrary text; failures come back as distinct categories so
// campaigns can count refusals and hallucinations separately.
inline ParseOutcome parse_response(std::string_view text, PromptMode mode) {
  auto fail = [](ParseErrorKind kind, std::string detail) {
    ParseOutcome o;
    o.error = ParseError{kind, std::move(detail)};
    return o;
  };

  const std::vector<std::string> lines = detail::split_lines(text);

  // Intention: leading integer code after the first "Intention:" marker;
  // trailing label text is ignored.
  std::optional<int> code;
  for (const std::string& line : lines) {
    const std::size_t at = line.find("Intention:");
    if (at == std::string::npos) continue;
    std::string_view rest = detail::trim(std::string_view(line).substr(at + 10));
    double value = 0.0;
    if (!parse_double(rest, value) || value != std::floor(value)) {
      return fail(ParseErrorKind::MalformedNumber, "intention code is not an integer");
    }
    code = static_cast<int>(value);
    break;
  }
  if (!code) return fail(ParseErrorKind::MissingIntention, "no \"Intention:\" line found");
  if (*code < 0 || *code > 2) {
    return fail(ParseErrorKind::InvalidIntentionCode,
                "intention code " + std::to_string(*code) + " outside {0, 1, 2}");
  }

  const std::size_t traj_at = text.find("Trajectory:");
  std::vector<Vec2> waypoints;
  if (traj_at != std::string_view::npos) {
    bool malformed = false;
    if (!detail::parse_waypoints(text.substr(traj_at + 11), waypoints, malformed) && malformed) {
      return fail(ParseErrorKind::MalformedNumber, "unparseable trajectory coordinate");
    }
  }
  if (waypoints.size() != 4) {
    return fail(ParseErrorKind::WaypointCountMismatch,
                "expected 4 waypoints, found " + std::to_string(waypoints.size()));
  }

  PredictionResult result;
  result.intention = static_cast<Intention>(*code);
  for (int i = 0; i < 4; ++i) result.trajectory[static_cast<std::size_t>(i)] = waypoints[static_cast<std::size_t>(i)];

  if (mode == PromptMode::CoT) {
    // The Thought section may precede or follow the final answer.
    bool in_thought = false;
    for (const std::string& raw : lines) {
      const std::string_view line = detail::trim(raw);
      if (line.rfind("Thought:", 0) == 0) {
        in_thought = true;
        continue;
      }
      if (!in_thought) continue;
      if (line.empty()) continue;
      if (line.find("Final Answer:") != std::string_view::npos ||
          line.find("Intention:") != std::string_view::npos ||
          line.find("Trajectory:") != std::string_view::npos) {
        in_thought = false;
        continue;
      }
      result.thought.emplace_back(line);
    }
  }

  ParseOutcome out;
  out.result = std::move(result);
  return out;
}

}  // namespace defeat
