#pragma once

// Query-only predictor contract plus the deterministic kinematic surrogate
// and a memoizing wrapper. Implementations expose predict() and nothing else:
// no gradients, no parameters, no internals.

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "defeat/prompt.hpp"
#include "defeat/scenario.hpp"

namespace defeat {

struct PredictorCapabilities {
  PromptMode mode = PromptMode::Plain;
  int max_concurrency = 1;
  bool deterministic = false;
};

struct PredictOutcome {
  std::optional<PredictionResult> result;
  std::optional<ParseError> error;  // predictor answered, answer unusable
  std::string raw;                  // response text as received
  bool ok() const { return result.has_value(); }
};

inline PredictOutcome outcome_from(ParseOutcome parsed, std::string raw) {
  PredictOutcome o;
  o.result = std::move(parsed.result);
  o.error = std::move(parsed.error);
  o.raw = std::move(raw);
  return o;
}

// Transport failures are retriable errors distinct from parse failures; they
// are never scored as attack success.
struct TransportError : std::runtime_error {
  enum class Kind { Timeout, HttpStatus };
  Kind kind;
  int status;
  TransportError(Kind k, int http_status, const std::string& msg)
      : std::runtime_error(msg), kind(k), status(http_status) {}
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual PredictOutcome predict(const DrivingScenario& scenario) = 0;
  virtual PredictorCapabilities capabilities() const = 0;
};

// --- deterministic kinematic surrogate --------------------------------------

// Gap-acceptance thresholds for the surrogate rule set.
struct SurrogateParams {
  double lateral_speed_threshold = 1.0;   // km/h
  double min_lead_gap = 50.0;             // m, front gap below which overtaking is considered
  double min_adjacent_front_gap = 70.0;   // m
  double min_adjacent_rear_gap = 30.0;    // m
  double speed_advantage_threshold = 5.0; // km/h
  double lane_width = 3.5;                // m
};

inline double smoothstep(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * (3.0 - 2.0 * u);
}

// Constant-acceleration longitudinal extrapolation; lateral ramp reaching one
// lane width at the 4 s horizon for lane changes.
inline std::array<Vec2, 4> surrogate_trajectory(const EgoState& ego, Intention intention,
                                                double lane_width = 3.5) {
  const double v = round2(ego.vx) / 3.6;  // km/h -> m/s
  const double a = round2(ego.ax);
  const double side = intention == Intention::LC ? 1.0 : intention == Intention::RC ? -1.0 : 0.0;
  std::array<Vec2, 4> out{};
  for (int i = 0; i < 4; ++i) {
    const double t = static_cast<double>(i + 1);
    out[static_cast<std::size_t>(i)] = {v * t + 0.5 * a * t * t,
                                        side * lane_width * smoothstep(t / 4.0)};
  }
  return out;
}

class SurrogatePredictor : public Predictor {
 public:
  explicit SurrogatePredictor(PromptMode mode = PromptMode::Plain, SurrogateParams params = {})
      : mode_(mode), params_(params) {}

  PredictOutcome predict(const DrivingScenario& s) override {
    PredictionResult r;
    r.intention = classify(s);
    r.trajectory = surrogate_trajectory(s.ego, r.intention, params_.lane_width);
    if (mode_ == PromptMode::CoT) r.thought = thought_lines(s, r.intention);
    // Answers travel through the response grammar, so the surrogate is held to
    // the same text contract as a remote model.
    std::string text = format_response(r, mode_);
    ParseOutcome parsed = parse_response(text, mode_);
    return outcome_from(std::move(parsed), std::move(text));
  }

  PredictorCapabilities capabilities() const override { return {mode_, 8, true}; }

  const SurrogateParams& params() const { return params_; }

 private:
  // The surrogate reads prompt-rounded values, making it a pure function of
  // the rendered prompt: two scenarios with identical prompts always produce
  // identical answers.
  Intention classify(const DrivingScenario& s) const {
    const double vy = round2(s.ego.vy);
    const double vx = round2(s.ego.vx);

    const auto gap_ok = [&s](Direction d, double min_gap) {
      const NeighborState* n = s.neighbor(d);
      return n == nullptr || round2(n->distance) >= min_gap;
    };
    const bool left_open = gap_ok(Direction::LeftFront, params_.min_adjacent_front_gap) &&
                           gap_ok(Direction::LeftBehind, params_.min_adjacent_rear_gap);
    const bool right_open = gap_ok(Direction::RightFront, params_.min_adjacent_front_gap) &&
                            gap_ok(Direction::RightBehind, params_.min_adjacent_rear_gap);

    if (vy > params_.lateral_speed_threshold && left_open) return Intention::LC;
    if (vy < -params_.lateral_speed_threshold && right_open) return Intention::RC;

    // Overtaking motive: slow lead vehicle close ahead and the left admits.
    if (const NeighborState* front = s.neighbor(Direction::Front)) {
      if (round2(front->distance) < params_.min_lead_gap &&
          round2(front->speed_x) <= vx - params_.speed_advantage_threshold && left_open) {
        return Intention::LC;
      }
    }
    return Intention::KL;
  }

  std::vector<std::string> thought_lines(const DrivingScenario& s, Intention intention) const {
    std::vector<std::string> lines;
    const double vy = round2(s.ego.vy);
    const double ax = round2(s.ego.ax);
    if (std::abs(vy) >= params_.lateral_speed_threshold) {
      lines.push_back("Notable features: v_y = " + fmt2(vy) + ";");
    }
    if (std::abs(ax) >= 1.0) {
      lines.push_back("Notable features: a_x = " + fmt2(ax) + ";");
    }
    if (const NeighborState* front = s.neighbor(Direction::Front)) {
      if (round2(front->distance) < params_.min_lead_gap) {
        lines.push_back("Notable features: Front vehicle is close;");
      }
    }
    switch (intention) {
      case Intention::LC:
        lines.push_back("Notable features: Left front is free;");
        lines.push_back("Potential behavior: Change left to the fast lane.");
        break;
      case Intention::RC:
        lines.push_back("Notable features: Right front is free;");
        lines.push_back("Potential behavior: Change right.");
        break;
      case Intention::KL:
        lines.push_back("Potential behavior: Keep the current lane.");
        break;
    }
    return lines;
  }

  PromptMode mode_;
  SurrogateParams params_;
};

// --- query log and memoization ----------------------------------------------

struct QueryRecord {
  std::uint64_t scenario_hash = 0;
  std::uint64_t prompt_hash = 0;
  std::string raw_response;
  bool parse_ok = false;
  std::optional<ParseErrorKind> parse_error;
  bool cache_hit = false;
  double latency_ms = 0.0;
};

// Append-only, synchronized. Billed entries (cache misses) equal the budget a
// black-box attacker actually pays.
class QueryLog {
 public:
  void append(QueryRecord r) {
    std::lock_guard<std::mutex> lock(mutex_);
    records_.push_back(std::move(r));
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return records_.size();
  }

  std::size_t billed() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::size_t n = 0;
    for (const QueryRecord& r : records_) n += r.cache_hit ? 0 : 1;
    return n;
  }

  std::vector<QueryRecord> snapshot() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return records_;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<QueryRecord> records_;
};

// Memoizes results by canonical-scenario form. Cache hits do not consume
// query budget. Refuses to wrap predictors that do not declare determinism.
class CachingPredictor : public Predictor {
 public:
  explicit CachingPredictor(Predictor& inner, QueryLog* log = nullptr)
      : inner_(inner), log_(log) {
    if (!inner.capabilities().deterministic) {
      throw std::invalid_argument("caching requires a deterministic inner predictor");
    }
  }

  PredictOutcome predict(const DrivingScenario& s) override {
    const std::string key = canonical_string(s);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = cache_.find(key);
      if (it != cache_.end()) {
        log(s, key, it->second, true, 0.0);
        return it->second;
      }
    }
    const auto start = std::chrono::steady_clock::now();
    PredictOutcome outcome = inner_.predict(s);
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    {
      std::lock_guard<std::mutex> lock(mutex_);
      cache_.emplace(key, outcome);
      ++inner_calls_;
      log(s, key, outcome, false, ms);
    }
    return outcome;
  }

  PredictorCapabilities capabilities() const override { return inner_.capabilities(); }

  std::size_t inner_calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return inner_calls_;
  }

 private:
  void log(const DrivingScenario& s, const std::string& key, const PredictOutcome& o, bool hit,
           double ms) {
    if (!log_) return;
    QueryRecord r;
    r.scenario_hash = fnv1a64(key);
    r.prompt_hash = fnv1a64(render_user(s));
    r.raw_response = o.raw;
    r.parse_ok = o.ok();
    if (o.error) r.parse_error = o.error->kind;
    r.cache_hit = hit;
    r.latency_ms = ms;
    log_->append(r);
  }

  Predictor& inner_;
  QueryLog* log_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, PredictOutcome> cache_;
  std::size_t inner_calls_ = 0;
};

}  // namespace defeat
