#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles here
// are deliberately written against the definitions, not the implementation
// paths they check.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "defeat/de_attack.hpp"
#include "defeat/feature_space.hpp"
#include "defeat/metrics.hpp"
#include "defeat/predictor.hpp"
#include "defeat/scenario.hpp"

namespace defeat::testing {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string golden_path(const std::string& name) {
  return std::string(DEFEAT_SOURCE_DIR) + "/prompts/golden/" + name;
}

inline std::string rstrip(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

// Collapses every whitespace run to a single space.
inline std::string normalize_whitespace(const std::string& s) {
  std::string out;
  bool in_space = true;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!in_space) out += ' ';
      in_space = true;
    } else {
      out += c;
      in_space = false;
    }
  }
  return rstrip(std::move(out));
}

// The worked example scenario: a car drifting left on a four-lane highway
// with left-front and left-rear neighbors.
inline DrivingScenario example_scenario() {
  DrivingScenario s;
  s.id = "example-a1";
  s.map.lane_count = 4;
  s.map.ego_lane = LanePosition::Rightmost;
  s.ego.vx = 78.52;
  s.ego.vy = 2.05;
  s.ego.ax = 2.20;
  s.ego.ay = -2.20;
  s.ego.kind = VehicleKind::Car;
  s.ego.width = 2.02;
  s.ego.length = 4.65;
  s.ego.history = {{-41.30, -0.79}, {-33.92, -0.71}, {-25.71, -0.58},
                   {-17.37, -0.41}, {-8.79, -0.22},  {0.0, 0.0}};
  NeighborState lf;
  lf.direction = Direction::LeftFront;
  lf.kind = VehicleKind::Car;
  lf.speed_x = 85.43;
  lf.distance = 103.0;
  s.neighbors.emplace(lf.direction, lf);
  NeighborState lb;
  lb.direction = Direction::LeftBehind;
  lb.kind = VehicleKind::Car;
  lb.speed_x = 91.84;
  lb.distance = 60.0;
  s.neighbors.emplace(lb.direction, lb);
  return s;
}

inline DrivingScenario example_scenario_with_truth() {
  DrivingScenario s = example_scenario();
  SurrogatePredictor surrogate;
  const PredictOutcome o = surrogate.predict(s);
  GroundTruth t;
  t.intention = o.result->intention;
  t.trajectory.assign(o.result->trajectory.begin(), o.result->trajectory.end());
  s.truth = t;
  return s;
}

// --- grid oracle -----------------------------------------------------------------

// Exhaustive reference: evaluates every feature on an evenly spaced delta
// grid. Serves as the brute-force upper bound for the DE results.
struct GridResult {
  double best_fitness = 0.0;
  double clean_fitness = 0.0;
  FeatureId feature;
  double delta = 0.0;
  bool flips_intention = false;
};

inline GridResult grid_search(const DrivingScenario& scenario, const GroundTruth& truth,
                              Predictor& predictor, double delta_budget,
                              const FitnessWeights& weights = {}, int steps = 41) {
  CachingPredictor cache(predictor);
  FitnessEvaluator eval(scenario, truth, cache, weights, delta_budget);
  const auto clean = eval.evaluate_clean();

  GridResult best;
  best.clean_fitness = clean.fitness;
  best.best_fitness = clean.fitness;
  best.feature = eval.features().front();
  const Intention clean_intention =
      clean.outcome.ok() ? clean.outcome.result->intention : truth.intention;

  for (const FeatureId& f : eval.features()) {
    const Interval iv = delta_interval(scenario, f, delta_budget);
    for (int k = 0; k < steps; ++k) {
      const double delta =
          iv.degenerate() ? iv.lo
                          : iv.lo + iv.width() * static_cast<double>(k) / static_cast<double>(steps - 1);
      Candidate c;
      c.k_real = static_cast<double>(f.ordinal);
      c.delta = delta;
      const auto sample = eval.evaluate(c);
      if (sample.fitness > best.best_fitness) {
        best.best_fitness = sample.fitness;
        best.feature = f;
        best.delta = delta;
        best.flips_intention =
            sample.outcome.ok() && sample.outcome.result->intention != clean_intention;
      }
      if (iv.degenerate()) break;
    }
  }
  return best;
}

// Local refinement around the grid argmax: one grid step each way at 10x
// resolution. Bounds what a continuous optimizer could reach between grid
// points.
inline double refined_optimum(const DrivingScenario& scenario, const GroundTruth& truth,
                              Predictor& predictor, double delta_budget,
                              const FitnessWeights& weights = {}, int steps = 41) {
  const GridResult coarse = grid_search(scenario, truth, predictor, delta_budget, weights, steps);

  CachingPredictor cache(predictor);
  FitnessEvaluator eval(scenario, truth, cache, weights, delta_budget);
  eval.evaluate_clean();

  const Interval iv = delta_interval(scenario, coarse.feature, delta_budget);
  if (iv.degenerate()) return coarse.best_fitness;
  const double step = iv.width() / static_cast<double>(steps - 1);
  const double lo = std::max(iv.lo, coarse.delta - step);
  const double hi = std::min(iv.hi, coarse.delta + step);

  double best = coarse.best_fitness;
  for (int k = 0; k <= 20; ++k) {
    Candidate c;
    c.k_real = static_cast<double>(coarse.feature.ordinal);
    c.delta = lo + (hi - lo) * static_cast<double>(k) / 20.0;
    best = std::max(best, eval.evaluate(c).fitness);
  }
  return best;
}

// --- bound audit ------------------------------------------------------------------

// Wraps a predictor and verifies that every queried scenario differs from the
// clean one in at most one feature, inside [s - d|s|, s + d|s|] and the
// physical clamp. Used to prove the attack never escapes its budget.
class AuditingPredictor : public Predictor {
 public:
  AuditingPredictor(Predictor& inner, DrivingScenario clean, double delta_budget)
      : inner_(inner), clean_(std::move(clean)), budget_(delta_budget) {}

  PredictOutcome predict(const DrivingScenario& s) override {
    ++queries_;
    int diffs = 0;
    for (const FeatureId& f : enumerate_features(clean_)) {
      const double clean_value = feature_value(clean_, f);
      const double seen = feature_value(s, f);
      if (seen == clean_value) continue;
      ++diffs;
      const Interval budget_iv{clean_value - budget_ * std::abs(clean_value),
                               clean_value + budget_ * std::abs(clean_value)};
      const Interval phys = physical_bounds(f.attribute);
      if (!(budget_iv.contains(seen) && phys.contains(seen))) ++bound_violations_;
    }
    if (diffs > 1) ++multi_field_violations_;
    // All non-feature fields must be untouched.
    DrivingScenario restored = s;
    restored.neighbors = clean_.neighbors;
    if (!(restored == clean_)) ++foreign_field_violations_;
    return inner_.predict(s);
  }

  PredictorCapabilities capabilities() const override { return inner_.capabilities(); }

  long queries() const { return queries_; }
  long bound_violations() const { return bound_violations_; }
  long multi_field_violations() const { return multi_field_violations_; }
  long foreign_field_violations() const { return foreign_field_violations_; }

 private:
  Predictor& inner_;
  DrivingScenario clean_;
  double budget_;
  long queries_ = 0;
  long bound_violations_ = 0;
  long multi_field_violations_ = 0;
  long foreign_field_violations_ = 0;
};

// --- brute-force metric references --------------------------------------------------

// Straight-from-the-definition RMSE: independent accumulation order and no
// shared code with metrics.hpp.
inline double reference_rmse(const std::vector<std::pair<PredictionResult, GroundTruth>>& pairs,
                             bool lateral, int horizon_s) {
  std::vector<double> squares;
  for (const auto& [p, t] : pairs) {
    const std::size_t i = static_cast<std::size_t>(horizon_s - 1);
    const double e = lateral ? p.trajectory[i].y - t.trajectory[i].y
                             : p.trajectory[i].x - t.trajectory[i].x;
    squares.push_back(e * e);
  }
  double total = 0.0;
  for (auto it = squares.rbegin(); it != squares.rend(); ++it) total += *it;
  return std::sqrt(total / static_cast<double>(squares.size()));
}

struct ReferenceScores {
  double precision[3], recall[3], f1[3];
  double macro_p, macro_r, macro_f1;
};

inline ReferenceScores reference_intention_scores(
    const std::vector<std::pair<Intention, Intention>>& truth_prediction) {
  ReferenceScores r{};
  for (int c = 0; c < 3; ++c) {
    long tp = 0, fp = 0, fn = 0;
    for (const auto& [truth, pred] : truth_prediction) {
      const bool t = static_cast<int>(truth) == c;
      const bool p = static_cast<int>(pred) == c;
      if (t && p) ++tp;
      if (!t && p) ++fp;
      if (t && !p) ++fn;
    }
    r.precision[c] = tp + fp == 0 ? 0.0 : 100.0 * double(tp) / double(tp + fp);
    r.recall[c] = tp + fn == 0 ? 0.0 : 100.0 * double(tp) / double(tp + fn);
    r.f1[c] = r.precision[c] + r.recall[c] == 0.0
                  ? 0.0
                  : 2.0 * r.precision[c] * r.recall[c] / (r.precision[c] + r.recall[c]);
  }
  r.macro_p = (r.precision[0] + r.precision[1] + r.precision[2]) / 3.0;
  r.macro_r = (r.recall[0] + r.recall[1] + r.recall[2]) / 3.0;
  r.macro_f1 = (r.f1[0] + r.f1[1] + r.f1[2]) / 3.0;
  return r;
}

}  // namespace defeat::testing
