#pragma once

// Perturbable surrounding-vehicle features: enumeration, budget-bounded
// intervals and single-feature application. Ego features are never part of
// the attack surface.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "defeat/scenario.hpp"

namespace defeat {

enum class Attribute : int { SpeedX = 0, Distance = 1 };

inline const char* to_string(Attribute a) {
  return a == Attribute::SpeedX ? "speed_x" : "distance";
}

struct FeatureId {
  Direction direction = Direction::Front;
  Attribute attribute = Attribute::SpeedX;
  int ordinal = 0;  // index into the scenario's ordered feature list
  bool operator==(const FeatureId&) const = default;
};

inline std::string feature_label(const FeatureId& f) {
  return std::string(to_string(f.direction)) + "." + to_string(f.attribute);
}

struct Perturbation {
  FeatureId feature;
  double delta = 0.0;  // additive, same units as the target feature
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool degenerate() const { return !(lo < hi); }
  bool contains(double v) const { return v >= lo && v <= hi; }
  double width() const { return hi - lo; }
};

// Physical clamps per attribute. The distance range is (0, 200]; under a
// multiplicative budget the open lower end never binds for positive values,
// so a closed [0, 200] clamp is equivalent in practice.
inline Interval physical_bounds(Attribute a) {
  switch (a) {
    case Attribute::SpeedX: return {0.0, 250.0};
    case Attribute::Distance: return {0.0, 200.0};
  }
  return {0.0, 0.0};
}

// Deterministic order: directions Front, Behind, Left, Right, LeftFront,
// LeftBehind, RightFront, RightBehind; attributes SpeedX then Distance. Only
// present neighbors contribute.
inline std::vector<FeatureId> enumerate_features(const DrivingScenario& s) {
  std::vector<FeatureId> out;
  int ordinal = 0;
  for (Direction d : kDirectionOrder) {
    if (!s.neighbor(d)) continue;
    out.push_back({d, Attribute::SpeedX, ordinal++});
    out.push_back({d, Attribute::Distance, ordinal++});
  }
  return out;
}

inline double feature_value(const DrivingScenario& s, const FeatureId& f) {
  const NeighborState* n = s.neighbor(f.direction);
  if (!n) {
    throw std::invalid_argument("feature targets absent neighbor: " + feature_label(f));
  }
  return f.attribute == Attribute::SpeedX ? n->speed_x : n->distance;
}

// [s - delta_budget*|s|, s + delta_budget*|s|] intersected with the physical
// clamp. A degenerate interval (s = 0) means the feature is effectively
// unperturbable under a multiplicative budget.
inline Interval bounds_for(const DrivingScenario& s, const FeatureId& f, double delta_budget) {
  if (!(delta_budget > 0.0 && delta_budget < 1.0)) {
    throw std::invalid_argument("delta budget must lie in (0, 1)");
  }
  const double value = feature_value(s, f);
  const double reach = delta_budget * std::abs(value);
  const Interval phys = physical_bounds(f.attribute);
  return {std::max(value - reach, phys.lo), std::min(value + reach, phys.hi)};
}

// Replaces the targeted scalar, leaving every other field untouched. Rejects
// perturbations outside the budgeted interval.
inline DrivingScenario apply(const DrivingScenario& s, const Perturbation& p,
                             double delta_budget) {
  const Interval bounds = bounds_for(s, p.feature, delta_budget);
  const double clean = feature_value(s, p.feature);
  const double perturbed = clean + p.delta;
  if (!bounds.contains(perturbed)) {
    std::ostringstream msg;
    msg << "perturbation of " << feature_label(p.feature) << " to " << perturbed
        << " violates bounds [" << bounds.lo << ", " << bounds.hi << "]";
    throw std::invalid_argument(msg.str());
  }
  DrivingScenario out = s;
  NeighborState& n = out.neighbors.at(p.feature.direction);
  if (p.feature.attribute == Attribute::SpeedX) {
    n.speed_x = perturbed;
  } else {
    n.distance = perturbed;
  }
  return out;
}

}  // namespace defeat
