#pragma once

// Evaluation tables: horizon-wise RMSE split lateral/longitudinal/average,
// and per-class plus macro precision/recall/F1, with clean-vs-attacked
// degradation deltas. Aggregation is pure and order-independent; display
// rounding matches the report tables while internal values stay full
// precision.

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "defeat/format.hpp"
#include "defeat/scenario.hpp"

namespace defeat {

enum class ErrorAxis : int { Lateral = 0, Longitudinal = 1, Average = 2 };

struct PositionErrorTable {
  // rmse[axis][horizon], horizons t = 1..4 s.
  std::array<std::array<double, 4>, 3> rmse{};

  double at(ErrorAxis axis, int horizon_s) const {
    return rmse[static_cast<std::size_t>(axis)][static_cast<std::size_t>(horizon_s - 1)];
  }
};

inline PositionErrorTable rmse_table(const std::vector<std::pair<PredictionResult, GroundTruth>>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("rmse_table: empty sample set");
  PositionErrorTable table;
  for (std::size_t t = 0; t < 4; ++t) {
    double sum_lat = 0.0;
    double sum_lon = 0.0;
    for (const auto& [prediction, truth] : pairs) {
      if (truth.trajectory.size() != 4) {
        throw std::invalid_argument("rmse_table: ground truth must hold 4 waypoints");
      }
      const double dy = prediction.trajectory[t].y - truth.trajectory[t].y;
      const double dx = prediction.trajectory[t].x - truth.trajectory[t].x;
      sum_lat += dy * dy;
      sum_lon += dx * dx;
    }
    const double n = static_cast<double>(pairs.size());
    const double lat = std::sqrt(sum_lat / n);
    const double lon = std::sqrt(sum_lon / n);
    table.rmse[0][t] = lat;
    table.rmse[1][t] = lon;
    table.rmse[2][t] = (lat + lon) / 2.0;  // Avg row: arithmetic mean of the axes
  }
  return table;
}

struct ConfusionMatrix {
  // counts[truth][prediction] over {KL, LC, RC}; unparseable responses are
  // tracked separately rather than distorting a class.
  std::array<std::array<long, 3>, 3> counts{};
  long parse_failures = 0;

  void add(Intention truth, Intention prediction) {
    ++counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(prediction)];
  }

  long total() const {
    long n = 0;
    for (const auto& row : counts)
      for (long c : row) n += c;
    return n;
  }
};

struct ClassScore {
  double precision = 0.0;  // percent
  double recall = 0.0;
  double f1 = 0.0;
  bool recall_defined = true;  // false when the class never occurs in truth
};

struct IntentionReport {
  std::array<ClassScore, 3> per_class{};
  ClassScore macro;  // unweighted mean of the three classes
};

inline IntentionReport intention_report(const ConfusionMatrix& m) {
  if (m.total() == 0) throw std::invalid_argument("intention_report: empty confusion matrix");
  IntentionReport report;
  for (std::size_t c = 0; c < 3; ++c) {
    long tp = m.counts[c][c];
    long truth_total = 0;
    long predicted_total = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      truth_total += m.counts[c][j];
      predicted_total += m.counts[j][c];
    }
    ClassScore& s = report.per_class[c];
    s.precision = predicted_total == 0 ? 0.0 : 100.0 * static_cast<double>(tp) / static_cast<double>(predicted_total);
    s.recall_defined = truth_total > 0;
    s.recall = truth_total == 0 ? 0.0 : 100.0 * static_cast<double>(tp) / static_cast<double>(truth_total);
    s.f1 = (s.precision + s.recall) == 0.0
               ? 0.0
               : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    report.macro.precision += s.precision / 3.0;
    report.macro.recall += s.recall / 3.0;
    report.macro.f1 += s.f1 / 3.0;
  }
  return report;
}

// --- degradation -------------------------------------------------------------

// Relative percent change, rounded to an integer: positive for an RMSE
// increase, negative for an F1 drop. NaN marks an undefined (0 clean) delta.
inline double percent_delta(double clean, double attacked) {
  if (clean == 0.0) return std::nan("");
  return 100.0 * (attacked - clean) / clean;
}

inline std::string format_percent_delta(double clean, double attacked) {
  const double d = percent_delta(clean, attacked);
  if (std::isnan(d)) return "n/a";
  const long long rounded = std::llround(d);
  if (rounded > 0) return "+" + std::to_string(rounded) + "%";
  return std::to_string(rounded) + "%";
}

// --- report rendering ----------------------------------------------------------

inline const char* axis_name(ErrorAxis a) {
  switch (a) {
    case ErrorAxis::Lateral: return "Lateral";
    case ErrorAxis::Longitudinal: return "Longitudinal";
    case ErrorAxis::Average: return "Avg.";
  }
  return "?";
}

namespace detail {

inline std::string pad(const std::string& text, std::size_t width) {
  return text.size() >= width ? text : text + std::string(width - text.size(), ' ');
}

}  // namespace detail

// Aligned text table: one block of Lateral/Longitudinal/Avg. rows per
// condition. When annotate_against_first is set, every block after the first
// annotates its 4 s average with the relative change against the first
// (clean) block.
inline std::string render_rmse_text(
    const std::vector<std::pair<std::string, PositionErrorTable>>& blocks,
    bool annotate_against_first = false) {
  std::ostringstream out;
  out << "RMSE of Predicted Positions (m)\n";
  out << detail::pad("", 22) << detail::pad("", 14) << detail::pad("1s", 8)
      << detail::pad("2s", 8) << detail::pad("3s", 8) << "4s" << "\n";
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& [label, table] = blocks[b];
    bool first_row = true;
    for (ErrorAxis axis : {ErrorAxis::Lateral, ErrorAxis::Longitudinal, ErrorAxis::Average}) {
      out << detail::pad(first_row ? label : "", 22) << detail::pad(axis_name(axis), 14);
      for (int t = 1; t <= 4; ++t) {
        std::string cell = fmt2(table.at(axis, t));
        if (axis == ErrorAxis::Average && t == 4 && annotate_against_first && b > 0) {
          cell += " (" +
                  format_percent_delta(blocks[0].second.at(ErrorAxis::Average, 4),
                                       table.at(ErrorAxis::Average, 4)) +
                  ")";
        }
        out << (t < 4 ? detail::pad(cell, 8) : cell);
      }
      out << "\n";
      first_row = false;
    }
  }
  return out.str();
}

inline std::string render_intention_text(
    const std::vector<std::pair<std::string, IntentionReport>>& blocks,
    bool annotate_against_first = false) {
  std::ostringstream out;
  out << "Intention accuracy (%)\n";
  out << detail::pad("", 22) << detail::pad("", 14) << detail::pad("KL", 6)
      << detail::pad("LC", 6) << detail::pad("RC", 6) << "Macro avg." << "\n";
  const std::array<std::pair<const char*, double ClassScore::*>, 3> rows = {
      std::make_pair("Precision", &ClassScore::precision),
      std::make_pair("Recall", &ClassScore::recall),
      std::make_pair("F1", &ClassScore::f1),
  };
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& [label, report] = blocks[b];
    bool first_row = true;
    for (const auto& [row_name, member] : rows) {
      out << detail::pad(first_row ? label : "", 22) << detail::pad(row_name, 14);
      for (std::size_t c = 0; c < 3; ++c) {
        out << detail::pad(std::to_string(std::llround(report.per_class[c].*member)), 6);
      }
      std::string macro_cell = std::to_string(std::llround(report.macro.*member));
      if (std::string(row_name) == "F1" && annotate_against_first && b > 0) {
        macro_cell += " (" + format_percent_delta(blocks[0].second.macro.f1, report.macro.f1) + ")";
      }
      out << macro_cell << "\n";
      first_row = false;
    }
  }
  return out.str();
}

// --- JSON views --------------------------------------------------------------

inline nlohmann::ordered_json to_json(const PositionErrorTable& t) {
  nlohmann::ordered_json j;
  for (ErrorAxis axis : {ErrorAxis::Lateral, ErrorAxis::Longitudinal, ErrorAxis::Average}) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int h = 1; h <= 4; ++h) row.push_back(t.at(axis, h));
    j[axis_name(axis)] = std::move(row);
  }
  return j;
}

inline nlohmann::ordered_json to_json(const IntentionReport& r) {
  nlohmann::ordered_json j;
  const std::array<const char*, 3> names = {"KL", "LC", "RC"};
  for (std::size_t c = 0; c < 3; ++c) {
    j[names[c]] = {{"precision", r.per_class[c].precision},
                   {"recall", r.per_class[c].recall},
                   {"f1", r.per_class[c].f1},
                   {"recall_defined", r.per_class[c].recall_defined}};
  }
  j["macro"] = {{"precision", r.macro.precision},
                {"recall", r.macro.recall},
                {"f1", r.macro.f1}};
  return j;
}

}  // namespace defeat
