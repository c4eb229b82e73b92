#pragma once

// Feature-level vulnerability aggregation across a campaign: which features
// the optimizer ended up targeting, how often, and with what impact. Output
// is bubble-chart-ready (x = feature, size = selection count, y = mean
// impact).

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "defeat/de_attack.hpp"

namespace defeat {

struct FeatureVulnerability {
  std::string feature;      // "direction.attribute"
  long selection_count = 0; // runs whose best candidate targeted this feature
  double mean_impact = 0.0; // mean of (best fitness - clean fitness)
  double flip_rate = 0.0;   // fraction of those runs flipping the intention
};

// One entry per feature selected at least once; runs that fell back to the
// zero perturbation are not selections. Sorted by count descending, then
// label ascending.
inline std::vector<FeatureVulnerability> aggregate(const std::vector<AttackResult>& results) {
  if (results.empty()) throw std::invalid_argument("aggregate: no attack results");

  struct Bucket {
    long count = 0;
    double impact_sum = 0.0;
    long flips = 0;
  };
  std::map<std::string, Bucket> buckets;
  for (const AttackResult& r : results) {
    if (r.best_delta == 0.0) continue;
    Bucket& b = buckets[feature_label(r.best_feature)];
    ++b.count;
    b.impact_sum += r.best_fitness - r.clean_fitness;
    if (r.clean.ok() && r.attacked.ok() &&
        r.clean.result->intention != r.attacked.result->intention) {
      ++b.flips;
    }
  }

  std::vector<FeatureVulnerability> out;
  out.reserve(buckets.size());
  for (const auto& [label, b] : buckets) {
    out.push_back({label, b.count, b.impact_sum / static_cast<double>(b.count),
                   static_cast<double>(b.flips) / static_cast<double>(b.count)});
  }
  std::sort(out.begin(), out.end(), [](const FeatureVulnerability& a, const FeatureVulnerability& b) {
    if (a.selection_count != b.selection_count) return a.selection_count > b.selection_count;
    return a.feature < b.feature;
  });
  return out;
}

inline std::string vulnerability_csv(const std::vector<FeatureVulnerability>& vulns) {
  if (vulns.empty()) throw std::invalid_argument("vulnerability_csv: empty vulnerability list");
  std::string out = "feature,selection_count,mean_impact,flip_rate\n";
  for (const FeatureVulnerability& v : vulns) {
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%ld,%.6f,%.6f\n", v.feature.c_str(), v.selection_count,
                  v.mean_impact, v.flip_rate);
    out += line;
  }
  return out;
}

inline nlohmann::ordered_json vulnerability_json(const std::vector<FeatureVulnerability>& vulns) {
  if (vulns.empty()) throw std::invalid_argument("vulnerability_json: empty vulnerability list");
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const FeatureVulnerability& v : vulns) {
    arr.push_back({{"feature", v.feature},
                   {"selection_count", v.selection_count},
                   {"mean_impact", v.mean_impact},
                   {"flip_rate", v.flip_rate}});
  }
  return arr;
}

inline std::vector<FeatureVulnerability> vulnerabilities_from_json(const nlohmann::json& arr) {
  std::vector<FeatureVulnerability> out;
  for (const auto& j : arr) {
    out.push_back({j.at("feature").get<std::string>(), j.at("selection_count").get<long>(),
                   j.at("mean_impact").get<double>(), j.at("flip_rate").get<double>()});
  }
  return out;
}

}  // namespace defeat
