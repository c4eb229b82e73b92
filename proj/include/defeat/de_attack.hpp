#pragma once

// One-feature differential-evolution attack engine and the random baseline.
// A candidate carries two coordinates: a continuous feature index (decoded by
// floor, wrapped modulo the feature count during repair) and the perturbation
// added to the decoded feature. Selection is per-individual greedy: a trial
// replaces its parent only when it strictly increases the prediction loss.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "defeat/feature_space.hpp"
#include "defeat/predictor.hpp"
#include "defeat/rng.hpp"
#include "defeat/scenario.hpp"

namespace defeat {

struct Candidate {
  double k_real = 0.0;  // feature coordinate in [0, F)
  double delta = 0.0;   // perturbation, same units as the decoded feature
};

struct DEParams {
  int population = 5;        // N_p, needs >= 4 so mutation has 3 distinct others
  double mutation = 0.5;     // alpha in [0, 2]
  double crossover = 0.9;    // CR in [0, 1]
  int generations = 10;      // G_max
  double delta_budget = 0.1; // relative perturbation bound

  void check() const {
    if (population < 4) throw std::invalid_argument("population must be >= 4");
    if (mutation < 0.0 || mutation > 2.0) throw std::invalid_argument("mutation factor outside [0, 2]");
    if (crossover < 0.0 || crossover > 1.0) throw std::invalid_argument("crossover rate outside [0, 1]");
    if (generations < 1) throw std::invalid_argument("generations must be >= 1");
    if (!(delta_budget > 0.0 && delta_budget < 1.0)) throw std::invalid_argument("delta budget outside (0, 1)");
  }
};

struct FitnessWeights {
  double w_traj = 1.0;          // weight on mean 4-horizon displacement error
  double w_int = 5.0;           // weight on the intention-mismatch indicator
  double parse_fail_penalty = 5.0;

  void check() const {
    if (w_traj < 0.0 || w_int < 0.0 || parse_fail_penalty < 0.0) {
      throw std::invalid_argument("fitness weights must be non-negative");
    }
    if (w_traj == 0.0 && w_int == 0.0) {
      throw std::invalid_argument("at least one fitness weight must be positive");
    }
  }
};

struct NoAttackSurface : std::runtime_error {
  explicit NoAttackSurface(const std::string& scenario_id)
      : std::runtime_error("scenario " + scenario_id +
                           " has no surrounding vehicles; the attack is undefined") {}
};

struct AttackResult {
  std::string scenario_id;
  std::uint64_t rng_seed = 0;
  FeatureId best_feature;
  double best_delta = 0.0;  // 0 means the zero-perturbation fallback
  double clean_fitness = 0.0;
  double best_fitness = 0.0;
  std::vector<double> trace;       // population best per generation, init first
  std::int64_t total_queries = 0;  // billed predictor queries during the attack
  PredictOutcome clean;
  PredictOutcome attacked;
};

// --- DE primitives -----------------------------------------------------------

inline int decode_feature(double k_real, int feature_count) {
  int k = static_cast<int>(std::floor(k_real));
  if (k < 0) k = 0;
  if (k >= feature_count) k = feature_count - 1;
  return k;
}

// Perturbation interval in delta space for the decoded feature.
inline Interval delta_interval(const DrivingScenario& s, const FeatureId& f, double budget) {
  const Interval value_bounds = bounds_for(s, f, budget);
  const double clean = feature_value(s, f);
  return {value_bounds.lo - clean, value_bounds.hi - clean};
}

inline std::vector<Candidate> init_population(const DrivingScenario& s, const DEParams& params,
                                              Rng& rng) {
  params.check();
  const std::vector<FeatureId> features = enumerate_features(s);
  if (features.empty()) throw NoAttackSurface(s.id);
  const double count = static_cast<double>(features.size());

  std::vector<Candidate> pop;
  pop.reserve(static_cast<std::size_t>(params.population));
  for (int i = 0; i < params.population; ++i) {
    Candidate c;
    // Degenerate intervals (zero-valued features) are re-drawn a few times if
    // another feature exists; a persistent degenerate draw stays as a wasted
    // candidate with delta 0.
    for (int attempt = 0; attempt < 16; ++attempt) {
      c.k_real = rng.uniform(0.0, count);
      const Interval iv = delta_interval(s, features[static_cast<std::size_t>(decode_feature(
                                                c.k_real, static_cast<int>(features.size())))],
                                         params.delta_budget);
      if (!iv.degenerate()) {
        c.delta = rng.uniform(iv.lo, iv.hi);
        break;
      }
      c.delta = 0.0;
      if (features.size() == 1) break;
    }
    pop.push_back(c);
  }
  return pop;
}

// v = x_r1 + alpha * (x_r2 - x_r3), component-wise.
inline Candidate mutant_vector(const Candidate& x1, const Candidate& x2, const Candidate& x3,
                               double alpha) {
  return {x1.k_real + alpha * (x2.k_real - x3.k_real), x1.delta + alpha * (x2.delta - x3.delta)};
}

inline Candidate mutate(const std::vector<Candidate>& population, int i, double alpha, Rng& rng) {
  const int n = static_cast<int>(population.size());
  if (n < 4) throw std::invalid_argument("mutation needs a population of at least 4");
  int r1 = i, r2 = i, r3 = i;
  while (r1 == i) r1 = rng.below_int(n);
  while (r2 == i || r2 == r1) r2 = rng.below_int(n);
  while (r3 == i || r3 == r1 || r3 == r2) r3 = rng.below_int(n);
  return mutant_vector(population[static_cast<std::size_t>(r1)],
                       population[static_cast<std::size_t>(r2)],
                       population[static_cast<std::size_t>(r3)], alpha);
}

// Binomial crossover with explicit draws; dimension rand2 always comes from
// the mutant so the trial differs from its parent in at least one coordinate.
inline Candidate crossover_with(const Candidate& parent, const Candidate& mutant, double cr,
                                const std::array<double, 2>& rand1, int rand2) {
  const auto pick = [&](int dim, double parent_v, double mutant_v) {
    return (rand1[static_cast<std::size_t>(dim)] <= cr || dim == rand2) ? mutant_v : parent_v;
  };
  return {pick(0, parent.k_real, mutant.k_real), pick(1, parent.delta, mutant.delta)};
}

inline Candidate crossover(const Candidate& parent, const Candidate& mutant, double cr, Rng& rng) {
  const int rand2 = rng.below_int(2);
  const std::array<double, 2> rand1 = {rng.uniform01(), rng.uniform01()};
  return crossover_with(parent, mutant, cr, rand1, rand2);
}

// Resample repair: the feature coordinate wraps modulo F; an out-of-bound
// delta is re-drawn uniformly from the decoded feature's interval, not
// clipped.
inline Candidate repair(Candidate c, const DrivingScenario& s,
                        const std::vector<FeatureId>& features, double budget, Rng& rng) {
  const double count = static_cast<double>(features.size());
  c.k_real = std::fmod(c.k_real, count);
  if (c.k_real < 0.0) c.k_real += count;
  if (c.k_real >= count) c.k_real = 0.0;  // fmod landing exactly on F

  const FeatureId& f =
      features[static_cast<std::size_t>(decode_feature(c.k_real, static_cast<int>(features.size())))];
  const Interval iv = delta_interval(s, f, budget);
  if (c.delta < iv.lo || c.delta > iv.hi) {
    c.delta = iv.degenerate() ? iv.lo : rng.uniform(iv.lo, iv.hi);
  }
  return c;
}

// --- fitness ------------------------------------------------------------------

inline double mean_displacement(const PredictionResult& prediction, const GroundTruth& truth) {
  double sum = 0.0;
  for (std::size_t t = 0; t < 4; ++t) {
    const double dx = prediction.trajectory[t].x - truth.trajectory[t].x;
    const double dy = prediction.trajectory[t].y - truth.trajectory[t].y;
    sum += std::sqrt(dx * dx + dy * dy);
  }
  return sum / 4.0;
}

// Scores one candidate with exactly one predictor query (modulo caching):
// apply the perturbation, render, predict, then weight trajectory deviation
// and intention mismatch. Unparseable answers score the clean displacement
// term plus the parse-failure penalty.
class FitnessEvaluator {
 public:
  FitnessEvaluator(const DrivingScenario& clean, const GroundTruth& truth, Predictor& predictor,
                   FitnessWeights weights, double delta_budget)
      : clean_(clean),
        truth_(truth),
        predictor_(predictor),
        weights_(weights),
        budget_(delta_budget),
        features_(enumerate_features(clean)) {
    weights_.check();
    if (features_.empty()) throw NoAttackSurface(clean.id);
  }

  struct Sample {
    double fitness = 0.0;
    PredictOutcome outcome;
  };

  Sample evaluate_clean() {
    Sample s;
    s.outcome = predictor_.predict(clean_);
    clean_displacement_ =
        s.outcome.ok() ? mean_displacement(*s.outcome.result, truth_) : 0.0;
    clean_seen_ = true;
    s.fitness = score(s.outcome);
    return s;
  }

  Sample evaluate(const Candidate& c) {
    if (!clean_seen_) throw std::logic_error("evaluate_clean must run before candidate scoring");
    const FeatureId& f =
        features_[static_cast<std::size_t>(decode_feature(c.k_real, static_cast<int>(features_.size())))];
    // Deltas sampled at interval endpoints can overshoot by one ulp when
    // added back to the clean value; pin the perturbed value to the interval.
    const Interval bounds = bounds_for(clean_, f, budget_);
    const double clean_value = feature_value(clean_, f);
    const double perturbed = std::clamp(clean_value + c.delta, bounds.lo, bounds.hi);
    const DrivingScenario attacked = apply(clean_, Perturbation{f, perturbed - clean_value}, budget_);
    Sample s;
    s.outcome = predictor_.predict(attacked);
    s.fitness = score(s.outcome);
    return s;
  }

  const std::vector<FeatureId>& features() const { return features_; }
  double clean_displacement() const { return clean_displacement_; }

  double score(const PredictOutcome& outcome) const {
    if (!outcome.ok()) {
      return weights_.w_traj * clean_displacement_ + weights_.parse_fail_penalty;
    }
    const double displacement = mean_displacement(*outcome.result, truth_);
    const bool mismatch = outcome.result->intention != truth_.intention;
    return weights_.w_traj * displacement + (mismatch ? weights_.w_int : 0.0);
  }

 private:
  DrivingScenario clean_;
  GroundTruth truth_;
  Predictor& predictor_;
  FitnessWeights weights_;
  double budget_;
  std::vector<FeatureId> features_;
  double clean_displacement_ = 0.0;
  bool clean_seen_ = false;
};

// --- attack loops --------------------------------------------------------------

inline AttackResult run_attack(const DrivingScenario& scenario, const GroundTruth& truth,
                               Predictor& predictor, const DEParams& params,
                               const FitnessWeights& weights, Rng& rng,
                               std::uint64_t stream_seed = 0, QueryLog* log = nullptr) {
  params.check();

  // Per-run memoization: survivors keep their fitness and duplicate prompts
  // are answered from the cache instead of consuming budget.
  CachingPredictor cache(predictor, log);
  FitnessEvaluator eval(scenario, truth, cache, weights, params.delta_budget);

  AttackResult result;
  result.scenario_id = scenario.id;
  result.rng_seed = stream_seed;

  const FitnessEvaluator::Sample clean = eval.evaluate_clean();
  result.clean_fitness = clean.fitness;
  result.clean = clean.outcome;
  const std::size_t clean_cost = cache.inner_calls();

  std::vector<Candidate> pop = init_population(scenario, params, rng);
  std::vector<double> fitness(pop.size());
  std::vector<PredictOutcome> outcomes(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    auto sample = eval.evaluate(pop[i]);
    fitness[i] = sample.fitness;
    outcomes[i] = std::move(sample.outcome);
  }
  result.trace.push_back(*std::max_element(fitness.begin(), fitness.end()));

  for (int g = 0; g < params.generations; ++g) {
    for (std::size_t i = 0; i < pop.size(); ++i) {
      const Candidate mutant = mutate(pop, static_cast<int>(i), params.mutation, rng);
      Candidate trial = crossover(pop[i], mutant, params.crossover, rng);
      trial = repair(trial, scenario, eval.features(), params.delta_budget, rng);
      auto sample = eval.evaluate(trial);
      if (sample.fitness > fitness[i]) {
        pop[i] = trial;
        fitness[i] = sample.fitness;
        outcomes[i] = std::move(sample.outcome);
      }
    }
    result.trace.push_back(*std::max_element(fitness.begin(), fitness.end()));
  }

  result.total_queries =
      static_cast<std::int64_t>(cache.inner_calls() - clean_cost);

  const std::size_t best =
      static_cast<std::size_t>(std::max_element(fitness.begin(), fitness.end()) - fitness.begin());
  const FeatureId& best_feature = eval.features()[static_cast<std::size_t>(
      decode_feature(pop[best].k_real, static_cast<int>(eval.features().size())))];
  result.best_feature = best_feature;

  if (fitness[best] > result.clean_fitness) {
    result.best_delta = pop[best].delta;
    result.best_fitness = fitness[best];
    result.attacked = outcomes[best];
  } else {
    // Zero-perturbation fallback: the attack found nothing worse than the
    // clean prediction, which is reported explicitly rather than silently.
    result.best_delta = 0.0;
    result.best_fitness = result.clean_fitness;
    result.attacked = result.clean;
  }
  return result;
}

struct RandomAttackResult {
  std::string scenario_id;
  std::uint64_t rng_seed = 0;
  double clean_fitness = 0.0;
  PredictOutcome clean;
  std::int64_t total_queries = 0;

  // The random attack proper is a single unoptimized draw (the last one);
  // best-of-budget is recorded separately for fair comparison with DE.
  FeatureId last_feature;
  double last_delta = 0.0;
  double last_fitness = 0.0;
  PredictOutcome last;

  FeatureId best_feature;
  double best_delta = 0.0;
  double best_fitness = 0.0;
  PredictOutcome best;
};

inline RandomAttackResult random_attack(const DrivingScenario& scenario, const GroundTruth& truth,
                                        Predictor& predictor, int query_budget,
                                        double delta_budget, Rng& rng,
                                        const FitnessWeights& weights = {},
                                        std::uint64_t stream_seed = 0, QueryLog* log = nullptr) {
  if (query_budget < 1) throw std::invalid_argument("query budget must be >= 1");

  CachingPredictor cache(predictor, log);
  FitnessEvaluator eval(scenario, truth, cache, weights, delta_budget);

  RandomAttackResult result;
  result.scenario_id = scenario.id;
  result.rng_seed = stream_seed;

  const auto clean = eval.evaluate_clean();
  result.clean_fitness = clean.fitness;
  result.clean = clean.outcome;
  const std::size_t clean_cost = cache.inner_calls();

  const std::vector<FeatureId>& features = eval.features();
  bool have_best = false;
  for (int q = 0; q < query_budget; ++q) {
    const int k = rng.below_int(static_cast<int>(features.size()));
    const Interval iv = delta_interval(scenario, features[static_cast<std::size_t>(k)], delta_budget);
    Candidate c;
    c.k_real = static_cast<double>(k);
    c.delta = iv.degenerate() ? iv.lo : rng.uniform(iv.lo, iv.hi);
    const auto sample = eval.evaluate(c);

    result.last_feature = features[static_cast<std::size_t>(k)];
    result.last_delta = c.delta;
    result.last_fitness = sample.fitness;
    result.last = sample.outcome;

    if (!have_best || sample.fitness > result.best_fitness) {
      have_best = true;
      result.best_feature = features[static_cast<std::size_t>(k)];
      result.best_delta = c.delta;
      result.best_fitness = sample.fitness;
      result.best = sample.outcome;
    }
  }
  result.total_queries = static_cast<std::int64_t>(cache.inner_calls() - clean_cost);
  return result;
}

// --- serialization ---------------------------------------------------------------

inline nlohmann::ordered_json outcome_json(const PredictOutcome& o) {
  nlohmann::ordered_json j;
  if (o.ok()) {
    j["intention"] = static_cast<int>(o.result->intention);
    nlohmann::ordered_json traj = nlohmann::ordered_json::array();
    for (const Vec2& p : o.result->trajectory) traj.push_back({p.x, p.y});
    j["trajectory"] = std::move(traj);
    if (!o.result->thought.empty()) j["thought"] = o.result->thought;
  } else if (o.error) {
    j["parse_error"] = to_string(o.error->kind);
    j["detail"] = o.error->detail;
  }
  return j;
}

inline nlohmann::ordered_json to_json(const AttackResult& r) {
  nlohmann::ordered_json j;
  j["scenario_id"] = r.scenario_id;
  j["rng_seed"] = r.rng_seed;
  j["best_feature"] = feature_label(r.best_feature);
  j["best_delta"] = r.best_delta;
  j["clean_fitness"] = r.clean_fitness;
  j["best_fitness"] = r.best_fitness;
  j["trace"] = r.trace;
  j["total_queries"] = r.total_queries;
  j["clean"] = outcome_json(r.clean);
  j["attacked"] = outcome_json(r.attacked);
  return j;
}

inline nlohmann::ordered_json to_json(const RandomAttackResult& r) {
  nlohmann::ordered_json j;
  j["scenario_id"] = r.scenario_id;
  j["rng_seed"] = r.rng_seed;
  j["clean_fitness"] = r.clean_fitness;
  j["total_queries"] = r.total_queries;
  j["clean"] = outcome_json(r.clean);
  j["last"] = {{"feature", feature_label(r.last_feature)},
               {"delta", r.last_delta},
               {"fitness", r.last_fitness},
               {"prediction", outcome_json(r.last)}};
  j["best"] = {{"feature", feature_label(r.best_feature)},
               {"delta", r.best_delta},
               {"fitness", r.best_fitness},
               {"prediction", outcome_json(r.best)}};
  return j;
}

}  // namespace defeat
