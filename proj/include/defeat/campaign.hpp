#pragma once

// Campaign orchestration behind the CLI: clean evaluation, DE attack
// campaigns, random baselines, corpus generation and report merging. Runs are
// deterministic for a fixed (config, seed, corpus): every scenario owns a
// private RNG stream derived from (master seed, scenario id) and outputs are
// written in corpus order, so results do not depend on worker scheduling.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "defeat/de_attack.hpp"
#include "defeat/ingest.hpp"
#include "defeat/metrics.hpp"
#include "defeat/predictor.hpp"
#include "defeat/remote.hpp"
#include "defeat/vuln_report.hpp"

namespace defeat {

inline constexpr const char* kToolVersion = "0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class PredictorKind { Surrogate, Remote };

struct CampaignConfig {
  PredictorKind predictor = PredictorKind::Surrogate;
  EndpointConfig endpoint;
  SurrogateParams surrogate;
  DEParams de;
  FitnessWeights weights;
  std::uint64_t master_seed = 0;
  bool seed_set = false;  // a seed is mandatory: no silent nondeterminism
  std::string corpus_path;
  std::string out_dir;
  PromptMode mode = PromptMode::Plain;
  std::vector<double> deltas;  // sweep list; defaults to {de.delta_budget}
  int workers = 1;
  int random_budget = 0;  // 0 means DE-equal: N_p * (G_max + 1)
  double transport_failure_threshold = 0.0;

  std::vector<double> sweep_deltas() const {
    return deltas.empty() ? std::vector<double>{de.delta_budget} : deltas;
  }

  int baseline_budget() const {
    return random_budget > 0 ? random_budget : de.population * (de.generations + 1);
  }
};

// --- config file -----------------------------------------------------------------

inline CampaignConfig config_from_json(const nlohmann::json& j) {
  CampaignConfig c;
  if (j.contains("predictor")) {
    const std::string kind = j.at("predictor").get<std::string>();
    if (kind == "surrogate") {
      c.predictor = PredictorKind::Surrogate;
    } else if (kind == "remote") {
      c.predictor = PredictorKind::Remote;
    } else {
      throw ConfigError("unknown predictor kind: " + kind);
    }
  }
  if (j.contains("endpoint")) {
    const nlohmann::json& e = j.at("endpoint");
    if (e.contains("base_url")) c.endpoint.base_url = e.at("base_url").get<std::string>();
    if (e.contains("path")) c.endpoint.path = e.at("path").get<std::string>();
    if (e.contains("model")) c.endpoint.model = e.at("model").get<std::string>();
    if (e.contains("timeout_s")) c.endpoint.timeout_s = e.at("timeout_s").get<double>();
    if (e.contains("max_retries")) c.endpoint.max_retries = e.at("max_retries").get<int>();
    if (e.contains("backoff_ms")) c.endpoint.backoff_ms = e.at("backoff_ms").get<int>();
  }
  if (j.contains("population")) c.de.population = j.at("population").get<int>();
  if (j.contains("alpha")) c.de.mutation = j.at("alpha").get<double>();
  if (j.contains("cr")) c.de.crossover = j.at("cr").get<double>();
  if (j.contains("generations")) c.de.generations = j.at("generations").get<int>();
  if (j.contains("delta")) {
    if (j.at("delta").is_array()) {
      c.deltas = j.at("delta").get<std::vector<double>>();
    } else {
      c.deltas = {j.at("delta").get<double>()};
    }
    if (!c.deltas.empty()) c.de.delta_budget = c.deltas.front();
  }
  if (j.contains("w_traj")) c.weights.w_traj = j.at("w_traj").get<double>();
  if (j.contains("w_int")) c.weights.w_int = j.at("w_int").get<double>();
  if (j.contains("parse_fail_penalty")) {
    c.weights.parse_fail_penalty = j.at("parse_fail_penalty").get<double>();
  }
  if (j.contains("seed")) {
    c.master_seed = j.at("seed").get<std::uint64_t>();
    c.seed_set = true;
  }
  if (j.contains("corpus")) c.corpus_path = j.at("corpus").get<std::string>();
  if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
  if (j.contains("cot")) c.mode = j.at("cot").get<bool>() ? PromptMode::CoT : PromptMode::Plain;
  if (j.contains("workers")) c.workers = j.at("workers").get<int>();
  if (j.contains("random_budget")) c.random_budget = j.at("random_budget").get<int>();
  if (j.contains("transport_failure_threshold")) {
    c.transport_failure_threshold = j.at("transport_failure_threshold").get<double>();
  }
  return c;
}

// Behavioral view of the config: excludes filesystem locations so the config
// hash is stable across checkout layouts.
inline nlohmann::ordered_json config_to_json(const CampaignConfig& c) {
  nlohmann::ordered_json j;
  j["predictor"] = c.predictor == PredictorKind::Surrogate ? "surrogate" : "remote";
  if (c.predictor == PredictorKind::Remote) {
    j["endpoint"] = {{"base_url", c.endpoint.base_url},
                     {"path", c.endpoint.path},
                     {"model", c.endpoint.model},
                     {"timeout_s", c.endpoint.timeout_s},
                     {"max_retries", c.endpoint.max_retries}};
  }
  j["population"] = c.de.population;
  j["alpha"] = c.de.mutation;
  j["cr"] = c.de.crossover;
  j["generations"] = c.de.generations;
  j["delta"] = c.sweep_deltas();
  j["w_traj"] = c.weights.w_traj;
  j["w_int"] = c.weights.w_int;
  j["parse_fail_penalty"] = c.weights.parse_fail_penalty;
  j["seed"] = c.master_seed;
  j["cot"] = c.mode == PromptMode::CoT;
  j["random_budget"] = c.random_budget;
  j["transport_failure_threshold"] = c.transport_failure_threshold;
  return j;
}

inline CampaignConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config file " + path + ": " + std::string(e.what()));
  }
  return config_from_json(j);
}

// --- helpers ----------------------------------------------------------------------

namespace detail {

template <typename Fn>
inline void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min<int>(workers, static_cast<int>(n));
  pool.reserve(static_cast<std::size_t>(count));
  for (int w = 0; w < count; ++w) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << content;
}

inline std::string delta_dir_name(double delta) {
  return "delta_" + fmt2(delta);
}

inline std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for hashing: " + path);
  std::uint64_t h = kFnvOffset;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace detail

inline std::unique_ptr<Predictor> make_predictor(const CampaignConfig& c) {
  if (c.predictor == PredictorKind::Remote) {
    return std::make_unique<RemotePredictor>(with_env_overrides(c.endpoint), c.mode);
  }
  return std::make_unique<SurrogatePredictor>(c.mode, c.surrogate);
}

inline std::vector<DrivingScenario> load_campaign_corpus(const CampaignConfig& c,
                                                         bool require_truth) {
  if (c.corpus_path.empty()) throw ConfigError("no corpus path configured");
  std::vector<DrivingScenario> corpus;
  try {
    corpus = load_corpus_file(c.corpus_path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  if (corpus.empty()) throw DataError("corpus is empty: " + c.corpus_path);
  if (require_truth) {
    for (const DrivingScenario& s : corpus) {
      if (!s.truth) throw ConfigError("scenario " + s.id + " carries no ground truth");
    }
  }
  return corpus;
}

inline void check_campaign(const CampaignConfig& c) {
  if (!c.seed_set) throw ConfigError("a master seed is mandatory (--seed)");
  if (c.out_dir.empty()) throw ConfigError("no output directory configured (--out)");
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  try {
    c.de.check();
    c.weights.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline void write_manifest(const CampaignConfig& c) {
  nlohmann::ordered_json m;
  m["tool"] = "defeat";
  m["version"] = kToolVersion;
  m["seed"] = c.master_seed;
  m["config_hash"] = detail::hex64(fnv1a64(config_to_json(c).dump()));
  m["corpus_hash"] = detail::hex64(detail::file_hash(c.corpus_path));
  m["deltas"] = c.sweep_deltas();
  m["mode"] = c.mode == PromptMode::CoT ? "cot" : "plain";
  m["predictor"] = c.predictor == PredictorKind::Surrogate ? "surrogate" : "remote";
  detail::write_text(std::filesystem::path(c.out_dir) / "manifest.json", m.dump(2) + "\n");
}

// --- shared metric aggregation ------------------------------------------------------

struct ScenarioFailure {
  std::string id;
  std::string message;
};

struct MetricSet {
  PositionErrorTable rmse{};
  IntentionReport intentions{};
  long evaluated = 0;
  long parse_failures = 0;
  bool has_rmse = false;
};

inline MetricSet metrics_from(const std::vector<const PredictOutcome*>& outcomes,
                              const std::vector<const GroundTruth*>& truths) {
  MetricSet m;
  std::vector<std::pair<PredictionResult, GroundTruth>> pairs;
  ConfusionMatrix matrix;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    ++m.evaluated;
    if (!outcomes[i]->ok()) {
      ++matrix.parse_failures;
      ++m.parse_failures;
      continue;
    }
    pairs.push_back({*outcomes[i]->result, *truths[i]});
    matrix.add(truths[i]->intention, outcomes[i]->result->intention);
  }
  if (!pairs.empty()) {
    m.rmse = rmse_table(pairs);
    m.has_rmse = true;
  }
  if (matrix.total() > 0) m.intentions = intention_report(matrix);
  return m;
}

inline nlohmann::ordered_json metric_set_json(const MetricSet& m) {
  nlohmann::ordered_json j;
  j["evaluated"] = m.evaluated;
  j["parse_failures"] = m.parse_failures;
  j["rmse"] = m.has_rmse ? to_json(m.rmse) : nlohmann::ordered_json();
  j["intention"] = to_json(m.intentions);
  return j;
}

// --- eval --------------------------------------------------------------------------

struct EvalReport {
  MetricSet metrics;
  long transport_failures = 0;
  std::vector<ScenarioFailure> failures;
};

inline EvalReport cmd_eval(const CampaignConfig& config) {
  check_campaign(config);
  const std::vector<DrivingScenario> corpus = load_campaign_corpus(config, true);
  std::unique_ptr<Predictor> predictor = make_predictor(config);

  std::vector<std::optional<PredictOutcome>> outcomes(corpus.size());
  std::vector<std::optional<std::string>> errors(corpus.size());
  detail::parallel_for(corpus.size(), config.workers, [&](std::size_t i) {
    try {
      outcomes[i] = predictor->predict(corpus[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  EvalReport report;
  std::vector<const PredictOutcome*> oks;
  std::vector<const GroundTruth*> truths;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (errors[i]) {
      ++report.transport_failures;
      report.failures.push_back({corpus[i].id, *errors[i]});
      continue;
    }
    oks.push_back(&*outcomes[i]);
    truths.push_back(&*corpus[i].truth);
  }
  if (oks.empty()) {
    if (report.transport_failures > 0) {
      throw TransportError(TransportError::Kind::Timeout, 0,
                           "no scenario produced a response: " + report.failures.front().message);
    }
    throw DataError("no scenario produced a response");
  }
  report.metrics = metrics_from(oks, truths);

  nlohmann::ordered_json j;
  j["condition"] = "no_attack";
  j["metrics"] = metric_set_json(report.metrics);
  j["transport_failures"] = report.transport_failures;
  detail::write_text(std::filesystem::path(config.out_dir) / "report.json", j.dump(2) + "\n");
  detail::write_text(std::filesystem::path(config.out_dir) / "report.txt",
                     render_rmse_text({{"No attack", report.metrics.rmse}}) + "\n" +
                         render_intention_text({{"No attack", report.metrics.intentions}}));
  write_manifest(config);

  const double rate = static_cast<double>(report.transport_failures) /
                      static_cast<double>(corpus.size());
  if (rate > config.transport_failure_threshold) {
    throw TransportError(TransportError::Kind::Timeout, 0,
                         "transport failure rate " + std::to_string(rate) +
                             " exceeds the configured threshold");
  }
  return report;
}

// --- attack ------------------------------------------------------------------------

struct AttackCampaignReport {
  double delta = 0.1;
  MetricSet clean;
  MetricSet attacked;
  std::vector<AttackResult> results;  // corpus order, failed scenarios omitted
  std::vector<FeatureVulnerability> vulnerabilities;
  std::vector<ScenarioFailure> failures;
};

namespace detail {

inline nlohmann::ordered_json attack_report_json(const AttackCampaignReport& r) {
  nlohmann::ordered_json j;
  j["delta"] = r.delta;
  j["clean"] = metric_set_json(r.clean);
  j["attacked"] = metric_set_json(r.attacked);
  nlohmann::ordered_json deg;
  deg["rmse_avg_4s"] =
      format_percent_delta(r.clean.rmse.at(ErrorAxis::Average, 4), r.attacked.rmse.at(ErrorAxis::Average, 4));
  deg["macro_f1"] = format_percent_delta(r.clean.intentions.macro.f1, r.attacked.intentions.macro.f1);
  j["degradation"] = std::move(deg);
  nlohmann::ordered_json fails = nlohmann::ordered_json::array();
  for (const ScenarioFailure& f : r.failures) fails.push_back({{"id", f.id}, {"error", f.message}});
  j["failures"] = std::move(fails);
  return j;
}

inline std::string attack_report_text(const AttackCampaignReport& r) {
  return render_rmse_text({{"No attack", r.clean.rmse}, {"One-feature DE attack", r.attacked.rmse}},
                          true) +
         "\n" +
         render_intention_text(
             {{"No attack", r.clean.intentions}, {"One-feature DE attack", r.attacked.intentions}},
             true);
}

}  // namespace detail

inline std::vector<AttackCampaignReport> cmd_attack(const CampaignConfig& config) {
  check_campaign(config);
  const std::vector<DrivingScenario> corpus = load_campaign_corpus(config, true);
  std::unique_ptr<Predictor> predictor = make_predictor(config);

  std::vector<AttackCampaignReport> reports;
  for (const double delta : config.sweep_deltas()) {
    DEParams params = config.de;
    params.delta_budget = delta;

    AttackCampaignReport report;
    report.delta = delta;

    std::vector<std::optional<AttackResult>> slots(corpus.size());
    std::vector<std::optional<std::string>> errors(corpus.size());
    detail::parallel_for(corpus.size(), config.workers, [&](std::size_t i) {
      const std::uint64_t stream = derive_stream_seed(config.master_seed, corpus[i].id);
      Rng rng(stream);
      try {
        slots[i] = run_attack(corpus[i], *corpus[i].truth, *predictor, params, config.weights,
                              rng, stream);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });

    std::string jsonl;
    std::vector<const GroundTruth*> truths;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (errors[i]) {
        report.failures.push_back({corpus[i].id, *errors[i]});
        continue;
      }
      report.results.push_back(*slots[i]);
      jsonl += to_json(*slots[i]).dump() + "\n";
      truths.push_back(&*corpus[i].truth);
    }
    if (report.results.empty()) throw DataError("every scenario failed; no attack results");

    std::vector<const PredictOutcome*> clean_outcomes;
    std::vector<const PredictOutcome*> attacked_outcomes;
    for (const AttackResult& r : report.results) {
      clean_outcomes.push_back(&r.clean);
      attacked_outcomes.push_back(&r.attacked);
    }
    report.clean = metrics_from(clean_outcomes, truths);
    report.attacked = metrics_from(attacked_outcomes, truths);

    const std::filesystem::path dir =
        std::filesystem::path(config.out_dir) / detail::delta_dir_name(delta);
    detail::write_text(dir / "attacks.jsonl", jsonl);
    detail::write_text(dir / "report.json", detail::attack_report_json(report).dump(2) + "\n");
    detail::write_text(dir / "report.txt", detail::attack_report_text(report));

    bool any_selection = false;
    for (const AttackResult& r : report.results) any_selection |= r.best_delta != 0.0;
    if (any_selection) {
      report.vulnerabilities = aggregate(report.results);
      detail::write_text(dir / "vulnerability.csv", vulnerability_csv(report.vulnerabilities));
      detail::write_text(dir / "vulnerability.json",
                         vulnerability_json(report.vulnerabilities).dump(2) + "\n");
    }
    reports.push_back(std::move(report));
  }

  if (reports.size() > 1) {
    std::string summary = "Perturbation budget sweep\n";
    for (const AttackCampaignReport& r : reports) {
      summary += "\n[delta = " + fmt2(r.delta) + "]\n" + detail::attack_report_text(r);
    }
    detail::write_text(std::filesystem::path(config.out_dir) / "sweep_summary.txt", summary);
  }
  write_manifest(config);
  return reports;
}

// --- baseline ------------------------------------------------------------------------

struct BaselineCampaignReport {
  double delta = 0.1;
  int budget = 0;
  MetricSet clean;
  MetricSet single_draw;  // the last drawn candidate: the random attack proper
  MetricSet best_of;      // best-of-budget, the stricter comparison with DE
  std::vector<RandomAttackResult> results;
  std::vector<ScenarioFailure> failures;
};

inline std::vector<BaselineCampaignReport> cmd_baseline(const CampaignConfig& config) {
  check_campaign(config);
  const std::vector<DrivingScenario> corpus = load_campaign_corpus(config, true);
  std::unique_ptr<Predictor> predictor = make_predictor(config);
  const int budget = config.baseline_budget();

  std::vector<BaselineCampaignReport> reports;
  for (const double delta : config.sweep_deltas()) {
    BaselineCampaignReport report;
    report.delta = delta;
    report.budget = budget;

    std::vector<std::optional<RandomAttackResult>> slots(corpus.size());
    std::vector<std::optional<std::string>> errors(corpus.size());
    detail::parallel_for(corpus.size(), config.workers, [&](std::size_t i) {
      const std::uint64_t stream = derive_stream_seed(config.master_seed, corpus[i].id);
      Rng rng(stream);
      try {
        slots[i] = random_attack(corpus[i], *corpus[i].truth, *predictor, budget, delta, rng,
                                 config.weights, stream);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });

    std::string jsonl;
    std::vector<const GroundTruth*> truths;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (errors[i]) {
        report.failures.push_back({corpus[i].id, *errors[i]});
        continue;
      }
      report.results.push_back(*slots[i]);
      jsonl += to_json(*slots[i]).dump() + "\n";
      truths.push_back(&*corpus[i].truth);
    }
    if (report.results.empty()) throw DataError("every scenario failed; no baseline results");

    std::vector<const PredictOutcome*> clean_outcomes;
    std::vector<const PredictOutcome*> last_outcomes;
    std::vector<const PredictOutcome*> best_outcomes;
    for (const RandomAttackResult& r : report.results) {
      clean_outcomes.push_back(&r.clean);
      last_outcomes.push_back(&r.last);
      best_outcomes.push_back(&r.best);
    }
    report.clean = metrics_from(clean_outcomes, truths);
    report.single_draw = metrics_from(last_outcomes, truths);
    report.best_of = metrics_from(best_outcomes, truths);

    const std::filesystem::path dir =
        std::filesystem::path(config.out_dir) / detail::delta_dir_name(delta);
    detail::write_text(dir / "random.jsonl", jsonl);

    nlohmann::ordered_json j;
    j["delta"] = delta;
    j["budget"] = budget;
    j["clean"] = metric_set_json(report.clean);
    j["single_draw"] = metric_set_json(report.single_draw);
    j["best_of_budget"] = metric_set_json(report.best_of);
    j["degradation"] = {
        {"single_draw_macro_f1",
         format_percent_delta(report.clean.intentions.macro.f1, report.single_draw.intentions.macro.f1)},
        {"best_of_macro_f1",
         format_percent_delta(report.clean.intentions.macro.f1, report.best_of.intentions.macro.f1)}};
    detail::write_text(dir / "report.json", j.dump(2) + "\n");
    detail::write_text(
        dir / "report.txt",
        render_rmse_text({{"No attack", report.clean.rmse},
                          {"Random (single draw)", report.single_draw.rmse},
                          {"Random (best of budget)", report.best_of.rmse}},
                         true) +
            "\n" +
            render_intention_text({{"No attack", report.clean.intentions},
                                   {"Random (single draw)", report.single_draw.intentions},
                                   {"Random (best of budget)", report.best_of.intentions}},
                                  true));
    reports.push_back(std::move(report));
  }
  write_manifest(config);
  return reports;
}

// --- gen / extract / report ------------------------------------------------------------

inline std::vector<DrivingScenario> cmd_gen(const SyntheticSpec& spec, std::uint64_t seed,
                                            const std::string& out_path,
                                            const SurrogateParams& params = {}) {
  const std::vector<DrivingScenario> corpus = generate_synthetic(spec, seed, params);
  if (!out_path.empty()) {
    std::filesystem::path p(out_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    save_corpus_file(corpus, out_path);
  }
  return corpus;
}

inline std::vector<DrivingScenario> cmd_extract(const std::string& csv_path,
                                                const ExtractionConfig& cfg,
                                                const std::string& out_path,
                                                ExtractionStats* stats = nullptr) {
  std::map<long, Track> tracks;
  try {
    tracks = load_tracks_file(csv_path);
  } catch (const IngestError& e) {
    throw DataError(e.what());
  }
  const std::vector<DrivingScenario> corpus = extract_scenarios(tracks, cfg, stats);
  if (corpus.empty()) throw DataError("no scenario could be extracted from " + csv_path);
  if (!out_path.empty()) {
    std::filesystem::path p(out_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    save_corpus_file(corpus, out_path);
  }
  return corpus;
}

// Reconstructs the aggregation inputs from attack .jsonl files and merges
// them into one vulnerability table.
inline AttackResult attack_result_from_json(const nlohmann::json& j) {
  AttackResult r;
  r.scenario_id = j.at("scenario_id").get<std::string>();
  r.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  const std::string label = j.at("best_feature").get<std::string>();
  const std::size_t dot = label.rfind('.');
  if (dot == std::string::npos) throw DataError("malformed feature label: " + label);
  r.best_feature.direction = detail::direction_from(label.substr(0, dot));
  const std::string attr = label.substr(dot + 1);
  if (attr == "speed_x") {
    r.best_feature.attribute = Attribute::SpeedX;
  } else if (attr == "distance") {
    r.best_feature.attribute = Attribute::Distance;
  } else {
    throw DataError("malformed feature attribute: " + attr);
  }
  r.best_delta = j.at("best_delta").get<double>();
  r.clean_fitness = j.at("clean_fitness").get<double>();
  r.best_fitness = j.at("best_fitness").get<double>();
  r.trace = j.at("trace").get<std::vector<double>>();
  r.total_queries = j.at("total_queries").get<std::int64_t>();
  auto outcome_from_json = [](const nlohmann::json& oj) {
    PredictOutcome o;
    if (oj.contains("intention")) {
      PredictionResult p;
      p.intention = static_cast<Intention>(oj.at("intention").get<int>());
      const auto& traj = oj.at("trajectory");
      for (std::size_t t = 0; t < 4 && t < traj.size(); ++t) {
        p.trajectory[t] = {traj[t][0].get<double>(), traj[t][1].get<double>()};
      }
      if (oj.contains("thought")) p.thought = oj.at("thought").get<std::vector<std::string>>();
      o.result = std::move(p);
    }
    return o;
  };
  r.clean = outcome_from_json(j.at("clean"));
  r.attacked = outcome_from_json(j.at("attacked"));
  return r;
}

inline std::vector<FeatureVulnerability> cmd_report(const std::vector<std::string>& jsonl_paths,
                                                    const std::string& out_csv,
                                                    const std::string& out_json) {
  std::vector<AttackResult> merged;
  for (const std::string& path : jsonl_paths) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open attack results: " + path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        merged.push_back(attack_result_from_json(nlohmann::json::parse(line)));
      } catch (const std::exception& e) {
        throw DataError(path + ": " + e.what());
      }
    }
  }
  if (merged.empty()) throw DataError("no attack results found in the given inputs");
  const std::vector<FeatureVulnerability> vulns = aggregate(merged);
  if (vulns.empty()) throw DataError("no effective attacks: the vulnerability table is empty");
  if (!out_csv.empty()) detail::write_text(out_csv, vulnerability_csv(vulns));
  if (!out_json.empty()) detail::write_text(out_json, vulnerability_json(vulns).dump(2) + "\n");
  return vulns;
}

}  // namespace defeat
