// Command-line entry point: corpora, campaigns and reports. Flags mirror the
// JSON config keys and override them; exit codes are 0 success, 1
// configuration error, 2 data error, 3 endpoint failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "defeat/campaign.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string corpus;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<double> deltas;
  std::optional<int> pop;
  std::optional<double> alpha;
  std::optional<double> cr;
  std::optional<int> gens;
  std::optional<std::string> predictor;
  std::optional<std::string> endpoint;
  bool cot = false;
  std::optional<int> workers;
  std::optional<int> random_budget;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file; flags override its values");
  cmd->add_option("--corpus", f.corpus, "scenario corpus (.jsonl)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "master random seed (mandatory)");
  cmd->add_option("--delta", f.deltas, "perturbation budget; repeat for a sweep");
  cmd->add_option("--pop", f.pop, "DE population size");
  cmd->add_option("--alpha", f.alpha, "DE mutation factor");
  cmd->add_option("--cr", f.cr, "DE crossover rate");
  cmd->add_option("--gens", f.gens, "DE generations");
  cmd->add_option("--predictor", f.predictor, "predictor: surrogate or remote")
      ->check(CLI::IsMember({"surrogate", "remote"}));
  cmd->add_option("--endpoint", f.endpoint, "remote endpoint base URL");
  cmd->add_flag("--cot", f.cot, "use the chain-of-thought prompt variant");
  cmd->add_option("--workers", f.workers, "scenario-level worker pool width");
  cmd->add_option("--random-budget", f.random_budget,
                  "baseline query budget (default: DE-equal)");
}

defeat::CampaignConfig build_config(const CommonFlags& f) {
  defeat::CampaignConfig c;
  if (!f.config_path.empty()) c = defeat::load_config_file(f.config_path);
  if (!f.corpus.empty()) c.corpus_path = f.corpus;
  if (!f.out.empty()) c.out_dir = f.out;
  if (f.seed) {
    c.master_seed = *f.seed;
    c.seed_set = true;
  }
  if (!f.deltas.empty()) {
    c.deltas = f.deltas;
    c.de.delta_budget = f.deltas.front();
  }
  if (f.pop) c.de.population = *f.pop;
  if (f.alpha) c.de.mutation = *f.alpha;
  if (f.cr) c.de.crossover = *f.cr;
  if (f.gens) c.de.generations = *f.gens;
  if (f.predictor) {
    c.predictor = *f.predictor == "remote" ? defeat::PredictorKind::Remote
                                           : defeat::PredictorKind::Surrogate;
  }
  if (f.endpoint) c.endpoint.base_url = *f.endpoint;
  if (f.cot) c.mode = defeat::PromptMode::CoT;
  if (f.workers) c.workers = *f.workers;
  if (f.random_budget) c.random_budget = *f.random_budget;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"defeat: one-feature differential-evolution probing for trajectory predictors"};
  app.require_subcommand(1);

  CommonFlags eval_flags, attack_flags, baseline_flags;
  CLI::App* eval_cmd = app.add_subcommand("eval", "clean metrics on a corpus (no attack)");
  add_common_flags(eval_cmd, eval_flags);
  CLI::App* attack_cmd = app.add_subcommand("attack", "run the DE attack campaign");
  add_common_flags(attack_cmd, attack_flags);
  CLI::App* baseline_cmd =
      app.add_subcommand("baseline", "random-attack baseline at a DE-equal budget");
  add_common_flags(baseline_cmd, baseline_flags);

  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a seeded synthetic corpus");
  int gen_size = 100;
  std::optional<std::uint64_t> gen_seed;
  std::vector<double> gen_mix;
  double gen_planted = 0.5;
  std::string gen_out;
  gen_cmd->add_option("--size", gen_size, "corpus size");
  gen_cmd->add_option("--seed", gen_seed, "generator seed (mandatory)");
  gen_cmd->add_option("--mix", gen_mix, "class mix KL LC RC, three fractions summing to 1")
      ->expected(3);
  gen_cmd->add_option("--planted", gen_planted,
                      "fraction of scenarios with a near-threshold left-front gap");
  gen_cmd->add_option("--out", gen_out, "output corpus path (.jsonl)")->required();

  CLI::App* extract_cmd = app.add_subcommand("extract", "extract scenarios from a trajectory CSV");
  std::string extract_csv, extract_out;
  bool extract_sliding = false;
  int extract_stride = 25;
  extract_cmd->add_option("--csv", extract_csv, "input CSV with highD-style columns")->required();
  extract_cmd->add_option("--out", extract_out, "output corpus path (.jsonl)")->required();
  extract_cmd->add_flag("--sliding", extract_sliding, "sliding-window anchors instead of one per event");
  extract_cmd->add_option("--stride", extract_stride, "sliding-window stride in frames");

  CLI::App* report_cmd = app.add_subcommand("report", "merge attack outputs into a vulnerability report");
  std::vector<std::string> report_inputs;
  std::string report_csv, report_json;
  report_cmd->add_option("inputs", report_inputs, "attacks.jsonl files")->required();
  report_cmd->add_option("--csv", report_csv, "merged vulnerability CSV path");
  report_cmd->add_option("--json", report_json, "merged vulnerability JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (eval_cmd->parsed()) {
      const auto report = defeat::cmd_eval(build_config(eval_flags));
      std::cout << "evaluated " << report.metrics.evaluated << " scenarios, macro F1 "
                << defeat::fmt2(report.metrics.intentions.macro.f1) << "\n";
    } else if (attack_cmd->parsed()) {
      const auto reports = defeat::cmd_attack(build_config(attack_flags));
      for (const auto& r : reports) {
        std::cout << "delta " << defeat::fmt2(r.delta) << ": macro F1 "
                  << defeat::fmt2(r.clean.intentions.macro.f1) << " -> "
                  << defeat::fmt2(r.attacked.intentions.macro.f1) << " ("
                  << defeat::format_percent_delta(r.clean.intentions.macro.f1,
                                                  r.attacked.intentions.macro.f1)
                  << ")\n";
      }
    } else if (baseline_cmd->parsed()) {
      const auto reports = defeat::cmd_baseline(build_config(baseline_flags));
      for (const auto& r : reports) {
        std::cout << "delta " << defeat::fmt2(r.delta) << ": single-draw macro F1 "
                  << defeat::fmt2(r.single_draw.intentions.macro.f1) << ", best-of-" << r.budget
                  << " macro F1 " << defeat::fmt2(r.best_of.intentions.macro.f1) << "\n";
      }
    } else if (gen_cmd->parsed()) {
      if (!gen_seed) throw defeat::ConfigError("a generator seed is mandatory (--seed)");
      defeat::SyntheticSpec spec;
      spec.size = gen_size;
      if (!gen_mix.empty()) {
        spec.mix_kl = gen_mix[0];
        spec.mix_lc = gen_mix[1];
        spec.mix_rc = gen_mix[2];
      }
      spec.planted_fraction = gen_planted;
      const auto corpus = defeat::cmd_gen(spec, *gen_seed, gen_out);
      std::cout << "wrote " << corpus.size() << " scenarios to " << gen_out << "\n";
    } else if (extract_cmd->parsed()) {
      defeat::ExtractionConfig cfg;
      cfg.sliding_window = extract_sliding;
      cfg.window_stride_frames = extract_stride;
      defeat::ExtractionStats stats;
      const auto corpus = defeat::cmd_extract(extract_csv, cfg, extract_out, &stats);
      std::cout << "extracted " << corpus.size() << " scenarios ("
                << stats.skipped_insufficient_span << " anchors skipped for span) to "
                << extract_out << "\n";
    } else if (report_cmd->parsed()) {
      const auto vulns = defeat::cmd_report(report_inputs, report_csv, report_json);
      for (const auto& v : vulns) {
        std::cout << v.feature << ": selected " << v.selection_count << "x, mean impact "
                  << defeat::fmt2(v.mean_impact) << ", flip rate " << defeat::fmt2(v.flip_rate)
                  << "\n";
      }
    }
  } catch (const defeat::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const defeat::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const defeat::TransportError& e) {
    std::cerr << "endpoint failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
