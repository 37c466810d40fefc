// Command-line front end: model generation/fitting, training, evaluation,
// robustness sweeps, fine-tuning and report emission.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "slicer/agent.h"
#include "slicer/error.h"
#include "slicer/harness.h"
#include "slicer/network_model.h"
#include "slicer/pred_alloc.h"
#include "slicer/report.h"
#include "slicer/traffic.h"

namespace fs = std::filesystem;
using namespace slicer;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

ExperimentConfig load_config(const GlobalOptions& g) {
  ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(g.config_path);
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

void print_epoch(const EpochStats& s) {
  std::printf("epoch %4zu  bandwidth %6.2f%%  beta %6.2f%% [%5.1f, %5.1f]  selection %6.2f%% / %6.2f%% (tail %6.2f%%)\n",
              s.epoch, s.mean_bandwidth_pct, s.mean_beta_pct, s.min_beta_pct, s.max_beta_pct,
              s.selection_bandwidth_pct, s.selection_beta_pct, s.selection_tail_beta_pct);
  std::fflush(stdout);
}

void print_record(const MetricsRecord& m) {
  std::printf("%-36s bandwidth %6.2f%% [%5.1f, %5.1f]  beta %6.2f%% [%5.1f, %5.1f]  (%zu episodes)\n",
              m.label.c_str(), m.mean_bandwidth_pct, m.min_bandwidth_pct, m.max_bandwidth_pct,
              m.mean_qos_degradation_pct, m.min_qos_degradation_pct, m.max_qos_degradation_pct, m.episodes);
}

NetworkCondition parse_condition(const std::string& text) {
  if (text.empty() || text == "stochastic") return NetworkCondition::stochastic();
  try {
    std::size_t used = 0;
    double d = std::stod(text, &used);
    if (used == text.size()) return NetworkCondition::deterministic(d);
  } catch (const std::exception&) {
  }
  throw ConfigError("condition must be 'stochastic' or a number d, got '" + text + "'");
}

std::unique_ptr<Agent> agent_for(const ExperimentConfig& config, const std::string& checkpoint,
                                 std::shared_ptr<const QoSModel> model) {
  if (!checkpoint.empty()) return restore_agent(load_checkpoint(checkpoint));
  if (config.agent != AgentKind::kPredAlloc) {
    throw ConfigError("--checkpoint is required for agent '" + to_string(config.agent) + "'");
  }
  Rng rng(config.seed);
  return make_agent(config, std::move(model), rng);
}

Report base_report(const ExperimentConfig& config) {
  Report r;
  r.beta_thresh_pct = 100.0 * config.episode.beta_thresh;
  r.extra["config_hash"] = config.hash();
  r.extra["seed"] = config.seed;
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-aware RAN slice bandwidth scaling: simulator, agents and experiments"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config_path, "Flat key = value experiment config");
  auto* seed_opt = app.add_option("--seed", seed_value, "Overrides the config seed");
  app.add_option("--out", g.out, "Output directory");

  // gen-model
  auto* gen = app.add_subcommand("gen-model", "Sample the calibrated synthetic QoS truth and fit a grid model");
  std::size_t samples_per_cell = 200;
  bool exact = false;
  std::string trace_out;
  gen->add_option("--samples-per-cell", samples_per_cell, "Measurements per grid node");
  gen->add_flag("--exact", exact, "Write the noise-free synthetic model instead of a fitted one");
  gen->add_option("--trace-out", trace_out, "Also write a synthetic 7-day diurnal trace CSV here");

  // fit-model
  auto* fit = app.add_subcommand("fit-model", "Fit a grid model from a traffic,bandwidth,qos CSV");
  std::string samples_path;
  fit->add_option("--samples", samples_path, "Measurement CSV")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the configured agent");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint (or Pred-Alloc) with the deterministic policy");
  std::string checkpoint;
  std::optional<double> offset;
  std::string condition_text;
  std::string episode_log;
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint JSON");
  eval_cmd->add_option("--offset", offset, "Traffic offset (default: eval.offset)");
  eval_cmd->add_option("--condition", condition_text, "'stochastic' or a deterministic d value");
  eval_cmd->add_option("--episode-log", episode_log, "Write per-step JSON lines here");

  auto* sweep_c = app.add_subcommand("sweep-conditions", "Evaluate under deterministic conditions d");
  sweep_c->add_option("--checkpoint", checkpoint, "Checkpoint JSON");
  sweep_c->add_option("--offset", offset, "Traffic offset (default: 0, the original trace)");

  auto* sweep_n = app.add_subcommand("sweep-noise", "Evaluate with increasingly noisy traffic prediction");
  sweep_n->add_option("--checkpoint", checkpoint, "Checkpoint JSON");
  sweep_n->add_option("--offset", offset, "Traffic offset (default: 0, the original trace)");

  auto* ft = app.add_subcommand("finetune", "Fine-tune a WCSAC checkpoint on deterministic(d) conditions");
  ft->add_option("--checkpoint", checkpoint, "WCSAC checkpoint JSON")->required();
  ft->add_option("--offset", offset, "Trace offset to fine-tune on (default: 0, the original trace)");
  std::optional<double> generalization_offset;
  ft->add_option("--check-offset", generalization_offset,
                 "Also evaluate the result on this offset trace under stochastic conditions");

  auto* rep = app.add_subcommand("report", "Merge summary.json files and re-emit CSV/PNG outputs");
  std::vector<std::string> inputs;
  rep->add_option("inputs", inputs, "summary.json files")->required();

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed_value;

  try {
    const fs::path out(g.out);
    if (*gen) {
      fs::create_directories(out);
      Rng rng(g.seed.value_or(1));
      auto truth = default_synthetic_truth();
      QoSModel model = synthetic_model(truth);
      if (!exact) {
        auto samples = generate_synthetic_grid(truth, samples_per_cell, rng, default_traffic_axis(),
                                               default_bandwidth_axis());
        save_samples(samples, out / "samples.csv");
        model = fit_from_samples(samples, default_traffic_axis(), default_bandwidth_axis());
      }
      save_model(model, out / "model.csv");
      std::printf("lambda %.10f, deterministic QoS at (5, 0.8, d=-2): %.9f\n", truth.lambda,
                  deterministic_qos(model, 5.0, 0.8, -2.0));
      if (!trace_out.empty()) {
        Rng trace_rng = derive_rng(g.seed.value_or(7), 0);
        save_series(synthetic_diurnal_series(7, 144, trace_rng), 600.0, trace_out);
      }
      std::printf("wrote %s\n", (out / "model.csv").string().c_str());
      return 0;
    }
    if (*fit) {
      fs::create_directories(out);
      auto samples = load_samples(samples_path);
      QoSModel model = fit_from_samples(samples, default_traffic_axis(), default_bandwidth_axis());
      save_model(model, out / "model.csv");
      std::printf("fitted %zu samples into %s\n", samples.size(), (out / "model.csv").string().c_str());
      return 0;
    }

    ExperimentConfig config = load_config(g);
    auto model = load_model_or_synthetic(config.model_path);
    const double eval_offset = offset.value_or(config.eval_offset);

    if (*train_cmd) {
      fs::create_directories(out / "checkpoints");
      std::ofstream diag(out / "diagnostics.jsonl");
      TrainResult result = train(config, print_epoch, &diag);
      save_checkpoint(result.best, out / "checkpoints" / "best.json");
      save_checkpoint(result.last, out / "checkpoints" / "last.json");
      if (!result.constraint_met) {
        std::fprintf(stderr, "warning: no epoch reached beta <= %.1f%%; best checkpoint is the lowest-beta epoch\n",
                     100.0 * config.episode.beta_thresh);
      }
      Report report = base_report(config);
      report.curves.push_back({to_string(config.agent), result.curve,
                               config.train_traffic.kind == TrafficSpec::Kind::kRandomized});
      report.extra["best_epoch"] = result.best_epoch;
      report.extra["constraint_met"] = result.constraint_met;
      auto best = restore_agent(result.best);
      for (double off : {0.0, eval_offset}) {
        auto spec = make_eval_spec(config, model, off, config.episode.condition,
                                   to_string(config.agent) + " offset " + std::to_string(off).substr(0, 4));
        MetricsRecord m = evaluate(*best, spec);
        print_record(m);
        report.rows.push_back({to_string(config.agent), off == 0.0 ? "original" : "offset", m});
        if (eval_offset == 0.0) break;
      }
      emit_report(report, out);
      return 0;
    }

    if (*eval_cmd) {
      auto agent = agent_for(config, checkpoint, model);
      NetworkCondition cond = condition_text.empty() ? config.episode.condition : parse_condition(condition_text);
      auto spec = make_eval_spec(config, model, eval_offset, cond, to_string(agent->kind()) + " " + cond.describe());
      std::optional<std::ofstream> log;
      if (!episode_log.empty()) log.emplace(episode_log);
      MetricsRecord m = evaluate(*agent, spec, log ? &*log : nullptr);
      print_record(m);
      Report report = base_report(config);
      report.rows.push_back({to_string(agent->kind()), eval_offset == 0.0 ? "original" : "offset", m});
      emit_report(report, out);
      return 0;
    }

    if (*sweep_c || *sweep_n) {
      auto agent = agent_for(config, checkpoint, model);
      auto base = make_eval_spec(config, model, offset.value_or(0.0), config.episode.condition,
                                 to_string(agent->kind()));
      SweepResult s = *sweep_c ? sweep_conditions(*agent, base, config.sweep_d)
                               : sweep_noise(*agent, base, config.sweep_noise);
      for (const auto& r : s.records) print_record(r);
      print_record(s.reference);
      Report report = base_report(config);
      report.sweeps.push_back({to_string(agent->kind()) + "_" + s.parameter, s});
      emit_report(report, out);
      return 0;
    }

    if (*ft) {
      PolicyCheckpoint start = load_checkpoint(checkpoint);
      const NetworkCondition cond = NetworkCondition::deterministic(config.finetune_d);
      TrainSetup setup;
      setup.model = model;
      setup.episode = config.episode;
      setup.episode.condition = cond;
      const double tune_offset = offset.value_or(0.0);
      setup.source = make_traffic_source(config.eval_traffic(tune_offset));
      setup.predictor = config.predictor;
      setup.epochs = config.finetune_epochs;
      setup.episodes_per_epoch = config.finetune_episodes_per_epoch;
      setup.selection_episodes = config.selection_episodes;
      setup.selection_seed = derive_rng(config.seed, 0xf17e)();
      setup.beta_thresh = config.episode.beta_thresh;
      setup.on_epoch = print_epoch;
      fs::create_directories(out / "checkpoints");
      std::ofstream diag(out / "diagnostics.jsonl");
      setup.diagnostics = &diag;
      auto eval = make_eval_spec(config, model, tune_offset, cond, "wcsac " + cond.describe());
      Rng rng(config.seed);
      FinetuneResult result = finetune(start, setup, eval, config.finetune_risk_alpha, config.finetune_lr_scale, rng);
      save_checkpoint(result.training.best, out / "checkpoints" / "finetuned.json");
      print_record(result.before);
      print_record(result.after);
      Report report = base_report(config);
      report.rows.push_back({"wcsac", "before-finetune", result.before});
      report.rows.push_back({"wcsac", "after-finetune", result.after});
      report.curves.push_back({"wcsac_finetune", result.training.curve, false});
      if (generalization_offset) {
        auto tuned = restore_agent(result.training.best);
        auto spec = make_eval_spec(config, model, *generalization_offset, NetworkCondition::stochastic(),
                                   "wcsac finetuned, offset stochastic");
        MetricsRecord m = evaluate(*tuned, spec);
        print_record(m);
        report.rows.push_back({"wcsac", "finetuned-offset", m});
      }
      emit_report(report, out);
      return 0;
    }

    if (*rep) {
      Report merged;
      bool first = true;
      for (const auto& in : inputs) {
        Report r = load_report(in);
        if (first) {
          merged = r;
          first = false;
        } else {
          merged.merge(r);
        }
      }
      emit_report(merged, out);
      std::printf("wrote %s\n", (out / "metrics.csv").string().c_str());
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
