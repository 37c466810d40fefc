#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "slicer/agent.h"
#include "slicer/config.h"
#include "slicer/cpo.h"
#include "slicer/env.h"
#include "slicer/ppo.h"
#include "slicer/wcsac.h"

namespace slicer {

struct TrafficSpec {
  enum class Kind { kRandomized, kTrace };
  Kind kind = Kind::kTrace;
  RandomizationConfig randomization;
  // Empty: the bundled-style synthetic diurnal series generated from trace_seed.
  std::string trace_path;
  TraceShaping shaping;
  // Seeds the per-TTI trace noise so every consumer sees the same realization.
  std::uint64_t trace_seed = 7;

  std::string describe() const;
};

TrafficSource make_traffic_source(const TrafficSpec& spec);

struct ExperimentConfig {
  AgentKind agent = AgentKind::kWcsac;
  std::uint64_t seed = 1;
  std::string model_path;
  EpisodeConfig episode;
  TrafficSpec train_traffic;
  // Evaluation runs on the trace described by train_traffic's trace fields,
  // shifted by eval_offset.
  double eval_offset = 0.0;
  PredictorConfig predictor;
  std::size_t epochs = 100;
  std::size_t episodes_per_epoch = 10;
  // Deterministic episodes run after every epoch to rank checkpoints (0 uses
  // the training episodes themselves).
  std::size_t selection_episodes = 20;
  std::size_t eval_episodes = 100;
  WcsacConfig wcsac;
  CpoConfig cpo;
  PpoConfig ppo;
  double worst_case_magnitude = 2.0;

  double finetune_d = 1.0;
  double finetune_risk_alpha = 0.99;
  double finetune_lr_scale = 0.1;
  std::size_t finetune_epochs = 500;
  std::size_t finetune_episodes_per_epoch = 2;

  std::vector<double> sweep_d{-3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  std::vector<double> sweep_noise{0.0, 0.05, 0.1, 0.2, 0.3, 0.5};

  ExperimentConfig();

  void validate() const;
  static ExperimentConfig from_key_values(const KeyValueConfig& kv);
  static ExperimentConfig load(const std::filesystem::path& path);
  KeyValueConfig to_key_values() const;
  // 16-hex-digit FNV-1a hash of the canonical key-value text.
  std::string hash() const;

  TrafficSpec eval_traffic(double offset) const;
  CpoConfig effective_cpo() const;
};

std::string config_hash(const std::string& canonical_text);

std::shared_ptr<const QoSModel> load_model_or_synthetic(const std::string& path);

std::unique_ptr<Agent> make_agent(const ExperimentConfig& config, std::shared_ptr<const QoSModel> model, Rng& rng);

struct MetricsRecord {
  std::string label;
  double mean_bandwidth_pct = 0.0;
  double min_bandwidth_pct = 0.0;
  double max_bandwidth_pct = 0.0;
  double mean_qos_degradation_pct = 0.0;
  double min_qos_degradation_pct = 0.0;
  double max_qos_degradation_pct = 0.0;
  std::size_t episodes = 0;
  std::string config_hash;

  nlohmann::json to_json() const;
  static MetricsRecord from_json(const nlohmann::json& j);
  bool operator==(const MetricsRecord&) const = default;
};

struct EpisodeSummary {
  double mean_bandwidth = 0.0;
  double final_beta = 0.0;
  std::size_t steps = 0;
};

// Aggregates per-episode summaries into percentages.
MetricsRecord aggregate(const std::vector<EpisodeSummary>& episodes, std::string label, std::string hash);

struct EvalSpec {
  std::shared_ptr<const QoSModel> model;
  EpisodeConfig episode;
  TrafficSource source;
  PredictorConfig predictor;
  std::size_t episodes = 100;
  std::uint64_t seed = 1;
  std::string label;
  std::string config_hash;
};

// One episode with the deterministic (or sampled) policy.
EpisodeSummary run_episode(SliceEnv& env, const Agent& agent, Rng& episode_rng, bool deterministic,
                           std::ostream* log = nullptr);

// Deterministic policy over `spec.episodes` episodes; episode i is seeded by
// derive_rng(spec.seed, i) so different agents face identical traffic.
MetricsRecord evaluate(const Agent& agent, const EvalSpec& spec, std::ostream* log = nullptr);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_bandwidth_pct = 0.0;
  double min_bandwidth_pct = 0.0;
  double max_bandwidth_pct = 0.0;
  double mean_beta_pct = 0.0;
  double min_beta_pct = 0.0;
  double max_beta_pct = 0.0;
  // Deterministic selection episodes (equal to the training numbers when none).
  double selection_bandwidth_pct = 0.0;
  double selection_beta_pct = 0.0;
  // Mean beta over the worst selection_risk fraction of selection episodes;
  // feasibility of the epoch is judged on this value.
  double selection_tail_beta_pct = 0.0;

  nlohmann::json to_json() const;
  static EpochStats from_json(const nlohmann::json& j);
};

struct TrainSetup {
  std::shared_ptr<const QoSModel> model;
  EpisodeConfig episode;
  TrafficSource source;
  PredictorConfig predictor;
  std::size_t epochs = 0;
  std::size_t episodes_per_epoch = 10;
  std::size_t selection_episodes = 0;
  std::uint64_t selection_seed = 0;
  double beta_thresh = 0.1;
  // Tail fraction for selection_tail_beta_pct; 1 gives the plain mean.
  double selection_risk = 1.0;
  // Called after every epoch (progress output).
  std::function<void(const EpochStats&)> on_epoch;
  // Receives per-update diagnostics.
  std::ostream* diagnostics = nullptr;
};

struct TrainResult {
  PolicyCheckpoint best;
  PolicyCheckpoint last;
  std::vector<EpochStats> curve;
  // 0 when no epoch ran.
  std::size_t best_epoch = 0;
  // False when no epoch met beta <= beta_thresh (best falls back to lowest beta).
  bool constraint_met = false;
};

TrainResult train_agent(Agent& agent, const TrainSetup& setup, Rng& rng,
                        const nlohmann::json& metadata = nlohmann::json::object());

// Builds the agent from the configuration and trains it on train_traffic.
TrainResult train(const ExperimentConfig& config, std::function<void(const EpochStats&)> on_epoch = {},
                  std::ostream* diagnostics = nullptr);

EvalSpec make_eval_spec(const ExperimentConfig& config, std::shared_ptr<const QoSModel> model, double offset,
                        NetworkCondition condition, const std::string& label);

struct SweepResult {
  std::string parameter;
  std::vector<double> values;
  std::vector<MetricsRecord> records;
  MetricsRecord reference;

  nlohmann::json to_json() const;
  static SweepResult from_json(const nlohmann::json& j);
};

// Deterministic(d) for each value; the reference line uses stochastic conditions.
SweepResult sweep_conditions(const Agent& agent, const EvalSpec& base, const std::vector<double>& d_values);

// Noisy predictor per sigma; the reference line uses the fully random predictor.
SweepResult sweep_noise(const Agent& agent, const EvalSpec& base, const std::vector<double>& noise_sigmas);

struct FinetuneResult {
  MetricsRecord before;
  MetricsRecord after;
  TrainResult training;
};

// Continues WCSAC training on `setup` (normally a fixed trace under
// deterministic(d)) with the given risk level and scaled learning rates.
// The before/after records use `eval` (same condition as training).
FinetuneResult finetune(const PolicyCheckpoint& checkpoint, const TrainSetup& setup, const EvalSpec& eval,
                        double risk_alpha, double lr_scale, Rng& rng);

}  // namespace slicer
