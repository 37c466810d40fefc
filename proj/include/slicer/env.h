#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "slicer/network_model.h"
#include "slicer/rng.h"
#include "slicer/traffic.h"

namespace slicer {

struct NetworkCondition {
  enum class Mode { kStochastic, kDeterministic };
  Mode mode = Mode::kStochastic;
  double d = 0.0;

  static NetworkCondition stochastic() { return {}; }
  static NetworkCondition deterministic(double d) { return {Mode::kDeterministic, d}; }
  std::string describe() const;
};

struct EpisodeConfig {
  std::size_t dti_count = 10;
  std::size_t ttis_per_dti = 60;
  double q_thresh = 2.0;
  double beta_thresh = 0.10;
  // Single-resource normalization and capacity.
  double eta = 1.0;
  double capacity = 1.0;
  std::vector<double> action_grid = default_bandwidth_axis();
  NetworkCondition condition;

  void validate() const;
};

// Agent state: predicted CDF of the next DTI's traffic plus the degradation
// accumulated so far.
struct Observation {
  std::vector<double> traffic_cdf;
  double beta_so_far = 0.0;

  // [cdf..., beta] as a column vector.
  Eigen::VectorXd features() const;
};

constexpr std::size_t kObservationDim = 6;

struct EpisodeLedger {
  double degraded_traffic = 0.0;
  double total_traffic = 0.0;
  double episode_total_traffic = 0.0;

  // Adds one DTI and returns its degraded traffic (x^T indicator).
  double record(std::span<const double> traffic, std::span<const std::uint8_t> degraded);
};

// Degraded fraction of the traffic elapsed so far; 0 before any traffic.
double compute_beta(const EpisodeLedger& ledger);

struct StepInfo {
  std::size_t dti_index = 0;
  double bandwidth = 0.0;
  double beta = 0.0;
  std::vector<double> traffic;
  std::vector<double> qos;
  std::vector<std::uint8_t> degraded;
};

struct StepOutcome {
  double reward = 0.0;
  double cost = 0.0;
  Observation next_observation;
  bool done = false;
  StepInfo info;
};

// One JSON object per line: {"dti", "bandwidth", "reward", "cost", "beta", "qos"}.
std::string episode_log_line(const StepOutcome& outcome);

// Either domain-randomized traffic or windows of a fixed trace.
using TrafficSource = std::variant<RandomizationConfig, std::shared_ptr<const TrafficTrace>>;

// Affine map of [-1, 1] onto [grid.front(), grid.back()] followed by a snap to
// the nearest grid value (ties go to the larger allocation).
double quantize_action(double raw_action, const std::vector<double>& action_grid);
double snap_to_grid(double fraction, const std::vector<double>& action_grid);
// Inverse of the affine part, used by agents that choose fractions directly.
double fraction_to_raw(double fraction, const std::vector<double>& action_grid);

// The constrained MDP: one step per DTI.
class SliceEnv {
 public:
  SliceEnv(std::shared_ptr<const QoSModel> model, EpisodeConfig config, TrafficSource source,
           PredictorConfig predictor);

  Observation reset(Rng& rng);
  StepOutcome step(double raw_action);

  const EpisodeConfig& config() const { return config_; }
  const EpisodeLedger& ledger() const { return ledger_; }
  const std::vector<double>& episode_traffic() const { return traffic_; }
  bool done() const { return t_ >= config_.dti_count; }
  std::size_t dti_index() const { return t_; }
  void set_condition(NetworkCondition condition) { config_.condition = condition; }
  void set_predictor(PredictorConfig predictor);

 private:
  std::span<const double> dti_traffic(std::size_t dti) const;
  Observation observe(std::size_t dti);

  std::shared_ptr<const QoSModel> model_;
  EpisodeConfig config_;
  TrafficSource source_;
  PredictorConfig predictor_;

  std::vector<double> traffic_;
  EpisodeLedger ledger_;
  std::size_t t_ = 0;
  bool started_ = false;
  Rng qos_rng_;
  Rng predictor_rng_;
  Observation current_;
};

}  // namespace slicer
