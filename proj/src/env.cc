#include "slicer/env.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "slicer/error.h"

namespace slicer {

std::string NetworkCondition::describe() const {
  if (mode == Mode::kStochastic) return "stochastic";
  std::ostringstream out;
  out << "deterministic(" << d << ")";
  return out.str();
}

void EpisodeConfig::validate() const {
  if (dti_count < 1) throw ConfigError("dti_count must be >= 1");
  if (ttis_per_dti < 1) throw ConfigError("ttis_per_dti must be >= 1");
  if (!(beta_thresh > 0.0 && beta_thresh < 1.0)) throw ConfigError("beta_thresh must be in (0, 1)");
  if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
  if (!(capacity > 0.0)) throw ConfigError("capacity must be > 0");
  if (action_grid.empty()) throw ConfigError("action grid is empty");
  for (std::size_t i = 0; i < action_grid.size(); ++i) {
    if (!(action_grid[i] > 0.0 && action_grid[i] <= capacity)) {
      throw ConfigError("action grid values must lie in (0, capacity]");
    }
    if (i > 0 && !(action_grid[i] > action_grid[i - 1])) {
      throw ConfigError("action grid must be strictly increasing");
    }
  }
}

Eigen::VectorXd Observation::features() const {
  Eigen::VectorXd f(static_cast<Eigen::Index>(traffic_cdf.size() + 1));
  for (std::size_t i = 0; i < traffic_cdf.size(); ++i) f[static_cast<Eigen::Index>(i)] = traffic_cdf[i];
  f[static_cast<Eigen::Index>(traffic_cdf.size())] = beta_so_far;
  return f;
}

double EpisodeLedger::record(std::span<const double> traffic, std::span<const std::uint8_t> degraded) {
  double bad = 0.0;
  for (std::size_t n = 0; n < traffic.size(); ++n) {
    if (traffic[n] <= 0.0) continue;
    total_traffic += traffic[n];
    if (degraded[n]) bad += traffic[n];
  }
  degraded_traffic += bad;
  return bad;
}

double compute_beta(const EpisodeLedger& ledger) {
  if (!(ledger.total_traffic > 0.0)) return 0.0;
  return ledger.degraded_traffic / ledger.total_traffic;
}

std::string episode_log_line(const StepOutcome& outcome) {
  nlohmann::json j;
  j["dti"] = outcome.info.dti_index;
  j["bandwidth"] = outcome.info.bandwidth;
  j["reward"] = outcome.reward;
  j["cost"] = outcome.cost;
  j["beta"] = outcome.info.beta;
  j["qos"] = outcome.info.qos;
  return j.dump();
}

double snap_to_grid(double fraction, const std::vector<double>& grid) {
  if (grid.empty()) throw InputError("action grid is empty");
  double best = grid.front();
  double best_dist = std::abs(fraction - best);
  for (double g : grid) {
    double dist = std::abs(fraction - g);
    // Equal distances (up to rounding) resolve toward the larger allocation.
    if (dist < best_dist - 1e-9 || (std::abs(dist - best_dist) <= 1e-9 && g > best)) {
      best = g;
      best_dist = dist;
    }
  }
  return best;
}

double quantize_action(double raw_action, const std::vector<double>& grid) {
  if (!std::isfinite(raw_action)) throw InputError("action must be finite");
  double raw = std::clamp(raw_action, -1.0, 1.0);
  double lo = grid.front();
  double hi = grid.back();
  return snap_to_grid(lo + 0.5 * (raw + 1.0) * (hi - lo), grid);
}

double fraction_to_raw(double fraction, const std::vector<double>& grid) {
  double lo = grid.front();
  double hi = grid.back();
  if (hi <= lo) return 0.0;
  return std::clamp(2.0 * (fraction - lo) / (hi - lo) - 1.0, -1.0, 1.0);
}

SliceEnv::SliceEnv(std::shared_ptr<const QoSModel> model, EpisodeConfig config, TrafficSource source,
                   PredictorConfig predictor)
    : model_(std::move(model)),
      config_(std::move(config)),
      source_(std::move(source)),
      predictor_(predictor) {
  if (!model_) throw ConfigError("environment needs a network model");
  config_.validate();
  predictor_.validate();
  if (auto trace = std::get_if<std::shared_ptr<const TrafficTrace>>(&source_)) {
    if (!*trace) throw ConfigError("trace source is null");
    if ((*trace)->values.size() < config_.dti_count * config_.ttis_per_dti) {
      throw ConfigError("trace has " + std::to_string((*trace)->values.size()) +
                        " TTIs, episode needs " +
                        std::to_string(config_.dti_count * config_.ttis_per_dti));
    }
  }
}

void SliceEnv::set_predictor(PredictorConfig predictor) {
  predictor.validate();
  predictor_ = predictor;
}

std::span<const double> SliceEnv::dti_traffic(std::size_t dti) const {
  return std::span<const double>(traffic_).subspan(dti * config_.ttis_per_dti, config_.ttis_per_dti);
}

Observation SliceEnv::observe(std::size_t dti) {
  Observation obs;
  obs.beta_so_far = compute_beta(ledger_);
  obs.traffic_cdf = predict_cdf(dti_traffic(dti), predictor_, predictor_rng_).cdf();
  return obs;
}

Observation SliceEnv::reset(Rng& rng) {
  const std::uint64_t seed = rng();
  Rng traffic_rng = derive_rng(seed, 1);
  qos_rng_ = derive_rng(seed, 2);
  predictor_rng_ = derive_rng(seed, 3);

  const std::size_t n = config_.ttis_per_dti;
  const std::size_t total = config_.dti_count * n;
  traffic_.clear();
  traffic_.reserve(total);
  if (auto dr = std::get_if<RandomizationConfig>(&source_)) {
    TrafficDistribution dist = randomize_dti_distribution(traffic_rng, *dr, predictor_.support());
    for (std::size_t t = 0; t < config_.dti_count; ++t) {
      if (dr->per_dti && t > 0) dist = randomize_dti_distribution(traffic_rng, *dr, predictor_.support());
      auto values = sample_dti_traffic(dist, n, traffic_rng);
      traffic_.insert(traffic_.end(), values.begin(), values.end());
    }
  } else {
    const auto& trace = *std::get<std::shared_ptr<const TrafficTrace>>(source_);
    const std::size_t windows = trace.values.size() / n - config_.dti_count + 1;
    std::uniform_int_distribution<std::size_t> pick(0, windows - 1);
    const std::size_t start = pick(traffic_rng) * n;
    traffic_.assign(trace.values.begin() + static_cast<std::ptrdiff_t>(start),
                    trace.values.begin() + static_cast<std::ptrdiff_t>(start + total));
  }

  ledger_ = EpisodeLedger{};
  for (double x : traffic_) {
    if (x > 0.0) ledger_.episode_total_traffic += x;
  }
  t_ = 0;
  started_ = true;
  current_ = observe(0);
  return current_;
}

StepOutcome SliceEnv::step(double raw_action) {
  if (!started_) throw LifecycleError("step called before reset");
  if (done()) throw LifecycleError("step called after the episode finished");

  StepOutcome out;
  const double bandwidth = quantize_action(raw_action, config_.action_grid);
  if (bandwidth > config_.capacity) throw LifecycleError("allocation exceeds capacity");

  auto traffic = dti_traffic(t_);
  out.info.dti_index = t_;
  out.info.bandwidth = bandwidth;
  out.info.traffic.assign(traffic.begin(), traffic.end());
  out.info.qos.assign(traffic.size(), 0.0);
  out.info.degraded.assign(traffic.size(), 0);
  const bool stochastic = config_.condition.mode == NetworkCondition::Mode::kStochastic;
  for (std::size_t k = 0; k < traffic.size(); ++k) {
    if (traffic[k] <= 0.0) continue;
    double q = stochastic ? sample_qos(*model_, traffic[k], bandwidth, qos_rng_)
                          : deterministic_qos(*model_, traffic[k], bandwidth, config_.condition.d);
    out.info.qos[k] = q;
    out.info.degraded[k] = q <= config_.q_thresh ? 1 : 0;
  }

  double degraded = ledger_.record(traffic, out.info.degraded);
  out.cost = ledger_.episode_total_traffic > 0.0 ? degraded / ledger_.episode_total_traffic : 0.0;
  out.reward = 1.0 - config_.eta * bandwidth;
  out.info.beta = compute_beta(ledger_);

  ++t_;
  out.done = done();
  if (out.done) {
    current_.beta_so_far = out.info.beta;
  } else {
    current_ = observe(t_);
  }
  out.next_observation = current_;
  return out;
}

}  // namespace slicer
