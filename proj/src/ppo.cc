#include "slicer/ppo.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slicer/error.h"

namespace slicer {

void PpoConfig::validate() const {
  if (!(clip_ratio > 0.0 && clip_ratio < 1.0)) throw ConfigError("clip_ratio must be in (0, 1)");
  if (!(w_re >= 0.0) || !(w_qos >= 0.0)) throw ConfigError("reward weights must be >= 0");
  if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError("discount must be in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must be in [0, 1]");
  if (episodes_per_update == 0) throw ConfigError("episodes_per_update must be >= 1");
  if (update_epochs == 0 || minibatch_size == 0) throw ConfigError("update_epochs and minibatch_size must be >= 1");
  if (hidden.empty()) throw ConfigError("hidden layer list is empty");
}

nlohmann::json PpoConfig::to_json() const {
  return {{"clip_ratio", clip_ratio},
          {"w_re", w_re},
          {"w_qos", w_qos},
          {"discount", discount},
          {"gae_lambda", gae_lambda},
          {"hidden", hidden},
          {"initial_log_std", initial_log_std},
          {"episodes_per_update", episodes_per_update},
          {"policy_lr", policy_lr},
          {"value_lr", value_lr},
          {"update_epochs", update_epochs},
          {"minibatch_size", minibatch_size},
          {"value_iterations", value_iterations},
          {"target_kl", target_kl}};
}

PpoConfig PpoConfig::from_json(const nlohmann::json& j) {
  PpoConfig c;
  c.clip_ratio = j.at("clip_ratio");
  c.w_re = j.at("w_re");
  c.w_qos = j.at("w_qos");
  c.discount = j.at("discount");
  c.gae_lambda = j.at("gae_lambda");
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.initial_log_std = j.at("initial_log_std");
  c.episodes_per_update = j.at("episodes_per_update");
  c.policy_lr = j.at("policy_lr");
  c.value_lr = j.at("value_lr");
  c.update_epochs = j.at("update_epochs");
  c.minibatch_size = j.at("minibatch_size");
  c.value_iterations = j.at("value_iterations");
  c.target_kl = j.at("target_kl");
  return c;
}

double scalarized_reward(double reward, double cost, const PpoConfig& config) {
  return config.w_re * reward - config.w_qos * cost;
}

double clipped_surrogate_loss(const GaussianPolicy& policy, const Eigen::MatrixXd& obs,
                              const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& old_log_prob,
                              const Eigen::RowVectorXd& advantages, double clip_ratio,
                              Eigen::VectorXd* grad) {
  const Eigen::Index n = u.size();
  const double nd = static_cast<double>(n);
  Eigen::RowVectorXd logp = policy.log_likelihood(obs, u);
  Eigen::RowVectorXd grad_logp(n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double ratio = std::exp(logp[i] - old_log_prob[i]);
    double unclipped = ratio * advantages[i];
    double clipped = std::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio) * advantages[i];
    if (unclipped <= clipped) {
      loss -= unclipped / nd;
      grad_logp[i] = -unclipped / nd;
    } else {
      loss -= clipped / nd;
      grad_logp[i] = 0.0;
    }
  }
  if (grad) *grad = policy.log_likelihood_grad(obs, u, grad_logp);
  return loss;
}

PpoAgent::PpoAgent(int obs_dim, PpoConfig config, Rng& rng)
    : config_(std::move(config)),
      policy_(obs_dim, config_.hidden, config_.initial_log_std, rng),
      policy_opt_(config_.policy_lr),
      value_(obs_dim, config_.hidden, 1, rng),
      value_opt_(config_.value_lr) {
  config_.validate();
}

ActionSample PpoAgent::act(const Observation& obs, bool deterministic, Rng& rng) const {
  const double mean = policy_.means(obs.features())[0];
  if (deterministic) return {std::tanh(mean), mean};
  const double u = mean + std::exp(policy_.log_std()) * standard_normal(rng);
  return {std::tanh(u), u};
}

void PpoAgent::observe(const Transition& transition, Rng& rng) {
  (void)rng;
  rollout_.push(transition);
}

void PpoAgent::end_episode(Rng& rng) {
  rollout_.finish_episode();
  if (rollout_.episodes() >= config_.episodes_per_update) update(rollout_.take(), rng);
}

PpoAgent::UpdateStats PpoAgent::policy_update(const Eigen::MatrixXd& obs, const Eigen::RowVectorXd& u,
                                              const Eigen::RowVectorXd& advantages, Rng& rng) {
  UpdateStats stats;
  const Eigen::Index n = u.size();
  const Eigen::RowVectorXd old_logp = policy_.log_likelihood(obs, u);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto mb = static_cast<Eigen::Index>(config_.minibatch_size);
  for (std::size_t epoch = 0; epoch < config_.update_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += mb) {
      const Eigen::Index m = std::min(mb, n - start);
      Eigen::MatrixXd o(obs.rows(), m);
      Eigen::RowVectorXd uu(m), old(m), adv(m);
      for (Eigen::Index k = 0; k < m; ++k) {
        Eigen::Index idx = order[static_cast<std::size_t>(start + k)];
        o.col(k) = obs.col(idx);
        uu[k] = u[idx];
        old[k] = old_logp[idx];
        adv[k] = advantages[idx];
      }
      Eigen::VectorXd grad;
      stats.policy_loss = clipped_surrogate_loss(policy_, o, uu, old, adv, config_.clip_ratio, &grad);
      if (!std::isfinite(stats.policy_loss) || !grad.allFinite()) throw TrainingError("non-finite policy loss");
      Eigen::VectorXd theta = policy_.flat_params();
      policy_opt_.step(theta, grad);
      policy_.set_flat_params(theta);
    }
    ++stats.epochs_run;
    stats.approx_kl = (old_logp - policy_.log_likelihood(obs, u)).mean();
    if (config_.target_kl > 0.0 && stats.approx_kl > 1.5 * config_.target_kl) break;
  }
  return stats;
}

PpoAgent::UpdateStats PpoAgent::update(const RolloutBatch& batch, Rng& rng) {
  Eigen::RowVectorXd rewards(batch.size());
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    rewards[i] = scalarized_reward(batch.rewards[i], batch.costs[i], config_);
  }
  Eigen::RowVectorXd values = value_.forward(batch.obs).row(0);
  Advantages adv = generalized_advantages(rewards, values, batch.dones, config_.discount, config_.gae_lambda);
  UpdateStats stats = policy_update(batch.obs, batch.pre_squash, normalize(adv.advantages), rng);
  stats.value_loss = fit_value_function(value_, value_opt_, batch.obs, adv.returns, config_.value_iterations);
  double episode_cost = 0.0;
  for (double c : batch.episode_costs) episode_cost += c;
  episode_cost /= static_cast<double>(batch.episode_costs.size());
  diagnostics_.push_back({{"policy_loss", stats.policy_loss},
                          {"value_loss", stats.value_loss},
                          {"approx_kl", stats.approx_kl},
                          {"epochs_run", stats.epochs_run},
                          {"episode_cost", episode_cost},
                          {"log_std", policy_.log_std()}});
  return stats;
}

nlohmann::json PpoAgent::to_json() const {
  return {{"config", config_.to_json()},
          {"policy", policy_.to_json()},
          {"policy_opt", policy_opt_.to_json()},
          {"value", value_.to_json()},
          {"value_opt", value_opt_.to_json()}};
}

PpoAgent PpoAgent::from_json(const nlohmann::json& j) {
  PpoAgent a;
  a.config_ = PpoConfig::from_json(j.at("config"));
  a.config_.validate();
  a.policy_ = GaussianPolicy::from_json(j.at("policy"));
  a.policy_opt_ = Adam::from_json(j.at("policy_opt"));
  a.value_ = Mlp::from_json(j.at("value"));
  a.value_opt_ = Adam::from_json(j.at("value_opt"));
  return a;
}

}  // namespace slicer
