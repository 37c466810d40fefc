#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "slicer/agent.h"
#include "slicer/onpolicy.h"
#include "slicer/policy.h"

namespace slicer {

struct PpoConfig {
  double clip_ratio = 0.2;
  double w_re = 1.0;
  double w_qos = 100.0;
  double discount = 0.99;
  double gae_lambda = 0.95;
  std::vector<int> hidden{64, 64};
  double initial_log_std = -0.5;
  std::size_t episodes_per_update = 10;
  double policy_lr = 3e-4;
  double value_lr = 1e-3;
  std::size_t update_epochs = 10;
  std::size_t minibatch_size = 50;
  std::size_t value_iterations = 80;
  // Stop the epoch loop early once the sampled KL exceeds this (0 disables).
  double target_kl = 0.02;

  void validate() const;
  nlohmann::json to_json() const;
  static PpoConfig from_json(const nlohmann::json& j);
};

// w_re * reward - w_qos * cost.
double scalarized_reward(double reward, double cost, const PpoConfig& config);

// -mean(min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)) and its gradient.
double clipped_surrogate_loss(const GaussianPolicy& policy, const Eigen::MatrixXd& obs,
                              const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& old_log_prob,
                              const Eigen::RowVectorXd& advantages, double clip_ratio,
                              Eigen::VectorXd* grad);

class PpoAgent : public Agent {
 public:
  PpoAgent(int obs_dim, PpoConfig config, Rng& rng);

  AgentKind kind() const override { return AgentKind::kPpo; }
  ActionSample act(const Observation& obs, bool deterministic, Rng& rng) const override;
  void observe(const Transition& transition, Rng& rng) override;
  void end_episode(Rng& rng) override;
  nlohmann::json to_json() const override;
  std::unique_ptr<Agent> clone() const override { return std::make_unique<PpoAgent>(*this); }
  static PpoAgent from_json(const nlohmann::json& j);

  struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double approx_kl = 0.0;
    std::size_t epochs_run = 0;
  };

  // Clipped-surrogate epochs on fixed advantages (minibatches drawn with rng).
  UpdateStats policy_update(const Eigen::MatrixXd& obs, const Eigen::RowVectorXd& u,
                            const Eigen::RowVectorXd& advantages, Rng& rng);
  UpdateStats update(const RolloutBatch& batch, Rng& rng);

  const PpoConfig& config() const { return config_; }
  const GaussianPolicy& policy() const { return policy_; }
  GaussianPolicy& policy() { return policy_; }
  const Mlp& value_net() const { return value_; }

 private:
  PpoAgent() = default;

  PpoConfig config_;
  GaussianPolicy policy_;
  Adam policy_opt_;
  Mlp value_;
  Adam value_opt_;
  RolloutBuffer rollout_;
};

}  // namespace slicer
