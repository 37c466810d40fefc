#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "slicer/agent.h"
#include "slicer/nn.h"
#include "slicer/policy.h"

namespace slicer {

struct WcsacConfig {
  double risk_alpha = 0.1;
  double cost_limit = 0.1;
  double discount = 0.99;
  double initial_entropy_multiplier = 0.2;
  double initial_safety_multiplier = 0.0;
  // Defaults to -action_dim.
  double target_entropy = -1.0;
  std::vector<int> hidden{64, 64};
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double entropy_lr = 1e-3;
  double safety_lr = 0.05;
  double tau = 0.01;
  std::size_t batch_size = 128;
  std::size_t replay_capacity = 100000;
  std::size_t warmup_steps = 500;
  std::size_t updates_per_step = 1;
  // Lower bound on the cost-variance head.
  double min_variance = 1e-8;
  // Holds the cost-variance head at min_variance (Gamma reduces to Q^c).
  bool freeze_variance = false;
  // false drops the cost critics and multiplier: plain soft actor-critic.
  bool constrained = true;

  void validate() const;
  nlohmann::json to_json() const;
  static WcsacConfig from_json(const nlohmann::json& j);
};

// Column-major minibatch of transitions.
struct TransitionBatch {
  Eigen::MatrixXd obs;
  Eigen::RowVectorXd actions;
  Eigen::RowVectorXd rewards;
  Eigen::RowVectorXd costs;
  Eigen::MatrixXd next_obs;
  Eigen::RowVectorXd dones;

  Eigen::Index size() const { return actions.size(); }
  static TransitionBatch from(const std::vector<const Transition*>& transitions);
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {}
  void push(const Transition& t);
  std::size_t size() const { return data_.size(); }
  TransitionBatch sample(std::size_t batch_size, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> data_;
};

// 0.5 * mean((net([obs; action]) - target)^2).
double critic_mse_loss(const Mlp& net, const Eigen::MatrixXd& input, const Eigen::RowVectorXd& target,
                       Eigen::VectorXd* grad);

// Wasserstein-2 distance between N(0, v) and N(0, v_target), averaged over the
// batch, with v = softplus(net(input)) + min_variance.
double variance_w2_loss(const Mlp& net, const Eigen::MatrixXd& input, const Eigen::RowVectorXd& target,
                        double min_variance, Eigen::VectorXd* grad);

Eigen::MatrixXd stack_input(const Eigen::MatrixXd& obs, const Eigen::RowVectorXd& actions);

// Worst-case soft actor-critic: soft reward critics (twin), a Gaussian cost
// critic (mean head Q^c, variance head V^c) and a CVaR safety term
// Gamma = Q^c + cvar_std_multiplier(alpha) * sqrt(V^c) enforced through a
// Lagrange multiplier k.
class WcsacAgent : public Agent {
 public:
  WcsacAgent(int obs_dim, WcsacConfig config, Rng& rng);

  AgentKind kind() const override { return AgentKind::kWcsac; }
  ActionSample act(const Observation& obs, bool deterministic, Rng& rng) const override;
  ActionSample explore(const Observation& obs, Rng& rng) override;
  void observe(const Transition& transition, Rng& rng) override;
  nlohmann::json to_json() const override;
  std::unique_ptr<Agent> clone() const override { return std::make_unique<WcsacAgent>(*this); }

  static WcsacAgent from_json(const nlohmann::json& j);

  struct UpdateStats {
    double reward_critic_loss = 0.0;
    double cost_critic_loss = 0.0;
    double variance_loss = 0.0;
    double actor_loss = 0.0;
    double entropy_multiplier = 0.0;
    double safety_multiplier = 0.0;
    double mean_gamma = 0.0;
    double mean_cost = 0.0;
  };

  // One gradient step of every network and multiplier on `batch`.
  UpdateStats update(const TransitionBatch& batch, Rng& rng);

  // Actor objective mean(beta * log pi - min Q^r + k * Gamma) for fixed noise.
  double actor_loss(const TransitionBatch& batch, const Eigen::RowVectorXd& eps,
                    Eigen::VectorXd* grad) const;

  // Per-sample CVaR of the cost critic at (obs, action).
  Eigen::RowVectorXd gamma(const Eigen::MatrixXd& obs, const Eigen::RowVectorXd& actions) const;

  const WcsacConfig& config() const { return config_; }
  WcsacConfig& mutable_config() { return config_; }
  double entropy_multiplier() const;
  double safety_multiplier() const { return safety_multiplier_; }
  void set_safety_multiplier(double k) { safety_multiplier_ = k; }

  SquashedGaussianActor& actor() { return actor_; }
  const SquashedGaussianActor& actor() const { return actor_; }
  Mlp& reward_critic(int i) { return i == 0 ? q1_ : q2_; }
  const Mlp& reward_critic(int i) const { return i == 0 ? q1_ : q2_; }
  Mlp& cost_critic() { return qc_; }
  Mlp& variance_critic() { return vc_; }
  const Mlp& cost_critic() const { return qc_; }
  const Mlp& variance_critic() const { return vc_; }
  std::size_t total_steps() const { return total_steps_; }
  void set_learning_rates(double actor_lr, double critic_lr);

 private:
  WcsacAgent() = default;
  Eigen::RowVectorXd variance(const Mlp& net, const Eigen::MatrixXd& input) const;

  WcsacConfig config_;
  SquashedGaussianActor actor_;
  Mlp q1_, q2_, q1_target_, q2_target_;
  Mlp qc_, qc_target_, vc_, vc_target_;
  Adam actor_opt_, q1_opt_, q2_opt_, qc_opt_, vc_opt_, entropy_opt_;
  double log_entropy_multiplier_ = 0.0;
  double safety_multiplier_ = 0.0;
  ReplayBuffer replay_;
  std::size_t total_steps_ = 0;
};

}  // namespace slicer
