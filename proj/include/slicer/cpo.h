#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "slicer/agent.h"
#include "slicer/onpolicy.h"
#include "slicer/policy.h"

namespace slicer {

struct CpoConfig {
  double trust_region_bound = 0.01;
  // Limit on the expected per-episode cost.
  double cost_limit = 0.1;
  // > 0 adds the exponential terminal cost (worst-case variant).
  double shaping_gamma = 0.0;
  double beta_thresh = 0.1;
  double discount = 0.99;
  double gae_lambda = 0.95;
  std::vector<int> hidden{64, 64};
  double initial_log_std = -0.5;
  std::size_t episodes_per_update = 10;
  double value_lr = 1e-3;
  std::size_t value_iterations = 80;
  std::size_t cg_iterations = 10;
  double cg_damping = 0.01;
  double backtrack_ratio = 0.8;
  std::size_t backtrack_steps = 15;

  void validate() const;
  nlohmann::json to_json() const;
  static CpoConfig from_json(const nlohmann::json& j);
};

// Solution of the linearized trust-region problem
//   max g.x  s.t.  c + b.x <= 0,  0.5 x.Hx <= delta.
struct CpoDirection {
  Eigen::VectorXd step;
  // 0: infeasible (pure cost recovery), 1-2: constraint active, 3-4: inactive.
  int optim_case = 0;
  double lambda = 0.0;
  double nu = 0.0;
};

using VectorMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

Eigen::VectorXd conjugate_gradient(const VectorMap& matvec, const Eigen::VectorXd& rhs,
                                   std::size_t iterations, double tolerance = 1e-10);

CpoDirection cpo_direction(const Eigen::VectorXd& g, const Eigen::VectorXd& b, double c, double delta,
                           const VectorMap& fvp, std::size_t cg_iterations);

// Inputs of one policy step, already reduced to advantages.
struct PolicyStepData {
  Eigen::MatrixXd obs;
  Eigen::RowVectorXd pre_squash;
  Eigen::RowVectorXd reward_advantages;
  Eigen::RowVectorXd cost_advantages;
  // (J_c - limit) per step: episode-cost excess divided by episode length.
  double constraint_excess = 0.0;
};

struct CpoStepStats {
  int optim_case = 0;
  double kl = 0.0;
  double step_fraction = 0.0;
  double reward_surrogate_gain = 0.0;
  double cost_surrogate_change = 0.0;
  bool accepted = false;
};

// Shared by the trust-region agent and its tests.
class TrustRegionPolicy {
 public:
  explicit TrustRegionPolicy(GaussianPolicy policy) : policy_(std::move(policy)) {}

  // mean(exp(logp_theta - logp_old) * advantages) and its gradient.
  double surrogate(const Eigen::VectorXd& theta, const Eigen::MatrixXd& obs, const Eigen::RowVectorXd& u,
                   const Eigen::RowVectorXd& old_log_prob, const Eigen::RowVectorXd& advantages,
                   Eigen::VectorXd* grad) const;

  // Mean KL(pi_old || pi_theta) over states and its gradient in theta.
  double kl(const Eigen::VectorXd& theta_old, const Eigen::VectorXd& theta, const Eigen::MatrixXd& obs,
            Eigen::VectorXd* grad) const;

  // Fisher (KL Hessian) vector product at theta_old, plus damping * v.
  Eigen::VectorXd fisher_vector_product(const Eigen::MatrixXd& obs, const Eigen::VectorXd& v,
                                        double damping) const;

  CpoStepStats step(const PolicyStepData& data, double delta, std::size_t cg_iterations, double damping,
                    double backtrack_ratio, std::size_t backtrack_steps);

  GaussianPolicy& policy() { return policy_; }
  const GaussianPolicy& policy() const { return policy_; }

 private:
  GaussianPolicy policy_;
};

// Constrained policy optimization; with shaping_gamma > 0 each episode's last
// cost also carries wc_terminal_cost(beta_final).
class CpoAgent : public Agent {
 public:
  CpoAgent(int obs_dim, CpoConfig config, Rng& rng);

  AgentKind kind() const override {
    return config_.shaping_gamma > 0.0 ? AgentKind::kWcCpo : AgentKind::kCpo;
  }
  ActionSample act(const Observation& obs, bool deterministic, Rng& rng) const override;
  void observe(const Transition& transition, Rng& rng) override;
  void end_episode(Rng& rng) override;
  nlohmann::json to_json() const override;
  std::unique_ptr<Agent> clone() const override { return std::make_unique<CpoAgent>(*this); }
  static CpoAgent from_json(const nlohmann::json& j);

  // Advantage estimation, policy step and value regression on a full batch.
  CpoStepStats update(const RolloutBatch& batch);

  const CpoConfig& config() const { return config_; }
  TrustRegionPolicy& trust_region() { return policy_; }
  const GaussianPolicy& policy() const { return policy_.policy(); }

 private:
  CpoAgent() : policy_(GaussianPolicy{}) {}

  CpoConfig config_;
  TrustRegionPolicy policy_;
  Mlp reward_value_, cost_value_;
  Adam reward_value_opt_, cost_value_opt_;
  RolloutBuffer rollout_;
};

}  // namespace slicer
