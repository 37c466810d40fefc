#pragma once

#include <Eigen/Core>

#include "slicer/nn.h"
#include "slicer/rng.h"

namespace slicer {

// log(1 - tanh(u)^2), evaluated without cancellation.
double log_one_minus_tanh_sq(double u);

// Log density of N(mean, exp(log_std)^2) at u.
double gaussian_log_density(double u, double mean, double log_std);

// tanh-squashed Gaussian actor with state-dependent scale, used by WCSAC.
// The network emits (mean, raw_log_std); raw_log_std is mapped smoothly into
// [kMinLogStd, kMaxLogStd].
class SquashedGaussianActor {
 public:
  static constexpr double kMinLogStd = -5.0;
  static constexpr double kMaxLogStd = 1.0;

  SquashedGaussianActor() = default;
  SquashedGaussianActor(int obs_dim, std::vector<int> hidden, Rng& rng);

  struct Sample {
    Eigen::RowVectorXd mean, log_std, eps, pre_squash, action, log_prob;
  };

  // Reparameterized samples for a batch given fixed standard-normal noise.
  // A zero `eps` gives the deterministic (mean) action.
  Sample sample(const Eigen::MatrixXd& obs, const Eigen::RowVectorXd& eps, Mlp::Cache* cache) const;

  // Backpropagates dL/daction and dL/dlog_prob through the reparameterization.
  void backward(const Mlp::Cache& cache, const Sample& s, const Eigen::RowVectorXd& grad_action,
                const Eigen::RowVectorXd& grad_log_prob, Eigen::VectorXd* grad_params) const;

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
};

// Gaussian policy with a state-independent log-std, squashed by tanh at the
// environment boundary. Used by the trust-region and clipped-surrogate agents.
// Flat parameters are [mean-network params..., log_std].
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(int obs_dim, std::vector<int> hidden, double initial_log_std, Rng& rng);

  Eigen::Index num_params() const { return mean_net_.num_params() + 1; }
  Eigen::VectorXd flat_params() const;
  void set_flat_params(const Eigen::VectorXd& theta);

  double log_std() const { return log_std_; }
  const Mlp& mean_net() const { return mean_net_; }

  Eigen::RowVectorXd means(const Eigen::MatrixXd& obs, Mlp::Cache* cache = nullptr) const;

  // Gaussian log-likelihood of pre-squash actions (the tanh Jacobian does not
  // depend on the parameters and is omitted).
  Eigen::RowVectorXd log_likelihood(const Eigen::MatrixXd& obs, const Eigen::RowVectorXd& u) const;

  // Gradient of mean_i(weights_i * log pi(u_i)) style objectives: given
  // dL/dlog_prob per sample, returns dL/dtheta.
  Eigen::VectorXd log_likelihood_grad(const Eigen::MatrixXd& obs, const Eigen::RowVectorXd& u,
                                      const Eigen::RowVectorXd& grad_log_prob) const;

  nlohmann::json to_json() const;
  static GaussianPolicy from_json(const nlohmann::json& j);

 private:
  Mlp mean_net_;
  double log_std_ = 0.0;
};

}  // namespace slicer
