#include "slicer/policy.h"

#include <cmath>
#include <numbers>

namespace slicer {

double log_one_minus_tanh_sq(double u) {
  return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
}

double gaussian_log_density(double u, double mean, double log_std) {
  double z = (u - mean) * std::exp(-log_std);
  return -0.5 * z * z - log_std - 0.5 * std::log(2.0 * std::numbers::pi);
}

SquashedGaussianActor::SquashedGaussianActor(int obs_dim, std::vector<int> hidden, Rng& rng)
    : net_(obs_dim, std::move(hidden), 2, rng, 0.1) {}

SquashedGaussianActor::Sample SquashedGaussianActor::sample(const Eigen::MatrixXd& obs,
                                                            const Eigen::RowVectorXd& eps,
                                                            Mlp::Cache* cache) const {
  Eigen::MatrixXd out = net_.forward(obs, cache);
  const Eigen::Index n = obs.cols();
  Sample s;
  s.mean = out.row(0);
  s.eps = eps;
  s.log_std.resize(n);
  s.pre_squash.resize(n);
  s.action.resize(n);
  s.log_prob.resize(n);
  const double half_range = 0.5 * (kMaxLogStd - kMinLogStd);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.log_std[i] = kMinLogStd + half_range * (std::tanh(out(1, i)) + 1.0);
    double std = std::exp(s.log_std[i]);
    s.pre_squash[i] = s.mean[i] + std * eps[i];
    s.action[i] = std::tanh(s.pre_squash[i]);
    s.log_prob[i] = -0.5 * eps[i] * eps[i] - s.log_std[i] - 0.5 * std::log(2.0 * std::numbers::pi) -
                    log_one_minus_tanh_sq(s.pre_squash[i]);
  }
  return s;
}

void SquashedGaussianActor::backward(const Mlp::Cache& cache, const Sample& s,
                                     const Eigen::RowVectorXd& grad_action,
                                     const Eigen::RowVectorXd& grad_log_prob,
                                     Eigen::VectorXd* grad_params) const {
  const Eigen::Index n = s.mean.size();
  const double half_range = 0.5 * (kMaxLogStd - kMinLogStd);
  Eigen::MatrixXd grad_out(2, n);
  // Raw network outputs are needed for the log-std squashing derivative.
  for (Eigen::Index i = 0; i < n; ++i) {
    double u = s.pre_squash[i];
    double t = std::tanh(u);
    double std = std::exp(s.log_std[i]);
    // d log_prob / du through the tanh correction is +2 tanh(u).
    double dlogp_du = 2.0 * t;
    double dl_du = grad_action[i] * (1.0 - t * t) + grad_log_prob[i] * dlogp_du;
    double dl_dmean = dl_du;
    double dl_dlogstd = dl_du * std * s.eps[i] - grad_log_prob[i];
    // log_std = min + half_range * (tanh(raw) + 1)
    double tanh_raw = (s.log_std[i] - kMinLogStd) / half_range - 1.0;
    grad_out(0, i) = dl_dmean;
    grad_out(1, i) = dl_dlogstd * half_range * (1.0 - tanh_raw * tanh_raw);
  }
  net_.backward(cache, grad_out, grad_params);
}

GaussianPolicy::GaussianPolicy(int obs_dim, std::vector<int> hidden, double initial_log_std, Rng& rng)
    : mean_net_(obs_dim, std::move(hidden), 1, rng, 0.1), log_std_(initial_log_std) {}

Eigen::VectorXd GaussianPolicy::flat_params() const {
  Eigen::VectorXd theta(num_params());
  theta.head(mean_net_.num_params()) = mean_net_.params();
  theta[mean_net_.num_params()] = log_std_;
  return theta;
}

void GaussianPolicy::set_flat_params(const Eigen::VectorXd& theta) {
  mean_net_.params() = theta.head(mean_net_.num_params());
  log_std_ = theta[mean_net_.num_params()];
}

Eigen::RowVectorXd GaussianPolicy::means(const Eigen::MatrixXd& obs, Mlp::Cache* cache) const {
  return mean_net_.forward(obs, cache).row(0);
}

Eigen::RowVectorXd GaussianPolicy::log_likelihood(const Eigen::MatrixXd& obs,
                                                  const Eigen::RowVectorXd& u) const {
  Eigen::RowVectorXd m = means(obs);
  Eigen::RowVectorXd out(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) out[i] = gaussian_log_density(u[i], m[i], log_std_);
  return out;
}

Eigen::VectorXd GaussianPolicy::log_likelihood_grad(const Eigen::MatrixXd& obs,
                                                    const Eigen::RowVectorXd& u,
                                                    const Eigen::RowVectorXd& grad_log_prob) const {
  Mlp::Cache cache;
  Eigen::RowVectorXd m = means(obs, &cache);
  const double inv_var = std::exp(-2.0 * log_std_);
  Eigen::MatrixXd grad_mean(1, u.size());
  double grad_log_std = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    double diff = u[i] - m[i];
    grad_mean(0, i) = grad_log_prob[i] * diff * inv_var;
    grad_log_std += grad_log_prob[i] * (diff * diff * inv_var - 1.0);
  }
  Eigen::VectorXd grad_net = Eigen::VectorXd::Zero(mean_net_.num_params());
  mean_net_.backward(cache, grad_mean, &grad_net);
  Eigen::VectorXd grad(num_params());
  grad.head(mean_net_.num_params()) = grad_net;
  grad[mean_net_.num_params()] = grad_log_std;
  return grad;
}

nlohmann::json GaussianPolicy::to_json() const {
  return {{"mean_net", mean_net_.to_json()}, {"log_std", log_std_}};
}

GaussianPolicy GaussianPolicy::from_json(const nlohmann::json& j) {
  GaussianPolicy p;
  p.mean_net_ = Mlp::from_json(j.at("mean_net"));
  p.log_std_ = j.at("log_std").get<double>();
  return p;
}

}  // namespace slicer
