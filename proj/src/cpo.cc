#include "slicer/cpo.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slicer/error.h"
#include "slicer/risk.h"

namespace slicer {

namespace {

constexpr double kTiny = 1e-8;

double clamp_to(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

}  // namespace

void CpoConfig::validate() const {
  if (!(trust_region_bound > 0.0)) throw ConfigError("trust_region_bound must be > 0");
  if (!(cost_limit > 0.0)) throw ConfigError("cost_limit must be > 0");
  if (!(shaping_gamma >= 0.0)) throw ConfigError("shaping_gamma must be >= 0");
  if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError("discount must be in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must be in [0, 1]");
  if (episodes_per_update == 0) throw ConfigError("episodes_per_update must be >= 1");
  if (hidden.empty()) throw ConfigError("hidden layer list is empty");
  if (!(backtrack_ratio > 0.0 && backtrack_ratio < 1.0)) throw ConfigError("backtrack_ratio must be in (0, 1)");
}

nlohmann::json CpoConfig::to_json() const {
  return {{"trust_region_bound", trust_region_bound},
          {"cost_limit", cost_limit},
          {"shaping_gamma", shaping_gamma},
          {"beta_thresh", beta_thresh},
          {"discount", discount},
          {"gae_lambda", gae_lambda},
          {"hidden", hidden},
          {"initial_log_std", initial_log_std},
          {"episodes_per_update", episodes_per_update},
          {"value_lr", value_lr},
          {"value_iterations", value_iterations},
          {"cg_iterations", cg_iterations},
          {"cg_damping", cg_damping},
          {"backtrack_ratio", backtrack_ratio},
          {"backtrack_steps", backtrack_steps}};
}

CpoConfig CpoConfig::from_json(const nlohmann::json& j) {
  CpoConfig c;
  c.trust_region_bound = j.at("trust_region_bound");
  c.cost_limit = j.at("cost_limit");
  c.shaping_gamma = j.at("shaping_gamma");
  c.beta_thresh = j.at("beta_thresh");
  c.discount = j.at("discount");
  c.gae_lambda = j.at("gae_lambda");
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.initial_log_std = j.at("initial_log_std");
  c.episodes_per_update = j.at("episodes_per_update");
  c.value_lr = j.at("value_lr");
  c.value_iterations = j.at("value_iterations");
  c.cg_iterations = j.at("cg_iterations");
  c.cg_damping = j.at("cg_damping");
  c.backtrack_ratio = j.at("backtrack_ratio");
  c.backtrack_steps = j.at("backtrack_steps");
  return c;
}

Eigen::VectorXd conjugate_gradient(const VectorMap& matvec, const Eigen::VectorXd& rhs,
                                   std::size_t iterations, double tolerance) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd p = rhs;
  double rr = r.squaredNorm();
  for (std::size_t i = 0; i < iterations && rr > tolerance; ++i) {
    Eigen::VectorXd hp = matvec(p);
    double alpha = rr / (p.dot(hp) + kTiny);
    x += alpha * p;
    r -= alpha * hp;
    double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return x;
}

CpoDirection cpo_direction(const Eigen::VectorXd& g, const Eigen::VectorXd& b, double c, double delta,
                           const VectorMap& fvp, std::size_t cg_iterations) {
  CpoDirection out;
  Eigen::VectorXd hg = conjugate_gradient(fvp, g, cg_iterations);
  const double q = std::max(g.dot(hg), kTiny);

  auto trpo = [&](int optim_case) {
    out.optim_case = optim_case;
    out.lambda = std::sqrt(q / (2.0 * delta));
    out.nu = 0.0;
    out.step = hg / out.lambda;
    return out;
  };

  if (b.squaredNorm() <= kTiny && c < 0.0) return trpo(4);

  Eigen::VectorXd hb = conjugate_gradient(fvp, b, cg_iterations);
  const double r = g.dot(hb);
  const double s = std::max(b.dot(hb), kTiny);
  const double A = q - r * r / s;
  const double B = 2.0 * delta - c * c / s;

  if (c < 0.0 && B < 0.0) return trpo(3);
  if (c >= 0.0 && B < 0.0) {
    out.optim_case = 0;
    out.step = -std::sqrt(2.0 * delta / s) * hb;
    return out;
  }
  out.optim_case = c < 0.0 ? 2 : 1;

  // Dual over lambda: nu > 0 on LA, nu == 0 on LB.
  const double inf = std::numeric_limits<double>::infinity();
  const double mid = std::abs(c) > kTiny ? -r / c : inf;
  double la_lo, la_hi, lb_lo, lb_hi;
  if (c < 0.0) {
    la_lo = 0.0;
    la_hi = std::max(mid, 0.0);
    lb_lo = std::max(mid, 0.0);
    lb_hi = inf;
  } else {
    la_lo = std::max(mid, 0.0);
    la_hi = inf;
    lb_lo = 0.0;
    lb_hi = std::max(mid, 0.0);
  }
  const double lam_a = clamp_to(std::sqrt(std::max(A, 0.0) / std::max(B, kTiny)), la_lo, la_hi);
  const double lam_b = clamp_to(std::sqrt(q / (2.0 * delta)), lb_lo, lb_hi);
  auto f_a = [&](double lam) {
    lam = std::max(lam, kTiny);
    return -0.5 * (A / lam + B * lam) + r * c / s;
  };
  auto f_b = [&](double lam) {
    lam = std::max(lam, kTiny);
    return -0.5 * (q / lam + 2.0 * delta * lam);
  };
  double lambda = f_a(lam_a) >= f_b(lam_b) ? lam_a : lam_b;
  lambda = std::max(lambda, kTiny);
  out.lambda = lambda;
  out.nu = std::max(0.0, (lambda * c + r) / s);
  out.step = (hg - out.nu * hb) / lambda;
  return out;
}

double TrustRegionPolicy::surrogate(const Eigen::VectorXd& theta, const Eigen::MatrixXd& obs,
                                    const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& old_log_prob,
                                    const Eigen::RowVectorXd& advantages, Eigen::VectorXd* grad) const {
  GaussianPolicy p = policy_;
  p.set_flat_params(theta);
  Eigen::RowVectorXd ratio = (p.log_likelihood(obs, u) - old_log_prob).array().exp().matrix();
  const double n = static_cast<double>(u.size());
  if (grad) {
    Eigen::RowVectorXd w = (ratio.array() * advantages.array() / n).matrix();
    *grad = p.log_likelihood_grad(obs, u, w);
  }
  return ratio.dot(advantages) / n;
}

double TrustRegionPolicy::kl(const Eigen::VectorXd& theta_old, const Eigen::VectorXd& theta,
                             const Eigen::MatrixXd& obs, Eigen::VectorXd* grad) const {
  GaussianPolicy old_p = policy_;
  old_p.set_flat_params(theta_old);
  GaussianPolicy new_p = policy_;
  new_p.set_flat_params(theta);
  Eigen::RowVectorXd mu_old = old_p.means(obs);
  Mlp::Cache cache;
  Eigen::RowVectorXd mu_new = new_p.means(obs, &cache);
  const double ls_old = old_p.log_std();
  const double ls_new = new_p.log_std();
  const double var_old = std::exp(2.0 * ls_old);
  const double inv_var_new = std::exp(-2.0 * ls_new);
  const Eigen::Index n = obs.cols();
  const double nd = static_cast<double>(n);
  double total = 0.0;
  Eigen::MatrixXd grad_mean(1, n);
  double grad_ls = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double diff = mu_new[i] - mu_old[i];
    double ratio = (var_old + diff * diff) * inv_var_new;
    total += ls_new - ls_old + 0.5 * ratio - 0.5;
    grad_mean(0, i) = diff * inv_var_new / nd;
    grad_ls += (1.0 - ratio) / nd;
  }
  if (grad) {
    Eigen::VectorXd g_net = Eigen::VectorXd::Zero(new_p.mean_net().num_params());
    new_p.mean_net().backward(cache, grad_mean, &g_net);
    grad->resize(new_p.num_params());
    grad->head(g_net.size()) = g_net;
    (*grad)[g_net.size()] = grad_ls;
  }
  return total / nd;
}

Eigen::VectorXd TrustRegionPolicy::fisher_vector_product(const Eigen::MatrixXd& obs, const Eigen::VectorXd& v,
                                                         double damping) const {
  const Mlp& net = policy_.mean_net();
  const Eigen::Index np = net.num_params();
  const double nd = static_cast<double>(obs.cols());
  Eigen::MatrixXd jv = net.jvp(obs, v.head(np));
  Mlp::Cache cache;
  net.forward(obs, &cache);
  const double inv_var = std::exp(-2.0 * policy_.log_std());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(np + 1);
  Eigen::VectorXd g_net = Eigen::VectorXd::Zero(np);
  net.backward(cache, jv * (inv_var / nd), &g_net);
  out.head(np) = g_net;
  out[np] = 2.0 * v[np];
  return out + damping * v;
}

CpoStepStats TrustRegionPolicy::step(const PolicyStepData& data, double delta, std::size_t cg_iterations,
                                     double damping, double backtrack_ratio, std::size_t backtrack_steps) {
  const Eigen::VectorXd theta_old = policy_.flat_params();
  const Eigen::RowVectorXd old_logp = policy_.log_likelihood(data.obs, data.pre_squash);
  Eigen::VectorXd g, b;
  const double surr_r_old =
      surrogate(theta_old, data.obs, data.pre_squash, old_logp, data.reward_advantages, &g);
  const double surr_c_old = surrogate(theta_old, data.obs, data.pre_squash, old_logp, data.cost_advantages, &b);
  const double c = data.constraint_excess;

  VectorMap fvp = [&](const Eigen::VectorXd& v) { return fisher_vector_product(data.obs, v, damping); };
  CpoDirection dir = cpo_direction(g, b, c, delta, fvp, cg_iterations);

  CpoStepStats stats;
  stats.optim_case = dir.optim_case;
  if (!dir.step.allFinite()) throw TrainingError("non-finite trust-region step");
  double fraction = 1.0;
  for (std::size_t k = 0; k < backtrack_steps; ++k, fraction *= backtrack_ratio) {
    Eigen::VectorXd theta = theta_old + fraction * dir.step;
    double kl_value = kl(theta_old, theta, data.obs, nullptr);
    double surr_r = surrogate(theta, data.obs, data.pre_squash, old_logp, data.reward_advantages, nullptr);
    double surr_c = surrogate(theta, data.obs, data.pre_squash, old_logp, data.cost_advantages, nullptr);
    bool improves = dir.optim_case <= 1 || surr_r >= surr_r_old;
    bool cost_ok = surr_c - surr_c_old <= std::max(-c, 0.0);
    if (std::isfinite(kl_value) && kl_value <= delta && improves && cost_ok) {
      policy_.set_flat_params(theta);
      stats.accepted = true;
      stats.kl = kl_value;
      stats.step_fraction = fraction;
      stats.reward_surrogate_gain = surr_r - surr_r_old;
      stats.cost_surrogate_change = surr_c - surr_c_old;
      break;
    }
  }
  return stats;
}

CpoAgent::CpoAgent(int obs_dim, CpoConfig config, Rng& rng)
    : config_(std::move(config)),
      policy_(GaussianPolicy(obs_dim, config_.hidden, config_.initial_log_std, rng)),
      reward_value_(obs_dim, config_.hidden, 1, rng),
      cost_value_(obs_dim, config_.hidden, 1, rng),
      reward_value_opt_(config_.value_lr),
      cost_value_opt_(config_.value_lr) {
  config_.validate();
}

ActionSample CpoAgent::act(const Observation& obs, bool deterministic, Rng& rng) const {
  const double mean = policy_.policy().means(obs.features())[0];
  if (deterministic) return {std::tanh(mean), mean};
  const double u = mean + std::exp(policy_.policy().log_std()) * standard_normal(rng);
  return {std::tanh(u), u};
}

void CpoAgent::observe(const Transition& transition, Rng& rng) {
  (void)rng;
  rollout_.push(transition);
  if (transition.done && config_.shaping_gamma > 0.0) {
    rollout_.add_terminal_cost(
        wc_terminal_cost(transition.final_beta, config_.beta_thresh, config_.shaping_gamma));
  }
}

void CpoAgent::end_episode(Rng& rng) {
  (void)rng;
  rollout_.finish_episode();
  if (rollout_.episodes() >= config_.episodes_per_update) update(rollout_.take());
}

CpoStepStats CpoAgent::update(const RolloutBatch& batch) {
  Eigen::RowVectorXd vr = reward_value_.forward(batch.obs).row(0);
  Eigen::RowVectorXd vc = cost_value_.forward(batch.obs).row(0);
  Advantages ar = generalized_advantages(batch.rewards, vr, batch.dones, config_.discount, config_.gae_lambda);
  Advantages ac = generalized_advantages(batch.costs, vc, batch.dones, config_.discount, config_.gae_lambda);

  double episode_cost = 0.0;
  double mean_length = 0.0;
  for (std::size_t i = 0; i < batch.episode_costs.size(); ++i) {
    episode_cost += batch.episode_costs[i];
    mean_length += static_cast<double>(batch.episode_lengths[i]);
  }
  episode_cost /= static_cast<double>(batch.episode_costs.size());
  mean_length /= static_cast<double>(batch.episode_lengths.size());

  PolicyStepData data;
  data.obs = batch.obs;
  data.pre_squash = batch.pre_squash;
  data.reward_advantages = normalize(ar.advantages);
  data.cost_advantages = (ac.advantages.array() - ac.advantages.mean()).matrix();
  data.constraint_excess = (episode_cost - config_.cost_limit) / mean_length;

  CpoStepStats stats = policy_.step(data, config_.trust_region_bound, config_.cg_iterations, config_.cg_damping,
                                    config_.backtrack_ratio, config_.backtrack_steps);
  double lr = fit_value_function(reward_value_, reward_value_opt_, batch.obs, ar.returns, config_.value_iterations);
  double lc = fit_value_function(cost_value_, cost_value_opt_, batch.obs, ac.returns, config_.value_iterations);
  diagnostics_.push_back({{"optim_case", stats.optim_case},
                          {"accepted", stats.accepted},
                          {"kl", stats.kl},
                          {"step_fraction", stats.step_fraction},
                          {"episode_cost", episode_cost},
                          {"log_std", policy_.policy().log_std()},
                          {"reward_value_loss", lr},
                          {"cost_value_loss", lc}});
  return stats;
}

nlohmann::json CpoAgent::to_json() const {
  return {{"config", config_.to_json()},
          {"policy", policy_.policy().to_json()},
          {"reward_value", reward_value_.to_json()},
          {"cost_value", cost_value_.to_json()},
          {"reward_value_opt", reward_value_opt_.to_json()},
          {"cost_value_opt", cost_value_opt_.to_json()}};
}

CpoAgent CpoAgent::from_json(const nlohmann::json& j) {
  CpoAgent a;
  a.config_ = CpoConfig::from_json(j.at("config"));
  a.config_.validate();
  a.policy_ = TrustRegionPolicy(GaussianPolicy::from_json(j.at("policy")));
  a.reward_value_ = Mlp::from_json(j.at("reward_value"));
  a.cost_value_ = Mlp::from_json(j.at("cost_value"));
  a.reward_value_opt_ = Adam::from_json(j.at("reward_value_opt"));
  a.cost_value_opt_ = Adam::from_json(j.at("cost_value_opt"));
  return a;
}

}  // namespace slicer
