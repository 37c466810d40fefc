#include "slicer/wcsac.h"

#include <algorithm>
#include <cmath>

#include "slicer/error.h"
#include "slicer/risk.h"

namespace slicer {

namespace {

constexpr double kVarianceBiasInit = -8.0;

void set_output_bias(Mlp& net, double value) {
  net.params().tail(net.output_dim()).setConstant(value);
}

void check_finite(double value, const char* what, const WcsacAgent::UpdateStats& stats) {
  if (!std::isfinite(value)) {
    throw TrainingError(std::string("non-finite ") + what + " (entropy multiplier " +
                        std::to_string(stats.entropy_multiplier) + ", safety multiplier " +
                        std::to_string(stats.safety_multiplier) + ")");
  }
}

Eigen::RowVectorXd normal_row(Eigen::Index n, Rng& rng) {
  Eigen::RowVectorXd eps(n);
  for (Eigen::Index i = 0; i < n; ++i) eps[i] = standard_normal(rng);
  return eps;
}

}  // namespace

void WcsacConfig::validate() const {
  if (!(risk_alpha > 0.0 && risk_alpha <= 1.0)) throw ConfigError("risk_alpha must be in (0, 1]");
  if (!(cost_limit > 0.0)) throw ConfigError("cost_limit must be > 0");
  if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError("discount must be in (0, 1]");
  if (!(initial_entropy_multiplier > 0.0)) throw ConfigError("entropy multiplier must start > 0");
  if (!(initial_safety_multiplier >= 0.0)) throw ConfigError("safety multiplier must start >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (hidden.empty()) throw ConfigError("hidden layer list is empty");
}

nlohmann::json WcsacConfig::to_json() const {
  return {{"risk_alpha", risk_alpha},
          {"cost_limit", cost_limit},
          {"discount", discount},
          {"initial_entropy_multiplier", initial_entropy_multiplier},
          {"initial_safety_multiplier", initial_safety_multiplier},
          {"target_entropy", target_entropy},
          {"hidden", hidden},
          {"actor_lr", actor_lr},
          {"critic_lr", critic_lr},
          {"entropy_lr", entropy_lr},
          {"safety_lr", safety_lr},
          {"tau", tau},
          {"batch_size", batch_size},
          {"replay_capacity", replay_capacity},
          {"warmup_steps", warmup_steps},
          {"updates_per_step", updates_per_step},
          {"min_variance", min_variance},
          {"freeze_variance", freeze_variance},
          {"constrained", constrained}};
}

WcsacConfig WcsacConfig::from_json(const nlohmann::json& j) {
  WcsacConfig c;
  c.risk_alpha = j.at("risk_alpha");
  c.cost_limit = j.at("cost_limit");
  c.discount = j.at("discount");
  c.initial_entropy_multiplier = j.at("initial_entropy_multiplier");
  c.initial_safety_multiplier = j.at("initial_safety_multiplier");
  c.target_entropy = j.at("target_entropy");
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.actor_lr = j.at("actor_lr");
  c.critic_lr = j.at("critic_lr");
  c.entropy_lr = j.at("entropy_lr");
  c.safety_lr = j.at("safety_lr");
  c.tau = j.at("tau");
  c.batch_size = j.at("batch_size");
  c.replay_capacity = j.at("replay_capacity");
  c.warmup_steps = j.at("warmup_steps");
  c.updates_per_step = j.at("updates_per_step");
  c.min_variance = j.at("min_variance");
  c.freeze_variance = j.at("freeze_variance");
  c.constrained = j.at("constrained");
  return c;
}

TransitionBatch TransitionBatch::from(const std::vector<const Transition*>& transitions) {
  TransitionBatch b;
  const auto n = static_cast<Eigen::Index>(transitions.size());
  if (n == 0) throw InputError("empty transition batch");
  const auto dim = transitions.front()->obs.size();
  b.obs.resize(dim, n);
  b.next_obs.resize(dim, n);
  b.actions.resize(n);
  b.rewards.resize(n);
  b.costs.resize(n);
  b.dones.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = *transitions[static_cast<std::size_t>(i)];
    b.obs.col(i) = t.obs;
    b.next_obs.col(i) = t.next_obs;
    b.actions[i] = t.raw_action;
    b.rewards[i] = t.reward;
    b.costs[i] = t.cost;
    b.dones[i] = t.done ? 1.0 : 0.0;
  }
  return b;
}

void ReplayBuffer::push(const Transition& t) {
  if (data_.size() < capacity_) {
    data_.push_back(t);
  } else {
    data_[next_] = t;
  }
  next_ = (next_ + 1) % capacity_;
}

TransitionBatch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (data_.empty()) throw InputError("replay buffer is empty");
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  std::vector<const Transition*> picked(batch_size);
  for (auto& p : picked) p = &data_[pick(rng)];
  return TransitionBatch::from(picked);
}

Eigen::MatrixXd stack_input(const Eigen::MatrixXd& obs, const Eigen::RowVectorXd& actions) {
  Eigen::MatrixXd x(obs.rows() + 1, obs.cols());
  x.topRows(obs.rows()) = obs;
  x.row(obs.rows()) = actions;
  return x;
}

double critic_mse_loss(const Mlp& net, const Eigen::MatrixXd& input, const Eigen::RowVectorXd& target,
                       Eigen::VectorXd* grad) {
  Mlp::Cache cache;
  Eigen::RowVectorXd err = net.forward(input, grad ? &cache : nullptr).row(0) - target;
  const double n = static_cast<double>(err.size());
  if (grad) {
    *grad = Eigen::VectorXd::Zero(net.num_params());
    net.backward(cache, err / n, grad);
  }
  return 0.5 * err.squaredNorm() / n;
}

double variance_w2_loss(const Mlp& net, const Eigen::MatrixXd& input, const Eigen::RowVectorXd& target,
                        double min_variance, Eigen::VectorXd* grad) {
  Mlp::Cache cache;
  Eigen::RowVectorXd raw = net.forward(input, grad ? &cache : nullptr).row(0);
  const auto n = raw.size();
  double loss = 0.0;
  Eigen::MatrixXd grad_raw(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = softplus(raw[i]) + min_variance;
    double vt = std::max(target[i], min_variance);
    double root = std::sqrt(v * vt);
    loss += v + vt - 2.0 * root;
    grad_raw(0, i) = (1.0 - vt / root) * sigmoid(raw[i]) / static_cast<double>(n);
  }
  if (grad) {
    *grad = Eigen::VectorXd::Zero(net.num_params());
    net.backward(cache, grad_raw, grad);
  }
  return loss / static_cast<double>(n);
}

WcsacAgent::WcsacAgent(int obs_dim, WcsacConfig config, Rng& rng)
    : config_(std::move(config)), replay_(config_.replay_capacity) {
  config_.validate();
  actor_ = SquashedGaussianActor(obs_dim, config_.hidden, rng);
  q1_ = Mlp(obs_dim + 1, config_.hidden, 1, rng);
  q2_ = Mlp(obs_dim + 1, config_.hidden, 1, rng);
  qc_ = Mlp(obs_dim + 1, config_.hidden, 1, rng, 0.1);
  vc_ = Mlp(obs_dim + 1, config_.hidden, 1, rng, 0.1);
  set_output_bias(vc_, kVarianceBiasInit);
  q1_target_ = q1_;
  q2_target_ = q2_;
  qc_target_ = qc_;
  vc_target_ = vc_;
  actor_opt_ = Adam(config_.actor_lr);
  q1_opt_ = Adam(config_.critic_lr);
  q2_opt_ = Adam(config_.critic_lr);
  qc_opt_ = Adam(config_.critic_lr);
  vc_opt_ = Adam(config_.critic_lr);
  entropy_opt_ = Adam(config_.entropy_lr);
  log_entropy_multiplier_ = std::log(config_.initial_entropy_multiplier);
  safety_multiplier_ = config_.initial_safety_multiplier;
}

void WcsacAgent::set_learning_rates(double actor_lr, double critic_lr) {
  config_.actor_lr = actor_lr;
  config_.critic_lr = critic_lr;
  actor_opt_.lr = actor_lr;
  for (Adam* opt : {&q1_opt_, &q2_opt_, &qc_opt_, &vc_opt_}) opt->lr = critic_lr;
}

double WcsacAgent::entropy_multiplier() const { return std::exp(log_entropy_multiplier_); }

ActionSample WcsacAgent::act(const Observation& obs, bool deterministic, Rng& rng) const {
  Eigen::MatrixXd x = obs.features();
  Eigen::RowVectorXd eps = Eigen::RowVectorXd::Zero(1);
  if (!deterministic) eps[0] = standard_normal(rng);
  auto s = actor_.sample(x, eps, nullptr);
  if (deterministic) return {std::tanh(s.mean[0]), s.mean[0]};
  return {s.action[0], s.pre_squash[0]};
}

ActionSample WcsacAgent::explore(const Observation& obs, Rng& rng) {
  if (total_steps_ < config_.warmup_steps) {
    double a = uniform(rng, -1.0, 1.0);
    return {a, std::atanh(std::clamp(a, -0.999999, 0.999999))};
  }
  return act(obs, false, rng);
}

void WcsacAgent::observe(const Transition& transition, Rng& rng) {
  replay_.push(transition);
  ++total_steps_;
  if (total_steps_ < config_.warmup_steps || replay_.size() < config_.batch_size) return;
  for (std::size_t i = 0; i < config_.updates_per_step; ++i) {
    auto stats = update(replay_.sample(config_.batch_size, rng), rng);
    if (total_steps_ % 100 == 0 && i == 0) {
      diagnostics_.push_back({{"step", total_steps_},
                              {"reward_critic_loss", stats.reward_critic_loss},
                              {"cost_critic_loss", stats.cost_critic_loss},
                              {"variance_loss", stats.variance_loss},
                              {"actor_loss", stats.actor_loss},
                              {"entropy_multiplier", stats.entropy_multiplier},
                              {"safety_multiplier", stats.safety_multiplier},
                              {"mean_gamma", stats.mean_gamma},
                              {"mean_cost", stats.mean_cost}});
    }
  }
}

Eigen::RowVectorXd WcsacAgent::variance(const Mlp& net, const Eigen::MatrixXd& input) const {
  if (config_.freeze_variance) return Eigen::RowVectorXd::Constant(input.cols(), config_.min_variance);
  Eigen::RowVectorXd raw = net.forward(input).row(0);
  return raw.unaryExpr([this](double r) { return softplus(r) + config_.min_variance; });
}

Eigen::RowVectorXd WcsacAgent::gamma(const Eigen::MatrixXd& obs, const Eigen::RowVectorXd& actions) const {
  Eigen::MatrixXd x = stack_input(obs, actions);
  Eigen::RowVectorXd mean = qc_.forward(x).row(0);
  Eigen::RowVectorXd var = variance(vc_, x);
  const double k = cvar_std_multiplier(config_.risk_alpha);
  return mean + k * var.cwiseSqrt();
}

double WcsacAgent::actor_loss(const TransitionBatch& batch, const Eigen::RowVectorXd& eps,
                              Eigen::VectorXd* grad) const {
  const Eigen::Index n = batch.size();
  const double nd = static_cast<double>(n);
  const double beta = entropy_multiplier();
  Mlp::Cache actor_cache;
  auto s = actor_.sample(batch.obs, eps, &actor_cache);
  Eigen::MatrixXd x = stack_input(batch.obs, s.action);

  Mlp::Cache c1, c2;
  Eigen::RowVectorXd q1 = q1_.forward(x, &c1).row(0);
  Eigen::RowVectorXd q2 = q2_.forward(x, &c2).row(0);
  Eigen::RowVectorXd qmin = q1.cwiseMin(q2);

  double loss = (beta * s.log_prob - qmin).sum() / nd;
  Eigen::RowVectorXd grad_action = Eigen::RowVectorXd::Zero(n);
  if (grad) {
    // The minimum selects one critic per sample.
    Eigen::MatrixXd pick1(1, n), pick2(1, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      bool first = q1[i] <= q2[i];
      pick1(0, i) = first ? -1.0 / nd : 0.0;
      pick2(0, i) = first ? 0.0 : -1.0 / nd;
    }
    grad_action += q1_.backward(c1, pick1, nullptr).row(x.rows() - 1);
    grad_action += q2_.backward(c2, pick2, nullptr).row(x.rows() - 1);
  }

  const double k = safety_multiplier_;
  if (config_.constrained && k != 0.0) {
    const double mult = cvar_std_multiplier(config_.risk_alpha);
    Mlp::Cache cc, cv;
    Eigen::RowVectorXd qc = qc_.forward(x, &cc).row(0);
    Eigen::RowVectorXd gam = qc;
    Eigen::RowVectorXd raw_v;
    if (!config_.freeze_variance) {
      raw_v = vc_.forward(x, &cv).row(0);
      for (Eigen::Index i = 0; i < n; ++i) gam[i] += mult * std::sqrt(softplus(raw_v[i]) + config_.min_variance);
    } else {
      gam.array() += mult * std::sqrt(config_.min_variance);
    }
    loss += k * gam.sum() / nd;
    if (grad) {
      Eigen::MatrixXd g = Eigen::MatrixXd::Constant(1, n, k / nd);
      grad_action += qc_.backward(cc, g, nullptr).row(x.rows() - 1);
      if (!config_.freeze_variance) {
        Eigen::MatrixXd gv(1, n);
        for (Eigen::Index i = 0; i < n; ++i) {
          double v = softplus(raw_v[i]) + config_.min_variance;
          gv(0, i) = k / nd * mult * 0.5 / std::sqrt(v) * sigmoid(raw_v[i]);
        }
        grad_action += vc_.backward(cv, gv, nullptr).row(x.rows() - 1);
      }
    }
  }

  if (grad) {
    *grad = Eigen::VectorXd::Zero(actor_.net().num_params());
    Eigen::RowVectorXd grad_logp = Eigen::RowVectorXd::Constant(n, beta / nd);
    actor_.backward(actor_cache, s, grad_action, grad_logp, grad);
  }
  return loss;
}

WcsacAgent::UpdateStats WcsacAgent::update(const TransitionBatch& batch, Rng& rng) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw InputError("empty batch");
  UpdateStats stats;
  stats.entropy_multiplier = entropy_multiplier();
  stats.safety_multiplier = safety_multiplier_;
  stats.mean_cost = batch.costs.mean();
  const double g = config_.discount;
  const double beta = entropy_multiplier();
  const Eigen::RowVectorXd live = (1.0 - batch.dones.array()).matrix();

  // Next-state actions for the bootstrap targets.
  Eigen::RowVectorXd eps_next = normal_row(n, rng);
  auto next = actor_.sample(batch.next_obs, eps_next, nullptr);
  Eigen::MatrixXd xn = stack_input(batch.next_obs, next.action);
  Eigen::MatrixXd x = stack_input(batch.obs, batch.actions);

  Eigen::RowVectorXd qn = q1_target_.forward(xn).row(0).cwiseMin(q2_target_.forward(xn).row(0));
  Eigen::RowVectorXd y =
      batch.rewards + g * live.cwiseProduct(qn - beta * next.log_prob);

  Eigen::VectorXd grad;
  stats.reward_critic_loss = critic_mse_loss(q1_, x, y, &grad);
  q1_opt_.step(q1_.params(), grad);
  stats.reward_critic_loss += critic_mse_loss(q2_, x, y, &grad);
  q2_opt_.step(q2_.params(), grad);
  check_finite(stats.reward_critic_loss, "reward critic loss", stats);

  if (config_.constrained) {
    Eigen::RowVectorXd qc_now = qc_.forward(x).row(0);
    Eigen::RowVectorXd qc_next = qc_target_.forward(xn).row(0);
    Eigen::RowVectorXd vc_next = variance(vc_target_, xn);
    stats.mean_gamma = (qc_now + cvar_std_multiplier(config_.risk_alpha) *
                                     variance(vc_, x).cwiseSqrt()).mean();

    Eigen::RowVectorXd yc = batch.costs + g * live.cwiseProduct(qc_next);
    // Second-moment recursion: Var[c + g C'] = c^2 + 2 g c Q' + g^2 (V' + Q'^2) - Q^2.
    Eigen::RowVectorXd yv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = batch.costs[i];
      double m = live[i];
      yv[i] = c * c + m * (2.0 * g * c * qc_next[i] + g * g * (vc_next[i] + qc_next[i] * qc_next[i])) -
              qc_now[i] * qc_now[i];
      yv[i] = std::max(yv[i], config_.min_variance);
    }
    stats.cost_critic_loss = critic_mse_loss(qc_, x, yc, &grad);
    qc_opt_.step(qc_.params(), grad);
    check_finite(stats.cost_critic_loss, "cost critic loss", stats);
    if (!config_.freeze_variance) {
      stats.variance_loss = variance_w2_loss(vc_, x, yv, config_.min_variance, &grad);
      vc_opt_.step(vc_.params(), grad);
      check_finite(stats.variance_loss, "cost variance loss", stats);
    }
  }

  Eigen::RowVectorXd eps = normal_row(n, rng);
  stats.actor_loss = actor_loss(batch, eps, &grad);
  check_finite(stats.actor_loss, "actor loss", stats);
  actor_opt_.step(actor_.net().params(), grad);

  // Temperature: raise beta when the policy entropy is below target.
  auto fresh = actor_.sample(batch.obs, eps, nullptr);
  Eigen::VectorXd grad_log_beta(1);
  grad_log_beta[0] = -(fresh.log_prob.array() + config_.target_entropy).mean();
  Eigen::VectorXd log_beta(1);
  log_beta[0] = log_entropy_multiplier_;
  entropy_opt_.step(log_beta, grad_log_beta);
  log_entropy_multiplier_ = std::clamp(log_beta[0], -20.0, 5.0);

  if (config_.constrained) {
    // Dual ascent on k, projected onto k >= 0.
    safety_multiplier_ =
        std::max(0.0, safety_multiplier_ + config_.safety_lr * (stats.mean_gamma - config_.cost_limit));
  }

  q1_target_.soft_update(q1_, config_.tau);
  q2_target_.soft_update(q2_, config_.tau);
  if (config_.constrained) {
    qc_target_.soft_update(qc_, config_.tau);
    vc_target_.soft_update(vc_, config_.tau);
  }
  return stats;
}

nlohmann::json WcsacAgent::to_json() const {
  return {{"config", config_.to_json()},
          {"actor", actor_.net().to_json()},
          {"q1", q1_.to_json()},
          {"q2", q2_.to_json()},
          {"q1_target", q1_target_.to_json()},
          {"q2_target", q2_target_.to_json()},
          {"qc", qc_.to_json()},
          {"qc_target", qc_target_.to_json()},
          {"vc", vc_.to_json()},
          {"vc_target", vc_target_.to_json()},
          {"actor_opt", actor_opt_.to_json()},
          {"q1_opt", q1_opt_.to_json()},
          {"q2_opt", q2_opt_.to_json()},
          {"qc_opt", qc_opt_.to_json()},
          {"vc_opt", vc_opt_.to_json()},
          {"entropy_opt", entropy_opt_.to_json()},
          {"log_entropy_multiplier", log_entropy_multiplier_},
          {"safety_multiplier", safety_multiplier_},
          {"total_steps", total_steps_}};
}

WcsacAgent WcsacAgent::from_json(const nlohmann::json& j) {
  WcsacAgent a;
  a.config_ = WcsacConfig::from_json(j.at("config"));
  a.actor_.net() = Mlp::from_json(j.at("actor"));
  a.q1_ = Mlp::from_json(j.at("q1"));
  a.q2_ = Mlp::from_json(j.at("q2"));
  a.q1_target_ = Mlp::from_json(j.at("q1_target"));
  a.q2_target_ = Mlp::from_json(j.at("q2_target"));
  a.qc_ = Mlp::from_json(j.at("qc"));
  a.qc_target_ = Mlp::from_json(j.at("qc_target"));
  a.vc_ = Mlp::from_json(j.at("vc"));
  a.vc_target_ = Mlp::from_json(j.at("vc_target"));
  a.actor_opt_ = Adam::from_json(j.at("actor_opt"));
  a.q1_opt_ = Adam::from_json(j.at("q1_opt"));
  a.q2_opt_ = Adam::from_json(j.at("q2_opt"));
  a.qc_opt_ = Adam::from_json(j.at("qc_opt"));
  a.vc_opt_ = Adam::from_json(j.at("vc_opt"));
  a.entropy_opt_ = Adam::from_json(j.at("entropy_opt"));
  a.log_entropy_multiplier_ = j.at("log_entropy_multiplier");
  a.safety_multiplier_ = j.at("safety_multiplier");
  a.total_steps_ = j.at("total_steps");
  a.replay_ = ReplayBuffer(a.config_.replay_capacity);
  return a;
}

}  // namespace slicer
