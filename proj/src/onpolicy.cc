#include "slicer/onpolicy.h"

#include <cmath>

#include "slicer/error.h"
#include "slicer/wcsac.h"

namespace slicer {

void RolloutBuffer::push(const Transition& t) {
  steps_.push_back(t);
  ++open_;
}

std::size_t RolloutBuffer::finish_episode() {
  if (open_ == 0) throw InputError("no steps recorded for this episode");
  episode_lengths_.push_back(open_);
  open_ = 0;
  return steps_.size() - 1;
}

void RolloutBuffer::add_terminal_cost(double extra) {
  if (steps_.empty()) throw InputError("no steps recorded");
  steps_.back().cost += extra;
}

RolloutBatch RolloutBuffer::take() {
  if (open_ != 0) throw InputError("rollout has an unfinished episode");
  if (steps_.empty()) throw InputError("empty rollout");
  RolloutBatch b;
  const auto n = static_cast<Eigen::Index>(steps_.size());
  b.obs.resize(steps_.front().obs.size(), n);
  b.pre_squash.resize(n);
  b.rewards.resize(n);
  b.costs.resize(n);
  b.dones.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = steps_[static_cast<std::size_t>(i)];
    b.obs.col(i) = t.obs;
    b.pre_squash[i] = t.pre_squash;
    b.rewards[i] = t.reward;
    b.costs[i] = t.cost;
    b.dones[i] = 0.0;
  }
  std::size_t pos = 0;
  for (std::size_t len : episode_lengths_) {
    double total = 0.0;
    for (std::size_t k = 0; k < len; ++k) total += steps_[pos + k].cost;
    b.episode_costs.push_back(total);
    b.episode_lengths.push_back(len);
    pos += len;
    b.dones[static_cast<Eigen::Index>(pos - 1)] = 1.0;
  }
  steps_.clear();
  episode_lengths_.clear();
  return b;
}

Advantages generalized_advantages(const Eigen::RowVectorXd& rewards, const Eigen::RowVectorXd& values,
                                  const Eigen::RowVectorXd& dones, double discount, double lambda) {
  const auto n = rewards.size();
  Advantages out;
  out.advantages.resize(n);
  double running = 0.0;
  for (Eigen::Index i = n; i-- > 0;) {
    const bool terminal = dones[i] > 0.5;
    const double next_value = terminal || i + 1 >= n ? 0.0 : values[i + 1];
    const double delta = rewards[i] + discount * next_value - values[i];
    running = delta + (terminal ? 0.0 : discount * lambda * running);
    out.advantages[i] = running;
  }
  out.returns = out.advantages + values;
  return out;
}

double fit_value_function(Mlp& net, Adam& opt, const Eigen::MatrixXd& obs,
                          const Eigen::RowVectorXd& targets, std::size_t iterations) {
  double loss = 0.0;
  Eigen::VectorXd grad;
  for (std::size_t it = 0; it < iterations; ++it) {
    loss = critic_mse_loss(net, obs, targets, &grad);
    if (!std::isfinite(loss)) throw TrainingError("non-finite value loss");
    opt.step(net.params(), grad);
  }
  return loss;
}

Eigen::RowVectorXd normalize(const Eigen::RowVectorXd& v) {
  if (v.size() == 0) return v;
  const double mean = v.mean();
  const double var = (v.array() - mean).square().mean();
  return ((v.array() - mean) / (std::sqrt(var) + 1e-8)).matrix();
}

}  // namespace slicer
