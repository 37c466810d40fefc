#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "slicer/agent.h"
#include "slicer/nn.h"

namespace slicer {

// Transitions of complete episodes gathered under the current policy.
struct RolloutBatch {
  Eigen::MatrixXd obs;
  Eigen::RowVectorXd pre_squash;
  Eigen::RowVectorXd rewards;
  Eigen::RowVectorXd costs;
  Eigen::RowVectorXd dones;
  // Per-episode totals (undiscounted) of the cost stream.
  std::vector<double> episode_costs;
  std::vector<std::size_t> episode_lengths;

  Eigen::Index size() const { return rewards.size(); }
};

class RolloutBuffer {
 public:
  void push(const Transition& t);
  // Closes the current episode. Returns the index of its last step.
  std::size_t finish_episode();
  std::size_t episodes() const { return episode_lengths_.size(); }
  std::size_t steps() const { return steps_.size(); }
  // Adds `extra` to the cost of the most recent step.
  void add_terminal_cost(double extra);
  RolloutBatch take();

 private:
  std::vector<Transition> steps_;
  std::vector<std::size_t> episode_lengths_;
  std::size_t open_ = 0;
};

// Generalized advantage estimates and bootstrapped returns for one stream.
struct Advantages {
  Eigen::RowVectorXd advantages;
  Eigen::RowVectorXd returns;
};

Advantages generalized_advantages(const Eigen::RowVectorXd& rewards, const Eigen::RowVectorXd& values,
                                  const Eigen::RowVectorXd& dones, double discount, double lambda);

// Regresses a value network onto `targets` with full-batch Adam steps.
double fit_value_function(Mlp& net, Adam& opt, const Eigen::MatrixXd& obs,
                          const Eigen::RowVectorXd& targets, std::size_t iterations);

Eigen::RowVectorXd normalize(const Eigen::RowVectorXd& v);

}  // namespace slicer
