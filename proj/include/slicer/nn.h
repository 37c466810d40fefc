#pragma once

#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "slicer/rng.h"

namespace slicer {

// Fully connected network with tanh hidden layers and a linear output.
// Parameters live in one flat vector (per layer: W column-major, then b) so
// optimizers, trust-region solvers and finite-difference checks can treat
// them uniformly. Batches are column-major: one sample per column.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int input_dim, std::vector<int> hidden, int output_dim, Rng& rng, double output_gain = 1.0);

  struct Cache {
    std::vector<Eigen::MatrixXd> layer_inputs;
    std::vector<Eigen::MatrixXd> hidden_outputs;
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;

  // Adds dL/dparams into `grad_params` (if non-null) and returns dL/dx.
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& grad_out,
                           Eigen::VectorXd* grad_params) const;

  // Forward-mode derivative of the output along a parameter direction.
  Eigen::MatrixXd jvp(const Eigen::MatrixXd& x, const Eigen::VectorXd& direction) const;

  int input_dim() const { return sizes_.empty() ? 0 : sizes_.front(); }
  int output_dim() const { return sizes_.empty() ? 0 : sizes_.back(); }
  Eigen::Index num_params() const { return params_.size(); }
  const std::vector<int>& sizes() const { return sizes_; }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  // Polyak averaging: this = (1 - tau) * this + tau * source.
  void soft_update(const Mlp& source, double tau);

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  Eigen::Index weight_offset(std::size_t layer) const { return offsets_[layer]; }

  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  Eigen::VectorXd params_;
};

// Adam on a flat parameter vector (minimization).
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long steps = 0;

  Adam() = default;
  explicit Adam(double learning_rate) : lr(learning_rate) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

  nlohmann::json to_json() const;
  static Adam from_json(const nlohmann::json& j);
};

nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

// Numerically stable softplus and its derivative (the logistic function).
double softplus(double x);
double sigmoid(double x);

}  // namespace slicer
