#include "slicer/nn.h"

#include <cmath>

#include "slicer/error.h"

namespace slicer {

Mlp::Mlp(int input_dim, std::vector<int> hidden, int output_dim, Rng& rng, double output_gain) {
  sizes_.push_back(input_dim);
  for (int h : hidden) sizes_.push_back(h);
  sizes_.push_back(output_dim);

  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l] + sizes_[l + 1];
  }
  params_ = Eigen::VectorXd::Zero(total);

  // Glorot-uniform weights, zero biases; the last layer is scaled by output_gain.
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int fan_in = sizes_[l];
    const int fan_out = sizes_[l + 1];
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    if (l + 2 == sizes_.size()) limit *= output_gain;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(fan_in) * fan_out; ++i) {
      params_[offsets_[l] + i] = uniform(rng, -limit, limit);
    }
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  if (x.rows() != input_dim()) throw InputError("network input has wrong dimension");
  if (cache) {
    cache->layer_inputs.clear();
    cache->hidden_outputs.clear();
  }
  Eigen::MatrixXd h = x;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    Eigen::Map<const Eigen::MatrixXd> w(params_.data() + offsets_[l], out, in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + offsets_[l] + out * in, out);
    if (cache) cache->layer_inputs.push_back(h);
    Eigen::MatrixXd z = w * h;
    z.colwise() += b;
    if (l + 1 < layers) {
      h = z.array().tanh().matrix();
      if (cache) cache->hidden_outputs.push_back(h);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_out,
                              Eigen::VectorXd* grad_params) const {
  const std::size_t layers = sizes_.size() - 1;
  if (grad_params && grad_params->size() != params_.size()) {
    *grad_params = Eigen::VectorXd::Zero(params_.size());
  }
  Eigen::MatrixXd delta = grad_out;
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    if (l + 1 < layers) {
      const auto& a = cache.hidden_outputs[l];
      delta = (delta.array() * (1.0 - a.array().square())).matrix();
    }
    if (grad_params) {
      Eigen::Map<Eigen::MatrixXd> gw(grad_params->data() + offsets_[l], out, in);
      Eigen::Map<Eigen::VectorXd> gb(grad_params->data() + offsets_[l] + out * in, out);
      gw.noalias() += delta * cache.layer_inputs[l].transpose();
      gb.noalias() += delta.rowwise().sum();
    }
    Eigen::Map<const Eigen::MatrixXd> w(params_.data() + offsets_[l], out, in);
    delta = w.transpose() * delta;
  }
  return delta;
}

Eigen::MatrixXd Mlp::jvp(const Eigen::MatrixXd& x, const Eigen::VectorXd& direction) const {
  Eigen::MatrixXd h = x;
  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    Eigen::Map<const Eigen::MatrixXd> w(params_.data() + offsets_[l], out, in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + offsets_[l] + out * in, out);
    Eigen::Map<const Eigen::MatrixXd> dw(direction.data() + offsets_[l], out, in);
    Eigen::Map<const Eigen::VectorXd> db(direction.data() + offsets_[l] + out * in, out);
    Eigen::MatrixXd z = w * h;
    z.colwise() += b;
    Eigen::MatrixXd dz = dw * h + w * dh;
    dz.colwise() += db;
    if (l + 1 < layers) {
      h = z.array().tanh().matrix();
      dh = (dz.array() * (1.0 - h.array().square())).matrix();
    } else {
      dh = std::move(dz);
    }
  }
  return dh;
}

void Mlp::soft_update(const Mlp& source, double tau) {
  params_ = (1.0 - tau) * params_ + tau * source.params_;
}

nlohmann::json Mlp::to_json() const {
  return {{"sizes", sizes_}, {"params", vector_to_json(params_)}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp net;
  net.sizes_ = j.at("sizes").get<std::vector<int>>();
  if (net.sizes_.size() < 2) throw ParseError("network needs at least two layer sizes", 0);
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
    net.offsets_.push_back(total);
    total += static_cast<Eigen::Index>(net.sizes_[l + 1]) * net.sizes_[l] + net.sizes_[l + 1];
  }
  net.params_ = vector_from_json(j.at("params"));
  if (net.params_.size() != total) throw ParseError("network parameter count mismatch", 0);
  return net;
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (m.size() != params.size()) {
    m = Eigen::VectorXd::Zero(params.size());
    v = Eigen::VectorXd::Zero(params.size());
  }
  ++steps;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
  params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

nlohmann::json Adam::to_json() const {
  return {{"lr", lr}, {"beta1", beta1}, {"beta2", beta2}, {"eps", eps},
          {"m", vector_to_json(m)}, {"v", vector_to_json(v)}, {"steps", steps}};
}

Adam Adam::from_json(const nlohmann::json& j) {
  Adam a;
  a.lr = j.at("lr").get<double>();
  a.beta1 = j.at("beta1").get<double>();
  a.beta2 = j.at("beta2").get<double>();
  a.eps = j.at("eps").get<double>();
  a.m = vector_from_json(j.at("m"));
  a.v = vector_from_json(j.at("v"));
  a.steps = j.at("steps").get<long>();
  return a;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  auto values = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace slicer
