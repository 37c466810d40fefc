#include "slicer/pred_alloc.h"

#include <algorithm>
#include <cmath>

#include "slicer/env.h"
#include "slicer/error.h"

namespace slicer {

double pred_alloc_decide(double peak_traffic, const QoSModel& model, double q_thresh,
                         const std::vector<double>& action_grid, double worst_case_magnitude) {
  if (action_grid.empty()) throw InputError("empty action grid");
  for (double r : action_grid) {
    if (deterministic_qos(model, peak_traffic, r, -worst_case_magnitude) > q_thresh) return r;
  }
  return action_grid.back();
}

double pred_alloc_decide(const TrafficDistribution& predicted, const QoSModel& model, double q_thresh,
                         const std::vector<double>& action_grid, double worst_case_magnitude) {
  return pred_alloc_decide(peak_of(predicted), model, q_thresh, action_grid, worst_case_magnitude);
}

double pred_alloc_decide(std::span<const double> predicted_trace, const QoSModel& model, double q_thresh,
                         const std::vector<double>& action_grid, double worst_case_magnitude) {
  return pred_alloc_decide(peak_of(predicted_trace), model, q_thresh, action_grid, worst_case_magnitude);
}

nlohmann::json model_to_json(const QoSModel& model) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : model.cells()) {
    cells.push_back({c.traffic, c.bandwidth, c.mu, c.sigma, c.count});
  }
  return {{"traffic_axis", model.traffic_axis()}, {"bandwidth_axis", model.bandwidth_axis()}, {"cells", cells}};
}

QoSModel model_from_json(const nlohmann::json& j) {
  std::vector<QoSGridCell> cells;
  for (const auto& c : j.at("cells")) {
    cells.push_back({c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>(), c.at(3).get<double>(),
                     c.at(4).get<std::size_t>()});
  }
  return QoSModel(j.at("traffic_axis").get<std::vector<double>>(),
                  j.at("bandwidth_axis").get<std::vector<double>>(), std::move(cells));
}

PredAllocAgent::PredAllocAgent(std::shared_ptr<const QoSModel> model, double q_thresh,
                               std::vector<double> action_grid, std::vector<double> support,
                               double worst_case_magnitude)
    : model_(std::move(model)),
      q_thresh_(q_thresh),
      action_grid_(std::move(action_grid)),
      support_(std::move(support)),
      magnitude_(worst_case_magnitude) {
  if (!model_) throw InputError("Pred-Alloc needs a QoS model");
  if (action_grid_.empty()) throw InputError("empty action grid");
  if (support_.empty()) throw InputError("empty traffic support");
}

double PredAllocAgent::decide(const Observation& obs) const {
  if (obs.traffic_cdf.size() != support_.size()) throw InputError("observation CDF does not match the support");
  double peak = support_.front();
  double prev = 0.0;
  for (std::size_t i = 0; i < support_.size(); ++i) {
    if (obs.traffic_cdf[i] - prev > 1e-12) peak = support_[i];
    prev = obs.traffic_cdf[i];
  }
  return pred_alloc_decide(peak, *model_, q_thresh_, action_grid_, magnitude_);
}

ActionSample PredAllocAgent::act(const Observation& obs, bool deterministic, Rng& rng) const {
  (void)deterministic;
  (void)rng;
  const double raw = fraction_to_raw(decide(obs), action_grid_);
  return {raw, std::atanh(std::clamp(raw, -0.999999, 0.999999))};
}

nlohmann::json PredAllocAgent::to_json() const {
  return {{"model", model_to_json(*model_)},
          {"q_thresh", q_thresh_},
          {"action_grid", action_grid_},
          {"support", support_},
          {"worst_case_magnitude", magnitude_}};
}

PredAllocAgent PredAllocAgent::from_json(const nlohmann::json& j) {
  return PredAllocAgent(std::make_shared<const QoSModel>(model_from_json(j.at("model"))),
                        j.at("q_thresh").get<double>(), j.at("action_grid").get<std::vector<double>>(),
                        j.at("support").get<std::vector<double>>(), j.at("worst_case_magnitude").get<double>());
}

}  // namespace slicer
