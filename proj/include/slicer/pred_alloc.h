#pragma once

#include <memory>
#include <vector>

#include "slicer/agent.h"
#include "slicer/network_model.h"
#include "slicer/traffic.h"

namespace slicer {

// Smallest grid fraction r with deterministic_qos(peak, r, -magnitude) > q_thresh;
// the largest grid fraction when none qualifies.
double pred_alloc_decide(double peak_traffic, const QoSModel& model, double q_thresh,
                         const std::vector<double>& action_grid, double worst_case_magnitude = 2.0);
double pred_alloc_decide(const TrafficDistribution& predicted, const QoSModel& model, double q_thresh,
                         const std::vector<double>& action_grid, double worst_case_magnitude = 2.0);
double pred_alloc_decide(std::span<const double> predicted_trace, const QoSModel& model, double q_thresh,
                         const std::vector<double>& action_grid, double worst_case_magnitude = 2.0);

nlohmann::json model_to_json(const QoSModel& model);
QoSModel model_from_json(const nlohmann::json& j);

// Provisions each DTI for the peak of the predicted traffic distribution carried
// in the observation.
class PredAllocAgent : public Agent {
 public:
  PredAllocAgent(std::shared_ptr<const QoSModel> model, double q_thresh, std::vector<double> action_grid,
                 std::vector<double> support = default_support(), double worst_case_magnitude = 2.0);

  AgentKind kind() const override { return AgentKind::kPredAlloc; }
  ActionSample act(const Observation& obs, bool deterministic, Rng& rng) const override;
  nlohmann::json to_json() const override;
  std::unique_ptr<Agent> clone() const override { return std::make_unique<PredAllocAgent>(*this); }
  static PredAllocAgent from_json(const nlohmann::json& j);

  // Bandwidth fraction chosen for the observation.
  double decide(const Observation& obs) const;

 private:
  std::shared_ptr<const QoSModel> model_;
  double q_thresh_;
  std::vector<double> action_grid_;
  std::vector<double> support_;
  double magnitude_;
};

}  // namespace slicer
