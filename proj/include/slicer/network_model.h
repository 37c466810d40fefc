#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "slicer/rng.h"

namespace slicer {

// One QoS measurement: traffic in users/sec, bandwidth as a fraction of the
// slice capacity, QoS in frames per second.
struct QoSSample {
  double traffic = 0.0;
  double bandwidth = 0.0;
  double qos = 0.0;
};

struct QoSGridCell {
  double traffic = 0.0;
  double bandwidth = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  std::size_t count = 0;

  bool operator==(const QoSGridCell&) const = default;
};

struct QoSMoments {
  double mu = 0.0;
  double sigma = 0.0;
};

// Query-based regression model: Gaussian QoS parameters on a
// (traffic, bandwidth) grid, bilinearly interpolated between nodes and
// clamped outside the grid. Immutable after construction.
class QoSModel {
 public:
  QoSModel(std::vector<double> traffic_axis, std::vector<double> bandwidth_axis,
           std::vector<QoSGridCell> cells);

  const std::vector<double>& traffic_axis() const { return traffic_axis_; }
  const std::vector<double>& bandwidth_axis() const { return bandwidth_axis_; }
  const std::vector<QoSGridCell>& cells() const { return cells_; }

  // Row-major by traffic index, then bandwidth index.
  const QoSGridCell& cell(std::size_t traffic_index, std::size_t bandwidth_index) const {
    return cells_[traffic_index * bandwidth_axis_.size() + bandwidth_index];
  }

  QoSMoments predict(double traffic, double bandwidth) const;

  bool operator==(const QoSModel&) const = default;

 private:
  std::vector<double> traffic_axis_;
  std::vector<double> bandwidth_axis_;
  std::vector<QoSGridCell> cells_;
};

// Default grid: traffic {1,..,5} users/sec, bandwidth {0.1,..,0.8}.
std::vector<double> default_traffic_axis();
std::vector<double> default_bandwidth_axis();

// Aggregates raw samples into per-node mean and unbiased standard deviation.
QoSModel fit_from_samples(std::span<const QoSSample> samples, std::vector<double> traffic_axis,
                          std::vector<double> bandwidth_axis);

// One draw from N(mu, sigma) at the queried point, censored at 0.
double sample_qos(const QoSModel& model, double traffic, double bandwidth, Rng& rng);

// QoS under a deterministic network condition d: max(0, mu + d * sigma).
// Smaller d is worse; d = -2 is the provisioning worst case.
double deterministic_qos(const QoSModel& model, double traffic, double bandwidth, double d);

// Saturating fair-share ground truth standing in for testbed measurements:
//   mu*(x, r)    = f_max * (1 - exp(-lambda * r / x))
//   sigma*(x, r) = rho * mu* + sigma0
struct SyntheticTruthConfig {
  double f_max = 20.0;
  double lambda = 0.0;
  double rho = 0.15;
  double sigma0 = 0.05;

  // Calibration anchor: mu* - magnitude * sigma* == qos at (traffic, bandwidth).
  double anchor_traffic = 5.0;
  double anchor_bandwidth = 0.8;
  double anchor_magnitude = 2.0;
  double anchor_qos = 2.0;

  double mean(double traffic, double bandwidth) const;
  double stddev(double traffic, double bandwidth) const;
  double anchor_residual() const;
  bool calibrated(double tolerance = 1e-6) const;
};

// Returns a copy of `config` with lambda solved from the anchor by bisection.
SyntheticTruthConfig calibrate(SyntheticTruthConfig config);

// Paper-anchored default configuration (f_max=20, rho=0.15, sigma0=0.05).
SyntheticTruthConfig default_synthetic_truth();

std::vector<QoSSample> generate_synthetic_grid(const SyntheticTruthConfig& config,
                                               std::size_t samples_per_cell, Rng& rng,
                                               const std::vector<double>& traffic_axis,
                                               const std::vector<double>& bandwidth_axis);

// Noise-free model built directly from the synthetic truth (count = 1 per node).
QoSModel synthetic_model(const SyntheticTruthConfig& config,
                         const std::vector<double>& traffic_axis = default_traffic_axis(),
                         const std::vector<double>& bandwidth_axis = default_bandwidth_axis());

void save_model(const QoSModel& model, const std::filesystem::path& path);
QoSModel load_model(const std::filesystem::path& path);

void save_samples(std::span<const QoSSample> samples, const std::filesystem::path& path);
std::vector<QoSSample> load_samples(const std::filesystem::path& path);

}  // namespace slicer
