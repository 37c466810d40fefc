#include "slicer/network_model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "csv.h"
#include "slicer/error.h"

namespace slicer {

namespace {

constexpr double kNodeTolerance = 1e-9;

void check_axis(const std::vector<double>& axis, const char* name) {
  if (axis.empty()) throw InputError(std::string(name) + " axis is empty");
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (!(axis[i] > axis[i - 1])) {
      throw InputError(std::string(name) + " axis must be strictly increasing");
    }
  }
}

// Index of the node equal to `value`, or npos.
std::size_t node_index(const std::vector<double>& axis, double value) {
  auto it = std::lower_bound(axis.begin(), axis.end(), value - kNodeTolerance);
  if (it != axis.end() && std::abs(*it - value) <= kNodeTolerance) {
    return static_cast<std::size_t>(it - axis.begin());
  }
  return static_cast<std::size_t>(-1);
}

// Bracketing index and interpolation weight for a clamped coordinate.
std::pair<std::size_t, double> bracket(const std::vector<double>& axis, double value) {
  if (axis.size() == 1 || value <= axis.front()) return {0, 0.0};
  if (value >= axis.back()) return {axis.size() - 2, 1.0};
  auto upper = std::upper_bound(axis.begin(), axis.end(), value);
  std::size_t i = static_cast<std::size_t>(upper - axis.begin()) - 1;
  double t = (value - axis[i]) / (axis[i + 1] - axis[i]);
  return {i, t};
}

std::string node_name(double traffic, double bandwidth) {
  return "(traffic=" + csv::format_double(traffic) + ", bandwidth=" + csv::format_double(bandwidth) +
         ")";
}

}  // namespace

QoSModel::QoSModel(std::vector<double> traffic_axis, std::vector<double> bandwidth_axis,
                   std::vector<QoSGridCell> cells)
    : traffic_axis_(std::move(traffic_axis)),
      bandwidth_axis_(std::move(bandwidth_axis)),
      cells_(std::move(cells)) {
  check_axis(traffic_axis_, "traffic");
  check_axis(bandwidth_axis_, "bandwidth");
  if (cells_.size() != traffic_axis_.size() * bandwidth_axis_.size()) {
    throw InputError("cell count does not match grid size");
  }
  for (std::size_t i = 0; i < traffic_axis_.size(); ++i) {
    for (std::size_t j = 0; j < bandwidth_axis_.size(); ++j) {
      const auto& c = cell(i, j);
      if (c.traffic != traffic_axis_[i] || c.bandwidth != bandwidth_axis_[j]) {
        throw InputError("cell " + node_name(c.traffic, c.bandwidth) + " is out of grid order");
      }
      if (!(c.sigma >= 0.0) || !std::isfinite(c.mu)) {
        throw InputError("cell " + node_name(c.traffic, c.bandwidth) + " has invalid moments");
      }
    }
  }
}

QoSMoments QoSModel::predict(double traffic, double bandwidth) const {
  auto [i, tx] = bracket(traffic_axis_, traffic);
  auto [j, ty] = bracket(bandwidth_axis_, bandwidth);
  std::size_t i1 = std::min(i + 1, traffic_axis_.size() - 1);
  std::size_t j1 = std::min(j + 1, bandwidth_axis_.size() - 1);
  const auto& c00 = cell(i, j);
  const auto& c01 = cell(i, j1);
  const auto& c10 = cell(i1, j);
  const auto& c11 = cell(i1, j1);
  auto lerp2 = [&](double v00, double v01, double v10, double v11) {
    return (1.0 - tx) * ((1.0 - ty) * v00 + ty * v01) + tx * ((1.0 - ty) * v10 + ty * v11);
  };
  return {lerp2(c00.mu, c01.mu, c10.mu, c11.mu),
          lerp2(c00.sigma, c01.sigma, c10.sigma, c11.sigma)};
}

std::vector<double> default_traffic_axis() { return {1.0, 2.0, 3.0, 4.0, 5.0}; }

std::vector<double> default_bandwidth_axis() {
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
}

QoSModel fit_from_samples(std::span<const QoSSample> samples, std::vector<double> traffic_axis,
                          std::vector<double> bandwidth_axis) {
  check_axis(traffic_axis, "traffic");
  check_axis(bandwidth_axis, "bandwidth");
  const std::size_t nb = bandwidth_axis.size();
  std::vector<std::vector<double>> buckets(traffic_axis.size() * nb);
  for (const auto& s : samples) {
    auto i = node_index(traffic_axis, s.traffic);
    auto j = node_index(bandwidth_axis, s.bandwidth);
    if (i == static_cast<std::size_t>(-1) || j == static_cast<std::size_t>(-1)) {
      throw InputError("sample at " + node_name(s.traffic, s.bandwidth) + " is off the grid");
    }
    buckets[i * nb + j].push_back(s.qos);
  }
  std::vector<QoSGridCell> cells;
  cells.reserve(buckets.size());
  for (std::size_t i = 0; i < traffic_axis.size(); ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const auto& values = buckets[i * nb + j];
      if (values.size() < 2) {
        throw FitError("node " + node_name(traffic_axis[i], bandwidth_axis[j]) + " has " +
                       std::to_string(values.size()) + " samples, need at least 2");
      }
      double n = static_cast<double>(values.size());
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= n;
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      cells.push_back({traffic_axis[i], bandwidth_axis[j], mean, std::sqrt(ss / (n - 1.0)),
                       values.size()});
    }
  }
  return QoSModel(std::move(traffic_axis), std::move(bandwidth_axis), std::move(cells));
}

double sample_qos(const QoSModel& model, double traffic, double bandwidth, Rng& rng) {
  auto [mu, sigma] = model.predict(traffic, bandwidth);
  return std::max(0.0, mu + sigma * standard_normal(rng));
}

double deterministic_qos(const QoSModel& model, double traffic, double bandwidth, double d) {
  auto [mu, sigma] = model.predict(traffic, bandwidth);
  return std::max(0.0, mu + d * sigma);
}

double SyntheticTruthConfig::mean(double traffic, double bandwidth) const {
  if (traffic <= 0.0) return f_max;
  return f_max * (1.0 - std::exp(-lambda * bandwidth / traffic));
}

double SyntheticTruthConfig::stddev(double traffic, double bandwidth) const {
  return rho * mean(traffic, bandwidth) + sigma0;
}

double SyntheticTruthConfig::anchor_residual() const {
  return mean(anchor_traffic, anchor_bandwidth) -
         anchor_magnitude * stddev(anchor_traffic, anchor_bandwidth) - anchor_qos;
}

bool SyntheticTruthConfig::calibrated(double tolerance) const {
  return f_max > 0.0 && lambda > 0.0 && rho >= 0.0 && rho < 1.0 && sigma0 >= 0.0 &&
         std::abs(anchor_residual()) <= tolerance;
}

SyntheticTruthConfig calibrate(SyntheticTruthConfig config) {
  if (!(config.f_max > 0.0) || !(config.rho >= 0.0 && config.rho < 1.0) || !(config.sigma0 >= 0.0)) {
    throw ConfigError("synthetic truth parameters out of range");
  }
  if (config.anchor_magnitude * config.rho >= 1.0) {
    throw ConfigError("anchor magnitude * rho must be < 1 for a solvable calibration");
  }
  // The anchor residual is strictly increasing in lambda; bracket then bisect.
  auto residual = [&](double lambda) {
    config.lambda = lambda;
    return config.anchor_residual();
  };
  double lo = 0.0;
  double hi = 1.0;
  if (residual(lo) > 0.0) throw ConfigError("anchor QoS is below the zero-allocation value");
  while (residual(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e12) throw ConfigError("anchor QoS unreachable below saturation");
  }
  for (int iter = 0; iter < 200 && hi - lo > 1e-15 * hi; ++iter) {
    double mid = 0.5 * (lo + hi);
    (residual(mid) < 0.0 ? lo : hi) = mid;
  }
  config.lambda = 0.5 * (lo + hi);
  return config;
}

SyntheticTruthConfig default_synthetic_truth() { return calibrate(SyntheticTruthConfig{}); }

std::vector<QoSSample> generate_synthetic_grid(const SyntheticTruthConfig& config,
                                               std::size_t samples_per_cell, Rng& rng,
                                               const std::vector<double>& traffic_axis,
                                               const std::vector<double>& bandwidth_axis) {
  if (!config.calibrated()) throw ConfigError("synthetic truth config is not calibrated");
  std::vector<QoSSample> samples;
  samples.reserve(traffic_axis.size() * bandwidth_axis.size() * samples_per_cell);
  for (double x : traffic_axis) {
    for (double r : bandwidth_axis) {
      double mu = config.mean(x, r);
      double sigma = config.stddev(x, r);
      for (std::size_t k = 0; k < samples_per_cell; ++k) {
        samples.push_back({x, r, std::max(0.0, mu + sigma * standard_normal(rng))});
      }
    }
  }
  return samples;
}

QoSModel synthetic_model(const SyntheticTruthConfig& config, const std::vector<double>& traffic_axis,
                         const std::vector<double>& bandwidth_axis) {
  if (!config.calibrated()) throw ConfigError("synthetic truth config is not calibrated");
  std::vector<QoSGridCell> cells;
  for (double x : traffic_axis) {
    for (double r : bandwidth_axis) {
      cells.push_back({x, r, config.mean(x, r), config.stddev(x, r), 1});
    }
  }
  return QoSModel(traffic_axis, bandwidth_axis, std::move(cells));
}

void save_model(const QoSModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "traffic,bandwidth,mu,sigma,count\n";
  for (const auto& c : model.cells()) {
    out << csv::format_double(c.traffic) << ',' << csv::format_double(c.bandwidth) << ','
        << csv::format_double(c.mu) << ',' << csv::format_double(c.sigma) << ',' << c.count << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

QoSModel load_model(const std::filesystem::path& path) {
  auto table = csv::read(path, {"traffic", "bandwidth", "mu", "sigma", "count"});
  if (table.rows.empty()) throw ParseError("model file has no grid rows (empty model)", 0);

  std::map<std::pair<double, double>, std::pair<int, QoSGridCell>> nodes;
  std::vector<double> traffic_axis;
  std::vector<double> bandwidth_axis;
  for (const auto& [line, f] : table.rows) {
    QoSGridCell c;
    c.traffic = csv::parse_double(f[0], line);
    c.bandwidth = csv::parse_double(f[1], line);
    c.mu = csv::parse_double(f[2], line);
    c.sigma = csv::parse_double(f[3], line);
    double count = csv::parse_double(f[4], line);
    if (count < 0.0 || count != std::floor(count)) throw ParseError("count must be a whole number", line);
    c.count = static_cast<std::size_t>(count);
    if (!(c.sigma >= 0.0)) throw ParseError("sigma must be non-negative", line);
    if (!(c.traffic >= 0.0) || !(c.bandwidth >= 0.0 && c.bandwidth <= 1.0)) {
      throw ParseError("grid coordinates out of range", line);
    }
    if (!nodes.emplace(std::make_pair(c.traffic, c.bandwidth), std::make_pair(line, c)).second) {
      throw ParseError("duplicate node " + node_name(c.traffic, c.bandwidth), line);
    }
    traffic_axis.push_back(c.traffic);
    bandwidth_axis.push_back(c.bandwidth);
  }
  auto unique_sorted = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  unique_sorted(traffic_axis);
  unique_sorted(bandwidth_axis);

  std::vector<QoSGridCell> cells;
  cells.reserve(traffic_axis.size() * bandwidth_axis.size());
  for (double x : traffic_axis) {
    for (double r : bandwidth_axis) {
      auto it = nodes.find({x, r});
      if (it == nodes.end()) throw ParseError("missing grid node " + node_name(x, r), 0);
      cells.push_back(it->second.second);
    }
  }
  return QoSModel(std::move(traffic_axis), std::move(bandwidth_axis), std::move(cells));
}

void save_samples(std::span<const QoSSample> samples, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "traffic,bandwidth,qos\n";
  for (const auto& s : samples) {
    out << csv::format_double(s.traffic) << ',' << csv::format_double(s.bandwidth) << ','
        << csv::format_double(s.qos) << '\n';
  }
}

std::vector<QoSSample> load_samples(const std::filesystem::path& path) {
  auto table = csv::read(path, {"traffic", "bandwidth", "qos"});
  std::vector<QoSSample> samples;
  samples.reserve(table.rows.size());
  for (const auto& [line, f] : table.rows) {
    QoSSample s{csv::parse_double(f[0], line), csv::parse_double(f[1], line),
                csv::parse_double(f[2], line)};
    if (s.traffic < 0.0 || s.bandwidth < 0.0 || s.bandwidth > 1.0 || s.qos < 0.0) {
      throw ParseError("sample out of range", line);
    }
    samples.push_back(s);
  }
  return samples;
}

}  // namespace slicer
