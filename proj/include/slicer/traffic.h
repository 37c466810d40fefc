#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slicer/rng.h"

namespace slicer {

// Per-TTI traffic in users/sec.
struct TrafficTrace {
  std::vector<double> values;
  double tti_seconds = 1.0;
  std::size_t dti_ttis = 60;

  std::size_t dti_count() const { return dti_ttis == 0 ? 0 : values.size() / dti_ttis; }
};

// Discrete distribution over integer traffic levels.
class TrafficDistribution {
 public:
  // Normalizes `weights` (non-negative, positive sum) into a pmf.
  static TrafficDistribution from_weights(std::vector<double> support, std::vector<double> weights);
  static TrafficDistribution point_mass(const std::vector<double>& support, double level);
  static TrafficDistribution uniform(const std::vector<double>& support);

  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& pmf() const { return pmf_; }
  const std::vector<double>& cdf() const { return cdf_; }

 private:
  std::vector<double> support_;
  std::vector<double> pmf_;
  std::vector<double> cdf_;
};

// Traffic levels {1, 2, 3, 4, 5} users/sec shared with the network-model grid.
std::vector<double> default_support();

struct PredictorConfig {
  enum class Mode { kPerfect, kNoisy, kRandom };
  Mode mode = Mode::kPerfect;
  double noise_sigma = 0.0;
  double support_min = 1.0;
  double support_max = 5.0;

  std::vector<double> support() const;
  void validate() const;
};

std::string to_string(PredictorConfig::Mode mode);
PredictorConfig::Mode predictor_mode_from_string(const std::string& name);

struct TraceShaping {
  double low = 1.0;
  double high = 3.0;
  double noise_sigma = 0.75;
  double offset = 0.0;
  // Noisy values are kept inside [clip_min, clip_max].
  double clip_min = 1.0;
  double clip_max = 5.0;
  // Each input row covers this many TTIs; rows are linearly interpolated.
  std::size_t ttis_per_row = 1;
  double tti_seconds = 1.0;
  std::size_t dti_ttis = 60;
};

// Min-max scales `raw` into [low, high], resamples to TTI resolution, adds the
// offset and then per-TTI truncated Gaussian noise.
TrafficTrace shape_trace(std::span<const double> raw, const TraceShaping& shaping, Rng& rng);

// Reads a `timestamp,value` CSV and applies shape_trace. Rows are ordered by
// timestamp before shaping.
TrafficTrace load_trace(const std::filesystem::path& path, const TraceShaping& shaping, Rng& rng);

// Two-peak daily pattern with mild day-to-day variation; a stand-in for a real
// cellular activity trace at 10-minute granularity.
std::vector<double> synthetic_diurnal_series(std::size_t days, std::size_t samples_per_day, Rng& rng);
void save_series(std::span<const double> values, double seconds_per_row,
                 const std::filesystem::path& path);

// Truncated Gaussian over `support`: weights exp(-(k - center)^2 / (2 spread^2)).
TrafficDistribution discretized_gaussian(const std::vector<double>& support, double center,
                                         double spread);

struct RandomizationConfig {
  double center_min = 1.0;
  double center_max = 5.0;
  double spread_min = 0.25;
  double spread_max = 1.5;
  // Re-draw the distribution for every DTI (true) or once per episode.
  bool per_dti = true;
};

TrafficDistribution randomize_dti_distribution(Rng& rng, const RandomizationConfig& config = {},
                                               const std::vector<double>& support = default_support());

std::vector<double> sample_dti_traffic(const TrafficDistribution& dist, std::size_t n, Rng& rng);

// Empirical pmf of `values` rounded to the nearest support level. Zero-traffic
// TTIs are ignored; an all-zero input yields a point mass at the lowest level.
TrafficDistribution empirical_distribution(std::span<const double> values,
                                           const std::vector<double>& support);

TrafficDistribution predict_cdf(std::span<const double> actual_next_dti, const PredictorConfig& config,
                                Rng& rng);

double peak_of(std::span<const double> trace);
double peak_of(const TrafficDistribution& dist);

}  // namespace slicer
