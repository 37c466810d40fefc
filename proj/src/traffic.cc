#include "slicer/traffic.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "csv.h"
#include "slicer/error.h"

namespace slicer {

namespace {

constexpr int kMaxRejections = 1000;

// Draws base + N(0, sigma^2) restricted to [lo, hi] by rejection. Bases outside
// the window fall back to clamping.
double truncated_noisy_value(double base, double sigma, double lo, double hi, Rng& rng) {
  if (sigma <= 0.0) return base;
  if (base < lo || base > hi) return std::clamp(base + sigma * standard_normal(rng), lo, hi);
  for (int i = 0; i < kMaxRejections; ++i) {
    double v = base + sigma * standard_normal(rng);
    if (v >= lo && v <= hi) return v;
  }
  return base;
}

}  // namespace

TrafficDistribution TrafficDistribution::from_weights(std::vector<double> support,
                                                      std::vector<double> weights) {
  if (support.empty() || support.size() != weights.size()) {
    throw InputError("distribution support and weights must be non-empty and equal length");
  }
  for (std::size_t i = 1; i < support.size(); ++i) {
    if (!(support[i] > support[i - 1])) throw InputError("support must be strictly increasing");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw InputError("weights must have a positive sum");

  TrafficDistribution d;
  d.support_ = std::move(support);
  d.pmf_.resize(weights.size());
  d.cdf_.resize(weights.size());
  double running = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    d.pmf_[i] = weights[i] / total;
    running += d.pmf_[i];
    d.cdf_[i] = std::min(running, 1.0);
  }
  d.cdf_.back() = 1.0;
  return d;
}

TrafficDistribution TrafficDistribution::point_mass(const std::vector<double>& support, double level) {
  std::vector<double> w(support.size(), 0.0);
  auto it = std::min_element(support.begin(), support.end(), [level](double a, double b) {
    return std::abs(a - level) < std::abs(b - level);
  });
  w[static_cast<std::size_t>(it - support.begin())] = 1.0;
  return from_weights(support, std::move(w));
}

TrafficDistribution TrafficDistribution::uniform(const std::vector<double>& support) {
  return from_weights(support, std::vector<double>(support.size(), 1.0));
}

std::vector<double> default_support() { return {1.0, 2.0, 3.0, 4.0, 5.0}; }

std::vector<double> PredictorConfig::support() const {
  std::vector<double> levels;
  for (double v = std::ceil(support_min); v <= support_max + 1e-12; v += 1.0) levels.push_back(v);
  return levels;
}

void PredictorConfig::validate() const {
  if (!(noise_sigma >= 0.0)) throw ConfigError("predictor noise_sigma must be >= 0");
  if (!(support_min < support_max)) throw ConfigError("predictor support min must be < max");
}

std::string to_string(PredictorConfig::Mode mode) {
  switch (mode) {
    case PredictorConfig::Mode::kPerfect: return "perfect";
    case PredictorConfig::Mode::kNoisy: return "noisy";
    case PredictorConfig::Mode::kRandom: return "random";
  }
  return "perfect";
}

PredictorConfig::Mode predictor_mode_from_string(const std::string& name) {
  if (name == "perfect") return PredictorConfig::Mode::kPerfect;
  if (name == "noisy") return PredictorConfig::Mode::kNoisy;
  if (name == "random") return PredictorConfig::Mode::kRandom;
  throw ConfigError("unknown predictor mode '" + name + "'");
}

TrafficTrace shape_trace(std::span<const double> raw, const TraceShaping& shaping, Rng& rng) {
  if (raw.empty()) throw InputError("cannot scale an empty series");
  if (!(shaping.high > shaping.low)) throw ConfigError("scale_to high must exceed low");
  if (shaping.ttis_per_row == 0) throw ConfigError("ttis_per_row must be >= 1");
  auto [min_it, max_it] = std::minmax_element(raw.begin(), raw.end());
  double lo = *min_it;
  double hi = *max_it;
  if (!(hi > lo)) throw InputError("cannot scale a constant series");

  std::vector<double> scaled(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    scaled[i] = shaping.low + (raw[i] - lo) / (hi - lo) * (shaping.high - shaping.low);
  }

  TrafficTrace trace;
  trace.tti_seconds = shaping.tti_seconds;
  trace.dti_ttis = shaping.dti_ttis;
  const std::size_t k = shaping.ttis_per_row;
  trace.values.reserve(scaled.size() * k);
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    double next = i + 1 < scaled.size() ? scaled[i + 1] : scaled[i];
    for (std::size_t j = 0; j < k; ++j) {
      double t = static_cast<double>(j) / static_cast<double>(k);
      double base = (1.0 - t) * scaled[i] + t * next + shaping.offset;
      trace.values.push_back(std::max(
          0.0, truncated_noisy_value(base, shaping.noise_sigma, shaping.clip_min, shaping.clip_max, rng)));
    }
  }
  return trace;
}

TrafficTrace load_trace(const std::filesystem::path& path, const TraceShaping& shaping, Rng& rng) {
  auto table = csv::read(path, {"timestamp", "value"});
  std::vector<std::pair<double, double>> rows;
  rows.reserve(table.rows.size());
  for (const auto& [line, f] : table.rows) {
    double ts = csv::parse_double(f[0], line);
    double value = csv::parse_double(f[1], line);
    if (!std::isfinite(value)) throw ParseError("non-finite traffic value", line);
    rows.emplace_back(ts, value);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> values;
  values.reserve(rows.size());
  for (const auto& r : rows) values.push_back(r.second);
  return shape_trace(values, shaping, rng);
}

std::vector<double> synthetic_diurnal_series(std::size_t days, std::size_t samples_per_day, Rng& rng) {
  std::vector<double> values;
  values.reserve(days * samples_per_day);
  for (std::size_t day = 0; day < days; ++day) {
    // Weekend days are quieter with a flatter afternoon.
    bool weekend = day % 7 >= 5;
    double morning = weekend ? 0.55 : 0.85;
    double evening = weekend ? 0.9 : 1.0;
    double day_scale = 1.0 + 0.08 * standard_normal(rng);
    for (std::size_t s = 0; s < samples_per_day; ++s) {
      double hour = 24.0 * static_cast<double>(s) / static_cast<double>(samples_per_day);
      double v = 0.15 + morning * std::exp(-std::pow(hour - 11.5, 2) / (2.0 * 2.2 * 2.2)) +
                 evening * std::exp(-std::pow(hour - 19.0, 2) / (2.0 * 2.8 * 2.8)) +
                 0.1 * std::sin(2.0 * std::numbers::pi * hour / 24.0);
      v = v * day_scale + 0.03 * standard_normal(rng);
      values.push_back(std::max(0.0, v));
    }
  }
  return values;
}

void save_series(std::span<const double> values, double seconds_per_row,
                 const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "timestamp,value\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << csv::format_double(static_cast<double>(i) * seconds_per_row) << ','
        << csv::format_double(values[i]) << '\n';
  }
}

TrafficDistribution discretized_gaussian(const std::vector<double>& support, double center,
                                         double spread) {
  std::vector<double> w(support.size());
  if (spread <= 0.0) return TrafficDistribution::point_mass(support, center);
  // Subtract the peak exponent so tiny spreads do not underflow every weight.
  double best = std::numeric_limits<double>::infinity();
  for (double k : support) best = std::min(best, (k - center) * (k - center));
  for (std::size_t i = 0; i < support.size(); ++i) {
    double z2 = (support[i] - center) * (support[i] - center) - best;
    w[i] = std::exp(-z2 / (2.0 * spread * spread));
  }
  return TrafficDistribution::from_weights(support, std::move(w));
}

TrafficDistribution randomize_dti_distribution(Rng& rng, const RandomizationConfig& config,
                                               const std::vector<double>& support) {
  double center = uniform(rng, config.center_min, config.center_max);
  double spread = uniform(rng, config.spread_min, config.spread_max);
  return discretized_gaussian(support, center, spread);
}

std::vector<double> sample_dti_traffic(const TrafficDistribution& dist, std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  const auto& cdf = dist.cdf();
  for (auto& v : out) {
    double u = uniform(rng, 0.0, 1.0);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t idx = std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
    // Skip zero-probability bins that share a cdf value with their neighbour.
    while (dist.pmf()[idx] == 0.0 && idx + 1 < cdf.size()) ++idx;
    v = dist.support()[idx];
  }
  return out;
}

TrafficDistribution empirical_distribution(std::span<const double> values,
                                           const std::vector<double>& support) {
  std::vector<double> counts(support.size(), 0.0);
  bool any = false;
  for (double v : values) {
    if (v <= 0.0) continue;
    auto it = std::min_element(support.begin(), support.end(), [v](double a, double b) {
      return std::abs(a - v) < std::abs(b - v);
    });
    counts[static_cast<std::size_t>(it - support.begin())] += 1.0;
    any = true;
  }
  if (!any) return TrafficDistribution::point_mass(support, support.front());
  return TrafficDistribution::from_weights(support, std::move(counts));
}

TrafficDistribution predict_cdf(std::span<const double> actual_next_dti, const PredictorConfig& config,
                                Rng& rng) {
  if (actual_next_dti.empty()) throw InputError("prediction needs at least one TTI of traffic");
  const auto support = config.support();
  switch (config.mode) {
    case PredictorConfig::Mode::kRandom:
      return TrafficDistribution::uniform(support);
    case PredictorConfig::Mode::kPerfect:
      return empirical_distribution(actual_next_dti, support);
    case PredictorConfig::Mode::kNoisy: {
      auto perfect = empirical_distribution(actual_next_dti, support);
      if (config.noise_sigma <= 0.0) return perfect;
      std::vector<double> w = perfect.pmf();
      for (auto& p : w) {
        // Noise truncated to +-2 sigma, then clipped at zero mass.
        double z = 0.0;
        for (int i = 0; i < kMaxRejections; ++i) {
          z = standard_normal(rng);
          if (std::abs(z) <= 2.0) break;
        }
        p = std::max(0.0, p + config.noise_sigma * z);
      }
      if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) return TrafficDistribution::uniform(support);
      return TrafficDistribution::from_weights(support, std::move(w));
    }
  }
  return empirical_distribution(actual_next_dti, support);
}

double peak_of(std::span<const double> trace) {
  if (trace.empty()) throw InputError("peak of an empty trace");
  return *std::max_element(trace.begin(), trace.end());
}

double peak_of(const TrafficDistribution& dist) {
  for (std::size_t i = dist.pmf().size(); i-- > 0;) {
    if (dist.pmf()[i] > 0.0) return dist.support()[i];
  }
  throw InputError("distribution has no mass");
}

}  // namespace slicer
