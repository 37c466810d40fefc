#include "slicer/risk.h"

#include <algorithm>
#include <cmath>

#include "slicer/error.h"
#include "slicer/stats.h"

namespace slicer {

double cvar_std_multiplier(double risk_alpha) {
  if (!(risk_alpha > 0.0 && risk_alpha <= 1.0)) {
    throw InputError("risk_alpha must lie in (0, 1]");
  }
  if (risk_alpha == 1.0) return 0.0;
  return normal_pdf(normal_quantile(1.0 - risk_alpha)) / risk_alpha;
}

double cvar_gaussian(double mean, double variance, double risk_alpha) {
  if (!(variance >= 0.0)) throw InputError("variance must be non-negative");
  double k = cvar_std_multiplier(risk_alpha);
  if (variance == 0.0) return mean;
  return mean + k * std::sqrt(variance);
}

double wc_terminal_cost(double beta_final, double beta_thresh, double shaping_gamma) {
  if (!std::isfinite(beta_final) || !std::isfinite(beta_thresh) || !std::isfinite(shaping_gamma)) {
    throw InputError("terminal cost inputs must be finite");
  }
  if (shaping_gamma < 0.0) throw InputError("shaping_gamma must be >= 0");
  double excess = std::max(beta_final - beta_thresh, 0.0);
  if (excess == 0.0) return 0.0;
  return shaping_gamma * std::expm1(excess);
}

}  // namespace slicer
