#pragma once

namespace slicer {

// CVaR at risk level alpha of N(mean, variance):
//   mean + pdf(quantile(1 - alpha)) / alpha * sqrt(variance).
// alpha == 1 gives the mean. Throws InputError unless 0 < alpha <= 1 and
// variance >= 0.
double cvar_gaussian(double mean, double variance, double risk_alpha);

// pdf(quantile(1 - alpha)) / alpha, the standard-deviation multiplier above.
double cvar_std_multiplier(double risk_alpha);

// Episode-end penalty for degradation above the threshold:
//   shaping_gamma * (exp(max(beta_final - beta_thresh, 0)) - 1).
double wc_terminal_cost(double beta_final, double beta_thresh, double shaping_gamma);

}  // namespace slicer
