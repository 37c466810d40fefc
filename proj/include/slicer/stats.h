#pragma once

namespace slicer {

// Standard normal density, distribution and inverse distribution functions.
double normal_pdf(double z);
double normal_cdf(double z);
double normal_quantile(double p);

}  // namespace slicer
