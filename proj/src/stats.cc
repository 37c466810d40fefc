#include "slicer/stats.h"

#include <cmath>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "slicer/rng.h"

namespace slicer {

namespace {
const boost::math::normal_distribution<double> kStandardNormal(0.0, 1.0);
}

double normal_pdf(double z) { return boost::math::pdf(kStandardNormal, z); }

double normal_cdf(double z) { return boost::math::cdf(kStandardNormal, z); }

double normal_quantile(double p) { return boost::math::quantile(kStandardNormal, p); }

std::string rng_state(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void set_rng_state(Rng& rng, const std::string& state) {
  std::istringstream in(state);
  in >> rng;
}

}  // namespace slicer
