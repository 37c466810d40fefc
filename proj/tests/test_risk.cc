#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "slicer/error.h"
#include "slicer/risk.h"
#include "slicer/stats.h"

using namespace slicer;

namespace {

double oracle_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double oracle_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double oracle_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (oracle_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Mean of the largest alpha fraction of the draws.
double empirical_tail_mean(std::vector<double> xs, double alpha) {
  const auto k = static_cast<std::size_t>(alpha * static_cast<double>(xs.size()));
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(k), xs.end(), std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += xs[i];
  return sum / static_cast<double>(k);
}

}  // namespace

TEST_SUITE("risk") {
  TEST_CASE("normal helpers agree with an erfc oracle") {
    for (double z = -4.0; z <= 4.0; z += 0.25) {
      CHECK(normal_cdf(z) == doctest::Approx(oracle_cdf(z)).epsilon(1e-12));
      CHECK(normal_pdf(z) == doctest::Approx(oracle_pdf(z)).epsilon(1e-12));
    }
    for (double p : {0.001, 0.1, 0.5, 0.9, 0.999}) {
      CHECK(normal_quantile(p) == doctest::Approx(oracle_quantile(p)).epsilon(1e-9));
    }
  }

  TEST_CASE("CVaR multiplier: tabulated values") {
    CHECK(cvar_std_multiplier(0.5) == doctest::Approx(0.7978845608).epsilon(1e-9));
    CHECK(cvar_std_multiplier(0.1) == doctest::Approx(1.7549833193).epsilon(1e-9));
    CHECK(cvar_std_multiplier(1.0) == doctest::Approx(0.0));
    for (double a : {0.5, 0.25, 0.1, 0.01, 0.999}) {
      CHECK(cvar_std_multiplier(a) == doctest::Approx(oracle_pdf(oracle_quantile(1.0 - a)) / a).epsilon(1e-9));
    }
  }

  TEST_CASE("CVaR closed form: unit variance and degenerate cases") {
    CHECK(cvar_gaussian(0.0, 1.0, 0.5) == doctest::Approx(0.7979).epsilon(1e-4));
    CHECK(cvar_gaussian(0.0, 1.0, 0.1) == doctest::Approx(1.7550).epsilon(1e-4));
    CHECK(cvar_gaussian(3.0, 0.0, 0.1) == 3.0);
    CHECK(cvar_gaussian(3.0, 4.0, 1.0) == doctest::Approx(3.0));
    CHECK(cvar_gaussian(1.0, 4.0, 0.999) == doctest::Approx(1.0 + 2.0 * oracle_pdf(oracle_quantile(0.001)) / 0.999));
  }

  TEST_CASE("CVaR matches Monte Carlo tail means") {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> n(1.5, 0.7);
    std::vector<double> xs(200000);
    for (auto& x : xs) x = n(rng);
    for (double a : {0.5, 0.25, 0.1}) {
      double mc = empirical_tail_mean(xs, a);
      double cf = cvar_gaussian(1.5, 0.49, a);
      CHECK(std::abs(cf - mc) / std::abs(mc) <= 0.01);
    }
  }

  TEST_CASE("CVaR is non-increasing in alpha and non-decreasing in variance") {
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 100; ++i) {
      double a = i / 100.0;
      double v = cvar_gaussian(0.2, 2.0, a);
      CHECK(v <= prev + 1e-12);
      prev = v;
    }
    prev = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < 100; ++i) {
      double v = cvar_gaussian(0.2, i * 0.05, 0.1);
      CHECK(v >= prev - 1e-12);
      prev = v;
    }
  }

  TEST_CASE("CVaR errors") {
    CHECK_THROWS_AS(cvar_gaussian(0.0, 1.0, 0.0), InputError);
    CHECK_THROWS_AS(cvar_gaussian(0.0, 1.0, 1.5), InputError);
    CHECK_THROWS_AS(cvar_gaussian(0.0, -1.0, 0.5), InputError);
  }

  TEST_CASE("terminal cost: boundary, arithmetic case, convexity") {
    CHECK(wc_terminal_cost(0.05, 0.1, 10.0) == 0.0);
    CHECK(wc_terminal_cost(0.1, 0.1, 10.0) == 0.0);
    CHECK(std::abs(wc_terminal_cost(0.2, 0.1, 10.0) - 10.0 * (std::exp(0.1) - 1.0)) <= 1e-9);
    CHECK(wc_terminal_cost(0.2, 0.1, 10.0) == doctest::Approx(1.0517).epsilon(1e-4));
    CHECK(wc_terminal_cost(0.9, 0.1, 0.0) == 0.0);
    for (double b = 0.0; b <= 0.98; b += 0.01) {
      double mid = wc_terminal_cost(b + 0.01, 0.1, 10.0);
      double chord = 0.5 * (wc_terminal_cost(b, 0.1, 10.0) + wc_terminal_cost(b + 0.02, 0.1, 10.0));
      CHECK(mid <= chord + 1e-12);
    }
  }
}
