#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slicer/error.h"
#include "slicer/traffic.h"
#include "test_util.h"

using namespace slicer;

namespace {

void check_distribution(const TrafficDistribution& d) {
  double sum = std::accumulate(d.pmf().begin(), d.pmf().end(), 0.0);
  CHECK(std::abs(sum - 1.0) <= 1e-9);
  for (double p : d.pmf()) CHECK(p >= 0.0);
  for (std::size_t i = 1; i < d.cdf().size(); ++i) CHECK(d.cdf()[i] >= d.cdf()[i - 1]);
  CHECK(std::abs(d.cdf().back() - 1.0) <= 1e-9);
}

TraceShaping plain(double noise = 0.0, double offset = 0.0) {
  TraceShaping s;
  s.noise_sigma = noise;
  s.offset = offset;
  return s;
}

}  // namespace

TEST_SUITE("traffic") {
  TEST_CASE("shape_trace: identity scaling when already in [1, 3]") {
    std::vector<double> raw = {1.0, 2.0, 3.0, 1.5, 2.5};
    Rng rng(1);
    auto t = shape_trace(raw, plain(), rng);
    REQUIRE(t.values.size() == raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(t.values[i] == doctest::Approx(raw[i]).epsilon(1e-15));
  }

  TEST_CASE("shape_trace: monotone rescaling preserves order") {
    std::vector<double> raw = {10, 40, 25, 5, 33, 18};
    Rng rng(1);
    auto t = shape_trace(raw, plain(), rng);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      for (std::size_t j = 0; j < raw.size(); ++j) {
        if (raw[i] < raw[j]) CHECK(t.values[i] < t.values[j]);
      }
    }
    CHECK(*std::min_element(t.values.begin(), t.values.end()) == doctest::Approx(1.0));
    CHECK(*std::max_element(t.values.begin(), t.values.end()) == doctest::Approx(3.0));
  }

  TEST_CASE("shape_trace: offset 2 moves [1, 3] to [3, 5]") {
    std::vector<double> raw = {0, 1, 2, 3, 4};
    Rng rng(1);
    auto t = shape_trace(raw, plain(0.0, 2.0), rng);
    CHECK(*std::min_element(t.values.begin(), t.values.end()) == doctest::Approx(3.0));
    CHECK(*std::max_element(t.values.begin(), t.values.end()) == doctest::Approx(5.0));
  }

  TEST_CASE("shape_trace: noise stays inside [1, 5] and is reproducible") {
    std::vector<double> raw(200);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = std::sin(0.1 * static_cast<double>(i));
    TraceShaping s = plain(0.75, 2.0);
    s.ttis_per_row = 60;
    Rng a(4), b(4);
    auto ta = shape_trace(raw, s, a);
    auto tb = shape_trace(raw, s, b);
    CHECK(ta.values == tb.values);
    CHECK(ta.values.size() >= raw.size() * 60 - 60);
    for (double v : ta.values) {
      CHECK(v >= 1.0);
      CHECK(v <= 5.0);
    }
  }

  TEST_CASE("shape_trace: resampling interpolates rows linearly") {
    std::vector<double> raw = {1.0, 3.0};
    TraceShaping s = plain();
    s.ttis_per_row = 4;
    Rng rng(1);
    auto t = shape_trace(raw, s, rng);
    REQUIRE(t.values.size() >= 5);
    CHECK(t.values[0] == doctest::Approx(1.0));
    CHECK(t.values[2] == doctest::Approx(2.0));
    CHECK(t.values[4] == doctest::Approx(3.0));
  }

  TEST_CASE("shape_trace: errors") {
    Rng rng(1);
    std::vector<double> constant = {2.0, 2.0, 2.0};
    std::vector<double> empty;
    CHECK_THROWS_AS(shape_trace(constant, plain(), rng), InputError);
    CHECK_THROWS_AS(shape_trace(empty, plain(), rng), InputError);
    TraceShaping bad = plain();
    bad.high = bad.low;
    std::vector<double> raw = {1.0, 2.0};
    CHECK_THROWS_AS(shape_trace(raw, bad, rng), ConfigError);
  }

  TEST_CASE("load_trace: sorts by timestamp, reports bad lines") {
    TempDir dir;
    write_file(dir.path / "t.csv", "timestamp,value\n2,3.0\n0,1.0\n1,2.0\n");
    Rng rng(1);
    auto t = load_trace(dir.path / "t.csv", plain(), rng);
    REQUIRE(t.values.size() == 3);
    CHECK(t.values[0] == doctest::Approx(1.0));
    CHECK(t.values[1] == doctest::Approx(2.0));
    CHECK(t.values[2] == doctest::Approx(3.0));

    write_file(dir.path / "bad.csv", "timestamp,value\n0,1.0\n1,oops\n");
    try {
      load_trace(dir.path / "bad.csv", plain(), rng);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }

  TEST_CASE("synthetic diurnal series round-trips through the trace loader") {
    TempDir dir;
    Rng rng(3);
    auto series = synthetic_diurnal_series(2, 144, rng);
    CHECK(series.size() == 288);
    save_series(series, 600.0, dir.path / "d.csv");
    Rng r2(1);
    auto t = load_trace(dir.path / "d.csv", plain(), r2);
    CHECK(t.values.size() == 288);
  }

  TEST_CASE("discretized gaussian: degenerate spread concentrates") {
    auto d = discretized_gaussian(default_support(), 3.0, 1e-3);
    CHECK(d.pmf()[2] >= 0.99);
    check_distribution(d);
  }

  TEST_CASE("randomized distributions: valid, reproducible, cover every level") {
    Rng rng(11);
    std::vector<double> best(5, 0.0);
    for (int i = 0; i < 10000; ++i) {
      auto d = randomize_dti_distribution(rng);
      if (i < 200) check_distribution(d);
      for (std::size_t k = 0; k < 5; ++k) best[k] = std::max(best[k], d.pmf()[k]);
    }
    for (double b : best) CHECK(b >= 0.5);
    Rng a(5), b(5);
    CHECK(randomize_dti_distribution(a).pmf() == randomize_dti_distribution(b).pmf());
  }

  TEST_CASE("sample_dti_traffic: point mass, uniform frequencies, determinism") {
    Rng rng(2);
    auto pm = TrafficDistribution::point_mass(default_support(), 4.0);
    for (double v : sample_dti_traffic(pm, 60, rng)) CHECK(v == 4.0);

    auto u = TrafficDistribution::uniform(default_support());
    std::vector<double> counts(5, 0.0);
    const int reps = 10000;
    for (int r = 0; r < reps; ++r) {
      for (double v : sample_dti_traffic(u, 60, rng)) counts[static_cast<std::size_t>(v) - 1] += 1.0;
    }
    for (double c : counts) CHECK(std::abs(c / (60.0 * reps) - 0.2) <= 0.02);

    Rng a(8), b(8);
    CHECK(sample_dti_traffic(u, 60, a) == sample_dti_traffic(u, 60, b));
  }

  TEST_CASE("predict_cdf: perfect, noisy(0), random") {
    PredictorConfig perfect;
    Rng rng(1);
    std::vector<double> level2(60, 2.0);
    auto d = predict_cdf(level2, perfect, rng);
    CHECK(d.pmf() == std::vector<double>{0, 1, 0, 0, 0});

    PredictorConfig noisy0;
    noisy0.mode = PredictorConfig::Mode::kNoisy;
    std::vector<double> mixed = {1.2, 2.6, 3.1, 4.9, 2.2, 2.0};
    CHECK(predict_cdf(mixed, noisy0, rng).pmf() == predict_cdf(mixed, perfect, rng).pmf());

    PredictorConfig random;
    random.mode = PredictorConfig::Mode::kRandom;
    auto uniform_prediction = predict_cdf(mixed, random, rng);
    for (double p : uniform_prediction.pmf()) CHECK(p == doctest::Approx(0.2));

    PredictorConfig noisy;
    noisy.mode = PredictorConfig::Mode::kNoisy;
    noisy.noise_sigma = 0.3;
    for (int i = 0; i < 200; ++i) check_distribution(predict_cdf(mixed, noisy, rng));
  }

  TEST_CASE("predict_cdf: zero traffic is ignored") {
    PredictorConfig perfect;
    Rng rng(1);
    std::vector<double> zeros(10, 0.0);
    CHECK(predict_cdf(zeros, perfect, rng).pmf() == std::vector<double>{1, 0, 0, 0, 0});
    std::vector<double> some = {0.0, 0.0, 3.0, 3.0};
    CHECK(predict_cdf(some, perfect, rng).pmf() == std::vector<double>{0, 0, 1, 0, 0});
  }

  TEST_CASE("perfect prediction reproduces the empirical distribution (KS)") {
    Rng rng(21);
    auto source = TrafficDistribution::from_weights(default_support(), {0.1, 0.3, 0.25, 0.05, 0.3});
    auto values = sample_dti_traffic(source, 10000, rng);
    PredictorConfig perfect;
    auto pred = predict_cdf(values, perfect, rng);
    auto resampled = sample_dti_traffic(pred, 10000, rng);
    // Two-sample KS statistic over the five support levels.
    double ks = 0.0;
    double ca = 0.0, cb = 0.0;
    for (double level : default_support()) {
      ca += static_cast<double>(std::count(values.begin(), values.end(), level)) / 1e4;
      cb += static_cast<double>(std::count(resampled.begin(), resampled.end(), level)) / 1e4;
      ks = std::max(ks, std::abs(ca - cb));
    }
    CHECK(ks < 0.05);
  }

  TEST_CASE("peak_of") {
    std::vector<double> t = {2.0, 3.0, 2.5};
    CHECK(peak_of(t) == 3.0);
    CHECK(peak_of(TrafficDistribution::point_mass(default_support(), 4.0)) == 4.0);
    CHECK(peak_of(TrafficDistribution::uniform(default_support())) == 5.0);
    std::vector<double> empty;
    CHECK_THROWS_AS(peak_of(empty), InputError);
  }

  TEST_CASE("distribution construction errors") {
    CHECK_THROWS_AS(TrafficDistribution::from_weights({1, 2}, {0, 0}), InputError);
    CHECK_THROWS_AS(TrafficDistribution::from_weights({1, 2}, {1, -1}), InputError);
    CHECK_THROWS_AS(TrafficDistribution::from_weights({2, 1}, {1, 1}), InputError);
  }
}
