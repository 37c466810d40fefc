#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "slicer/error.h"
#include "slicer/network_model.h"
#include "test_util.h"

using namespace slicer;

namespace {

// Independent oracle for the calibration rate: plain bisection on
// f(l) = 20 (1 - exp(-0.16 l)) (1 - 0.3) - 0.1 - 2.
double oracle_lambda() {
  auto f = [](double l) { return 20.0 * (1.0 - std::exp(-0.16 * l)) * 0.7 - 0.1 - 2.0; };
  double lo = 1e-6, hi = 100.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

QoSModel two_by_two() {
  std::vector<QoSGridCell> cells = {
      {1.0, 0.1, 2.0, 0.5, 3}, {1.0, 0.2, 6.0, 1.5, 3}, {2.0, 0.1, 4.0, 1.0, 3}, {2.0, 0.2, 8.0, 2.0, 3}};
  return QoSModel({1.0, 2.0}, {0.1, 0.2}, cells);
}

}  // namespace

TEST_SUITE("network_model") {
  TEST_CASE("fit: zero-variance node") {
    std::vector<QoSSample> s = {{1, 0.1, 3.0}, {1, 0.1, 3.0}, {1, 0.1, 3.0}};
    QoSModel m = fit_from_samples(s, {1.0}, {0.1});
    CHECK(m.cell(0, 0).mu == 3.0);
    CHECK(m.cell(0, 0).sigma == 0.0);
    CHECK(m.cell(0, 0).count == 3);
  }

  TEST_CASE("fit: mean and unbiased std by hand") {
    std::vector<QoSSample> s = {{2, 0.4, 4.0}, {2, 0.4, 6.0}};
    QoSModel m = fit_from_samples(s, {2.0}, {0.4});
    CHECK(m.cell(0, 0).mu == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(m.cell(0, 0).sigma == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  }

  TEST_CASE("fit: full grid has 5x8 cells") {
    Rng rng(3);
    auto samples = generate_synthetic_grid(default_synthetic_truth(), 3, rng, default_traffic_axis(),
                                           default_bandwidth_axis());
    QoSModel m = fit_from_samples(samples, default_traffic_axis(), default_bandwidth_axis());
    CHECK(m.cells().size() == 40);
    CHECK(m.traffic_axis().size() == 5);
    CHECK(m.bandwidth_axis().size() == 8);
  }

  TEST_CASE("fit: errors") {
    std::vector<QoSSample> one = {{1, 0.1, 3.0}, {1, 0.2, 3.0}, {1, 0.2, 4.0}};
    CHECK_THROWS_AS(fit_from_samples(one, {1.0}, {0.1, 0.2}), FitError);
    try {
      fit_from_samples(one, {1.0}, {0.1, 0.2});
    } catch (const FitError& e) {
      CHECK(std::string(e.what()).find("bandwidth=0.1") != std::string::npos);
    }
    std::vector<QoSSample> off = {{1, 0.15, 3.0}, {1, 0.1, 3.0}, {1, 0.1, 3.0}};
    CHECK_THROWS_AS(fit_from_samples(off, {1.0}, {0.1}), InputError);
  }

  TEST_CASE("fit: sigma-free samples recover the truth") {
    SyntheticTruthConfig truth = default_synthetic_truth();
    truth.rho = 0.0;
    truth.sigma0 = 0.0;
    truth.anchor_magnitude = 0.0;
    truth = calibrate(truth);
    Rng rng(5);
    auto samples = generate_synthetic_grid(truth, 2, rng, default_traffic_axis(), default_bandwidth_axis());
    QoSModel m = fit_from_samples(samples, default_traffic_axis(), default_bandwidth_axis());
    for (const auto& c : m.cells()) CHECK(std::abs(c.mu - truth.mean(c.traffic, c.bandwidth)) <= 1e-9);
  }

  TEST_CASE("model construction validates axes and cells") {
    CHECK_THROWS_AS(QoSModel({2.0, 1.0}, {0.1}, {{2, 0.1, 1, 0, 1}, {1, 0.1, 1, 0, 1}}), InputError);
    CHECK_THROWS_AS(QoSModel({1.0}, {0.1}, {}), InputError);
    CHECK_THROWS_AS(QoSModel({1.0}, {0.1}, {{1, 0.1, 1, -1, 1}}), InputError);
  }

  TEST_CASE("predict: exact at nodes, midpoint, clamping") {
    QoSModel m = two_by_two();
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        const auto& c = m.cell(i, j);
        auto p = m.predict(c.traffic, c.bandwidth);
        CHECK(p.mu == c.mu);
        CHECK(p.sigma == c.sigma);
      }
    }
    CHECK(m.predict(1.5, 0.1).mu == doctest::Approx(3.0));
    auto a = m.predict(6.0, 0.3);
    auto b = m.predict(2.0, 0.2);
    CHECK(a.mu == b.mu);
    CHECK(a.sigma == b.sigma);
    CHECK(m.predict(0.0, 0.0).mu == m.cell(0, 0).mu);
  }

  TEST_CASE("predict: bilinear against a hand-computed value") {
    QoSModel m = two_by_two();
    // (1.25, 0.175): weights tx=0.25, tr=0.75.
    double expected = 0.75 * (0.25 * 2.0 + 0.75 * 6.0) + 0.25 * (0.25 * 4.0 + 0.75 * 8.0);
    CHECK(m.predict(1.25, 0.175).mu == doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("sample_qos: degenerate, Monte Carlo mean, non-negative") {
    QoSModel zero({1.0}, {0.1}, {{1, 0.1, 2.5, 0.0, 1}});
    Rng rng(1);
    CHECK(sample_qos(zero, 1.0, 0.1, rng) == 2.5);

    QoSModel m({1.0}, {0.1}, {{1, 0.1, 7.0, 1.5, 1}});
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += sample_qos(m, 1.0, 0.1, rng);
    CHECK(std::abs(sum / n - 7.0) <= 3.0 * 1.5 / std::sqrt(static_cast<double>(n)));

    QoSModel low({1.0}, {0.1}, {{1, 0.1, 0.1, 1.0, 1}});
    bool all_non_negative = true;
    for (int i = 0; i < 10000; ++i) all_non_negative = all_non_negative && sample_qos(low, 1.0, 0.1, rng) >= 0.0;
    CHECK(all_non_negative);
  }

  TEST_CASE("deterministic_qos: smaller d is worse") {
    QoSModel m({1.0}, {0.1}, {{1, 0.1, 3.0, 0.5, 1}});
    CHECK(deterministic_qos(m, 1.0, 0.1, 0.0) == 3.0);
    CHECK(deterministic_qos(m, 1.0, 0.1, -2.0) == doctest::Approx(2.0));
    CHECK(deterministic_qos(m, 1.0, 0.1, 2.0) == doctest::Approx(4.0));
    CHECK(deterministic_qos(m, 1.0, 0.1, -10.0) == 0.0);
    double prev = -1.0;
    for (double d = -3.0; d <= 3.0; d += 0.5) {
      double q = deterministic_qos(m, 1.0, 0.1, d);
      CHECK(q >= prev);
      prev = q;
    }
  }

  TEST_CASE("calibration matches an independent bisection") {
    SyntheticTruthConfig c = default_synthetic_truth();
    CHECK(c.lambda == doctest::Approx(oracle_lambda()).epsilon(1e-9));
    CHECK(std::abs(c.mean(5, 0.8) - 2.0 * c.stddev(5, 0.8) - 2.0) <= 1e-9);
    QoSModel m = synthetic_model(c);
    CHECK(std::abs(deterministic_qos(m, 5.0, 0.8, -2.0) - 2.0) <= 1e-6);
  }

  TEST_CASE("synthetic truth: zero allocation and monotonicity") {
    SyntheticTruthConfig c = default_synthetic_truth();
    for (double x : default_traffic_axis()) CHECK(c.mean(x, 0.0) == 0.0);
    auto tx = default_traffic_axis();
    auto bw = default_bandwidth_axis();
    for (std::size_t i = 0; i < tx.size(); ++i) {
      for (std::size_t j = 0; j < bw.size(); ++j) {
        if (j > 0) CHECK(c.mean(tx[i], bw[j]) > c.mean(tx[i], bw[j - 1]));
        if (i > 0) CHECK(c.mean(tx[i], bw[j]) < c.mean(tx[i - 1], bw[j]));
      }
    }
  }

  TEST_CASE("generate: uncalibrated config rejected, deterministic under seed") {
    SyntheticTruthConfig raw;
    Rng rng(1);
    CHECK_THROWS_AS(generate_synthetic_grid(raw, 2, rng, default_traffic_axis(), default_bandwidth_axis()),
                    ConfigError);
    Rng a(9), b(9);
    auto sa = generate_synthetic_grid(default_synthetic_truth(), 4, a, default_traffic_axis(), default_bandwidth_axis());
    auto sb = generate_synthetic_grid(default_synthetic_truth(), 4, b, default_traffic_axis(), default_bandwidth_axis());
    REQUIRE(sa.size() == sb.size());
    for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].qos == sb[i].qos);
  }

  TEST_CASE("model file round trip and validation") {
    TempDir dir;
    Rng rng(2);
    auto samples = generate_synthetic_grid(default_synthetic_truth(), 5, rng, default_traffic_axis(),
                                           default_bandwidth_axis());
    QoSModel m = fit_from_samples(samples, default_traffic_axis(), default_bandwidth_axis());
    save_model(m, dir.path / "model.csv");
    CHECK(load_model(dir.path / "model.csv") == m);

    save_samples(samples, dir.path / "samples.csv");
    auto back = load_samples(dir.path / "samples.csv");
    REQUIRE(back.size() == samples.size());
    CHECK(back[7].qos == samples[7].qos);

    write_file(dir.path / "empty.csv", "traffic,bandwidth,mu,sigma,count\n");
    CHECK_THROWS_WITH_AS(load_model(dir.path / "empty.csv"), doctest::Contains("empty model"), ParseError);

    write_file(dir.path / "missing.csv",
               "traffic,bandwidth,mu,sigma,count\n1,0.1,1,0.1,2\n1,0.2,2,0.1,2\n2,0.1,1,0.1,2\n");
    CHECK_THROWS_WITH_AS(load_model(dir.path / "missing.csv"), doctest::Contains("traffic=2, bandwidth=0.2"), ParseError);

    write_file(dir.path / "bad.csv", "traffic,bandwidth,mu,sigma,count\n1,0.1,abc,0.1,2\n");
    try {
      load_model(dir.path / "bad.csv");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
}
