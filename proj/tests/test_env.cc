#include <doctest.h>

#include <cmath>
#include <memory>

#include "slicer/env.h"
#include "slicer/error.h"

using namespace slicer;

namespace {

// mu = 20 r / x with a fixed sigma on the default grid.
std::shared_ptr<const QoSModel> ratio_model(double sigma) {
  std::vector<QoSGridCell> cells;
  for (double x : default_traffic_axis()) {
    for (double r : default_bandwidth_axis()) cells.push_back({x, r, 20.0 * r / x, sigma, 1});
  }
  return std::make_shared<const QoSModel>(default_traffic_axis(), default_bandwidth_axis(), cells);
}

TrafficSource fixed_trace(std::vector<double> values) {
  auto t = std::make_shared<TrafficTrace>();
  t->values = std::move(values);
  return std::shared_ptr<const TrafficTrace>(t);
}

EpisodeConfig small_episode(std::size_t dtis, std::size_t ttis, NetworkCondition c) {
  EpisodeConfig e;
  e.dti_count = dtis;
  e.ttis_per_dti = ttis;
  e.condition = c;
  return e;
}

}  // namespace

TEST_SUITE("env") {
  TEST_CASE("quantize_action: endpoints, midpoint tie, clamping") {
    const auto grid = default_bandwidth_axis();
    CHECK(quantize_action(-1.0, grid) == doctest::Approx(0.1));
    CHECK(quantize_action(1.0, grid) == doctest::Approx(0.8));
    CHECK(quantize_action(0.0, grid) == doctest::Approx(0.5));
    CHECK(quantize_action(-7.0, grid) == doctest::Approx(0.1));
    CHECK(quantize_action(7.0, grid) == doctest::Approx(0.8));
    CHECK_THROWS_AS(quantize_action(std::nan(""), grid), InputError);
    for (double r : grid) CHECK(quantize_action(fraction_to_raw(r, grid), grid) == doctest::Approx(r));
  }

  TEST_CASE("quantized allocation always lies on the grid") {
    const auto grid = default_bandwidth_axis();
    for (int i = -100; i <= 100; ++i) {
      double b = quantize_action(i / 100.0, grid);
      bool on_grid = false;
      for (double g : grid) on_grid = on_grid || b == g;
      CHECK(on_grid);
    }
  }

  TEST_CASE("compute_beta") {
    EpisodeLedger empty;
    CHECK(compute_beta(empty) == 0.0);
    EpisodeLedger l;
    std::vector<double> x = {1, 2, 3, 0};
    std::vector<std::uint8_t> deg = {1, 0, 1, 1};
    CHECK(l.record(x, deg) == doctest::Approx(4.0));
    CHECK(compute_beta(l) == doctest::Approx(4.0 / 6.0));
  }

  TEST_CASE("reset observation is the predicted cdf plus zero beta") {
    SliceEnv env(ratio_model(0.0), small_episode(2, 3, NetworkCondition::deterministic(0)),
                 fixed_trace({3, 3, 3, 5, 5, 5}), PredictorConfig{});
    Rng rng(1);
    auto obs = env.reset(rng);
    CHECK(obs.traffic_cdf == std::vector<double>{0, 0, 1, 1, 1});
    CHECK(obs.beta_so_far == 0.0);
    CHECK(obs.features().size() == static_cast<Eigen::Index>(kObservationDim));
  }

  TEST_CASE("hand-computed episode: cost, reward, beta and telescoping") {
    SliceEnv env(ratio_model(0.0), small_episode(2, 3, NetworkCondition::deterministic(0)),
                 fixed_trace({1, 1, 1, 5, 5, 5}), PredictorConfig{});
    Rng rng(1);
    env.reset(rng);
    // r = 0.1 at x = 1 gives mu = 2, which counts as degraded.
    auto s0 = env.step(-1.0);
    CHECK(s0.info.bandwidth == doctest::Approx(0.1));
    CHECK(s0.cost == doctest::Approx(3.0 / 18.0));
    CHECK(s0.reward == doctest::Approx(0.9));
    CHECK(s0.info.beta == doctest::Approx(1.0));
    CHECK(s0.next_observation.beta_so_far == doctest::Approx(1.0));
    CHECK(s0.next_observation.traffic_cdf == std::vector<double>{0, 0, 0, 0, 1});
    CHECK_FALSE(s0.done);

    auto s1 = env.step(1.0);
    CHECK(s1.cost == 0.0);
    CHECK(s1.reward == doctest::Approx(0.2));
    CHECK(s1.done);
    CHECK(s1.info.beta == doctest::Approx(3.0 / 18.0));
    CHECK(s1.next_observation.beta_so_far == doctest::Approx(3.0 / 18.0));
    CHECK(std::abs(s0.cost + s1.cost - s1.info.beta) <= 1e-12);

    CHECK_THROWS_AS(env.step(0.0), LifecycleError);
  }

  TEST_CASE("zero-traffic TTIs are neither counted nor degraded") {
    SliceEnv env(ratio_model(0.0), small_episode(1, 4, NetworkCondition::deterministic(0)),
                 fixed_trace({0, 5, 0, 5}), PredictorConfig{});
    Rng rng(1);
    env.reset(rng);
    auto s = env.step(-1.0);
    CHECK(s.info.degraded == std::vector<std::uint8_t>{0, 1, 0, 1});
    CHECK(s.info.beta == doctest::Approx(1.0));
    CHECK(env.ledger().total_traffic == doctest::Approx(10.0));
  }

  TEST_CASE("step before reset fails") {
    SliceEnv env(ratio_model(0.0), small_episode(1, 3, NetworkCondition::stochastic()),
                 fixed_trace({1, 2, 3}), PredictorConfig{});
    CHECK_THROWS_AS(env.step(0.0), LifecycleError);
  }

  TEST_CASE("construction errors") {
    CHECK_THROWS_AS(SliceEnv(nullptr, EpisodeConfig{}, RandomizationConfig{}, PredictorConfig{}), ConfigError);
    CHECK_THROWS_AS(SliceEnv(ratio_model(0.0), small_episode(2, 3, NetworkCondition::stochastic()),
                             fixed_trace({1, 2, 3}), PredictorConfig{}),
                    ConfigError);
    EpisodeConfig bad;
    bad.beta_thresh = 1.5;
    CHECK_THROWS_AS(SliceEnv(ratio_model(0.0), bad, RandomizationConfig{}, PredictorConfig{}), ConfigError);
    bad = EpisodeConfig{};
    bad.action_grid = {0.5, 0.2};
    CHECK_THROWS_AS(SliceEnv(ratio_model(0.0), bad, RandomizationConfig{}, PredictorConfig{}), ConfigError);
  }

  TEST_CASE("costs telescope to the final beta on random episodes") {
    Rng rng(17);
    for (int mode = 0; mode < 2; ++mode) {
      auto cond = mode == 0 ? NetworkCondition::stochastic() : NetworkCondition::deterministic(-1.0);
      SliceEnv env(ratio_model(0.4), small_episode(10, 60, cond), RandomizationConfig{}, PredictorConfig{});
      for (int ep = 0; ep < 50; ++ep) {
        env.reset(rng);
        double sum = 0.0;
        StepOutcome s;
        while (!env.done()) {
          s = env.step(uniform(rng, -1.0, 1.0));
          sum += s.cost;
          CHECK(s.cost >= 0.0);
          CHECK(s.info.beta >= 0.0);
          CHECK(s.info.beta <= 1.0);
        }
        CHECK(std::abs(sum - s.info.beta) <= 1e-9);
      }
    }
  }

  TEST_CASE("zero-sigma model: stochastic equals deterministic(0)") {
    auto model = ratio_model(0.0);
    SliceEnv a(model, small_episode(10, 60, NetworkCondition::stochastic()), RandomizationConfig{}, PredictorConfig{});
    SliceEnv b(model, small_episode(10, 60, NetworkCondition::deterministic(0.0)), RandomizationConfig{},
               PredictorConfig{});
    Rng ra(3), rb(3);
    a.reset(ra);
    b.reset(rb);
    Rng actions(9);
    while (!a.done()) {
      double act = uniform(actions, -1.0, 1.0);
      auto sa = a.step(act);
      auto sb = b.step(act);
      CHECK(sa.info.qos == sb.info.qos);
      CHECK(sa.cost == sb.cost);
    }
  }

  TEST_CASE("same seed, same episode") {
    auto model = ratio_model(0.5);
    SliceEnv a(model, small_episode(10, 60, NetworkCondition::stochastic()), RandomizationConfig{}, PredictorConfig{});
    SliceEnv b = a;
    Rng ra(5), rb(5);
    CHECK(a.reset(ra).traffic_cdf == b.reset(rb).traffic_cdf);
    while (!a.done()) {
      auto sa = a.step(0.3);
      auto sb = b.step(0.3);
      CHECK(sa.info.qos == sb.info.qos);
      CHECK(sa.next_observation.traffic_cdf == sb.next_observation.traffic_cdf);
    }
  }

  TEST_CASE("condition description and log line") {
    CHECK(NetworkCondition::stochastic().describe() == "stochastic");
    CHECK(NetworkCondition::deterministic(-1.5).describe() == "deterministic(-1.5)");
    StepOutcome o;
    o.info.bandwidth = 0.5;
    CHECK(episode_log_line(o).find("\"bandwidth\":0.5") != std::string::npos);
  }
}
