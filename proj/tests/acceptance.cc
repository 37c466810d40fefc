// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance [--out DIR] [--only 1,2,...]
//
// Criteria 7-10 train agents from configs/ and take tens of minutes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradient_checks.h"
#include "slicer/agent.h"
#include "slicer/env.h"
#include "slicer/harness.h"
#include "slicer/network_model.h"
#include "slicer/report.h"
#include "slicer/risk.h"

#ifndef SLICER_SOURCE_DIR
#define SLICER_SOURCE_DIR "."
#endif

using namespace slicer;
namespace fs = std::filesystem;

namespace {

namespace tol {
constexpr double kTelescoping = 1e-9;
constexpr double kBetaOracle = 1e-12;
constexpr double kCvarRelative = 0.01;
constexpr double kGradientRelative = 1e-4;
constexpr double kCalibration = 1e-6;
constexpr double kPredAllocBetaPct = 2.5;
constexpr double kGeneralizationBetaPct = 12.0;
constexpr double kAvgOffsetBetaPct = 10.0;
constexpr double kTrainBudgetSeconds = 2.0 * 3600.0;
constexpr double kMonotonePp = 1.0;
constexpr double kSweepBetaPct = 12.0;
constexpr double kSweepWorstBetaPct = 10.0;
constexpr double kRandomPredictorBetaPct = 25.0;
constexpr double kFinetuneBetaPct = 10.0;
constexpr double kFinetuneOffsetBetaPct = 12.0;
constexpr double kTerminalCost = 1e-9;
}  // namespace tol

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

ExperimentConfig load_named(const std::string& name) {
  return ExperimentConfig::load(fs::path(SLICER_SOURCE_DIR) / "configs" / name);
}

// ---------------------------------------------------------------- 1 and 2

struct RandomEpisode {
  std::vector<double> step_costs;
  std::vector<double> traffic;
  std::vector<double> qos;
  double final_beta = 0.0;
};

RandomEpisode random_episode(SliceEnv& env, Rng& rng) {
  RandomEpisode ep;
  env.reset(rng);
  while (!env.done()) {
    StepOutcome s = env.step(uniform(rng, -1.0, 1.0));
    ep.step_costs.push_back(s.cost);
    ep.traffic.insert(ep.traffic.end(), s.info.traffic.begin(), s.info.traffic.end());
    ep.qos.insert(ep.qos.end(), s.info.qos.begin(), s.info.qos.end());
    ep.final_beta = s.info.beta;
  }
  return ep;
}

// 1000 episodes, alternating stochastic and random deterministic conditions.
template <typename F>
void for_random_episodes(std::uint64_t seed, F&& visit) {
  auto model = load_model_or_synthetic("");
  Rng rng(seed);
  for (int i = 0; i < 1000; ++i) {
    EpisodeConfig episode;
    episode.condition = i % 2 == 0 ? NetworkCondition::stochastic()
                                   : NetworkCondition::deterministic(uniform(rng, -3.0, 3.0));
    RandomizationConfig dr;
    dr.per_dti = i % 4 < 2;
    SliceEnv env(model, episode, dr, PredictorConfig{});
    visit(random_episode(env, rng), episode.q_thresh);
  }
}

Outcome criterion_telescoping() {
  const auto start = Clock::now();
  double worst = 0.0;
  for_random_episodes(101, [&](const RandomEpisode& ep, double) {
    double sum = std::accumulate(ep.step_costs.begin(), ep.step_costs.end(), 0.0);
    worst = std::max(worst, std::abs(sum - ep.final_beta));
  });
  const double t = seconds_since(start);
  return {worst <= tol::kTelescoping && t < 60.0,
          fmt("max |sum cost - beta| = %.3g over 1000 episodes (tol %.0e), %.1f s (limit 60 s)", worst,
              tol::kTelescoping, t)};
}

Outcome criterion_beta_oracle() {
  double worst = 0.0;
  for_random_episodes(202, [&](const RandomEpisode& ep, double q_thresh) {
    double bad = 0.0;
    double total = 0.0;
    for (std::size_t n = 0; n < ep.traffic.size(); ++n) {
      if (ep.traffic[n] <= 0.0) continue;
      total += ep.traffic[n];
      if (ep.qos[n] <= q_thresh) bad += ep.traffic[n];
    }
    const double oracle = total > 0.0 ? bad / total : 0.0;
    worst = std::max(worst, std::abs(oracle - ep.final_beta));
  });
  return {worst <= tol::kBetaOracle,
          fmt("max |beta - brute force| = %.3g over 1000 episodes (tol %.0e)", worst, tol::kBetaOracle)};
}

// ---------------------------------------------------------------- 3

Outcome criterion_cvar() {
  const auto start = Clock::now();
  Rng rng(303);
  const double mean = 0.3;
  const double sd = 0.7;
  std::vector<double> draws(1000000);
  for (double& v : draws) v = mean + sd * standard_normal(rng);
  std::sort(draws.begin(), draws.end(), std::greater<>());
  double worst_rel = 0.0;
  for (double alpha : {0.5, 0.25, 0.1}) {
    const auto k = static_cast<std::size_t>(alpha * static_cast<double>(draws.size()));
    const double mc = std::accumulate(draws.begin(), draws.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
                      static_cast<double>(k);
    worst_rel = std::max(worst_rel, std::abs(cvar_gaussian(mean, sd * sd, alpha) - mc) / std::abs(mc));
  }
  bool monotone = true;
  for (int i = 1; i < 100; ++i) {
    const double a_hi = 1.0 - 0.0099 * (i - 1);
    const double a_lo = 1.0 - 0.0099 * i;
    monotone = monotone && cvar_gaussian(mean, 0.5, a_lo) >= cvar_gaussian(mean, 0.5, a_hi);
    const double v_lo = 0.02 * (i - 1);
    const double v_hi = 0.02 * i;
    monotone = monotone && cvar_gaussian(mean, v_hi, 0.1) >= cvar_gaussian(mean, v_lo, 0.1);
  }
  const double t = seconds_since(start);
  return {worst_rel <= tol::kCvarRelative && monotone && t < 60.0,
          fmt("max relative error vs 1e6-sample tail means %.4f (tol %.2f), monotone %s, %.1f s", worst_rel,
              tol::kCvarRelative, monotone ? "yes" : "no", t)};
}

// ---------------------------------------------------------------- 4

Outcome criterion_gradients() {
  double worst = 0.0;
  std::string worst_name;
  std::size_t checks = 0;
  for (std::uint64_t seed : {11u, 12u}) {
    for (const auto& r : gradcheck::run_all(seed)) {
      ++checks;
      if (!(r.relative_error <= worst)) {
        worst = r.relative_error;
        worst_name = r.name;
      }
    }
  }
  return {worst <= tol::kGradientRelative,
          fmt("%zu gradient checks, worst %.3g (%s), tol %.0e", checks, worst, worst_name.c_str(),
              tol::kGradientRelative)};
}

// ---------------------------------------------------------------- 5

Outcome criterion_calibration() {
  auto model = load_model_or_synthetic("");
  const double q = deterministic_qos(*model, 5.0, 0.8, -2.0);
  return {std::abs(q - 2.0) <= tol::kCalibration,
          fmt("deterministic QoS at (5, 0.8, d=-2) = %.9f (target 2, tol %.0e)", q, tol::kCalibration)};
}

// ---------------------------------------------------------------- 6

Outcome criterion_pred_alloc() {
  const auto start = Clock::now();
  ExperimentConfig config = load_named("pred_alloc.cfg");
  auto model = load_model_or_synthetic(config.model_path);
  Rng rng(config.seed);
  auto agent = make_agent(config, model, rng);
  std::string detail;
  bool pass = true;
  for (double off : {0.0, 2.0}) {
    auto spec = make_eval_spec(config, model, off, NetworkCondition::stochastic(), "pred-alloc");
    spec.episodes = 100;
    MetricsRecord m = evaluate(*agent, spec);
    pass = pass && m.mean_qos_degradation_pct <= tol::kPredAllocBetaPct;
    detail += fmt("offset %.0f: beta %.2f%% bw %.2f%%; ", off, m.mean_qos_degradation_pct, m.mean_bandwidth_pct);
  }
  const double t = seconds_since(start);
  pass = pass && t < 300.0;
  return {pass, detail + fmt("limit %.1f%%, %.1f s", tol::kPredAllocBetaPct, t)};
}

// ---------------------------------------------------------------- 7-10

struct Trained {
  ExperimentConfig config;
  TrainResult result;
  double seconds = 0.0;
};

Trained train_named(const std::string& name, const fs::path& out) {
  Trained t;
  t.config = load_named(name);
  const auto start = Clock::now();
  t.result = train(t.config);
  t.seconds = seconds_since(start);
  const std::string stem = fs::path(name).stem().string();
  save_checkpoint(t.result.best, out / "checkpoints" / (stem + "_best.json"));
  save_checkpoint(t.result.last, out / "checkpoints" / (stem + "_last.json"));
  std::printf("  trained %s: %zu epochs in %.0f s, best epoch %zu%s\n", to_string(t.config.agent).c_str(),
              t.result.curve.size(), t.seconds, t.result.best_epoch,
              t.result.constraint_met ? "" : " (constraint never met)");
  std::fflush(stdout);
  return t;
}

MetricsRecord eval_on(const Agent& agent, const ExperimentConfig& config, double offset, NetworkCondition cond,
                      const std::string& label) {
  auto spec = make_eval_spec(config, load_model_or_synthetic(config.model_path), offset, cond, label);
  spec.episodes = 100;
  return evaluate(agent, spec);
}

struct Context {
  fs::path out;
  Report report;
  std::unique_ptr<Trained> wcsac;

  Trained& wcsac_run() {
    if (!wcsac) {
      wcsac = std::make_unique<Trained>(train_named("wcsac_dr.cfg", out));
      report.curves.push_back({"wcsac", wcsac->result.curve, true});
    }
    return *wcsac;
  }
};

Outcome criterion_generalization(Context& ctx) {
  Trained ppo = train_named("ppo_trace.cfg", ctx.out);
  Trained cpo = train_named("cpo_trace.cfg", ctx.out);
  Trained& wcsac = ctx.wcsac_run();
  ctx.report.curves.push_back({"ppo", ppo.result.curve, false});
  ctx.report.curves.push_back({"cpo", cpo.result.curve, false});

  ExperimentConfig pa_config = load_named("pred_alloc.cfg");
  auto model = load_model_or_synthetic(pa_config.model_path);
  Rng rng(pa_config.seed);
  auto pred_alloc = make_agent(pa_config, model, rng);

  auto row = [&](const std::string& name, const Agent& agent, const ExperimentConfig& config, double offset) {
    MetricsRecord m = eval_on(agent, config, offset, NetworkCondition::stochastic(),
                              name + (offset == 0.0 ? " original" : " offset"));
    ctx.report.rows.push_back({name, offset == 0.0 ? "original" : "offset", m});
    std::printf("  %-10s %-8s bandwidth %6.2f%%  beta %6.2f%%\n", name.c_str(),
                offset == 0.0 ? "original" : "offset", m.mean_bandwidth_pct, m.mean_qos_degradation_pct);
    return m;
  };
  auto ppo_agent = restore_agent(ppo.result.best);
  auto cpo_agent = restore_agent(cpo.result.best);
  auto wcsac_agent = restore_agent(wcsac.result.best);
  row("ppo", *ppo_agent, ppo.config, 0.0);
  MetricsRecord ppo_off = row("ppo", *ppo_agent, ppo.config, 2.0);
  row("cpo", *cpo_agent, cpo.config, 0.0);
  MetricsRecord cpo_off = row("cpo", *cpo_agent, cpo.config, 2.0);
  MetricsRecord w_orig = row("wcsac", *wcsac_agent, wcsac.config, 0.0);
  MetricsRecord w_off = row("wcsac", *wcsac_agent, wcsac.config, 2.0);
  MetricsRecord pa_orig = row("pred-alloc", *pred_alloc, pa_config, 0.0);
  row("pred-alloc", *pred_alloc, pa_config, 2.0);

  const double slowest = std::max({ppo.seconds, cpo.seconds, wcsac.seconds});
  const bool pass = ppo_off.mean_qos_degradation_pct > tol::kAvgOffsetBetaPct &&
                    cpo_off.mean_qos_degradation_pct > tol::kAvgOffsetBetaPct &&
                    w_orig.mean_qos_degradation_pct <= tol::kGeneralizationBetaPct &&
                    w_off.mean_qos_degradation_pct <= tol::kGeneralizationBetaPct &&
                    w_orig.mean_bandwidth_pct <= pa_orig.mean_bandwidth_pct &&
                    slowest <= tol::kTrainBudgetSeconds;
  return {pass, fmt("offset beta ppo %.2f%% cpo %.2f%% (> %.0f%%); wcsac beta %.2f%%/%.2f%% (<= %.0f%%); "
                    "wcsac bw %.2f%% vs pred-alloc %.2f%%; slowest training %.0f s",
                    ppo_off.mean_qos_degradation_pct, cpo_off.mean_qos_degradation_pct, tol::kAvgOffsetBetaPct,
                    w_orig.mean_qos_degradation_pct, w_off.mean_qos_degradation_pct,
                    tol::kGeneralizationBetaPct, w_orig.mean_bandwidth_pct, pa_orig.mean_bandwidth_pct,
                    slowest)};
}

Outcome criterion_condition_sweep(Context& ctx) {
  Trained& wcsac = ctx.wcsac_run();
  auto agent = restore_agent(wcsac.result.best);
  const auto start = Clock::now();
  auto base = make_eval_spec(wcsac.config, load_model_or_synthetic(wcsac.config.model_path), 0.0,
                             NetworkCondition::stochastic(), "wcsac");
  base.episodes = 100;
  std::vector<double> d_values;
  for (int i = -6; i <= 6; ++i) d_values.push_back(0.5 * i);
  SweepResult s = sweep_conditions(*agent, base, d_values);
  const double t = seconds_since(start);
  ctx.report.sweeps.push_back({"wcsac_condition", s});

  bool monotone = true;
  bool within = true;
  std::string curve;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double b = s.records[i].mean_qos_degradation_pct;
    curve += fmt("%s%.2f", i ? " " : "", b);
    if (i > 0) monotone = monotone && b <= s.records[i - 1].mean_qos_degradation_pct + tol::kMonotonePp;
    if (s.values[i] >= -1.5) within = within && b <= tol::kSweepBetaPct;
  }
  const double worst = s.records.front().mean_qos_degradation_pct;
  const bool pass = monotone && within && worst > tol::kSweepWorstBetaPct && t < 900.0;
  return {pass, fmt("beta(d=-3..3) = [%s]%%; non-increasing %s; d >= -1.5 within %.0f%% %s; beta(-3) %.2f%% "
                    "(> %.0f%%); %.0f s",
                    curve.c_str(), monotone ? "yes" : "no", tol::kSweepBetaPct, within ? "yes" : "no", worst,
                    tol::kSweepWorstBetaPct, t)};
}

Outcome criterion_noise_sweep(Context& ctx) {
  Trained& wcsac = ctx.wcsac_run();
  auto agent = restore_agent(wcsac.result.best);
  const auto start = Clock::now();
  auto base = make_eval_spec(wcsac.config, load_model_or_synthetic(wcsac.config.model_path), 0.0,
                             NetworkCondition::stochastic(), "wcsac");
  base.episodes = 100;
  SweepResult s = sweep_noise(*agent, base, wcsac.config.sweep_noise);
  const double t = seconds_since(start);
  ctx.report.sweeps.push_back({"wcsac_noise", s});

  bool monotone = true;
  std::string curve;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double b = s.records[i].mean_qos_degradation_pct;
    curve += fmt("%s%.2f", i ? " " : "", b);
    if (i > 0) monotone = monotone && b >= s.records[i - 1].mean_qos_degradation_pct - tol::kMonotonePp;
  }
  const double random_beta = s.reference.mean_qos_degradation_pct;
  const bool pass = monotone && random_beta <= tol::kRandomPredictorBetaPct && t < 900.0;
  return {pass, fmt("beta(noise) = [%s]%%; non-decreasing %s; random predictor %.2f%% (<= %.0f%%); %.0f s",
                    curve.c_str(), monotone ? "yes" : "no", random_beta, tol::kRandomPredictorBetaPct, t)};
}

Outcome criterion_finetune(Context& ctx) {
  Trained& wcsac = ctx.wcsac_run();
  const ExperimentConfig& config = wcsac.config;
  auto model = load_model_or_synthetic(config.model_path);
  const NetworkCondition cond = NetworkCondition::deterministic(config.finetune_d);

  TrainSetup setup;
  setup.model = model;
  setup.episode = config.episode;
  setup.episode.condition = cond;
  setup.source = make_traffic_source(config.eval_traffic(0.0));
  setup.predictor = config.predictor;
  setup.epochs = config.finetune_epochs;
  setup.episodes_per_epoch = config.finetune_episodes_per_epoch;
  setup.selection_episodes = config.selection_episodes;
  setup.selection_seed = derive_rng(config.seed, 0xf17e)();
  setup.beta_thresh = config.episode.beta_thresh;
  auto eval = make_eval_spec(config, model, 0.0, cond, "wcsac " + cond.describe());
  eval.episodes = 100;

  const auto start = Clock::now();
  Rng rng(config.seed);
  FinetuneResult r = finetune(wcsac.result.best, setup, eval, config.finetune_risk_alpha,
                              config.finetune_lr_scale, rng);
  const double t = seconds_since(start);
  save_checkpoint(r.training.best, ctx.out / "checkpoints" / "wcsac_finetuned.json");
  ctx.report.rows.push_back({"wcsac", "before-finetune", r.before});
  ctx.report.rows.push_back({"wcsac", "after-finetune", r.after});
  ctx.report.curves.push_back({"wcsac_finetune", r.training.curve, false});

  auto tuned = restore_agent(r.training.best);
  MetricsRecord off = eval_on(*tuned, config, 2.0, NetworkCondition::stochastic(), "wcsac finetuned offset");
  ctx.report.rows.push_back({"wcsac", "finetuned-offset", off});

  const bool pass = r.after.mean_bandwidth_pct < r.before.mean_bandwidth_pct &&
                    r.after.mean_qos_degradation_pct <= tol::kFinetuneBetaPct &&
                    off.mean_qos_degradation_pct <= tol::kFinetuneOffsetBetaPct && t <= 3600.0;
  return {pass, fmt("%s: bw %.2f%% -> %.2f%%, beta %.2f%% -> %.2f%% (<= %.0f%%); offset stochastic beta %.2f%% "
                    "(<= %.0f%%) bw %.2f%%; best epoch %zu; %.0f s",
                    cond.describe().c_str(), r.before.mean_bandwidth_pct, r.after.mean_bandwidth_pct,
                    r.before.mean_qos_degradation_pct, r.after.mean_qos_degradation_pct, tol::kFinetuneBetaPct,
                    off.mean_qos_degradation_pct, tol::kFinetuneOffsetBetaPct, off.mean_bandwidth_pct,
                    r.training.best_epoch, t)};
}

// ---------------------------------------------------------------- 11

Outcome criterion_terminal_cost() {
  double err = 0.0;
  err = std::max(err, std::abs(wc_terminal_cost(0.2, 0.1, 10.0) - 10.0 * std::expm1(0.1)));
  err = std::max(err, std::abs(wc_terminal_cost(0.2, 0.1, 10.0) - 1.0517091807564771));
  err = std::max(err, std::abs(wc_terminal_cost(0.1, 0.1, 10.0)));
  err = std::max(err, std::abs(wc_terminal_cost(0.05, 0.1, 10.0)));
  err = std::max(err, std::abs(wc_terminal_cost(0.0, 0.1, 10.0)));
  bool convex = true;
  const double h = 0.01;
  for (int i = 1; i < 100; ++i) {
    const double b = h * i;
    const double second = wc_terminal_cost(b + h, 0.1, 10.0) - 2.0 * wc_terminal_cost(b, 0.1, 10.0) +
                          wc_terminal_cost(b - h, 0.1, 10.0);
    convex = convex && second >= -1e-12;
  }
  return {err <= tol::kTerminalCost && convex,
          fmt("gamma=10, excess=0.1 -> %.10f; max arithmetic/boundary error %.3g (tol %.0e); convex %s",
              wc_terminal_cost(0.2, 0.1, 10.0), err, tol::kTerminalCost, convex ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance criteria");
  std::string out_dir = "acceptance_out";
  std::vector<int> only;
  app.add_option("--out", out_dir, "Checkpoints and report output directory");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  Context ctx;
  ctx.out = out_dir;
  fs::create_directories(ctx.out / "checkpoints");

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "cost telescoping", criterion_telescoping},
      {2, "beta oracle equivalence", criterion_beta_oracle},
      {3, "gaussian cvar", criterion_cvar},
      {4, "gradient correctness", criterion_gradients},
      {5, "calibration anchor", criterion_calibration},
      {6, "pred-alloc bound", criterion_pred_alloc},
      {7, "generalization", [&] { return criterion_generalization(ctx); }},
      {8, "condition sweep", [&] { return criterion_condition_sweep(ctx); }},
      {9, "noise sweep", [&] { return criterion_noise_sweep(ctx); }},
      {10, "fine-tuning", [&] { return criterion_finetune(ctx); }},
      {11, "wc-cpo terminal cost", criterion_terminal_cost},
  };

  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  if (!ctx.report.rows.empty() || !ctx.report.sweeps.empty()) emit_report(ctx.report, ctx.out);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
