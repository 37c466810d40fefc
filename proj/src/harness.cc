#include "slicer/harness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <type_traits>

#include "csv.h"
#include "slicer/error.h"
#include "slicer/pred_alloc.h"

namespace slicer {

namespace {

constexpr std::uint64_t kEvalStream = 0x5e1ec7;
constexpr std::uint64_t kSelectionStream = 0x5e1ec8;

std::string format_value(double v) { return csv::format_double(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(std::size_t v) { return std::to_string(v); }
std::string format_value(const std::string& v) { return v; }
std::string format_value(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + csv::format_double(v[i]);
  return out;
}
std::string format_value(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

void read_value(const KeyValueConfig& kv, const std::string& key, double& v) { v = kv.get_double(key, v); }
void read_value(const KeyValueConfig& kv, const std::string& key, bool& v) { v = kv.get_bool(key, v); }
void read_value(const KeyValueConfig& kv, const std::string& key, std::size_t& v) { v = kv.get_size(key, v); }
void read_value(const KeyValueConfig& kv, const std::string& key, std::string& v) { v = kv.get_string(key, v); }
void read_value(const KeyValueConfig& kv, const std::string& key, std::vector<double>& v) {
  v = kv.get_doubles(key, v);
}
void read_value(const KeyValueConfig& kv, const std::string& key, std::vector<int>& v) { v = kv.get_ints(key, v); }

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const KeyValueConfig&)> set;
};

template <class Ref>
Field field(std::string key, Ref ref) {
  return {key,
          [ref](const ExperimentConfig& c) { return format_value(ref(const_cast<ExperimentConfig&>(c))); },
          [ref, key](ExperimentConfig& c, const KeyValueConfig& kv) { read_value(kv, key, ref(c)); }};
}

#define SLICER_FIELD(key, member) field(key, [](ExperimentConfig& c) -> auto& { return c.member; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"agent", [](const ExperimentConfig& c) { return to_string(c.agent); },
       [](ExperimentConfig& c, const KeyValueConfig& kv) {
         c.agent = agent_kind_from_string(kv.get_string("agent", to_string(c.agent)));
       }},
      {"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
       [](ExperimentConfig& c, const KeyValueConfig& kv) {
         std::int64_t s = kv.get_int("seed", static_cast<std::int64_t>(c.seed));
         if (s < 0) throw ConfigError("seed must be >= 0");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      SLICER_FIELD("model.path", model_path),
      SLICER_FIELD("episode.dti_count", episode.dti_count),
      SLICER_FIELD("episode.ttis_per_dti", episode.ttis_per_dti),
      SLICER_FIELD("episode.q_thresh", episode.q_thresh),
      SLICER_FIELD("episode.beta_thresh", episode.beta_thresh),
      SLICER_FIELD("episode.eta", episode.eta),
      SLICER_FIELD("episode.action_grid", episode.action_grid),
      {"condition", [](const ExperimentConfig& c) {
         return c.episode.condition.mode == NetworkCondition::Mode::kStochastic ? std::string("stochastic")
                                                                                : std::string("deterministic");
       },
       [](ExperimentConfig& c, const KeyValueConfig& kv) {
         std::string m = kv.get_string("condition", "stochastic");
         if (m == "stochastic") c.episode.condition.mode = NetworkCondition::Mode::kStochastic;
         else if (m == "deterministic") c.episode.condition.mode = NetworkCondition::Mode::kDeterministic;
         else throw ConfigError("condition must be stochastic or deterministic, got '" + m + "'");
       }},
      SLICER_FIELD("condition.d", episode.condition.d),
      {"traffic", [](const ExperimentConfig& c) {
         return c.train_traffic.kind == TrafficSpec::Kind::kTrace ? std::string("trace") : std::string("randomized");
       },
       [](ExperimentConfig& c, const KeyValueConfig& kv) {
         const bool dr_default = c.agent == AgentKind::kWcsac || c.agent == AgentKind::kWcCpo;
         std::string t = kv.get_string("traffic", dr_default ? "randomized" : "trace");
         if (t == "trace") c.train_traffic.kind = TrafficSpec::Kind::kTrace;
         else if (t == "randomized") c.train_traffic.kind = TrafficSpec::Kind::kRandomized;
         else throw ConfigError("traffic must be trace or randomized, got '" + t + "'");
       }},
      SLICER_FIELD("trace.path", train_traffic.trace_path),
      SLICER_FIELD("trace.low", train_traffic.shaping.low),
      SLICER_FIELD("trace.high", train_traffic.shaping.high),
      SLICER_FIELD("trace.noise_sigma", train_traffic.shaping.noise_sigma),
      SLICER_FIELD("trace.offset", train_traffic.shaping.offset),
      SLICER_FIELD("trace.ttis_per_row", train_traffic.shaping.ttis_per_row),
      {"trace.seed", [](const ExperimentConfig& c) { return std::to_string(c.train_traffic.trace_seed); },
       [](ExperimentConfig& c, const KeyValueConfig& kv) {
         std::int64_t s = kv.get_int("trace.seed", static_cast<std::int64_t>(c.train_traffic.trace_seed));
         if (s < 0) throw ConfigError("trace.seed must be >= 0");
         c.train_traffic.trace_seed = static_cast<std::uint64_t>(s);
       }},
      SLICER_FIELD("dr.center_min", train_traffic.randomization.center_min),
      SLICER_FIELD("dr.center_max", train_traffic.randomization.center_max),
      SLICER_FIELD("dr.spread_min", train_traffic.randomization.spread_min),
      SLICER_FIELD("dr.spread_max", train_traffic.randomization.spread_max),
      SLICER_FIELD("dr.per_dti", train_traffic.randomization.per_dti),
      SLICER_FIELD("eval.offset", eval_offset),
      {"predictor.mode", [](const ExperimentConfig& c) { return to_string(c.predictor.mode); },
       [](ExperimentConfig& c, const KeyValueConfig& kv) {
         c.predictor.mode = predictor_mode_from_string(kv.get_string("predictor.mode", to_string(c.predictor.mode)));
       }},
      SLICER_FIELD("predictor.noise_sigma", predictor.noise_sigma),
      SLICER_FIELD("epochs", epochs),
      SLICER_FIELD("episodes_per_epoch", episodes_per_epoch),
      SLICER_FIELD("selection_episodes", selection_episodes),
      SLICER_FIELD("eval_episodes", eval_episodes),
      SLICER_FIELD("pred_alloc.magnitude", worst_case_magnitude),

      SLICER_FIELD("wcsac.risk_alpha", wcsac.risk_alpha),
      SLICER_FIELD("wcsac.cost_limit", wcsac.cost_limit),
      SLICER_FIELD("wcsac.discount", wcsac.discount),
      SLICER_FIELD("wcsac.initial_entropy_multiplier", wcsac.initial_entropy_multiplier),
      SLICER_FIELD("wcsac.initial_safety_multiplier", wcsac.initial_safety_multiplier),
      SLICER_FIELD("wcsac.target_entropy", wcsac.target_entropy),
      SLICER_FIELD("wcsac.hidden", wcsac.hidden),
      SLICER_FIELD("wcsac.actor_lr", wcsac.actor_lr),
      SLICER_FIELD("wcsac.critic_lr", wcsac.critic_lr),
      SLICER_FIELD("wcsac.entropy_lr", wcsac.entropy_lr),
      SLICER_FIELD("wcsac.safety_lr", wcsac.safety_lr),
      SLICER_FIELD("wcsac.tau", wcsac.tau),
      SLICER_FIELD("wcsac.batch_size", wcsac.batch_size),
      SLICER_FIELD("wcsac.replay_capacity", wcsac.replay_capacity),
      SLICER_FIELD("wcsac.warmup_steps", wcsac.warmup_steps),
      SLICER_FIELD("wcsac.updates_per_step", wcsac.updates_per_step),
      SLICER_FIELD("wcsac.min_variance", wcsac.min_variance),

      SLICER_FIELD("cpo.trust_region_bound", cpo.trust_region_bound),
      SLICER_FIELD("cpo.cost_limit", cpo.cost_limit),
      SLICER_FIELD("cpo.shaping_gamma", cpo.shaping_gamma),
      SLICER_FIELD("cpo.discount", cpo.discount),
      SLICER_FIELD("cpo.gae_lambda", cpo.gae_lambda),
      SLICER_FIELD("cpo.hidden", cpo.hidden),
      SLICER_FIELD("cpo.initial_log_std", cpo.initial_log_std),
      SLICER_FIELD("cpo.episodes_per_update", cpo.episodes_per_update),
      SLICER_FIELD("cpo.value_lr", cpo.value_lr),
      SLICER_FIELD("cpo.value_iterations", cpo.value_iterations),
      SLICER_FIELD("cpo.cg_iterations", cpo.cg_iterations),
      SLICER_FIELD("cpo.cg_damping", cpo.cg_damping),

      SLICER_FIELD("ppo.clip_ratio", ppo.clip_ratio),
      SLICER_FIELD("ppo.w_re", ppo.w_re),
      SLICER_FIELD("ppo.w_qos", ppo.w_qos),
      SLICER_FIELD("ppo.discount", ppo.discount),
      SLICER_FIELD("ppo.gae_lambda", ppo.gae_lambda),
      SLICER_FIELD("ppo.hidden", ppo.hidden),
      SLICER_FIELD("ppo.initial_log_std", ppo.initial_log_std),
      SLICER_FIELD("ppo.episodes_per_update", ppo.episodes_per_update),
      SLICER_FIELD("ppo.policy_lr", ppo.policy_lr),
      SLICER_FIELD("ppo.value_lr", ppo.value_lr),
      SLICER_FIELD("ppo.update_epochs", ppo.update_epochs),
      SLICER_FIELD("ppo.minibatch_size", ppo.minibatch_size),
      SLICER_FIELD("ppo.value_iterations", ppo.value_iterations),
      SLICER_FIELD("ppo.target_kl", ppo.target_kl),

      SLICER_FIELD("finetune.d", finetune_d),
      SLICER_FIELD("finetune.risk_alpha", finetune_risk_alpha),
      SLICER_FIELD("finetune.lr_scale", finetune_lr_scale),
      SLICER_FIELD("finetune.epochs", finetune_epochs),
      SLICER_FIELD("finetune.episodes_per_epoch", finetune_episodes_per_epoch),
      SLICER_FIELD("sweep.d_values", sweep_d),
      SLICER_FIELD("sweep.noise_values", sweep_noise),
  };
  return table;
}

#undef SLICER_FIELD

double pct(double fraction) { return 100.0 * fraction; }

EpisodeSummary run_training_episode(SliceEnv& env, Agent& agent, Rng& rng) {
  EpisodeSummary s;
  Observation obs = env.reset(rng);
  double bandwidth = 0.0;
  while (!env.done()) {
    ActionSample a = agent.explore(obs, rng);
    StepOutcome out = env.step(a.raw);
    Transition t;
    t.obs = obs.features();
    t.next_obs = out.next_observation.features();
    t.raw_action = a.raw;
    t.pre_squash = a.pre_squash;
    t.reward = out.reward;
    t.cost = out.cost;
    t.done = out.done;
    t.final_beta = out.info.beta;
    agent.observe(t, rng);
    bandwidth += out.info.bandwidth;
    ++s.steps;
    if (out.done) s.final_beta = out.info.beta;
    obs = std::move(out.next_observation);
  }
  agent.end_episode(rng);
  s.mean_bandwidth = bandwidth / static_cast<double>(s.steps);
  return s;
}

std::vector<EpisodeSummary> run_selection(SliceEnv& env, const Agent& agent, std::size_t episodes,
                                          std::uint64_t seed) {
  std::vector<EpisodeSummary> out;
  out.reserve(episodes);
  for (std::size_t i = 0; i < episodes; ++i) {
    Rng rng = derive_rng(seed, i);
    out.push_back(run_episode(env, agent, rng, true));
  }
  return out;
}

double tail_mean_beta_pct(const std::vector<EpisodeSummary>& episodes, double risk) {
  std::vector<double> betas;
  betas.reserve(episodes.size());
  for (const auto& e : episodes) betas.push_back(e.final_beta);
  std::sort(betas.begin(), betas.end(), std::greater<>());
  const auto n = static_cast<std::size_t>(std::ceil(risk * static_cast<double>(betas.size()) - 1e-9));
  const std::size_t k = std::clamp<std::size_t>(n, 1, betas.size());
  return pct(std::accumulate(betas.begin(), betas.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
             static_cast<double>(k));
}

EpochStats epoch_stats(std::size_t epoch, const std::vector<EpisodeSummary>& train,
                       const std::vector<EpisodeSummary>& selection, double risk) {
  MetricsRecord m = aggregate(train, "", "");
  EpochStats s;
  s.epoch = epoch;
  s.mean_bandwidth_pct = m.mean_bandwidth_pct;
  s.min_bandwidth_pct = m.min_bandwidth_pct;
  s.max_bandwidth_pct = m.max_bandwidth_pct;
  s.mean_beta_pct = m.mean_qos_degradation_pct;
  s.min_beta_pct = m.min_qos_degradation_pct;
  s.max_beta_pct = m.max_qos_degradation_pct;
  if (selection.empty()) {
    s.selection_bandwidth_pct = s.mean_bandwidth_pct;
    s.selection_beta_pct = s.mean_beta_pct;
    s.selection_tail_beta_pct = tail_mean_beta_pct(train, risk);
  } else {
    MetricsRecord sel = aggregate(selection, "", "");
    s.selection_bandwidth_pct = sel.mean_bandwidth_pct;
    s.selection_beta_pct = sel.mean_qos_degradation_pct;
    s.selection_tail_beta_pct = tail_mean_beta_pct(selection, risk);
  }
  return s;
}

}  // namespace

std::string TrafficSpec::describe() const {
  if (kind == Kind::kRandomized) return "randomized";
  std::string src = trace_path.empty() ? "synthetic-diurnal" : trace_path;
  return "trace(" + src + ", offset " + csv::format_double(shaping.offset) + ")";
}

TrafficSource make_traffic_source(const TrafficSpec& spec) {
  if (spec.kind == TrafficSpec::Kind::kRandomized) return spec.randomization;
  Rng noise = derive_rng(spec.trace_seed, 1);
  if (spec.trace_path.empty()) {
    Rng series_rng = derive_rng(spec.trace_seed, 0);
    std::vector<double> raw = synthetic_diurnal_series(7, 144, series_rng);
    return std::make_shared<const TrafficTrace>(shape_trace(raw, spec.shaping, noise));
  }
  if (!std::filesystem::exists(spec.trace_path)) throw IoError("trace file not found: " + spec.trace_path);
  return std::make_shared<const TrafficTrace>(load_trace(spec.trace_path, spec.shaping, noise));
}

ExperimentConfig::ExperimentConfig() {
  cpo.shaping_gamma = 10.0;
  train_traffic.kind = TrafficSpec::Kind::kRandomized;
  // The bundled series has one row per 10 minutes.
  train_traffic.shaping.ttis_per_row = 600;
}

void ExperimentConfig::validate() const {
  episode.validate();
  predictor.validate();
  wcsac.validate();
  effective_cpo().validate();
  ppo.validate();
  if (eval_episodes == 0) throw ConfigError("eval_episodes must be >= 1");
  if (episodes_per_epoch == 0) throw ConfigError("episodes_per_epoch must be >= 1");
  if (finetune_episodes_per_epoch == 0) throw ConfigError("finetune.episodes_per_epoch must be >= 1");
  if (!(finetune_risk_alpha > 0.0 && finetune_risk_alpha <= 1.0)) {
    throw ConfigError("finetune.risk_alpha must be in (0, 1]");
  }
  if (!(finetune_lr_scale > 0.0)) throw ConfigError("finetune.lr_scale must be > 0");
  if (!(worst_case_magnitude >= 0.0)) throw ConfigError("pred_alloc.magnitude must be >= 0");
  if (!model_path.empty() && !std::filesystem::exists(model_path)) {
    throw ConfigError("model file not found: " + model_path);
  }
  if (!train_traffic.trace_path.empty() && !std::filesystem::exists(train_traffic.trace_path)) {
    throw ConfigError("trace file not found: " + train_traffic.trace_path);
  }
}

ExperimentConfig ExperimentConfig::from_key_values(const KeyValueConfig& kv) {
  ExperimentConfig c;
  for (const auto& f : fields()) f.set(c, kv);
  auto unused = kv.unused_keys();
  if (!unused.empty()) {
    std::string names;
    for (const auto& k : unused) names += (names.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config keys: " + names);
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_key_values(KeyValueConfig::load(path));
}

KeyValueConfig ExperimentConfig::to_key_values() const {
  KeyValueConfig kv;
  for (const auto& f : fields()) kv.set(f.key, f.get(*this));
  return kv;
}

std::string config_hash(const std::string& canonical_text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canonical_text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::hash() const { return config_hash(to_key_values().to_string()); }

TrafficSpec ExperimentConfig::eval_traffic(double offset) const {
  TrafficSpec t = train_traffic;
  t.kind = TrafficSpec::Kind::kTrace;
  t.shaping.offset = offset;
  return t;
}

CpoConfig ExperimentConfig::effective_cpo() const {
  CpoConfig c = cpo;
  c.beta_thresh = episode.beta_thresh;
  if (agent != AgentKind::kWcCpo) c.shaping_gamma = 0.0;
  return c;
}

std::shared_ptr<const QoSModel> load_model_or_synthetic(const std::string& path) {
  if (path.empty()) return std::make_shared<const QoSModel>(synthetic_model(default_synthetic_truth()));
  return std::make_shared<const QoSModel>(load_model(path));
}

std::unique_ptr<Agent> make_agent(const ExperimentConfig& config, std::shared_ptr<const QoSModel> model, Rng& rng) {
  const int obs_dim = static_cast<int>(kObservationDim);
  switch (config.agent) {
    case AgentKind::kWcsac: return std::make_unique<WcsacAgent>(obs_dim, config.wcsac, rng);
    case AgentKind::kCpo:
    case AgentKind::kWcCpo: return std::make_unique<CpoAgent>(obs_dim, config.effective_cpo(), rng);
    case AgentKind::kPpo: return std::make_unique<PpoAgent>(obs_dim, config.ppo, rng);
    case AgentKind::kPredAlloc:
      return std::make_unique<PredAllocAgent>(std::move(model), config.episode.q_thresh, config.episode.action_grid,
                                              config.predictor.support(), config.worst_case_magnitude);
  }
  throw ConfigError("unknown agent kind");
}

nlohmann::json MetricsRecord::to_json() const {
  return {{"label", label},
          {"mean_bandwidth_pct", mean_bandwidth_pct},
          {"min_bandwidth_pct", min_bandwidth_pct},
          {"max_bandwidth_pct", max_bandwidth_pct},
          {"mean_qos_degradation_pct", mean_qos_degradation_pct},
          {"min_qos_degradation_pct", min_qos_degradation_pct},
          {"max_qos_degradation_pct", max_qos_degradation_pct},
          {"episodes", episodes},
          {"config_hash", config_hash}};
}

MetricsRecord MetricsRecord::from_json(const nlohmann::json& j) {
  MetricsRecord m;
  m.label = j.at("label");
  m.mean_bandwidth_pct = j.at("mean_bandwidth_pct");
  m.min_bandwidth_pct = j.at("min_bandwidth_pct");
  m.max_bandwidth_pct = j.at("max_bandwidth_pct");
  m.mean_qos_degradation_pct = j.at("mean_qos_degradation_pct");
  m.min_qos_degradation_pct = j.at("min_qos_degradation_pct");
  m.max_qos_degradation_pct = j.at("max_qos_degradation_pct");
  m.episodes = j.at("episodes");
  m.config_hash = j.at("config_hash");
  return m;
}

MetricsRecord aggregate(const std::vector<EpisodeSummary>& episodes, std::string label, std::string hash) {
  MetricsRecord m;
  m.label = std::move(label);
  m.config_hash = std::move(hash);
  m.episodes = episodes.size();
  if (episodes.empty()) return m;
  double bw_total = 0.0;
  std::size_t steps = 0;
  double beta_total = 0.0;
  double bw_min = std::numeric_limits<double>::infinity(), bw_max = -bw_min;
  double beta_min = bw_min, beta_max = -bw_min;
  for (const auto& e : episodes) {
    bw_total += e.mean_bandwidth * static_cast<double>(e.steps);
    steps += e.steps;
    beta_total += e.final_beta;
    bw_min = std::min(bw_min, e.mean_bandwidth);
    bw_max = std::max(bw_max, e.mean_bandwidth);
    beta_min = std::min(beta_min, e.final_beta);
    beta_max = std::max(beta_max, e.final_beta);
  }
  const double mean_bw = bw_total / static_cast<double>(steps);
  const double mean_beta = beta_total / static_cast<double>(episodes.size());
  // Keep min <= mean <= max exact under rounding.
  m.mean_bandwidth_pct = pct(mean_bw);
  m.min_bandwidth_pct = std::min(pct(bw_min), m.mean_bandwidth_pct);
  m.max_bandwidth_pct = std::max(pct(bw_max), m.mean_bandwidth_pct);
  m.mean_qos_degradation_pct = pct(mean_beta);
  m.min_qos_degradation_pct = std::min(pct(beta_min), m.mean_qos_degradation_pct);
  m.max_qos_degradation_pct = std::max(pct(beta_max), m.mean_qos_degradation_pct);
  return m;
}

EpisodeSummary run_episode(SliceEnv& env, const Agent& agent, Rng& episode_rng, bool deterministic,
                           std::ostream* log) {
  EpisodeSummary s;
  Observation obs = env.reset(episode_rng);
  double bandwidth = 0.0;
  while (!env.done()) {
    StepOutcome out = env.step(agent.act(obs, deterministic, episode_rng).raw);
    if (log) *log << episode_log_line(out) << '\n';
    bandwidth += out.info.bandwidth;
    ++s.steps;
    if (out.done) s.final_beta = out.info.beta;
    obs = std::move(out.next_observation);
  }
  s.mean_bandwidth = bandwidth / static_cast<double>(s.steps);
  return s;
}

MetricsRecord evaluate(const Agent& agent, const EvalSpec& spec, std::ostream* log) {
  if (spec.episodes == 0) throw InputError("evaluation needs at least one episode");
  SliceEnv env(spec.model, spec.episode, spec.source, spec.predictor);
  std::vector<EpisodeSummary> episodes;
  episodes.reserve(spec.episodes);
  for (std::size_t i = 0; i < spec.episodes; ++i) {
    Rng rng = derive_rng(spec.seed, i);
    episodes.push_back(run_episode(env, agent, rng, true, log));
  }
  return aggregate(episodes, spec.label, spec.config_hash);
}

nlohmann::json EpochStats::to_json() const {
  return {{"epoch", epoch},
          {"mean_bandwidth_pct", mean_bandwidth_pct},
          {"min_bandwidth_pct", min_bandwidth_pct},
          {"max_bandwidth_pct", max_bandwidth_pct},
          {"mean_beta_pct", mean_beta_pct},
          {"min_beta_pct", min_beta_pct},
          {"max_beta_pct", max_beta_pct},
          {"selection_bandwidth_pct", selection_bandwidth_pct},
          {"selection_beta_pct", selection_beta_pct},
          {"selection_tail_beta_pct", selection_tail_beta_pct}};
}

EpochStats EpochStats::from_json(const nlohmann::json& j) {
  EpochStats s;
  s.epoch = j.at("epoch");
  s.mean_bandwidth_pct = j.at("mean_bandwidth_pct");
  s.min_bandwidth_pct = j.at("min_bandwidth_pct");
  s.max_bandwidth_pct = j.at("max_bandwidth_pct");
  s.mean_beta_pct = j.at("mean_beta_pct");
  s.min_beta_pct = j.at("min_beta_pct");
  s.max_beta_pct = j.at("max_beta_pct");
  s.selection_bandwidth_pct = j.at("selection_bandwidth_pct");
  s.selection_beta_pct = j.at("selection_beta_pct");
  s.selection_tail_beta_pct = j.at("selection_tail_beta_pct");
  return s;
}

TrainResult train_agent(Agent& agent, const TrainSetup& setup, Rng& rng, const nlohmann::json& metadata) {
  SliceEnv env(setup.model, setup.episode, setup.source, setup.predictor);
  SliceEnv selection_env(setup.model, setup.episode, setup.source, setup.predictor);
  TrainResult result;
  result.best = make_checkpoint(agent, 0, rng, metadata);
  const double limit_pct = pct(setup.beta_thresh) + 1e-9;
  double best_bw = std::numeric_limits<double>::infinity();
  double best_beta = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= setup.epochs; ++epoch) {
    std::vector<EpisodeSummary> episodes;
    try {
      for (std::size_t e = 0; e < setup.episodes_per_epoch; ++e) {
        episodes.push_back(run_training_episode(env, agent, rng));
      }
    } catch (const TrainingError& err) {
      if (setup.diagnostics) {
        for (auto& d : agent.take_diagnostics()) *setup.diagnostics << nlohmann::json{{"epoch", epoch}, {"update", d}}.dump() << '\n';
      }
      throw TrainingError("training diverged in epoch " + std::to_string(epoch) + ": " + err.what());
    }
    auto diags = agent.take_diagnostics();
    if (setup.diagnostics) {
      for (auto& d : diags) *setup.diagnostics << nlohmann::json{{"epoch", epoch}, {"update", d}}.dump() << '\n';
    }
    std::vector<EpisodeSummary> selection;
    if (setup.selection_episodes > 0) {
      selection = run_selection(selection_env, agent, setup.selection_episodes, setup.selection_seed);
    }
    EpochStats stats = epoch_stats(epoch, episodes, selection, setup.selection_risk);
    result.curve.push_back(stats);
    if (setup.on_epoch) setup.on_epoch(stats);

    const bool feasible = stats.selection_tail_beta_pct <= limit_pct;
    bool take = false;
    if (feasible) {
      take = !result.constraint_met || stats.selection_bandwidth_pct < best_bw ||
             (stats.selection_bandwidth_pct == best_bw && stats.selection_beta_pct < best_beta);
    } else if (!result.constraint_met) {
      take = stats.selection_beta_pct < best_beta;
    }
    if (take) {
      result.constraint_met = result.constraint_met || feasible;
      best_bw = stats.selection_bandwidth_pct;
      best_beta = stats.selection_beta_pct;
      result.best = make_checkpoint(agent, epoch, rng, metadata);
      result.best_epoch = epoch;
    }
  }
  result.last = make_checkpoint(agent, setup.epochs, rng, metadata);
  if (setup.epochs == 0) result.best = result.last;
  return result;
}

TrainResult train(const ExperimentConfig& config, std::function<void(const EpochStats&)> on_epoch,
                  std::ostream* diagnostics) {
  config.validate();
  if (config.agent == AgentKind::kPredAlloc) throw UnsupportedAgentError("Pred-Alloc is not trained");
  auto model = load_model_or_synthetic(config.model_path);
  Rng rng(config.seed);
  auto agent = make_agent(config, model, rng);
  TrainSetup setup;
  setup.model = model;
  setup.episode = config.episode;
  setup.source = make_traffic_source(config.train_traffic);
  setup.predictor = config.predictor;
  setup.epochs = config.epochs;
  setup.episodes_per_epoch = config.episodes_per_epoch;
  setup.selection_episodes = config.selection_episodes;
  setup.selection_seed = derive_rng(config.seed, kSelectionStream)();
  setup.beta_thresh = config.episode.beta_thresh;
  if (config.agent == AgentKind::kWcsac) setup.selection_risk = config.wcsac.risk_alpha;
  setup.on_epoch = std::move(on_epoch);
  setup.diagnostics = diagnostics;
  nlohmann::json metadata = {{"config_hash", config.hash()}, {"config", config.to_key_values().values()}};
  return train_agent(*agent, setup, rng, metadata);
}

EvalSpec make_eval_spec(const ExperimentConfig& config, std::shared_ptr<const QoSModel> model, double offset,
                        NetworkCondition condition, const std::string& label) {
  EvalSpec spec;
  spec.model = std::move(model);
  spec.episode = config.episode;
  spec.episode.condition = condition;
  spec.source = make_traffic_source(config.eval_traffic(offset));
  spec.predictor = config.predictor;
  spec.episodes = config.eval_episodes;
  spec.seed = derive_rng(config.seed, kEvalStream)();
  spec.label = label;
  spec.config_hash = config.hash();
  return spec;
}

nlohmann::json SweepResult::to_json() const {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : records) recs.push_back(r.to_json());
  return {{"parameter", parameter}, {"values", values}, {"records", recs}, {"reference", reference.to_json()}};
}

SweepResult SweepResult::from_json(const nlohmann::json& j) {
  SweepResult s;
  s.parameter = j.at("parameter");
  s.values = j.at("values").get<std::vector<double>>();
  for (const auto& r : j.at("records")) s.records.push_back(MetricsRecord::from_json(r));
  s.reference = MetricsRecord::from_json(j.at("reference"));
  if (s.records.size() != s.values.size()) throw IoError("sweep has " + std::to_string(s.values.size()) +
                                                         " values but " + std::to_string(s.records.size()) + " records");
  return s;
}

SweepResult sweep_conditions(const Agent& agent, const EvalSpec& base, const std::vector<double>& d_values) {
  SweepResult out;
  out.parameter = "d";
  out.values = d_values;
  for (double d : d_values) {
    EvalSpec spec = base;
    spec.episode.condition = NetworkCondition::deterministic(d);
    spec.label = "d=" + csv::format_double(d);
    out.records.push_back(evaluate(agent, spec));
  }
  EvalSpec ref = base;
  ref.episode.condition = NetworkCondition::stochastic();
  ref.label = "stochastic";
  out.reference = evaluate(agent, ref);
  return out;
}

SweepResult sweep_noise(const Agent& agent, const EvalSpec& base, const std::vector<double>& noise_sigmas) {
  SweepResult out;
  out.parameter = "noise_sigma";
  out.values = noise_sigmas;
  for (double sigma : noise_sigmas) {
    EvalSpec spec = base;
    spec.predictor.mode = PredictorConfig::Mode::kNoisy;
    spec.predictor.noise_sigma = sigma;
    spec.label = "noise_sigma=" + csv::format_double(sigma);
    out.records.push_back(evaluate(agent, spec));
  }
  EvalSpec ref = base;
  ref.predictor.mode = PredictorConfig::Mode::kRandom;
  ref.label = "random-prediction";
  out.reference = evaluate(agent, ref);
  return out;
}

FinetuneResult finetune(const PolicyCheckpoint& checkpoint, const TrainSetup& setup, const EvalSpec& eval,
                        double risk_alpha, double lr_scale, Rng& rng) {
  if (checkpoint.kind != AgentKind::kWcsac) {
    throw UnsupportedAgentError("fine-tuning supports WCSAC checkpoints only, got " + to_string(checkpoint.kind));
  }
  if (!(risk_alpha > 0.0 && risk_alpha <= 1.0)) throw InputError("risk_alpha must be in (0, 1]");
  if (!(lr_scale > 0.0)) throw InputError("learning-rate scale must be > 0");
  auto restored = restore_agent(checkpoint);
  FinetuneResult result;
  result.before = evaluate(*restored, eval);
  result.before.label = eval.label + " (before)";
  if (setup.epochs == 0) {
    result.after = result.before;
    result.after.label = eval.label + " (after)";
    result.training.best = checkpoint;
    result.training.last = checkpoint;
    return result;
  }
  auto& agent = static_cast<WcsacAgent&>(*restored);
  agent.mutable_config().risk_alpha = risk_alpha;
  agent.set_learning_rates(agent.config().actor_lr * lr_scale, agent.config().critic_lr * lr_scale);
  nlohmann::json metadata = checkpoint.metadata;
  metadata["finetune"] = {{"risk_alpha", risk_alpha}, {"lr_scale", lr_scale}, {"from_epoch", checkpoint.epoch}};
  TrainSetup tuned = setup;
  tuned.selection_risk = risk_alpha;
  result.training = train_agent(agent, tuned, rng, metadata);
  auto best = restore_agent(result.training.best);
  result.after = evaluate(*best, eval);
  result.after.label = eval.label + " (after)";
  return result;
}

}  // namespace slicer
