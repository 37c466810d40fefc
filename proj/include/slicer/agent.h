#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "slicer/env.h"
#include "slicer/rng.h"

namespace slicer {

enum class AgentKind { kWcsac, kCpo, kWcCpo, kPpo, kPredAlloc };

std::string to_string(AgentKind kind);
AgentKind agent_kind_from_string(const std::string& name);

struct ActionSample {
  // Raw action in [-1, 1] handed to the environment.
  double raw = 0.0;
  // Pre-tanh value for Gaussian-policy agents (equals atanh(raw)).
  double pre_squash = 0.0;
};

struct Transition {
  Eigen::VectorXd obs;
  Eigen::VectorXd next_obs;
  double raw_action = 0.0;
  double pre_squash = 0.0;
  double reward = 0.0;
  double cost = 0.0;
  bool done = false;
  // Terminal degradation of the episode; meaningful when done.
  double final_beta = 0.0;
};

// Common interface for learning agents and the grid heuristic.
class Agent {
 public:
  virtual ~Agent() = default;

  virtual AgentKind kind() const = 0;

  // Deterministic mode returns the policy mean (squashed); stochastic mode
  // samples it.
  virtual ActionSample act(const Observation& obs, bool deterministic, Rng& rng) const = 0;

  // Action used while collecting training data (may add warm-up exploration).
  virtual ActionSample explore(const Observation& obs, Rng& rng) { return act(obs, false, rng); }

  virtual void observe(const Transition& transition, Rng& rng) {
    (void)transition;
    (void)rng;
  }
  virtual void end_episode(Rng& rng) { (void)rng; }

  // Parameters, optimizer state and configuration.
  virtual nlohmann::json to_json() const = 0;

  virtual std::unique_ptr<Agent> clone() const = 0;

  // Per-update diagnostics (JSON objects) accumulated since the last call.
  std::vector<nlohmann::json> take_diagnostics() {
    std::vector<nlohmann::json> out;
    out.swap(diagnostics_);
    return out;
  }

 protected:
  std::vector<nlohmann::json> diagnostics_;
};

// Serialized agent plus training metadata.
struct PolicyCheckpoint {
  static constexpr const char* kFormat = "slicer.policy-checkpoint.v1";

  AgentKind kind = AgentKind::kWcsac;
  nlohmann::json agent;
  std::size_t epoch = 0;
  std::string rng_state;
  nlohmann::json metadata = nlohmann::json::object();

  bool operator==(const PolicyCheckpoint&) const = default;
};

PolicyCheckpoint make_checkpoint(const Agent& agent, std::size_t epoch, const Rng& rng,
                                 nlohmann::json metadata = nlohmann::json::object());
std::unique_ptr<Agent> restore_agent(const PolicyCheckpoint& checkpoint);

nlohmann::json checkpoint_to_json(const PolicyCheckpoint& checkpoint);
PolicyCheckpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const PolicyCheckpoint& checkpoint, const std::filesystem::path& path);
PolicyCheckpoint load_checkpoint(const std::filesystem::path& path);

// Raw action for the given checkpoint and observation.
double act(const Agent& agent, const Observation& obs, bool deterministic, Rng& rng);

}  // namespace slicer
