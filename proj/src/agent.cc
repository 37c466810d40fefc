#include "slicer/agent.h"

#include <fstream>
#include <sstream>

#include "slicer/cpo.h"
#include "slicer/error.h"
#include "slicer/ppo.h"
#include "slicer/pred_alloc.h"
#include "slicer/stats.h"
#include "slicer/wcsac.h"

namespace slicer {

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kWcsac: return "wcsac";
    case AgentKind::kCpo: return "cpo";
    case AgentKind::kWcCpo: return "wc-cpo";
    case AgentKind::kPpo: return "ppo";
    case AgentKind::kPredAlloc: return "pred-alloc";
  }
  return "unknown";
}

AgentKind agent_kind_from_string(const std::string& name) {
  for (AgentKind k : {AgentKind::kWcsac, AgentKind::kCpo, AgentKind::kWcCpo, AgentKind::kPpo,
                      AgentKind::kPredAlloc}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown agent kind '" + name + "'");
}

PolicyCheckpoint make_checkpoint(const Agent& agent, std::size_t epoch, const Rng& rng, nlohmann::json metadata) {
  PolicyCheckpoint c;
  c.kind = agent.kind();
  c.agent = agent.to_json();
  c.epoch = epoch;
  c.rng_state = rng_state(rng);
  c.metadata = std::move(metadata);
  return c;
}

std::unique_ptr<Agent> restore_agent(const PolicyCheckpoint& checkpoint) {
  try {
    switch (checkpoint.kind) {
      case AgentKind::kWcsac:
        return std::make_unique<WcsacAgent>(WcsacAgent::from_json(checkpoint.agent));
      case AgentKind::kCpo:
      case AgentKind::kWcCpo: {
        auto a = std::make_unique<CpoAgent>(CpoAgent::from_json(checkpoint.agent));
        if (a->kind() != checkpoint.kind) throw IoError("checkpoint kind does not match its CPO configuration");
        return a;
      }
      case AgentKind::kPpo:
        return std::make_unique<PpoAgent>(PpoAgent::from_json(checkpoint.agent));
      case AgentKind::kPredAlloc:
        return std::make_unique<PredAllocAgent>(PredAllocAgent::from_json(checkpoint.agent));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed " + to_string(checkpoint.kind) + " checkpoint: ") + e.what());
  }
  throw IoError("unknown agent kind in checkpoint");
}

nlohmann::json checkpoint_to_json(const PolicyCheckpoint& checkpoint) {
  return {{"format", PolicyCheckpoint::kFormat},
          {"kind", to_string(checkpoint.kind)},
          {"epoch", checkpoint.epoch},
          {"rng_state", checkpoint.rng_state},
          {"metadata", checkpoint.metadata},
          {"agent", checkpoint.agent}};
}

PolicyCheckpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != PolicyCheckpoint::kFormat) {
      throw IoError("unsupported checkpoint format '" + j.at("format").get<std::string>() + "'");
    }
    PolicyCheckpoint c;
    c.kind = agent_kind_from_string(j.at("kind").get<std::string>());
    c.epoch = j.at("epoch").get<std::size_t>();
    c.rng_state = j.at("rng_state").get<std::string>();
    c.metadata = j.at("metadata");
    c.agent = j.at("agent");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const PolicyCheckpoint& checkpoint, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  // Shortest round-trip formatting keeps every double bit-exact.
  out << checkpoint_to_json(checkpoint).dump() << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

PolicyCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

double act(const Agent& agent, const Observation& obs, bool deterministic, Rng& rng) {
  return agent.act(obs, deterministic, rng).raw;
}

}  // namespace slicer
