#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pnrl/agent.hpp"
#include "pnrl/errors.hpp"
#include "pnrl/orchestrator.hpp"
#include "pnrl/policy.hpp"

namespace pnrl {

// Agent reference as written in configs:
//   static:<policy-file>          frozen policy loaded from disk
//   static:const:<action>         always plays <action>
//   static:uniform                uniform over actions
//   learn:<algo>[:k=v,k=v...]     fresh learner; keys are Hyperparams fields
//                                 plus updates=0|1 and init=<policy-file>
struct AgentSpec {
  enum class Kind { StaticFile, StaticConst, StaticUniform, Learn };

  Kind kind = Kind::Learn;
  std::string path;  // StaticFile, or Learn init
  Action constant_action = 0;
  Algo algo = Algo::ActorCritic;
  Hyperparams hp;
  std::vector<std::pair<std::string, std::string>> overrides;
  bool updates = true;

  // Throws std::invalid_argument.
  static AgentSpec parse(const std::string& id);

  bool is_static() const { return kind != Kind::Learn; }
  bool frozen() const { return is_static() || !updates; }
  bool has_init() const { return kind == Kind::Learn && !path.empty(); }
};

struct SeatConfig {
  Sampling sampling = Sampling::RoundRobin;
  std::vector<std::string> partners;
};

// One experiment, identical across config files, CLI overrides and the
// service API.
struct InteractionConfig {
  Mode mode = Mode::Train;
  std::string env_id;
  std::string ego;
  std::vector<SeatConfig> seats;  // seats[k] is joint seat k + 1
  std::size_t total_timesteps = 10000;
  std::uint64_t master_seed = 0;
  std::size_t eval_episodes = 100;
  std::vector<std::string> population;  // cross_play only
  bool save_trajectory = true;

  // Relative policy paths resolve against this directory. Not serialized.
  std::filesystem::path base_dir;

  nlohmann::json to_json() const;
  // Throws ConfigError with one diagnostic per bad field.
  static InteractionConfig from_json(const nlohmann::json& j);
  static InteractionConfig load(const std::filesystem::path& path);

  // Full semantic validation: env exists, agent ids parse, policy files load
  // and fit their seats, mode rules hold. Throws ConfigError.
  void validate() const;
};

std::filesystem::path resolve_path(const InteractionConfig& config, const std::string& path);

// Builds the agent for `seat` from its id. `rng` is the agent's own stream.
std::unique_ptr<Agent> make_agent(const std::string& id, const ProjectedView& seat, const RngStream& rng,
                                  const std::filesystem::path& base_dir);

// Agent stream for pool entry `k` of `seat` (the ego is seat 0, k 0).
RngStream agent_stream(std::uint64_t master_seed, std::size_t seat, std::size_t k);

// Session with every agent instantiated (Train, Adapt, AdHocEval).
std::unique_ptr<Session> build_session(const InteractionConfig& config);

}  // namespace pnrl
