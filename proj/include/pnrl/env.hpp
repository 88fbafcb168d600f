#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pnrl/rng.hpp"
#include "pnrl/spaces.hpp"

namespace pnrl {

enum class RewardStructure { Shared, Mixed, ZeroSum };

std::string to_string(RewardStructure rs);

struct JointEnvSpec {
  std::string env_id;
  std::size_t n_agents = 2;
  std::vector<SpaceSpec> obs_spaces;
  std::vector<SpaceSpec> act_spaces;
  std::size_t horizon = 1;
  RewardStructure reward_structure = RewardStructure::Mixed;

  // Throws std::invalid_argument on a malformed spec. Action spaces must be
  // Discrete: only simultaneous discrete-move games are supported.
  void check() const;
};

// One joint transition. `obs` are the observations the agents acted on,
// `next_obs` the ones returned by the environment after the move.
struct JointStep {
  std::size_t t = 0;
  std::vector<Observation> obs;
  std::vector<Action> actions;
  std::vector<double> rewards;
  bool done = false;
  std::vector<Observation> next_obs;

  bool operator==(const JointStep&) const = default;
};

// Seat i's single-agent view of a joint environment. The other seats'
// policies act as hidden parameters; they are bound by the orchestrator.
struct ProjectedView {
  std::size_t agent_index = 0;
  SpaceSpec obs_space;
  SpaceSpec act_space;

  bool operator==(const ProjectedView&) const = default;
};

ProjectedView project(const JointEnvSpec& spec, std::size_t agent_index);

// Simultaneous-move joint environment. Subclasses provide the dynamics;
// this base enforces the step/reset contract (action validation, step
// counting, horizon, done-once).
class JointEnv {
 public:
  explicit JointEnv(JointEnvSpec spec, std::uint64_t master_seed = 0);
  virtual ~JointEnv() = default;

  const JointEnvSpec& spec() const { return spec_; }

  std::vector<Observation> reset(std::optional<std::uint64_t> seed = std::nullopt);
  JointStep step(std::span<const Action> actions);

  std::size_t t() const { return t_; }
  bool done() const { return done_; }
  const std::vector<Observation>& observations() const { return obs_; }

  virtual std::unique_ptr<JointEnv> clone() const = 0;

 protected:
  struct Outcome {
    std::vector<Observation> obs;
    std::vector<double> rewards;
    bool terminal = false;
  };

  virtual std::vector<Observation> on_reset(RngStream& rng) = 0;
  virtual Outcome on_step(std::span<const Action> actions, RngStream& rng) = 0;

 private:
  JointEnvSpec spec_;
  RngStream master_;
  RngStream episode_rng_;
  std::vector<Observation> obs_;
  std::size_t t_ = 0;
  bool done_ = true;
};

// Environment constructors keyed by string id.
class EnvRegistry {
 public:
  using Factory = std::function<std::unique_ptr<JointEnv>()>;

  void add(const std::string& env_id, Factory factory);
  bool contains(const std::string& env_id) const;
  // Throws UnknownEnv.
  std::unique_ptr<JointEnv> make(const std::string& env_id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, Factory> factories_;
};

}  // namespace pnrl
