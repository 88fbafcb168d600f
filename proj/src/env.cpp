#include "pnrl/env.hpp"

#include <stdexcept>

#include "pnrl/errors.hpp"

namespace pnrl {

std::string to_string(RewardStructure rs) {
  switch (rs) {
    case RewardStructure::Shared: return "shared";
    case RewardStructure::Mixed: return "mixed";
    case RewardStructure::ZeroSum: return "zero_sum";
  }
  return "unknown";
}

void JointEnvSpec::check() const {
  if (n_agents < 2) throw std::invalid_argument("joint env needs at least 2 agents");
  if (obs_spaces.size() != n_agents || act_spaces.size() != n_agents) {
    throw std::invalid_argument("space lists must have n_agents entries");
  }
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  for (const auto& s : obs_spaces) s.check();
  for (const auto& s : act_spaces) {
    s.check();
    if (s.kind != SpaceKind::Discrete) throw std::invalid_argument("action spaces must be Discrete");
  }
}

ProjectedView project(const JointEnvSpec& spec, std::size_t agent_index) {
  if (agent_index >= spec.n_agents) {
    throw IndexOutOfRange("agent " + std::to_string(agent_index) + " of " + std::to_string(spec.n_agents));
  }
  return {agent_index, spec.obs_spaces[agent_index], spec.act_spaces[agent_index]};
}

JointEnv::JointEnv(JointEnvSpec spec, std::uint64_t master_seed)
    : spec_(std::move(spec)), master_(master_seed) {
  spec_.check();
}

std::vector<Observation> JointEnv::reset(std::optional<std::uint64_t> seed) {
  const std::uint64_t s = seed ? *seed : master_.next_u64();
  episode_rng_ = RngStream(s);
  t_ = 0;
  done_ = false;
  obs_ = on_reset(episode_rng_);
  return obs_;
}

JointStep JointEnv::step(std::span<const Action> actions) {
  if (done_) throw SteppedAfterDone("env '" + spec_.env_id + "' episode finished; call reset()");
  if (actions.size() != spec_.n_agents) {
    throw LengthMismatch("expected " + std::to_string(spec_.n_agents) + " actions, got " +
                         std::to_string(actions.size()));
  }
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (!validate(spec_.act_spaces[i], Observation{actions[i]})) {
      throw InvalidAction(i, "action " + std::to_string(actions[i]) + " not in " + to_string(spec_.act_spaces[i]));
    }
  }
  Outcome out = on_step(actions, episode_rng_);
  JointStep js;
  js.t = t_;
  js.obs = std::move(obs_);
  js.actions.assign(actions.begin(), actions.end());
  js.rewards = std::move(out.rewards);
  ++t_;
  done_ = out.terminal || t_ >= spec_.horizon;
  js.done = done_;
  obs_ = out.obs;
  js.next_obs = std::move(out.obs);
  return js;
}

void EnvRegistry::add(const std::string& env_id, Factory factory) {
  factories_[env_id] = std::move(factory);
}

bool EnvRegistry::contains(const std::string& env_id) const { return factories_.count(env_id) > 0; }

std::unique_ptr<JointEnv> EnvRegistry::make(const std::string& env_id) const {
  auto it = factories_.find(env_id);
  if (it == factories_.end()) throw UnknownEnv("'" + env_id + "'");
  return it->second();
}

std::vector<std::string> EnvRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : factories_) out.push_back(id);
  return out;
}

}  // namespace pnrl
