#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "pnrl/env.hpp"

namespace pnrl {

namespace env_ids {
inline constexpr const char* kMatrixCoord = "matrix.coord";
inline constexpr const char* kRps = "rps";
inline constexpr const char* kKitchen = "kitchen.pass";
}  // namespace env_ids

// Two-player coordination game, one step, constant observation.
// Actions: A = 0, B = 1. (A,A) pays 1 each, (B,B) 0.5 each, mismatch 0.
class MatrixCoordEnv : public JointEnv {
 public:
  enum Move : Action { kA = 0, kB = 1 };

  MatrixCoordEnv();
  std::unique_ptr<JointEnv> clone() const override;

  static double payoff(Action a0, Action a1);

 protected:
  std::vector<Observation> on_reset(RngStream& rng) override;
  Outcome on_step(std::span<const Action> actions, RngStream& rng) override;
};

// Rock-paper-scissors: win +1, lose -1, tie 0.
class RpsEnv : public JointEnv {
 public:
  enum Move : Action { kRock = 0, kPaper = 1, kScissors = 2 };

  RpsEnv();
  std::unique_ptr<JointEnv> clone() const override;

  // Reward of the player choosing `own` against `other`.
  static double payoff(Action own, Action other);

 protected:
  std::vector<Observation> on_reset(RngStream& rng) override;
  Outcome on_step(std::span<const Action> actions, RngStream& rng) override;
};

// 1x5 strip: [source | agent-0 station | pass counter | agent-1 station | delivery].
// Agents are stationary and interact with the cell to their left or right.
// A single item is in play at a time: the source only hands out an item
// when neither agent holds one and the pass counter is empty. Interactions
// are resolved against the state at the start of the step.
//
// Observation for agent i: Discrete(4), index = 2 * holding_i + pass_occupied.
class KitchenEnv : public JointEnv {
 public:
  enum Move : Action { kInteractLeft = 0, kInteractRight = 1, kStay = 2 };
  static constexpr std::size_t kHorizon = 40;

  struct State {
    std::array<bool, 2> holding{false, false};
    bool pass_occupied = false;
    bool operator==(const State&) const = default;
  };

  KitchenEnv();
  std::unique_ptr<JointEnv> clone() const override;

  const State& state() const { return state_; }
  static std::int64_t encode(bool holding, bool pass_occupied);

 protected:
  std::vector<Observation> on_reset(RngStream& rng) override;
  Outcome on_step(std::span<const Action> actions, RngStream& rng) override;

 private:
  std::vector<Observation> observe() const;
  State state_;
};

const EnvRegistry& builtin_registry();
std::vector<std::string> builtin_env_ids();
// Throws UnknownEnv.
std::unique_ptr<JointEnv> make_builtin(const std::string& env_id);
JointEnvSpec builtin_spec(const std::string& env_id);

// Per-agent value of the optimal joint policy, by exhaustive search:
// shared-reward envs maximise the common return over all joint action
// schedules up to the horizon; symmetric zero-sum one-shot games return
// their game value. Throws UnknownEnv.
std::vector<double> optimal_return(const std::string& env_id);
std::vector<double> optimal_return(const JointEnv& env);

}  // namespace pnrl
