#include "pnrl/envs.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "pnrl/errors.hpp"

namespace pnrl {

namespace {

JointEnvSpec two_player_spec(std::string id, std::int64_t n_obs, std::int64_t n_act, std::size_t horizon,
                             RewardStructure rs) {
  JointEnvSpec spec;
  spec.env_id = std::move(id);
  spec.n_agents = 2;
  spec.obs_spaces = {SpaceSpec::discrete(n_obs), SpaceSpec::discrete(n_obs)};
  spec.act_spaces = {SpaceSpec::discrete(n_act), SpaceSpec::discrete(n_act)};
  spec.horizon = horizon;
  spec.reward_structure = rs;
  return spec;
}

}  // namespace

// ---------------------------------------------------------------- matrix

MatrixCoordEnv::MatrixCoordEnv()
    : JointEnv(two_player_spec(env_ids::kMatrixCoord, 1, 2, 1, RewardStructure::Shared)) {}

std::unique_ptr<JointEnv> MatrixCoordEnv::clone() const { return std::make_unique<MatrixCoordEnv>(*this); }

double MatrixCoordEnv::payoff(Action a0, Action a1) {
  if (a0 != a1) return 0.0;
  return a0 == kA ? 1.0 : 0.5;
}

std::vector<Observation> MatrixCoordEnv::on_reset(RngStream&) { return {std::int64_t{0}, std::int64_t{0}}; }

JointEnv::Outcome MatrixCoordEnv::on_step(std::span<const Action> actions, RngStream&) {
  const double r = payoff(actions[0], actions[1]);
  return {{std::int64_t{0}, std::int64_t{0}}, {r, r}, true};
}

// ---------------------------------------------------------------- rps

RpsEnv::RpsEnv() : JointEnv(two_player_spec(env_ids::kRps, 1, 3, 1, RewardStructure::ZeroSum)) {}

std::unique_ptr<JointEnv> RpsEnv::clone() const { return std::make_unique<RpsEnv>(*this); }

double RpsEnv::payoff(Action own, Action other) {
  if (own == other) return 0.0;
  // Paper beats Rock, Scissors beats Paper, Rock beats Scissors.
  return ((own - other + 3) % 3 == 1) ? 1.0 : -1.0;
}

std::vector<Observation> RpsEnv::on_reset(RngStream&) { return {std::int64_t{0}, std::int64_t{0}}; }

JointEnv::Outcome RpsEnv::on_step(std::span<const Action> actions, RngStream&) {
  return {{std::int64_t{0}, std::int64_t{0}}, {payoff(actions[0], actions[1]), payoff(actions[1], actions[0])}, true};
}

// ---------------------------------------------------------------- kitchen

KitchenEnv::KitchenEnv()
    : JointEnv(two_player_spec(env_ids::kKitchen, 4, 3, kHorizon, RewardStructure::Shared)) {}

std::unique_ptr<JointEnv> KitchenEnv::clone() const { return std::make_unique<KitchenEnv>(*this); }

std::int64_t KitchenEnv::encode(bool holding, bool pass_occupied) {
  return 2 * static_cast<std::int64_t>(holding) + static_cast<std::int64_t>(pass_occupied);
}

std::vector<Observation> KitchenEnv::observe() const {
  return {encode(state_.holding[0], state_.pass_occupied), encode(state_.holding[1], state_.pass_occupied)};
}

std::vector<Observation> KitchenEnv::on_reset(RngStream&) {
  state_ = State{};
  return observe();
}

JointEnv::Outcome KitchenEnv::on_step(std::span<const Action> actions, RngStream&) {
  const State before = state_;
  const bool item_in_play = before.holding[0] || before.holding[1] || before.pass_occupied;
  double reward = 0.0;

  // Agent 0: left = source, right = pass counter.
  if (actions[0] == kInteractLeft && !before.holding[0] && !item_in_play) {
    state_.holding[0] = true;
  } else if (actions[0] == kInteractRight && before.holding[0] && !before.pass_occupied) {
    state_.holding[0] = false;
    state_.pass_occupied = true;
  }

  // Agent 1: left = pass counter, right = delivery.
  if (actions[1] == kInteractLeft && !before.holding[1] && before.pass_occupied) {
    state_.holding[1] = true;
    state_.pass_occupied = false;
  } else if (actions[1] == kInteractRight && before.holding[1]) {
    state_.holding[1] = false;
    reward = 1.0;
  }

  return {observe(), {reward, reward}, false};
}

// ---------------------------------------------------------------- registry

const EnvRegistry& builtin_registry() {
  static const EnvRegistry registry = [] {
    EnvRegistry r;
    r.add(env_ids::kMatrixCoord, [] { return std::make_unique<MatrixCoordEnv>(); });
    r.add(env_ids::kRps, [] { return std::make_unique<RpsEnv>(); });
    r.add(env_ids::kKitchen, [] { return std::make_unique<KitchenEnv>(); });
    return r;
  }();
  return registry;
}

std::vector<std::string> builtin_env_ids() { return builtin_registry().ids(); }

std::unique_ptr<JointEnv> make_builtin(const std::string& env_id) { return builtin_registry().make(env_id); }

JointEnvSpec builtin_spec(const std::string& env_id) { return make_builtin(env_id)->spec(); }

// ---------------------------------------------------------------- optima

namespace {

std::vector<std::vector<Action>> joint_actions(const JointEnvSpec& spec) {
  std::vector<std::vector<Action>> out{{}};
  for (const auto& space : spec.act_spaces) {
    std::vector<std::vector<Action>> next;
    for (const auto& prefix : out) {
      for (Action a = 0; a < space.n; ++a) {
        auto v = prefix;
        v.push_back(a);
        next.push_back(std::move(v));
      }
    }
    out = std::move(next);
  }
  return out;
}

std::string state_key(const std::vector<Observation>& obs) {
  std::string key;
  for (const auto& o : obs) key += to_string(o) + "|";
  return key;
}

// Best common return over all joint action schedules. States are merged by
// joint observation within a time layer, which is exact when the joint
// observation is a full description of the env state.
double best_shared_return(const JointEnv& prototype) {
  const auto actions = joint_actions(prototype.spec());
  struct Node {
    std::unique_ptr<JointEnv> env;
    double value;
  };
  std::map<std::string, Node> layer;
  {
    auto env = prototype.clone();
    const auto obs = env->reset(0);
    layer.emplace(state_key(obs), Node{std::move(env), 0.0});
  }
  double best = -std::numeric_limits<double>::infinity();
  while (!layer.empty()) {
    std::map<std::string, Node> next;
    for (auto& [_, node] : layer) {
      for (const auto& joint : actions) {
        auto env = node.env->clone();
        const JointStep js = env->step(joint);
        const double value = node.value + js.rewards[0];
        if (js.done) {
          best = std::max(best, value);
          continue;
        }
        const std::string key = state_key(js.next_obs);
        auto it = next.find(key);
        if (it == next.end()) {
          next.emplace(key, Node{std::move(env), value});
        } else if (value > it->second.value) {
          it->second = Node{std::move(env), value};
        }
      }
    }
    layer = std::move(next);
  }
  return best;
}

double zero_sum_value(const JointEnv& prototype) {
  const auto& spec = prototype.spec();
  if (spec.n_agents != 2 || spec.horizon != 1) {
    throw NotSupported("zero-sum optimum only for one-shot two-player games");
  }
  const auto n0 = spec.act_spaces[0].n;
  const auto n1 = spec.act_spaces[1].n;
  std::vector<std::vector<double>> payoff(n0, std::vector<double>(n1));
  for (Action a = 0; a < n0; ++a) {
    for (Action b = 0; b < n1; ++b) {
      auto env = prototype.clone();
      env->reset(0);
      const std::vector<Action> joint{a, b};
      payoff[a][b] = env->step(joint).rewards[0];
    }
  }
  if (n0 != n1) throw NotSupported("zero-sum optimum only for symmetric games");
  for (Action a = 0; a < n0; ++a) {
    for (Action b = 0; b < n1; ++b) {
      if (payoff[a][b] != -payoff[b][a]) throw NotSupported("zero-sum optimum only for symmetric games");
    }
  }
  // Antisymmetric payoff matrix: the game value is zero.
  return 0.0;
}

}  // namespace

std::vector<double> optimal_return(const JointEnv& env) {
  const auto& spec = env.spec();
  switch (spec.reward_structure) {
    case RewardStructure::Shared:
      return std::vector<double>(spec.n_agents, best_shared_return(env));
    case RewardStructure::ZeroSum:
      return std::vector<double>(spec.n_agents, zero_sum_value(env));
    case RewardStructure::Mixed:
      break;
  }
  throw NotSupported("no optimum defined for mixed-reward env '" + spec.env_id + "'");
}

std::vector<double> optimal_return(const std::string& env_id) { return optimal_return(*make_builtin(env_id)); }

}  // namespace pnrl
