#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pnrl/rng.hpp"
#include "pnrl/spaces.hpp"

namespace pnrl {

enum class Algo { TabularQ, Reinforce, ActorCritic };

// Config ids: "q", "reinforce", "a2c". "ppo" is accepted as an alias of
// "a2c" (no clipped objective is implemented).
std::string algo_id(Algo algo);
Algo algo_from_id(const std::string& id);
bool is_algo_id(const std::string& id);

enum class ParamKind { Table, Mlp };

std::string to_string(ParamKind kind);
ParamKind param_kind_from_string(const std::string& s);

struct Hyperparams {
  double gamma = 0.99;
  double lambda = 0.95;
  double lr = 3e-3;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double epsilon = 0.1;
  std::size_t batch = 64;
  std::optional<ParamKind> net;  // unset: Table for Discrete obs, Mlp for Box
  std::size_t hidden = 32;

  static Hyperparams defaults(Algo algo);

  // Throws std::invalid_argument naming the offending field.
  void check() const;

  // Applies one "key=value" override; throws std::invalid_argument.
  void set(const std::string& key, const std::string& value);

  nlohmann::json to_json() const;
  static Hyperparams from_json(const nlohmann::json& j);

  bool operator==(const Hyperparams&) const = default;
};

// Flat parameter storage.
//  Table: n_states x n_actions preferences (or Q-values), row-major,
//         followed by n_states critic values when has_critic.
//  Mlp:   layers [in, h, h, out]; per layer W (out x in, row-major) then b.
//         With a critic the last output unit is the state value.
struct PolicyParams {
  ParamKind kind = ParamKind::Table;
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<std::size_t> layers;
  bool has_critic = false;
  std::vector<double> values;

  std::size_t expected_size() const;
  bool operator==(const PolicyParams&) const = default;
};

// A policy is parameters plus everything needed to turn them into an
// action distribution.
struct Policy {
  Algo algo = Algo::Reinforce;
  Hyperparams hp;
  SpaceSpec obs_space;
  SpaceSpec act_space;
  PolicyParams params;

  bool operator==(const Policy&) const = default;
};

Policy init_policy(Algo algo, const Hyperparams& hp, const SpaceSpec& obs_space, const SpaceSpec& act_space,
                   RngStream& rng);

// Always plays `action` (greedy table, epsilon 0).
Policy constant_policy(const SpaceSpec& obs_space, const SpaceSpec& act_space, Action action);
// Uniform over actions in every state.
Policy uniform_policy(const SpaceSpec& obs_space, const SpaceSpec& act_space);

// Throws InvalidObservation.
std::vector<double> action_distribution(const Policy& policy, const Observation& obs);
// Critic output; throws NotSupported unless the policy has a critic.
double value_estimate(const Policy& policy, const Observation& obs);

// Raw head outputs for one observation: action logits (or Q-values) and,
// when present, the critic value.
struct HeadOutput {
  std::vector<double> logits;
  double value = 0.0;
};
HeadOutput evaluate_heads(const Policy& policy, const Observation& obs);

// Canonical little-endian byte image of the parameters and shape; used for
// hashing and as the policy file payload.
std::string serialize_params(const PolicyParams& params);
std::string parameter_hash(const PolicyParams& params);

namespace mlp {

struct Cache {
  std::vector<std::vector<double>> activations;  // per layer input, plus output
};

std::size_t param_count(std::span<const std::size_t> layers);
void init(std::span<const std::size_t> layers, std::span<double> params, RngStream& rng);
std::vector<double> forward(std::span<const std::size_t> layers, std::span<const double> params,
                            std::span<const double> input, Cache* cache = nullptr);
// Accumulates d(objective)/d(params) into `grad` given d(objective)/d(output).
void backward(std::span<const std::size_t> layers, std::span<const double> params, const Cache& cache,
              std::span<const double> grad_output, std::span<double> grad);

}  // namespace mlp

}  // namespace pnrl
