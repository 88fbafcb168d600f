#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pnrl/policy.hpp"
#include "pnrl/spaces.hpp"

namespace pnrl {

// Seat-local projection of one JointStep.
struct Transition {
  Observation obs;
  Action action = 0;
  double reward = 0.0;
  Observation next_obs;
  bool done = false;
  double log_prob = 0.0;

  bool operator==(const Transition&) const = default;
};

struct GaeResult {
  std::vector<double> returns;
  std::vector<double> advantages;
};

// Generalised advantage estimation over a (possibly multi-episode) segment:
//   delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
//   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
//   R_t     = A_t + V(s_t)
// V(s_{t+1}) is values[t+1] inside the segment and `bootstrap_value` after
// the last transition. Throws LengthMismatch.
GaeResult returns_and_advantages(std::span<const double> rewards, std::span<const double> values,
                                 std::span<const std::uint8_t> dones, double bootstrap_value, double gamma,
                                 double lambda);

// Inputs of one policy-gradient step, with advantages and return targets
// already fixed.
struct PgBatch {
  std::vector<Observation> obs;
  std::vector<Action> actions;
  std::vector<double> advantages;
  std::vector<double> returns;
};

struct PgTerms {
  double log_prob_advantage = 0.0;  // sum log pi(a|s) * A
  double entropy = 0.0;             // sum H(pi(.|s))
  double value_error = 0.0;         // sum (V(s) - R)^2, critic only
};

// Objective maximised by the policy-gradient learners, summed over the batch:
//   J = sum_t [ log pi(a_t|s_t) A_t + entropy_coef H_t - value_coef (V(s_t) - R_t)^2 ]
// The value term is present only for policies with a critic.
double pg_objective(const Policy& policy, const PgBatch& batch, PgTerms* terms = nullptr);
std::vector<double> pg_gradient(const Policy& policy, const PgBatch& batch, PgTerms* terms = nullptr);

struct UpdateReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;
  std::size_t update_index = 0;
};

// One learner step over a full buffer, in place. TabularQ applies the TD
// rule per transition in order; Reinforce and ActorCritic take one gradient
// ascent step on pg_objective (plain SGD). ActorCritic bootstraps from
// V(next_obs) when the final transition is not terminal.
// Throws NonFiniteGradient; `policy` is left untouched in that case.
UpdateReport update(Policy& policy, std::span<const Transition> transitions, std::size_t update_index);

}  // namespace pnrl
