#include "pnrl/learners.hpp"

#include <algorithm>
#include <cmath>

#include "pnrl/errors.hpp"

namespace pnrl {

GaeResult returns_and_advantages(std::span<const double> rewards, std::span<const double> values,
                                 std::span<const std::uint8_t> dones, double bootstrap_value, double gamma,
                                 double lambda) {
  const std::size_t n = rewards.size();
  if (n == 0) throw LengthMismatch("empty trajectory");
  if (values.size() != n || dones.size() != n) {
    throw LengthMismatch("rewards/values/dones lengths " + std::to_string(n) + "/" + std::to_string(values.size()) +
                         "/" + std::to_string(dones.size()));
  }
  GaeResult out;
  out.returns.resize(n);
  out.advantages.resize(n);
  double next_adv = 0.0;
  double next_value = bootstrap_value;
  for (std::size_t k = n; k-- > 0;) {
    const double not_done = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_value * not_done - values[k];
    next_adv = delta + gamma * lambda * not_done * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + values[k];
    next_value = values[k];
  }
  return out;
}

namespace {

struct SampleGrad {
  std::vector<double> d_logits;
  double d_value = 0.0;
};

// Per-sample objective and its gradient with respect to the head outputs.
SampleGrad sample_terms(const Policy& policy, const std::vector<double>& logits, double value, Action action,
                        double advantage, double ret, PgTerms& terms) {
  const std::size_t n = logits.size();
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double lse = mx + std::log(z);
  std::vector<double> logp(n), p(n);
  double entropy = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    logp[j] = logits[j] - lse;
    p[j] = std::exp(logp[j]);
    entropy -= p[j] * logp[j];
  }
  const auto a = static_cast<std::size_t>(action);
  terms.log_prob_advantage += logp[a] * advantage;
  terms.entropy += entropy;

  SampleGrad g;
  g.d_logits.resize(n);
  const double ent = policy.hp.entropy_coef;
  for (std::size_t j = 0; j < n; ++j) {
    g.d_logits[j] = advantage * ((j == a ? 1.0 : 0.0) - p[j]) - ent * p[j] * (logp[j] + entropy);
  }
  if (policy.params.has_critic) {
    const double err = value - ret;
    terms.value_error += err * err;
    g.d_value = -2.0 * policy.hp.value_coef * err;
  }
  return g;
}

void check_batch(const PgBatch& batch) {
  const std::size_t n = batch.obs.size();
  if (batch.actions.size() != n || batch.advantages.size() != n || batch.returns.size() != n) {
    throw LengthMismatch("policy-gradient batch fields differ in length");
  }
}

}  // namespace

std::vector<double> pg_gradient(const Policy& policy, const PgBatch& batch, PgTerms* terms_out) {
  check_batch(batch);
  const PolicyParams& pp = policy.params;
  std::vector<double> grad(pp.values.size(), 0.0);
  PgTerms terms;
  for (std::size_t t = 0; t < batch.obs.size(); ++t) {
    if (!validate(policy.obs_space, batch.obs[t])) throw InvalidObservation(to_string(batch.obs[t]));
    if (pp.kind == ParamKind::Table) {
      const auto s = static_cast<std::size_t>(std::get<std::int64_t>(batch.obs[t]));
      const double* row = pp.values.data() + s * pp.n_actions;
      const std::vector<double> logits(row, row + pp.n_actions);
      const double value = pp.has_critic ? pp.values[pp.n_states * pp.n_actions + s] : 0.0;
      const SampleGrad g =
          sample_terms(policy, logits, value, batch.actions[t], batch.advantages[t], batch.returns[t], terms);
      for (std::size_t j = 0; j < pp.n_actions; ++j) grad[s * pp.n_actions + j] += g.d_logits[j];
      if (pp.has_critic) grad[pp.n_states * pp.n_actions + s] += g.d_value;
      continue;
    }
    mlp::Cache cache;
    const auto x = features(policy.obs_space, batch.obs[t]);
    const auto y = mlp::forward(pp.layers, pp.values, x, &cache);
    const std::vector<double> logits(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(pp.n_actions));
    const double value = pp.has_critic ? y[pp.n_actions] : 0.0;
    const SampleGrad g =
        sample_terms(policy, logits, value, batch.actions[t], batch.advantages[t], batch.returns[t], terms);
    std::vector<double> d_out = g.d_logits;
    if (pp.has_critic) d_out.push_back(g.d_value);
    mlp::backward(pp.layers, pp.values, cache, d_out, grad);
  }
  if (terms_out) *terms_out = terms;
  return grad;
}

double pg_objective(const Policy& policy, const PgBatch& batch, PgTerms* terms_out) {
  check_batch(batch);
  PgTerms terms;
  for (std::size_t t = 0; t < batch.obs.size(); ++t) {
    const HeadOutput head = evaluate_heads(policy, batch.obs[t]);
    sample_terms(policy, head.logits, head.value, batch.actions[t], batch.advantages[t], batch.returns[t], terms);
  }
  if (terms_out) *terms_out = terms;
  const double value_term = policy.params.has_critic ? policy.hp.value_coef * terms.value_error : 0.0;
  return terms.log_prob_advantage + policy.hp.entropy_coef * terms.entropy - value_term;
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

UpdateReport q_update(Policy& policy, std::span<const Transition> transitions) {
  PolicyParams& pp = policy.params;
  std::vector<double> q = pp.values;
  const double alpha = policy.hp.lr;
  const double gamma = policy.hp.gamma;
  double sq = 0.0;
  double step_sq = 0.0;
  for (const auto& tr : transitions) {
    if (!validate(policy.obs_space, tr.obs) || !validate(policy.obs_space, tr.next_obs)) {
      throw InvalidObservation(to_string(tr.obs));
    }
    const auto s = static_cast<std::size_t>(std::get<std::int64_t>(tr.obs));
    const auto s2 = static_cast<std::size_t>(std::get<std::int64_t>(tr.next_obs));
    const auto a = static_cast<std::size_t>(tr.action);
    const double* next_row = q.data() + s2 * pp.n_actions;
    const double next_max = *std::max_element(next_row, next_row + pp.n_actions);
    const double target = tr.reward + gamma * next_max * (tr.done ? 0.0 : 1.0);
    const double td = target - q[s * pp.n_actions + a];
    q[s * pp.n_actions + a] += alpha * td;
    sq += td * td;
    step_sq += (alpha * td) * (alpha * td);
  }
  if (!all_finite(q) || !std::isfinite(sq)) throw NonFiniteGradient("TD update produced non-finite Q-values");
  pp.values = std::move(q);
  UpdateReport r;
  r.value_loss = sq / static_cast<double>(transitions.size());
  r.grad_norm = std::sqrt(step_sq);
  return r;
}

UpdateReport pg_update(Policy& policy, std::span<const Transition> transitions) {
  const std::size_t n = transitions.size();
  std::vector<double> rewards(n), values(n, 0.0);
  std::vector<std::uint8_t> dones(n);
  PgBatch batch;
  batch.obs.reserve(n);
  batch.actions.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& tr = transitions[t];
    rewards[t] = tr.reward;
    dones[t] = tr.done ? 1 : 0;
    batch.obs.push_back(tr.obs);
    batch.actions.push_back(tr.action);
  }
  const bool critic = policy.params.has_critic;
  double bootstrap = 0.0;
  double lambda = 1.0;
  if (critic) {
    for (std::size_t t = 0; t < n; ++t) values[t] = value_estimate(policy, transitions[t].obs);
    if (!transitions.back().done) bootstrap = value_estimate(policy, transitions.back().next_obs);
    lambda = policy.hp.lambda;
  }
  GaeResult gae = returns_and_advantages(rewards, values, dones, bootstrap, policy.hp.gamma, lambda);
  batch.advantages = critic ? std::move(gae.advantages) : gae.returns;
  batch.returns = std::move(gae.returns);

  PgTerms terms;
  const std::vector<double> grad = pg_gradient(policy, batch, &terms);
  double norm_sq = 0.0;
  for (double g : grad) norm_sq += g * g;
  if (!all_finite(grad) || !std::isfinite(norm_sq)) throw NonFiniteGradient("policy gradient has non-finite entries");

  std::vector<double> next = policy.params.values;
  for (std::size_t k = 0; k < next.size(); ++k) next[k] += policy.hp.lr * grad[k];
  if (!all_finite(next)) throw NonFiniteGradient("gradient step produced non-finite parameters");
  policy.params.values = std::move(next);

  const auto denom = static_cast<double>(n);
  UpdateReport r;
  r.policy_loss = -terms.log_prob_advantage / denom;
  r.value_loss = critic ? terms.value_error / denom : 0.0;
  r.entropy = terms.entropy / denom;
  r.grad_norm = std::sqrt(norm_sq);
  return r;
}

}  // namespace

UpdateReport update(Policy& policy, std::span<const Transition> transitions, std::size_t update_index) {
  if (transitions.empty()) throw LengthMismatch("update on an empty buffer");
  UpdateReport r = policy.algo == Algo::TabularQ ? q_update(policy, transitions) : pg_update(policy, transitions);
  r.update_index = update_index;
  return r;
}

}  // namespace pnrl
