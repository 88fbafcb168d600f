#include "pnrl/orchestrator.hpp"

#include <cmath>
#include <stdexcept>

#include "pnrl/envs.hpp"
#include "pnrl/errors.hpp"

namespace pnrl {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Train: return "train";
    case Mode::Adapt: return "adapt";
    case Mode::AdHocEval: return "adhoc_eval";
    case Mode::CrossPlay: return "cross_play";
  }
  return "unknown";
}

Mode mode_from_string(const std::string& s) {
  if (s == "train") return Mode::Train;
  if (s == "adapt") return Mode::Adapt;
  if (s == "adhoc_eval") return Mode::AdHocEval;
  if (s == "cross_play") return Mode::CrossPlay;
  throw std::invalid_argument("mode must be one of train, adapt, adhoc_eval, cross_play; got '" + s + "'");
}

std::vector<JointStep> run_episode(JointEnv& env, std::span<Agent* const> seats, std::uint64_t seed, bool record) {
  const std::size_t n = env.spec().n_agents;
  if (seats.size() != n) throw LengthMismatch("one agent per seat required");
  std::vector<JointStep> steps;
  std::vector<Observation> obs = env.reset(seed);
  std::vector<Action> actions(n);
  std::vector<double> log_probs(n);
  while (!env.done()) {
    for (std::size_t i = 0; i < n; ++i) {
      const ActResult r = seats[i]->act(obs[i]);
      actions[i] = r.action;
      log_probs[i] = r.log_prob;
    }
    JointStep js = env.step(actions);
    if (record) {
      for (std::size_t i = 0; i < n; ++i) {
        seats[i]->record(Transition{js.obs[i], js.actions[i], js.rewards[i], js.next_obs[i], js.done, log_probs[i]});
      }
    }
    obs = js.next_obs;
    steps.push_back(std::move(js));
  }
  return steps;
}

namespace {

std::vector<double> episode_return(const std::vector<JointStep>& steps, std::size_t n) {
  std::vector<double> ret(n, 0.0);
  for (const auto& js : steps) {
    for (std::size_t i = 0; i < n; ++i) ret[i] += js.rewards[i];
  }
  return ret;
}

void summarize(EvalResult& result, std::size_t n) {
  result.episodes = result.episode_returns.size();
  result.mean.assign(n, 0.0);
  result.std.assign(n, 0.0);
  if (result.episodes == 0) return;
  const auto count = static_cast<double>(result.episodes);
  for (const auto& r : result.episode_returns) {
    for (std::size_t i = 0; i < n; ++i) result.mean[i] += r[i];
  }
  for (auto& m : result.mean) m /= count;
  for (const auto& r : result.episode_returns) {
    for (std::size_t i = 0; i < n; ++i) result.std[i] += (r[i] - result.mean[i]) * (r[i] - result.mean[i]);
  }
  for (auto& s : result.std) s = std::sqrt(s / count);
}

void reject_learning(std::span<Agent* const> agents) {
  for (const Agent* a : agents) {
    if (a->learnable() && a->updates_enabled()) {
      throw UpdatesEnabledInEval("agent at seat " + std::to_string(a->view().agent_index) +
                                 " is learnable with updates enabled");
    }
  }
}

}  // namespace

EvalResult evaluate(JointEnv& env, std::span<Agent* const> seats, std::size_t episodes, std::uint64_t seed) {
  reject_learning(seats);
  RngStream rng = RngStream(seed).split(streams::kEval);
  EvalResult result;
  for (std::size_t e = 0; e < episodes; ++e) {
    const auto steps = run_episode(env, seats, rng.next_u64(), false);
    result.episode_returns.push_back(episode_return(steps, seats.size()));
  }
  summarize(result, seats.size());
  return result;
}

// ---------------------------------------------------------------- session

Session::Session(std::unique_ptr<JointEnv> env, std::unique_ptr<Agent> ego, std::uint64_t master_seed, Mode mode)
    : env_(std::move(env)), ego_(std::move(ego)), master_seed_(master_seed), mode_(mode) {
  const ProjectedView seat0 = project(env_->spec(), 0);
  if (!spaces_match(ego_->view(), seat0)) {
    throw SpaceMismatch("ego spaces " + to_string(ego_->view().obs_space) + "/" + to_string(ego_->view().act_space) +
                        " differ from seat 0 projection " + to_string(seat0.obs_space) + "/" +
                        to_string(seat0.act_space));
  }
  ego_->rebind(seat0);
  if (auto* learner = dynamic_cast<LearningAgent*>(ego_.get())) learner->set_role(AgentRole::Ego);
  const RngStream pools = RngStream(master_seed_).split(streams::kPools);
  for (std::size_t seat = 0; seat < env_->spec().n_agents; ++seat) {
    pools_.emplace_back(Sampling::RoundRobin, pools.split(seat));
  }
}

void Session::add_partner_agent(std::size_t seat, std::unique_ptr<Agent> agent) {
  if (seat == 0) throw IndexOutOfRange("seat 0 is the ego seat; partners go to seats >= 1");
  const ProjectedView view = project(env_->spec(), seat);
  if (!spaces_match(agent->view(), view)) {
    throw SpaceMismatch("agent spaces " + to_string(agent->view().obs_space) + "/" +
                        to_string(agent->view().act_space) + " differ from seat " + std::to_string(seat) +
                        " projection " + to_string(view.obs_space) + "/" + to_string(view.act_space));
  }
  agent->rebind(view);
  if (auto* learner = dynamic_cast<LearningAgent*>(agent.get())) learner->set_role(AgentRole::Partner);
  pools_[seat].add(std::move(agent));
}

void Session::set_sampling(std::size_t seat, Sampling sampling) {
  if (seat == 0 || seat >= pools_.size()) throw IndexOutOfRange("seat " + std::to_string(seat));
  if (!pools_[seat].empty()) throw std::logic_error("set_sampling must precede add_partner_agent for a seat");
  pools_[seat] = PartnerPool(sampling, RngStream(master_seed_).split(streams::kPools).split(seat));
}

PartnerPool& Session::pool(std::size_t seat) {
  if (seat == 0 || seat >= pools_.size()) throw IndexOutOfRange("seat " + std::to_string(seat));
  return pools_[seat];
}

std::vector<Agent*> Session::all_agents() {
  std::vector<Agent*> out{ego_.get()};
  for (std::size_t seat = 1; seat < pools_.size(); ++seat) {
    for (std::size_t k = 0; k < pools_[seat].size(); ++k) out.push_back(&pools_[seat].at(k));
  }
  return out;
}

void Session::check_ready() const {
  for (std::size_t seat = 1; seat < pools_.size(); ++seat) {
    if (pools_[seat].empty()) throw ConfigError("seats[" + std::to_string(seat - 1) + "]", "no partner agent");
  }
}

std::vector<Agent*> Session::select(std::size_t episode, std::vector<std::size_t>& indices) {
  std::vector<Agent*> seats{ego_.get()};
  indices.assign(1, 0);
  for (std::size_t seat = 1; seat < pools_.size(); ++seat) {
    seats.push_back(&pools_[seat].next_partner(episode));
    indices.push_back(pools_[seat].cursor());
  }
  return seats;
}

SessionStats Session::learn(std::size_t total_timesteps, const SessionHooks& hooks) {
  if (mode_ != Mode::Train && mode_ != Mode::Adapt) {
    throw ConfigError("mode", "learn() requires train or adapt mode, session is " + to_string(mode_));
  }
  if (total_timesteps < 1) throw ConfigError("total_timesteps", "must be >= 1");
  if (!ego_->learnable() || !ego_->updates_enabled()) throw ConfigError("ego", "must be a learning agent");
  check_ready();
  if (mode_ == Mode::Adapt) {
    for (std::size_t seat = 1; seat < pools_.size(); ++seat) {
      for (std::size_t k = 0; k < pools_[seat].size(); ++k) {
        const Agent& a = pools_[seat].at(k);
        if (a.learnable() && a.updates_enabled()) {
          throw ConfigError("seats[" + std::to_string(seat - 1) + "].partners[" + std::to_string(k) + "]",
                            "adapt mode requires frozen partners");
        }
      }
    }
  }

  const std::size_t n = n_seats();
  RngStream env_rng = RngStream(master_seed_).split(streams::kEnv);
  SessionStats stats;
  std::vector<std::size_t> indices;
  while (stats.env_steps < total_timesteps) {
    if (hooks.should_stop && hooks.should_stop()) {
      stats.cancelled = true;
      break;
    }
    const std::size_t episode = stats.episodes;
    const std::vector<Agent*> seats = select(episode, indices);
    for (std::size_t seat = 1; seat < n; ++seat) stats.selections.push_back({episode, seat, indices[seat]});
    const std::uint64_t seed = env_rng.next_u64();
    const auto steps = run_episode(*env_, seats, seed, true);
    stats.env_steps += steps.size();
    ++stats.episodes;
    stats.episode_returns.push_back(episode_return(steps, n));
    if (hooks.on_episode) {
      EpisodeReport report{episode, stats.env_steps, seed, &steps, stats.episode_returns.back(), indices,
                           std::vector<const Agent*>(seats.begin(), seats.end())};
      hooks.on_episode(report);
    }
  }

  stats.update_counts.assign(n, {});
  stats.update_counts[0].push_back(ego_->update_count());
  for (std::size_t seat = 1; seat < n; ++seat) {
    for (std::size_t k = 0; k < pools_[seat].size(); ++k) stats.update_counts[seat].push_back(pools_[seat].at(k).update_count());
  }
  return stats;
}

EvalResult Session::evaluate(std::size_t episodes, const SessionHooks& hooks) {
  check_ready();
  const std::vector<Agent*> agents = all_agents();
  reject_learning(agents);
  const std::size_t n = n_seats();
  RngStream env_rng = RngStream(master_seed_).split(streams::kEval);
  EvalResult result;
  std::vector<std::size_t> indices;
  std::size_t env_steps = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    if (hooks.should_stop && hooks.should_stop()) break;
    const std::vector<Agent*> seats = select(e, indices);
    const std::uint64_t seed = env_rng.next_u64();
    const auto steps = run_episode(*env_, seats, seed, false);
    env_steps += steps.size();
    result.episode_returns.push_back(episode_return(steps, n));
    if (hooks.on_episode) {
      EpisodeReport report{e, env_steps, seed, &steps, result.episode_returns.back(), indices,
                           std::vector<const Agent*>(seats.begin(), seats.end())};
      hooks.on_episode(report);
    }
  }
  summarize(result, n);
  return result;
}

// ---------------------------------------------------------------- cross-play

CrossPlayMatrix cross_play(std::span<const Policy> policies, std::span<const std::string> policy_ids,
                           const JointEnv& prototype, std::size_t eval_episodes, std::uint64_t master_seed) {
  const JointEnvSpec& spec = prototype.spec();
  if (spec.n_agents != 2) throw NotSupported("cross-play needs a two-player environment");
  if (policies.size() < 2) throw std::invalid_argument("cross-play needs at least two policies");
  if (policy_ids.size() != policies.size()) throw LengthMismatch("one id per policy");
  const ProjectedView seat0 = project(spec, 0);
  const ProjectedView seat1 = project(spec, 1);
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const ProjectedView v{0, policies[i].obs_space, policies[i].act_space};
    if (!spaces_match(v, seat0) || !spaces_match(v, seat1)) {
      throw SpaceMismatch("policy '" + policy_ids[i] + "' does not fit both seats of '" + spec.env_id + "'");
    }
  }
  const std::size_t m = policies.size();
  CrossPlayMatrix out;
  out.policy_ids.assign(policy_ids.begin(), policy_ids.end());
  out.episodes = eval_episodes;
  out.mean_returns.assign(m, std::vector<std::vector<double>>(m));
  out.std_returns.assign(m, std::vector<std::vector<double>>(m));
  const RngStream root(master_seed);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const RngStream cell = root.split(streams::kEval).split(i * m + j);
      StaticPolicyAgent row(0, policies[i], cell.split(0));
      StaticPolicyAgent col(1, policies[j], cell.split(1));
      Agent* seats[] = {&row, &col};
      auto env = prototype.clone();
      const EvalResult r = evaluate(*env, seats, eval_episodes, cell.split(2).next_u64());
      out.mean_returns[i][j] = r.mean;
      out.std_returns[i][j] = r.std;
    }
  }
  return out;
}

CrossPlayMatrix cross_play(std::span<const Policy> policies, const std::string& env_id, std::size_t eval_episodes,
                           std::uint64_t master_seed) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < policies.size(); ++i) ids.push_back("policy" + std::to_string(i));
  return cross_play(policies, ids, *make_builtin(env_id), eval_episodes, master_seed);
}

}  // namespace pnrl
