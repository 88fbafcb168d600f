#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pnrl/agent.hpp"
#include "pnrl/env.hpp"

namespace pnrl {

enum class Mode { Train, Adapt, AdHocEval, CrossPlay };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

struct SelectionRecord {
  std::size_t episode = 0;
  std::size_t seat = 0;
  std::size_t partner = 0;
  bool operator==(const SelectionRecord&) const = default;
};

struct SessionStats {
  std::size_t env_steps = 0;
  std::size_t episodes = 0;
  // update_counts[seat][k]; seat 0 holds the ego alone.
  std::vector<std::vector<std::size_t>> update_counts;
  // episode_returns[episode][seat]
  std::vector<std::vector<double>> episode_returns;
  std::vector<SelectionRecord> selections;
  bool cancelled = false;

  bool operator==(const SessionStats&) const = default;
};

struct EpisodeReport {
  std::size_t episode = 0;
  std::size_t env_steps = 0;  // cumulative, including this episode
  std::uint64_t seed = 0;
  const std::vector<JointStep>* steps = nullptr;
  std::vector<double> returns;              // per seat
  std::vector<std::size_t> partner_indices;  // per seat; 0 for the ego seat
  std::vector<const Agent*> agents;          // per seat, as played
};

struct SessionHooks {
  std::function<void(const EpisodeReport&)> on_episode;
  // Polled at every episode boundary; true stops the run.
  std::function<bool()> should_stop;
};

struct EvalResult {
  std::size_t episodes = 0;
  std::vector<double> mean;  // per seat
  std::vector<double> std;   // per seat (population standard deviation)
  std::vector<std::vector<double>> episode_returns;
};

// Plays one episode; every seat acts on its own projected observation and
// learning seats receive their projected transition in step order.
std::vector<JointStep> run_episode(JointEnv& env, std::span<Agent* const> seats, std::uint64_t seed,
                                   bool record = true);

// Seeded evaluation without recording. Throws UpdatesEnabledInEval if any
// seat is learnable with updates on.
EvalResult evaluate(JointEnv& env, std::span<Agent* const> seats, std::size_t episodes, std::uint64_t seed);

// One ego plus a partner pool per remaining seat over one joint env.
// The ego's learn() drives a single joint trajectory that feeds every
// learning agent's buffer.
class Session {
 public:
  Session(std::unique_ptr<JointEnv> env, std::unique_ptr<Agent> ego, std::uint64_t master_seed,
          Mode mode = Mode::Train);

  // seat >= 1. Throws SpaceMismatch / IndexOutOfRange.
  void add_partner_agent(std::size_t seat, std::unique_ptr<Agent> agent);
  void set_sampling(std::size_t seat, Sampling sampling);

  // Train/Adapt. Runs whole episodes until at least total_timesteps joint
  // steps have been taken (or should_stop fires).
  SessionStats learn(std::size_t total_timesteps, const SessionHooks& hooks = {});

  // AdHocEval: round-robin/uniform partner selection as in learn(), no
  // recording, no updates.
  EvalResult evaluate(std::size_t episodes, const SessionHooks& hooks = {});

  Mode mode() const { return mode_; }
  JointEnv& env() { return *env_; }
  Agent& ego() { return *ego_; }
  const Agent& ego() const { return *ego_; }
  PartnerPool& pool(std::size_t seat);
  std::size_t n_seats() const { return env_->spec().n_agents; }

  // Every agent in the session, ego first, then pools seat by seat.
  std::vector<Agent*> all_agents();

 private:
  void check_ready() const;
  std::vector<Agent*> select(std::size_t episode, std::vector<std::size_t>& indices);

  std::unique_ptr<JointEnv> env_;
  std::unique_ptr<Agent> ego_;
  std::uint64_t master_seed_;
  Mode mode_;
  std::vector<PartnerPool> pools_;  // index = seat; pools_[0] unused
};

struct CrossPlayMatrix {
  std::vector<std::string> policy_ids;
  std::size_t episodes = 0;
  // mean_returns[i][j][seat]: policy i at seat 0 against policy j at seat 1.
  std::vector<std::vector<std::vector<double>>> mean_returns;
  std::vector<std::vector<std::vector<double>>> std_returns;
};

// Every ordered pair (i at seat 0, j at seat 1) evaluated as an independent
// seeded run. Two-player environments only. Throws SpaceMismatch.
CrossPlayMatrix cross_play(std::span<const Policy> policies, std::span<const std::string> policy_ids,
                           const JointEnv& prototype, std::size_t eval_episodes, std::uint64_t master_seed);
CrossPlayMatrix cross_play(std::span<const Policy> policies, const std::string& env_id, std::size_t eval_episodes,
                           std::uint64_t master_seed = 0);

}  // namespace pnrl
