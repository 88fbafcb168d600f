#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pnrl/env.hpp"
#include "pnrl/learners.hpp"
#include "pnrl/policy.hpp"
#include "pnrl/rng.hpp"

namespace pnrl {

enum class AgentRole { Ego, Partner };

struct ActResult {
  Action action = 0;
  double log_prob = 0.0;
};

// Draws an action from `dist` with one uniform variate.
ActResult sample_action(const std::vector<double>& dist, RngStream& rng);

// An agent occupies one seat of a joint environment and acts on that seat's
// projected observations with its own random stream.
class Agent {
 public:
  virtual ~Agent() = default;

  const ProjectedView& view() const { return view_; }
  // Moves the agent to another seat with identical spaces.
  void rebind(const ProjectedView& view);

  // Throws InvalidObservation.
  virtual ActResult act(const Observation& obs) = 0;
  virtual void record(const Transition& transition) = 0;

  virtual const Policy& policy() const = 0;
  virtual const RngStream& rng() const = 0;
  virtual bool learnable() const { return false; }
  virtual bool updates_enabled() const { return false; }
  virtual std::size_t update_count() const { return 0; }

  std::vector<double> action_distribution(const Observation& obs) const;
  std::string parameter_hash() const;

 protected:
  explicit Agent(ProjectedView view) : view_(std::move(view)) {}

 private:
  ProjectedView view_;
};

// Same observation/action spaces; seat index is not compared.
bool spaces_match(const ProjectedView& a, const ProjectedView& b);

// Policy + on-policy rollout buffer + learner. When the buffer reaches the
// batch size the learner step fires and the buffer is cleared; with updates
// disabled the buffer still cycles but the parameters never change.
class LearningAgent : public Agent {
 public:
  LearningAgent(std::size_t seat, Policy policy, RngStream rng, AgentRole role = AgentRole::Partner);

  ActResult act(const Observation& obs) override;
  void record(const Transition& transition) override;

  const Policy& policy() const override { return policy_; }
  const RngStream& rng() const override { return rng_; }
  bool learnable() const override { return true; }
  bool updates_enabled() const override { return updates_enabled_; }
  std::size_t update_count() const override { return update_count_; }

  void set_updates_enabled(bool enabled) { updates_enabled_ = enabled; }
  AgentRole role() const { return role_; }
  void set_role(AgentRole role) { role_ = role; }

  std::size_t batch_size() const { return policy_.hp.batch; }
  const std::vector<Transition>& buffer() const { return buffer_; }
  std::size_t transitions_recorded() const { return recorded_; }
  const std::optional<UpdateReport>& last_report() const { return last_report_; }

 private:
  Policy policy_;
  RngStream rng_;
  AgentRole role_;
  bool updates_enabled_ = true;
  std::vector<Transition> buffer_;
  std::size_t update_count_ = 0;
  std::size_t recorded_ = 0;
  std::optional<UpdateReport> last_report_;
};

// Wraps a fixed policy. Never records, never updates.
class StaticPolicyAgent : public Agent {
 public:
  StaticPolicyAgent(std::size_t seat, Policy policy, RngStream rng);

  ActResult act(const Observation& obs) override;
  void record(const Transition&) override {}

  const Policy& policy() const override { return policy_; }
  const RngStream& rng() const override { return rng_; }

 private:
  const Policy policy_;
  RngStream rng_;
};

// Snapshot of `agent`'s current policy as an immutable agent on the same seat.
std::unique_ptr<StaticPolicyAgent> freeze(const Agent& agent);

enum class Sampling { RoundRobin, UniformRandom };

std::string to_string(Sampling s);
Sampling sampling_from_string(const std::string& s);

// Candidate occupants of one partner seat.
class PartnerPool {
 public:
  explicit PartnerPool(Sampling sampling = Sampling::RoundRobin, RngStream rng = RngStream{});

  void add(std::unique_ptr<Agent> agent);

  // RoundRobin: partners[episode_index mod size]; UniformRandom: one seeded
  // draw per call. Updates the cursor.
  Agent& next_partner(std::size_t episode_index);

  std::size_t size() const { return partners_.size(); }
  bool empty() const { return partners_.empty(); }
  std::size_t cursor() const { return cursor_; }
  Sampling sampling() const { return sampling_; }
  Agent& at(std::size_t k) { return *partners_.at(k); }
  const Agent& at(std::size_t k) const { return *partners_.at(k); }
  Agent& current() { return *partners_.at(cursor_); }

 private:
  Sampling sampling_;
  RngStream rng_;
  std::vector<std::unique_ptr<Agent>> partners_;
  std::size_t cursor_ = 0;
};

}  // namespace pnrl
