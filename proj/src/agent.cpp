#include "pnrl/agent.hpp"

#include <cmath>
#include <stdexcept>

#include "pnrl/errors.hpp"

namespace pnrl {

ActResult sample_action(const std::vector<double>& dist, RngStream& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t chosen = dist.size();
  for (std::size_t a = 0; a < dist.size(); ++a) {
    cum += dist[a];
    if (u < cum) {
      chosen = a;
      break;
    }
  }
  if (chosen == dist.size()) {
    // Rounding left u above the cumulative sum; take the last action with mass.
    for (std::size_t a = dist.size(); a-- > 0;) {
      if (dist[a] > 0.0) {
        chosen = a;
        break;
      }
    }
  }
  return {static_cast<Action>(chosen), std::log(dist[chosen])};
}

bool spaces_match(const ProjectedView& a, const ProjectedView& b) {
  return a.obs_space == b.obs_space && a.act_space == b.act_space;
}

void Agent::rebind(const ProjectedView& view) {
  if (!spaces_match(view_, view)) {
    throw SpaceMismatch("cannot move agent from " + to_string(view_.obs_space) + "/" + to_string(view_.act_space) +
                        " to " + to_string(view.obs_space) + "/" + to_string(view.act_space));
  }
  view_ = view;
}

std::vector<double> Agent::action_distribution(const Observation& obs) const {
  return pnrl::action_distribution(policy(), obs);
}

std::string Agent::parameter_hash() const { return pnrl::parameter_hash(policy().params); }

// ---------------------------------------------------------------- learning

LearningAgent::LearningAgent(std::size_t seat, Policy policy, RngStream rng, AgentRole role)
    : Agent(ProjectedView{seat, policy.obs_space, policy.act_space}),
      policy_(std::move(policy)),
      rng_(rng),
      role_(role) {
  buffer_.reserve(policy_.hp.batch);
}

ActResult LearningAgent::act(const Observation& obs) {
  return sample_action(pnrl::action_distribution(policy_, obs), rng_);
}

void LearningAgent::record(const Transition& transition) {
  buffer_.push_back(transition);
  ++recorded_;
  if (buffer_.size() < policy_.hp.batch) return;
  if (updates_enabled_) {
    last_report_ = update(policy_, buffer_, update_count_ + 1);
    ++update_count_;
  }
  buffer_.clear();
}

// ---------------------------------------------------------------- static

StaticPolicyAgent::StaticPolicyAgent(std::size_t seat, Policy policy, RngStream rng)
    : Agent(ProjectedView{seat, policy.obs_space, policy.act_space}), policy_(std::move(policy)), rng_(rng) {}

ActResult StaticPolicyAgent::act(const Observation& obs) {
  return sample_action(pnrl::action_distribution(policy_, obs), rng_);
}

std::unique_ptr<StaticPolicyAgent> freeze(const Agent& agent) {
  return std::make_unique<StaticPolicyAgent>(agent.view().agent_index, agent.policy(), agent.rng());
}

// ---------------------------------------------------------------- pools

std::string to_string(Sampling s) { return s == Sampling::RoundRobin ? "round_robin" : "uniform_random"; }

Sampling sampling_from_string(const std::string& s) {
  if (s == "round_robin") return Sampling::RoundRobin;
  if (s == "uniform_random") return Sampling::UniformRandom;
  throw std::invalid_argument("sampling must be 'round_robin' or 'uniform_random', got '" + s + "'");
}

PartnerPool::PartnerPool(Sampling sampling, RngStream rng) : sampling_(sampling), rng_(rng) {}

void PartnerPool::add(std::unique_ptr<Agent> agent) { partners_.push_back(std::move(agent)); }

Agent& PartnerPool::next_partner(std::size_t episode_index) {
  if (partners_.empty()) throw std::logic_error("partner pool is empty");
  if (sampling_ == Sampling::RoundRobin) {
    cursor_ = episode_index % partners_.size();
  } else {
    cursor_ = static_cast<std::size_t>(rng_.uniform_int(partners_.size()));
  }
  return *partners_[cursor_];
}

}  // namespace pnrl
