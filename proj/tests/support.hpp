#pragma once

// Test-side oracles and fixtures. Everything here is written independently
// of the library implementation it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pnrl/agent.hpp"
#include "pnrl/env.hpp"
#include "pnrl/learners.hpp"
#include "pnrl/policy.hpp"

namespace pnrl::testing {

// Three seats with heterogeneous spaces: seat 0 Discrete(5) obs, seat 1 a
// 2-dim Box obs, seat 2 Discrete(2) obs. Every step bumps a global counter
// so tests can count joint env steps independently of the orchestrator.
class EchoEnv : public JointEnv {
 public:
  static constexpr std::size_t kHorizon = 7;

  EchoEnv() : JointEnv(make_spec()) {}

  static JointEnvSpec make_spec() {
    JointEnvSpec s;
    s.env_id = "test.echo";
    s.n_agents = 3;
    s.obs_spaces = {SpaceSpec::discrete(5), SpaceSpec::box({0.0, -1.0}, {1.0, 1.0}), SpaceSpec::discrete(2)};
    s.act_spaces = {SpaceSpec::discrete(2), SpaceSpec::discrete(3), SpaceSpec::discrete(2)};
    s.horizon = kHorizon;
    s.reward_structure = RewardStructure::Mixed;
    return s;
  }

  std::unique_ptr<JointEnv> clone() const override { return std::make_unique<EchoEnv>(); }

  std::size_t steps_taken() const { return *counter_; }
  std::shared_ptr<std::size_t> counter() const { return counter_; }

 protected:
  std::vector<Observation> on_reset(RngStream& rng) override {
    phase_ = static_cast<std::int64_t>(rng.uniform_int(5));
    k_ = 0;
    return observe();
  }

  Outcome on_step(std::span<const Action> actions, RngStream& rng) override {
    ++*counter_;
    ++k_;
    Outcome o;
    const double noise = rng.uniform();
    o.rewards = {static_cast<double>(actions[0]) - 0.5, static_cast<double>(actions[1]) * noise,
                 actions[2] == (k_ % 2) ? 1.0 : -1.0};
    o.obs = observe();
    o.terminal = false;
    return o;
  }

 private:
  std::vector<Observation> observe() const {
    const double frac = static_cast<double>(k_) / static_cast<double>(kHorizon);
    return {Observation{(phase_ + k_) % 5}, Observation{std::vector<double>{frac, frac - 0.5}},
            Observation{std::int64_t{k_ % 2}}};
  }

  std::shared_ptr<std::size_t> counter_ = std::make_shared<std::size_t>(0);
  std::int64_t phase_ = 0;
  std::int64_t k_ = 0;
};

// Forwards to a wrapped agent and keeps every transition it is given.
class SpyAgent : public Agent {
 public:
  explicit SpyAgent(std::unique_ptr<Agent> inner) : Agent(inner->view()), inner_(std::move(inner)) {}

  ActResult act(const Observation& obs) override { return inner_->act(obs); }
  void record(const Transition& t) override {
    log_.push_back(t);
    inner_->record(t);
  }
  const Policy& policy() const override { return inner_->policy(); }
  const RngStream& rng() const override { return inner_->rng(); }
  bool learnable() const override { return inner_->learnable(); }
  bool updates_enabled() const override { return inner_->updates_enabled(); }
  std::size_t update_count() const override { return inner_->update_count(); }

  const std::vector<Transition>& log() const { return log_; }
  Agent& inner() { return *inner_; }

 private:
  std::unique_ptr<Agent> inner_;
  std::vector<Transition> log_;
};

// A_t = sum_k (gamma lambda)^k prod_{j<k}(1 - done_{t+j}) delta_{t+k},
// evaluated as an explicit double sum.
inline void gae_double_loop(const std::vector<double>& r, const std::vector<double>& v,
                            const std::vector<std::uint8_t>& done, double bootstrap, double gamma, double lambda,
                            std::vector<double>& returns, std::vector<double>& adv) {
  const std::size_t n = r.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next_v = t + 1 < n ? v[t + 1] : bootstrap;
    delta[t] = r[t] + gamma * next_v * (done[t] ? 0.0 : 1.0) - v[t];
  }
  adv.assign(n, 0.0);
  returns.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double sum = 0.0;
    for (std::size_t k = 0; t + k < n; ++k) {
      double weight = 1.0;
      bool cut = false;
      for (std::size_t j = 0; j < k; ++j) {
        if (done[t + j]) cut = true;
        weight *= gamma * lambda;
      }
      if (cut) break;
      sum += weight * delta[t + k];
    }
    adv[t] = sum;
    returns[t] = sum + v[t];
  }
}

// Central differences of pg_objective in every coordinate.
inline std::vector<double> numeric_gradient(const Policy& policy, const PgBatch& batch, double h) {
  std::vector<double> g(policy.params.values.size());
  Policy p = policy;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = policy.params.values[i];
    p.params.values[i] = x + h;
    const double up = pg_objective(p, batch);
    p.params.values[i] = x - h;
    const double down = pg_objective(p, batch);
    p.params.values[i] = x;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Uniform observations, actions, advantages and returns for a policy.
inline PgBatch random_pg_batch(const Policy& p, RngStream& rng, std::size_t n) {
  PgBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    if (p.obs_space.kind == SpaceKind::Discrete) {
      b.obs.emplace_back(static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(p.obs_space.n))));
    } else {
      std::vector<double> x(p.obs_space.low.size());
      for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = p.obs_space.low[k] + rng.uniform() * (p.obs_space.high[k] - p.obs_space.low[k]);
      }
      b.obs.emplace_back(std::move(x));
    }
    b.actions.push_back(static_cast<Action>(rng.uniform_int(static_cast<std::uint64_t>(p.act_space.n))));
    b.advantages.push_back(rng.uniform() * 4 - 2);
    b.returns.push_back(rng.uniform() * 4 - 2);
  }
  return b;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Kitchen rules restated independently of the library: item source at the far
// left, agent 0 picks from it, places on the pass; agent 1 picks from the
// pass and delivers on the right. Only one item is in play at a time.
struct KitchenOracle {
  bool hold0 = false;
  bool hold1 = false;
  bool pass = false;

  // Returns the shared reward.
  double step(int a0, int a1) {
    constexpr int kLeft = 0;
    constexpr int kRight = 1;
    const bool h0 = hold0;
    const bool h1 = hold1;
    const bool p = pass;
    double reward = 0.0;
    if (a0 == kLeft && !h0 && !h1 && !p) hold0 = true;
    if (a0 == kRight && h0 && !p) {
      hold0 = false;
      pass = true;
    }
    if (a1 == kLeft && !h1 && p) {
      hold1 = true;
      pass = false;
    }
    if (a1 == kRight && h1) {
      hold1 = false;
      reward = 1.0;
    }
    return reward;
  }
  std::int64_t obs(int agent) const { return 2 * ((agent == 0 ? hold0 : hold1) ? 1 : 0) + (pass ? 1 : 0); }
};

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pnrl-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

// Relative path -> contents for every regular file under `root`.
inline std::map<std::string, std::string> tree_contents(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

}  // namespace pnrl::testing
