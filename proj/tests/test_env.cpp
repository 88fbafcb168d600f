#include <gtest/gtest.h>

#include <set>

#include "pnrl/envs.hpp"
#include "pnrl/errors.hpp"
#include "pnrl/rng.hpp"
#include "support.hpp"

namespace pnrl {
namespace {

using testing::EchoEnv;
using testing::KitchenOracle;

// ---------------------------------------------------------------- rng

TEST(Rng, SameSeedSameSequence) {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SplitDoesNotConsumeParent) {
  RngStream a(9), b(9);
  (void)a.split(3);
  (void)a.split(4);
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SplitIndependentOfSiblingCount) {
  const RngStream m(5);
  RngStream x = m.split(1).split(2);
  (void)m.split(0);
  RngStream y = m.split(1).split(2);
  EXPECT_EQ(x.next_u64(), y.next_u64());
  EXPECT_NE(m.split(1).key(), m.split(2).key());
}

TEST(Rng, UniformInUnitInterval) {
  RngStream r(1);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 10000.0, 0.5, 0.02);
}

TEST(Rng, UniformIntFrequencies) {
  RngStream r(77);
  std::vector<int> counts(3, 0);
  const int n = 30000;
  for (int i = 0; i < n; ++i) ++counts[r.uniform_int(3)];
  for (int c : counts) EXPECT_NEAR(c / static_cast<double>(n), 1.0 / 3.0, 0.015);
}

// ---------------------------------------------------------------- spaces

TEST(Spaces, ValidateDiscrete) {
  EXPECT_TRUE(validate(SpaceSpec::discrete(3), Observation{std::int64_t{2}}));
  EXPECT_FALSE(validate(SpaceSpec::discrete(3), Observation{std::int64_t{3}}));
  EXPECT_FALSE(validate(SpaceSpec::discrete(3), Observation{std::int64_t{-1}}));
  EXPECT_FALSE(validate(SpaceSpec::discrete(3), Observation{std::vector<double>{1.0}}));
}

TEST(Spaces, ValidateBox) {
  const SpaceSpec box = SpaceSpec::box({0, 0}, {1, 1});
  EXPECT_FALSE(validate(box, Observation{std::vector<double>{0.5, 2.0}}));
  EXPECT_TRUE(validate(box, Observation{std::vector<double>{0.5, 1.0}}));
  EXPECT_FALSE(validate(box, Observation{std::vector<double>{0.5}}));
  EXPECT_FALSE(validate(box, Observation{std::vector<double>{std::nan(""), 0.5}}));
  EXPECT_FALSE(validate(box, Observation{std::int64_t{0}}));
}

TEST(Spaces, CheckRejectsMalformed) {
  EXPECT_THROW(SpaceSpec::discrete(0).check(), std::invalid_argument);
  EXPECT_THROW(SpaceSpec::box({1.0}, {0.0}).check(), std::invalid_argument);
  EXPECT_THROW(SpaceSpec::box({}, {}).check(), std::invalid_argument);
  EXPECT_THROW(SpaceSpec::box({0.0, 0.0}, {1.0}).check(), std::invalid_argument);
  EXPECT_NO_THROW(SpaceSpec::box({0.0}, {0.0}).check());
}

TEST(Spaces, FeaturesOneHot) {
  EXPECT_EQ(features(SpaceSpec::discrete(4), Observation{std::int64_t{2}}), (std::vector<double>{0, 0, 1, 0}));
  EXPECT_EQ(features(SpaceSpec::box({0}, {1}), Observation{std::vector<double>{0.25}}), std::vector<double>{0.25});
}

TEST(Spaces, JsonRoundTrip) {
  for (const SpaceSpec& s : {SpaceSpec::discrete(7), SpaceSpec::box({-1.5, 0}, {2.25, 3})}) {
    EXPECT_EQ(space_from_json(to_json(s)), s);
  }
}

// ---------------------------------------------------------------- env core

TEST(EnvCore, ResetRpsAndMatrixConstantObservation) {
  auto rps = make_builtin("rps");
  EXPECT_EQ(rps->reset(7), (std::vector<Observation>{std::int64_t{0}, std::int64_t{0}}));
  auto m = make_builtin("matrix.coord");
  for (std::uint64_t s : {0ull, 1ull, 99ull}) {
    EXPECT_EQ(m->reset(s), (std::vector<Observation>{std::int64_t{0}, std::int64_t{0}}));
  }
}

TEST(EnvCore, ResetKitchenInitialLayout) {
  KitchenEnv k;
  const auto obs = k.reset(3);
  EXPECT_EQ(obs, (std::vector<Observation>{std::int64_t{0}, std::int64_t{0}}));
  EXPECT_EQ(k.state(), KitchenEnv::State{});
  EXPECT_EQ(k.t(), 0u);
}

TEST(EnvCore, RpsStep) {
  auto env = make_builtin("rps");
  env->reset(1);
  const std::vector<Action> a = {RpsEnv::kRock, RpsEnv::kScissors};
  const JointStep js = env->step(a);
  EXPECT_EQ(js.rewards, (std::vector<double>{1.0, -1.0}));
  EXPECT_TRUE(js.done);
  EXPECT_EQ(js.t, 0u);
}

TEST(EnvCore, MatrixPayoffs) {
  auto env = make_builtin("matrix.coord");
  auto play = [&](Action a, Action b) {
    env->reset(0);
    const std::vector<Action> acts = {a, b};
    return env->step(acts).rewards;
  };
  EXPECT_EQ(play(0, 0), (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(play(1, 1), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(play(0, 1), (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(play(1, 0), (std::vector<double>{0.0, 0.0}));
}

TEST(EnvCore, KitchenFourStepDelivery) {
  KitchenEnv k;
  k.reset(0);
  const std::vector<std::vector<Action>> seq = {{KitchenEnv::kInteractLeft, KitchenEnv::kStay},
                                                {KitchenEnv::kInteractRight, KitchenEnv::kStay},
                                                {KitchenEnv::kStay, KitchenEnv::kInteractLeft},
                                                {KitchenEnv::kStay, KitchenEnv::kInteractRight}};
  std::vector<std::vector<double>> rewards;
  for (const auto& a : seq) rewards.push_back(k.step(a).rewards);
  EXPECT_EQ(rewards[0], (std::vector<double>{0, 0}));
  EXPECT_EQ(rewards[1], (std::vector<double>{0, 0}));
  EXPECT_EQ(rewards[2], (std::vector<double>{0, 0}));
  EXPECT_EQ(rewards[3], (std::vector<double>{1, 1}));
}

TEST(EnvCore, StepErrors) {
  auto env = make_builtin("rps");
  const std::vector<Action> ok = {0, 0};
  EXPECT_THROW(env->step(ok), SteppedAfterDone);  // never reset
  env->reset(0);
  const std::vector<Action> bad = {0, 3};
  try {
    env->step(bad);
    FAIL() << "expected InvalidAction";
  } catch (const InvalidAction& e) {
    EXPECT_EQ(e.agent(), 1u);
  }
  const std::vector<Action> short_list = {0};
  EXPECT_THROW(env->step(short_list), LengthMismatch);
  env->step(ok);
  EXPECT_THROW(env->step(ok), SteppedAfterDone);
}

TEST(EnvCore, Projection) {
  const JointEnvSpec rps = builtin_spec("rps");
  const ProjectedView v = project(rps, 0);
  EXPECT_EQ(v.obs_space, SpaceSpec::discrete(1));
  EXPECT_EQ(v.act_space, SpaceSpec::discrete(3));
  EXPECT_THROW(project(rps, 2), IndexOutOfRange);

  const JointEnvSpec kitchen = builtin_spec("kitchen.pass");
  EXPECT_EQ(project(kitchen, 1).obs_space, SpaceSpec::discrete(4));
  EXPECT_EQ(project(kitchen, 1).act_space, SpaceSpec::discrete(3));

  for (const auto& spec : {rps, kitchen, builtin_spec("matrix.coord"), EchoEnv::make_spec()}) {
    for (std::size_t i = 0; i < spec.n_agents; ++i) {
      const ProjectedView p = project(spec, i);
      EXPECT_EQ(p.agent_index, i);
      EXPECT_EQ(p.obs_space, spec.obs_spaces[i]);
      EXPECT_EQ(p.act_space, spec.act_spaces[i]);
    }
  }
}

TEST(EnvCore, SpecCheck) {
  JointEnvSpec s = EchoEnv::make_spec();
  EXPECT_NO_THROW(s.check());
  s.n_agents = 1;
  EXPECT_THROW(s.check(), std::invalid_argument);
  s = EchoEnv::make_spec();
  s.obs_spaces.pop_back();
  EXPECT_THROW(s.check(), std::invalid_argument);
  s = EchoEnv::make_spec();
  s.horizon = 0;
  EXPECT_THROW(s.check(), std::invalid_argument);
  s = EchoEnv::make_spec();
  s.act_spaces[0] = SpaceSpec::box({0}, {1});
  EXPECT_THROW(s.check(), std::invalid_argument);
}

TEST(EnvCore, ResetWithoutSeedDrawsFromMaster) {
  EchoEnv a, b;
  std::vector<std::vector<Observation>> xa, xb;
  for (int i = 0; i < 5; ++i) {
    xa.push_back(a.reset());
    xb.push_back(b.reset());
  }
  EXPECT_EQ(xa, xb);
}

// Random actions through every env: structure, horizon and determinism.
class EnvProperty : public ::testing::TestWithParam<std::string> {};

std::vector<JointStep> random_rollout(JointEnv& env, std::uint64_t seed, std::size_t episodes) {
  RngStream r(seed);
  std::vector<JointStep> out;
  for (std::size_t e = 0; e < episodes; ++e) {
    env.reset(seed + e);
    std::size_t len = 0;
    bool done = false;
    while (!done) {
      std::vector<Action> a;
      for (const auto& s : env.spec().act_spaces) a.push_back(static_cast<Action>(r.uniform_int(s.n)));
      out.push_back(env.step(a));
      done = out.back().done;
      ++len;
      EXPECT_LE(len, env.spec().horizon);
    }
    EXPECT_THROW(env.step(out.back().actions), SteppedAfterDone);
  }
  return out;
}

TEST_P(EnvProperty, RewardStructureHorizonDeterminism) {
  auto env = GetParam() == "test.echo" ? std::unique_ptr<JointEnv>(new EchoEnv) : make_builtin(GetParam());
  const auto& spec = env->spec();
  const std::size_t episodes = std::max<std::size_t>(1, 10000 / spec.horizon);
  const auto steps = random_rollout(*env, 123, episodes);
  std::size_t dones = 0;
  for (const auto& js : steps) {
    ASSERT_EQ(js.obs.size(), spec.n_agents);
    ASSERT_EQ(js.next_obs.size(), spec.n_agents);
    ASSERT_EQ(js.rewards.size(), spec.n_agents);
    for (std::size_t i = 0; i < spec.n_agents; ++i) {
      ASSERT_TRUE(validate(spec.obs_spaces[i], js.obs[i]));
      ASSERT_TRUE(validate(spec.obs_spaces[i], js.next_obs[i]));
    }
    if (spec.reward_structure == RewardStructure::ZeroSum) {
      double sum = 0.0;
      for (double r : js.rewards) sum += r;
      ASSERT_EQ(sum, 0.0);
    }
    if (spec.reward_structure == RewardStructure::Shared) {
      for (double r : js.rewards) ASSERT_EQ(r, js.rewards[0]);
    }
    dones += js.done ? 1 : 0;
  }
  EXPECT_EQ(dones, episodes);

  auto again = env->clone();
  EXPECT_EQ(random_rollout(*again, 123, episodes), steps);
}

INSTANTIATE_TEST_SUITE_P(All, EnvProperty, ::testing::Values("matrix.coord", "rps", "kitchen.pass", "test.echo"),
                         [](const auto& info) {
                           std::string s = info.param;
                           std::replace(s.begin(), s.end(), '.', '_');
                           return s;
                         });

TEST(EnvCore, ReplayWithSameSeedReproducesSteps) {
  EchoEnv env;
  const auto first = random_rollout(env, 5, 3);
  // Replay the recorded actions through a fresh env with the same seeds.
  EchoEnv replay;
  std::size_t idx = 0;
  for (std::uint64_t e = 0; e < 3; ++e) {
    replay.reset(5 + e);
    bool done = false;
    while (!done) {
      const JointStep js = replay.step(first[idx].actions);
      EXPECT_EQ(js, first[idx]);
      done = js.done;
      ++idx;
    }
  }
}

// ---------------------------------------------------------------- built-ins

TEST(Builtins, Registry) {
  const auto ids = builtin_env_ids();
  EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()),
            (std::set<std::string>{"matrix.coord", "rps", "kitchen.pass"}));
  auto rps = make_builtin("rps");
  EXPECT_EQ(rps->spec().n_agents, 2u);
  EXPECT_EQ(rps->spec().reward_structure, RewardStructure::ZeroSum);
  EXPECT_EQ(rps->spec().act_spaces[0], SpaceSpec::discrete(3));
  auto k = make_builtin("kitchen.pass");
  EXPECT_EQ(k->spec().reward_structure, RewardStructure::Shared);
  EXPECT_EQ(k->spec().horizon, 40u);
  EXPECT_THROW(make_builtin("nope"), UnknownEnv);
  EXPECT_THROW(optimal_return("nope"), UnknownEnv);
}

TEST(Builtins, RpsAntisymmetricPayoff) {
  for (Action a = 0; a < 3; ++a) {
    for (Action b = 0; b < 3; ++b) EXPECT_EQ(RpsEnv::payoff(a, b), -RpsEnv::payoff(b, a));
  }
  EXPECT_EQ(RpsEnv::payoff(RpsEnv::kPaper, RpsEnv::kRock), 1.0);
  EXPECT_EQ(RpsEnv::payoff(RpsEnv::kRock, RpsEnv::kRock), 0.0);
}

TEST(Builtins, OptimalReturnsMatchMatrixAndRps) {
  EXPECT_EQ(optimal_return("matrix.coord"), (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(optimal_return("rps"), (std::vector<double>{0.0, 0.0}));
  EchoEnv echo;
  EXPECT_THROW(optimal_return(echo), NotSupported);
}

// Independent statement of the rules versus the implementation.
TEST(Builtins, KitchenMatchesRuleOracle) {
  KitchenEnv env;
  RngStream r(2024);
  for (int ep = 0; ep < 300; ++ep) {
    env.reset(ep);
    KitchenOracle o;
    bool done = false;
    while (!done) {
      const int a0 = static_cast<int>(r.uniform_int(3));
      const int a1 = static_cast<int>(r.uniform_int(3));
      const std::vector<Action> a = {a0, a1};
      const JointStep js = env.step(a);
      const double expect = o.step(a0, a1);
      ASSERT_EQ(js.rewards[0], expect);
      ASSERT_EQ(std::get<std::int64_t>(js.next_obs[0]), o.obs(0));
      ASSERT_EQ(std::get<std::int64_t>(js.next_obs[1]), o.obs(1));
      done = js.done;
    }
  }
}

// Best return over every pair of memoryless deterministic policies
// (3^4 per agent), plus the explicit scripted cycle.
TEST(Builtins, KitchenOptimumIsTenByPolicyEnumeration) {
  double best = 0.0;
  for (int p0 = 0; p0 < 81; ++p0) {
    for (int p1 = 0; p1 < 81; ++p1) {
      KitchenOracle o;
      double total = 0.0;
      for (int t = 0; t < 40; ++t) {
        const int a0 = (p0 / static_cast<int>(std::pow(3, o.obs(0)))) % 3;
        const int a1 = (p1 / static_cast<int>(std::pow(3, o.obs(1)))) % 3;
        total += o.step(a0, a1);
      }
      best = std::max(best, total);
    }
  }
  EXPECT_EQ(best, 10.0);
  EXPECT_EQ(optimal_return("kitchen.pass"), (std::vector<double>{10.0, 10.0}));
}

TEST(Builtins, KitchenRandomPairEarnsLessThanOptimal) {
  KitchenEnv env;
  RngStream r(8);
  double total = 0.0;
  const int episodes = 1000;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(ep);
    bool done = false;
    while (!done) {
      const std::vector<Action> a = {static_cast<Action>(r.uniform_int(3)), static_cast<Action>(r.uniform_int(3))};
      const JointStep js = env.step(a);
      total += js.rewards[0];
      done = js.done;
    }
  }
  EXPECT_LT(total / episodes, 10.0);
}

TEST(Builtins, RpsUniformSelfPlayAveragesZero) {
  auto env = make_builtin("rps");
  RngStream r(31);
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    env->reset(i);
    const std::vector<Action> a = {static_cast<Action>(r.uniform_int(3)), static_cast<Action>(r.uniform_int(3))};
    sum += env->step(a).rewards[0];
  }
  // Per-episode variance of the payoff is 2/3.
  const double sigma = std::sqrt(2.0 / 3.0 / n);
  EXPECT_LE(std::abs(sum / n), 3.0 * sigma);
}

TEST(Builtins, BestResponseToRockIsPaper) {
  double best = -2.0;
  Action arg = -1;
  for (Action a = 0; a < 3; ++a) {
    if (RpsEnv::payoff(a, RpsEnv::kRock) > best) {
      best = RpsEnv::payoff(a, RpsEnv::kRock);
      arg = a;
    }
  }
  EXPECT_EQ(arg, RpsEnv::kPaper);
  EXPECT_EQ(best, 1.0);
}

}  // namespace
}  // namespace pnrl
