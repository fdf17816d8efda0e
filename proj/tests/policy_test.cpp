#include "magi/env/particle_env.hpp"
#include "magi/imagination/cvae.hpp"
#include "magi/policy/agent.hpp"
#include "magi/policy/hypernet.hpp"
#include "magi/policy/reward.hpp"
#include "support/finite_diff.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace magi;
using namespace magi::policy;
using magi::testing::central_difference;
using magi::testing::relative_error;

namespace {

const std::vector<int> kSmall{8, 8};

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

AgentBatch random_batch(int sd, int od, int gd, int ad, int b, std::mt19937_64& rng) {
  AgentBatch x;
  x.states = random_matrix(sd, b, rng);
  x.obs = random_matrix(od, b, rng);
  x.goals = random_matrix(gd, b, rng);
  x.actions = random_matrix(ad, b, rng);
  x.rewards = random_matrix(1, b, rng);
  x.next_states = random_matrix(sd, b, rng);
  x.next_obs = random_matrix(od, b, rng);
  x.next_goals = random_matrix(gd, b, rng);
  x.done = Matrix::Zero(1, b);
  x.done(0, b - 1) = 1.0;
  return x;
}

}  // namespace

TEST(Hypernet, OutputLengthAndPurity) {
  std::mt19937_64 rng(1);
  for (auto target : {HypernetTarget::head, HypernetTarget::full}) {
    const auto p = make_policy(5, 4, 2, kSmall, target, rng);
    const Vector g = Vector::LinSpaced(4, -1.0, 1.0);
    const Vector h = hypernet_params(p, g);
    EXPECT_EQ(static_cast<std::size_t>(h.size()), p.head_param_count());
    EXPECT_EQ(h, hypernet_params(p, g));
  }
  const auto head = make_policy(5, 4, 2, kSmall, HypernetTarget::head, rng);
  EXPECT_EQ(head.head_param_count(), 8u * 2 + 2);
  EXPECT_THROW(hypernet_params(head, Vector(Vector::Zero(3))), std::invalid_argument);
}

TEST(Hypernet, ZeroWeightsGiveBiasConstant) {
  std::mt19937_64 rng(2);
  auto p = make_policy(5, 4, 2, kSmall, HypernetTarget::head, rng);
  const auto& lay = p.hypernet.layout();
  // zero every weight matrix, keep biases
  std::size_t off = 0;
  for (const auto& l : lay) {
    p.hypernet.values().segment(static_cast<Eigen::Index>(off), l.in * l.out).setZero();
    off += l.param_count();
  }
  const Vector bias = p.hypernet.values().tail(static_cast<Eigen::Index>(p.head_param_count()));
  for (int k = 0; k < 10; ++k) EXPECT_EQ(hypernet_params(p, Vector(random_matrix(4, 1, rng).col(0))), bias);
}

TEST(Action, DeterministicBoundedAndNoiseClamped) {
  std::mt19937_64 rng(3);
  auto p = make_policy(5, 4, 2, kSmall, HypernetTarget::head, rng);
  p.hypernet.init_uniform(rng, 10.0);
  for (int k = 0; k < 200; ++k) {
    const Vector o = random_matrix(5, 1, rng, 3.0).col(0), g = random_matrix(4, 1, rng, 3.0).col(0);
    const Vector a = agent_action(p, o, g, Vector::Zero(2));
    EXPECT_EQ(a, agent_action(p, o, g, Vector::Zero(2)));
    EXPECT_LE(a.cwiseAbs().maxCoeff(), 1.0);
    const Vector noisy = agent_action(p, o, g, Vector::Constant(2, 5.0));
    EXPECT_EQ(noisy, Vector::Ones(2));
  }
  EXPECT_THROW(agent_action(p, Vector::Zero(5), Vector::Zero(4), Vector::Zero(3)), std::invalid_argument);
}

TEST(Action, GoalConditionsThePolicy) {
  int differ = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const auto p = make_policy(6, 4, 2, kSmall, HypernetTarget::head, rng);
    const Vector o = random_matrix(6, 1, rng).col(0);
    const Vector g1 = random_matrix(4, 1, rng).col(0), g2 = random_matrix(4, 1, rng).col(0);
    differ += agent_action(p, o, g1, Vector::Zero(2)) != agent_action(p, o, g2, Vector::Zero(2));
  }
  EXPECT_GE(differ, 99);
}

TEST(Intrinsic, EuclideanExamples) {
  const auto w = env::WorldConfig::for_task(env::Task::navigation);
  Vector goal = Vector::Zero(18), s = Vector::Zero(18), s2 = Vector::Zero(18);
  env::set_agent_position(w, goal, 1, env::Vec2(0.0, 0.0));
  env::set_agent_position(w, s, 1, env::Vec2(2.0, 0.0));
  env::set_agent_position(w, s2, 1, env::Vec2(0.0, 1.0));
  EXPECT_DOUBLE_EQ(intrinsic_reward_euclidean(w, goal, s, s2, 1), 1.0);
  EXPECT_EQ(intrinsic_reward_euclidean(w, goal, s, s, 1), 0.0);
  EXPECT_EQ(intrinsic_reward_euclidean(w, goal, s2, s, 1), -intrinsic_reward_euclidean(w, goal, s, s2, 1));
}

TEST(Intrinsic, TelescopesOverRandomTrajectories) {
  const auto w = env::WorldConfig::for_task(env::Task::navigation);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int traj = 0; traj < 100; ++traj) {
    env::ParticleEnv e(w);
    Vector s = e.reset(static_cast<std::uint64_t>(traj)).state;
    const Vector s0 = s;
    const Vector goal = random_matrix(18, 1, rng).col(0);
    std::vector<double> sums(3, 0.0);
    for (int t = 0; t < w.episode_length; ++t) {
      env::JointAction a(6);
      for (int k = 0; k < 6; ++k) a[k] = u(rng);
      const Vector s2 = e.step(a).next_state;
      for (int i = 0; i < 3; ++i) sums[static_cast<std::size_t>(i)] += intrinsic_reward_euclidean(w, goal, s, s2, i);
      s = s2;
    }
    for (int i = 0; i < 3; ++i) {
      const auto g = env::extract_agent_position(w, goal, i);
      const double expected =
          (g - env::extract_agent_position(w, s0, i)).norm() - (g - env::extract_agent_position(w, s, i)).norm();
      EXPECT_NEAR(sums[static_cast<std::size_t>(i)], expected, 1e-9);
    }
  }
}

TEST(Intrinsic, LatentExamplesAndAntisymmetry) {
  std::mt19937_64 rng(5);
  const auto m = imagination::make_cvae(6, 3, 4, kSmall, rng);
  const Vector g = random_matrix(6, 1, rng).col(0), s = random_matrix(6, 1, rng).col(0), s2 = random_matrix(6, 1, rng).col(0);
  EXPECT_EQ(intrinsic_reward_latent(m, g, s, s, s), 0.0);
  EXPECT_EQ(intrinsic_reward_latent(m, s, s, s, s), 0.0);
  for (int k = 0; k < 50; ++k) {
    const Vector a = random_matrix(6, 1, rng).col(0), b = random_matrix(6, 1, rng).col(0);
    EXPECT_EQ(intrinsic_reward_latent(m, g, a, b, s), -intrinsic_reward_latent(m, g, b, a, s));
  }
  EXPECT_NE(intrinsic_reward_latent(m, g, s, s2, s), 0.0);
}

TEST(Intrinsic, LatentKlTermsMatchMonteCarlo) {
  std::mt19937_64 rng(6);
  const auto m = imagination::make_cvae(6, 3, 4, kSmall, rng);
  const Vector g = random_matrix(6, 1, rng).col(0), s = random_matrix(6, 1, rng).col(0), s2 = random_matrix(6, 1, rng).col(0);
  const auto hg = imagination::encode(m, s, g);
  std::normal_distribution<double> n01;
  for (const Vector& x : {s, s2}) {
    const auto hx = imagination::encode(m, s, x);
    double mc = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
      Vector eps(3);
      for (int d = 0; d < 3; ++d) eps[d] = n01(rng);
      const Vector z = nn::reparam_sample(hg, eps);
      mc += nn::gaussian_log_density(hg, z) - nn::gaussian_log_density(hx, z);
    }
    EXPECT_NEAR(mc / n, nn::gaussian_kl(hg, hx), 1e-2);
  }
}

TEST(Proxy, Examples) {
  EXPECT_EQ(proxy_reward(-3.5, 7.0, 0.0), -3.5);
  EXPECT_NEAR(proxy_reward(1.0, 2.0, 0.001), 1.002, 1e-15);
  EXPECT_NEAR(proxy_reward(0.3, 1.5 + 2.5, 0.1), proxy_reward(0.3, 1.5, 0.1) + 0.1 * 2.5, 1e-15);
  EXPECT_THROW(proxy_reward(0.0, 0.0, -1.0), std::invalid_argument);
  RewardConfig bad;
  bad.lambda = -0.5;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Critic, ZeroLossWhenOnTarget) {
  std::mt19937_64 rng(7);
  AgentConfig cfg;
  cfg.hidden = kSmall;
  AgentLearner ag(6, 5, 4, 2, cfg, rng);
  auto b = random_batch(6, 5, 4, 2, 8, rng);
  b.rewards = ag.q_values(b.states, b.actions) - (td_targets(ag, b) - b.rewards);
  EXPECT_NEAR(critic_update(ag, b).loss, 0.0, 1e-20);
}

TEST(Critic, SingleRowHandValueAndSign) {
  std::mt19937_64 rng(8);
  AgentConfig cfg;
  cfg.hidden = kSmall;
  AgentLearner ag(6, 5, 4, 2, cfg, rng);
  ag.critic.values().setZero();
  auto b = random_batch(6, 5, 4, 2, 1, rng);
  b.rewards(0, 0) = 1.0;
  b.done(0, 0) = 1.0;
  const auto r = critic_update(ag, b);
  EXPECT_DOUBLE_EQ(r.loss, 1.0);
  ag.critic.values() -= 0.1 * r.grads;
  EXPECT_GT(ag.q_values(b.states, b.actions)(0, 0), 0.0);
  EXPECT_THROW(critic_update(ag, AgentBatch{}), std::invalid_argument);
}

class AgentGradientCheck : public ::testing::TestWithParam<std::tuple<int, HypernetTarget>> {};

TEST_P(AgentGradientCheck, CriticMatchesFiniteDifferences) {
  const auto [seed, target] = GetParam();
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  AgentConfig cfg;
  cfg.hidden = kSmall;
  cfg.hypernet_target = target;
  AgentLearner ag(6, 5, 4, 2, cfg, rng);
  const auto b = random_batch(6, 5, 4, 2, 6, rng);
  const auto r = critic_update(ag, b);
  const auto f = [&](const Vector& v) {
    AgentLearner probe = ag;
    probe.critic.values() = v;
    return critic_update(probe, b).loss;
  };
  EXPECT_LT(relative_error(r.grads, central_difference(f, ag.critic.values())), 1e-4);
}

TEST_P(AgentGradientCheck, PolicyMatchesFiniteDifferences) {
  const auto [seed, target] = GetParam();
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed) + 100);
  AgentConfig cfg;
  cfg.hidden = kSmall;
  cfg.hypernet_target = target;
  AgentLearner ag(6, 5, 4, 2, cfg, rng);
  const auto b = random_batch(6, 5, 4, 2, 6, rng);
  const auto r = policy_update(ag, b);
  const auto f_hyper = [&](const Vector& v) {
    AgentLearner probe = ag;
    probe.policy.hypernet.values() = v;
    return policy_update(probe, b).objective;
  };
  EXPECT_LT(relative_error(r.hypernet, central_difference(f_hyper, ag.policy.hypernet.values())), 1e-4);
  if (!ag.policy.trunk.empty()) {
    const auto f_trunk = [&](const Vector& v) {
      AgentLearner probe = ag;
      probe.policy.trunk.values() = v;
      return policy_update(probe, b).objective;
    };
    EXPECT_LT(relative_error(r.trunk, central_difference(f_trunk, ag.policy.trunk.values())), 1e-4);
  }
}

TEST_P(AgentGradientCheck, PolicyInputGradientsMatchFiniteDifferences) {
  const auto [seed, target] = GetParam();
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed) + 200);
  const auto p = make_policy(5, 4, 2, kSmall, target, rng);
  const Matrix obs = random_matrix(5, 3, rng), goals = random_matrix(4, 3, rng), w = random_matrix(2, 3, rng);
  PolicyCache cache;
  policy_forward(p, obs, goals, &cache);
  const auto g = policy_backward(p, cache, w);
  const auto f_obs = [&](const Vector& v) {
    return policy_forward(p, Eigen::Map<const Matrix>(v.data(), 5, 3), goals).cwiseProduct(w).sum();
  };
  const auto f_goal = [&](const Vector& v) {
    return policy_forward(p, obs, Eigen::Map<const Matrix>(v.data(), 4, 3)).cwiseProduct(w).sum();
  };
  const Vector go = Eigen::Map<const Vector>(g.obs.data(), g.obs.size());
  const Vector gg = Eigen::Map<const Vector>(g.goal.data(), g.goal.size());
  EXPECT_LT(relative_error(go, central_difference(f_obs, Eigen::Map<const Vector>(obs.data(), obs.size()))), 1e-4);
  EXPECT_LT(relative_error(gg, central_difference(f_goal, Eigen::Map<const Vector>(goals.data(), goals.size()))), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(SeedsAndTargets, AgentGradientCheck,
                         ::testing::Combine(::testing::Values(1, 2, 3, 4, 5),
                                            ::testing::Values(HypernetTarget::head, HypernetTarget::full)));

TEST(Policy, ZeroCriticGivesZeroGradient) {
  std::mt19937_64 rng(9);
  AgentConfig cfg;
  cfg.hidden = kSmall;
  AgentLearner ag(6, 5, 4, 2, cfg, rng);
  ag.critic.values().setZero();
  const auto r = policy_update(ag, random_batch(6, 5, 4, 2, 4, rng));
  EXPECT_EQ(r.trunk.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.hypernet.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Policy, SmallAscentStepDoesNotDecreaseQ) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    AgentConfig cfg;
    cfg.hidden = kSmall;
    AgentLearner ag(6, 5, 4, 2, cfg, rng);
    const auto b = random_batch(6, 5, 4, 2, 16, rng);
    const auto r = policy_update(ag, b);
    ag.policy.trunk.values() += 1e-4 * r.trunk;
    ag.policy.hypernet.values() += 1e-4 * r.hypernet;
    EXPECT_GE(policy_update(ag, b).objective, r.objective) << "seed " << seed;
  }
}

TEST(Targets, ChangeOnlyThroughSoftUpdate) {
  std::mt19937_64 rng(10);
  AgentConfig cfg;
  cfg.hidden = kSmall;
  AgentLearner ag(6, 5, 4, 2, cfg, rng);
  const auto b = random_batch(6, 5, 4, 2, 8, rng);
  const Matrix q0 = nn::mlp_forward(ag.target_critic, critic_input(b.next_states, b.actions));
  const Matrix a0 = policy_forward(ag.target_policy, b.next_obs, b.next_goals);
  critic_update(ag, b);
  policy_update(ag, b);
  EXPECT_EQ(nn::mlp_forward(ag.target_critic, critic_input(b.next_states, b.actions)), q0);
  EXPECT_EQ(policy_forward(ag.target_policy, b.next_obs, b.next_goals), a0);

  const auto before = ag;
  train_agent(ag, b, "agent");
  EXPECT_EQ(ag.target_critic.values(), nn::soft_update(before.target_critic, ag.critic, cfg.tau).values());
  EXPECT_EQ(ag.target_policy.hypernet.values(),
            nn::soft_update(before.target_policy.hypernet, ag.policy.hypernet, cfg.tau).values());
  EXPECT_EQ(ag.target_policy.trunk.values(),
            nn::soft_update(before.target_policy.trunk, ag.policy.trunk, cfg.tau).values());
}

TEST(Learner, CheckpointRoundTrip) {
  std::mt19937_64 rng(11);
  AgentConfig cfg;
  cfg.hidden = kSmall;
  AgentLearner ag(6, 5, 4, 2, cfg, rng);
  train_agent(ag, random_batch(6, 5, 4, 2, 8, rng), "agent");
  nn::Checkpoint ck;
  ag.save(ck, "agent/0");
  std::mt19937_64 other(12);
  AgentLearner restored(6, 5, 4, 2, cfg, other);
  restored.load(nn::Checkpoint::from_bytes(ck.to_bytes()), "agent/0");
  EXPECT_EQ(restored.critic.values(), ag.critic.values());
  EXPECT_EQ(restored.policy.hypernet.values(), ag.policy.hypernet.values());
  EXPECT_EQ(restored.target_policy.trunk.values(), ag.target_policy.trunk.values());

  AgentLearner wrong(7, 5, 4, 2, cfg, other);
  EXPECT_THROW(wrong.load(ck, "agent/0"), nn::CheckpointError);
}

TEST(Learner, NonFinitePolicyObjectiveNamesNetwork) {
  std::mt19937_64 rng(13);
  AgentConfig cfg;
  cfg.hidden = kSmall;
  AgentLearner ag(6, 5, 4, 2, cfg, rng);
  auto b = random_batch(6, 5, 4, 2, 4, rng);
  b.states(0, 0) = std::numeric_limits<double>::infinity();
  try {
    policy_update(ag, b);
    FAIL() << "expected NonFiniteError";
  } catch (const nn::NonFiniteError& e) {
    EXPECT_EQ(e.network(), "policy");
  }
}
