#pragma once

#include "magi/nn/checkpoint.hpp"
#include "magi/nn/mlp.hpp"
#include "magi/nn/optim.hpp"
#include "magi/policy/hypernet.hpp"

#include <Eigen/Core>

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace magi::policy {

struct AgentConfig {
  std::vector<int> hidden{64, 64};
  HypernetTarget hypernet_target = HypernetTarget::head;
  double gamma = 0.95;
  double tau = 0.01;
  nn::AdamConfig actor_opt{1e-4};
  nn::AdamConfig critic_opt{1e-3};
};

/// One sampled minibatch seen from agent i. Columns are transitions.
struct AgentBatch {
  Matrix states;       // s_j
  Matrix obs;          // o^i_j
  Matrix goals;        // goal in force at s_j
  Matrix actions;      // a^i_j
  Matrix rewards;      // 1 x B proxy rewards
  Matrix next_states;  // s'_j
  Matrix next_obs;     // o'^i_j
  Matrix next_goals;   // goal in force at s'_j
  Matrix done;         // 1 x B, 1.0 for terminal transitions

  Eigen::Index size() const { return states.cols(); }
};

inline Matrix critic_input(const Matrix& states, const Matrix& actions) {
  Matrix in(states.rows() + actions.rows(), states.cols());
  in << states, actions;
  return in;
}

/// Policy, centralized critic Q^i(s, a^i), their target copies and optimizer states.
class AgentLearner {
 public:
  AgentLearner() = default;
  AgentLearner(int state_dim, int obs_dim, int goal_dim, int action_dim, AgentConfig config, std::mt19937_64& rng)
      : config_(std::move(config)), state_dim_(state_dim) {
    policy = make_policy(obs_dim, goal_dim, action_dim, config_.hidden, config_.hypernet_target, rng);
    critic = nn::ParamSet(nn::mlp_layout(state_dim + action_dim, config_.hidden, 1, nn::Activation::relu,
                                         nn::Activation::linear));
    critic.init_uniform(rng);
    target_policy = policy;
    target_critic = critic;
    trunk_opt = nn::OptimizerState(policy.trunk.size(), config_.actor_opt);
    hyper_opt = nn::OptimizerState(policy.hypernet.size(), config_.actor_opt);
    critic_opt = nn::OptimizerState(critic.size(), config_.critic_opt);
  }

  const AgentConfig& config() const { return config_; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return policy.action_dim; }

  Matrix q_values(const Matrix& states, const Matrix& actions) const {
    return nn::mlp_forward(critic, critic_input(states, actions));
  }

  void soft_update_targets() {
    nn::soft_update_inplace(target_critic, critic, config_.tau);
    nn::soft_update_inplace(target_policy.trunk, policy.trunk, config_.tau);
    nn::soft_update_inplace(target_policy.hypernet, policy.hypernet, config_.tau);
  }

  void save(nn::Checkpoint& ck, const std::string& prefix) const {
    ck.add(prefix + "/policy_trunk", policy.trunk);
    ck.add(prefix + "/hypernet", policy.hypernet);
    ck.add(prefix + "/critic", critic);
    ck.add(prefix + "/target_policy_trunk", target_policy.trunk);
    ck.add(prefix + "/target_hypernet", target_policy.hypernet);
    ck.add(prefix + "/target_critic", target_critic);
  }

  void load(const nn::Checkpoint& ck, const std::string& prefix) {
    policy.trunk = ck.get(prefix + "/policy_trunk", policy.trunk.layout());
    policy.hypernet = ck.get(prefix + "/hypernet", policy.hypernet.layout());
    critic = ck.get(prefix + "/critic", critic.layout());
    target_policy.trunk = ck.get(prefix + "/target_policy_trunk", policy.trunk.layout());
    target_policy.hypernet = ck.get(prefix + "/target_hypernet", policy.hypernet.layout());
    target_critic = ck.get(prefix + "/target_critic", critic.layout());
  }

  PolicyNet policy;
  PolicyNet target_policy;
  nn::ParamSet critic;
  nn::ParamSet target_critic;
  nn::OptimizerState trunk_opt;
  nn::OptimizerState hyper_opt;
  nn::OptimizerState critic_opt;

 private:
  AgentConfig config_;
  int state_dim_ = 0;
};

/// TD targets y = r + gamma * (1 - done) * Q'(s', pi'(o', g')) from the target networks.
inline Matrix td_targets(const AgentLearner& agent, const AgentBatch& b) {
  const Matrix next_actions = policy_forward(agent.target_policy, b.next_obs, b.next_goals);
  const Matrix next_q = nn::mlp_forward(agent.target_critic, critic_input(b.next_states, next_actions));
  return b.rewards + agent.config().gamma * (1.0 - b.done.array()).matrix().cwiseProduct(next_q);
}

/// Mean squared TD error of the online critic; targets are constants.
inline nn::LossAndGrads critic_update(const AgentLearner& agent, const AgentBatch& b) {
  if (b.size() == 0) throw std::invalid_argument("critic_update: empty batch");
  const Matrix y = td_targets(agent, b);
  nn::MlpCache cache;
  const Matrix q = nn::mlp_forward(agent.critic, critic_input(b.states, b.actions), &cache);
  const Matrix diff = q - y;
  nn::LossAndGrads out;
  const double inv_b = 1.0 / static_cast<double>(b.size());
  out.loss = diff.squaredNorm() * inv_b;
  nn::require_finite(out.loss, "critic");
  out.grads = nn::mlp_backward(agent.critic, cache, diff * (2.0 * inv_b)).params;
  return out;
}

struct PolicyGradient {
  double objective = 0.0;  // batch mean of Q(s, pi(o, g))
  Vector trunk;            // ascent directions
  Vector hypernet;
};

/// Deterministic policy gradient through the generated head, hypernetwork and
/// trunk with the critic held fixed. The goal is an input, not differentiated.
inline PolicyGradient policy_update(const AgentLearner& agent, const AgentBatch& b) {
  if (b.size() == 0) throw std::invalid_argument("policy_update: empty batch");
  PolicyCache pcache;
  const Matrix actions = policy_forward(agent.policy, b.obs, b.goals, &pcache);
  nn::MlpCache qcache;
  const Matrix q = nn::mlp_forward(agent.critic, critic_input(b.states, actions), &qcache);
  PolicyGradient out;
  out.objective = q.mean();
  nn::require_finite(out.objective, "policy");
  const Matrix dq = Matrix::Constant(1, b.size(), 1.0 / static_cast<double>(b.size()));
  const Matrix d_in = nn::mlp_input_grad(agent.critic, qcache, dq);
  const auto g = policy_backward(agent.policy, pcache, d_in.bottomRows(agent.action_dim()));
  out.trunk = g.trunk;
  out.hypernet = g.hypernet;
  if (!out.trunk.allFinite() || !out.hypernet.allFinite()) throw nn::NonFiniteError("policy");
  return out;
}

struct AgentStepStats {
  double critic_loss = 0.0;
  double policy_objective = 0.0;
};

/// Critic step, then policy step against the updated critic, then target blending.
inline AgentStepStats train_agent(AgentLearner& agent, const AgentBatch& b, const std::string& name) {
  AgentStepStats stats;
  const auto c = critic_update(agent, b);
  nn::adam_step(agent.critic, c.grads, agent.critic_opt, name + "/critic");
  stats.critic_loss = c.loss;
  const auto p = policy_update(agent, b);
  if (!agent.policy.trunk.empty()) nn::adam_step(agent.policy.trunk, -p.trunk, agent.trunk_opt, name + "/policy_trunk");
  nn::adam_step(agent.policy.hypernet, -p.hypernet, agent.hyper_opt, name + "/hypernet");
  stats.policy_objective = p.objective;
  agent.soft_update_targets();
  return stats;
}

}  // namespace magi::policy
