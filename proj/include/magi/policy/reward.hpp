#pragma once

#include "magi/env/particle_env.hpp"
#include "magi/imagination/cvae.hpp"
#include "magi/nn/gaussian.hpp"

#include <stdexcept>
#include <string>
#include <string_view>

namespace magi::policy {

enum class IntrinsicVariant { euclidean, latent_kl };

inline IntrinsicVariant intrinsic_from_name(std::string_view name) {
  if (name == "euclidean") return IntrinsicVariant::euclidean;
  if (name == "latent_kl") return IntrinsicVariant::latent_kl;
  throw std::invalid_argument("unknown intrinsic reward variant '" + std::string(name) + "'");
}

inline std::string_view intrinsic_name(IntrinsicVariant v) {
  return v == IntrinsicVariant::euclidean ? "euclidean" : "latent_kl";
}

struct RewardConfig {
  double lambda = 0.001;
  IntrinsicVariant variant = IntrinsicVariant::euclidean;

  void validate() const {
    if (!(lambda >= 0.0)) throw std::invalid_argument("intrinsic reward weight must be >= 0");
  }
};

/// Progress of agent i towards its position in the goal state:
/// d(goal_i, pos_i(s_t)) - d(goal_i, pos_i(s_{t+1})).
inline double intrinsic_reward_euclidean(const env::WorldConfig& world, const Eigen::VectorXd& goal,
                                         const Eigen::VectorXd& s_t, const Eigen::VectorXd& s_next, int agent) {
  const env::Vec2 g = env::extract_agent_position(world, goal, agent);
  return (g - env::extract_agent_position(world, s_t, agent)).norm() -
         (g - env::extract_agent_position(world, s_next, agent)).norm();
}

/// KL[h(goal) || h(s_t)] - KL[h(goal) || h(s_{t+1})] with h(x) the CVAE posterior
/// q(z | x, context). The trainer passes s_t as the context.
inline double intrinsic_reward_latent(const imagination::CvaeModel& cvae, const Eigen::VectorXd& goal,
                                      const Eigen::VectorXd& s_t, const Eigen::VectorXd& s_next,
                                      const Eigen::VectorXd& context) {
  const auto hg = imagination::encode(cvae, context, goal);
  return nn::gaussian_kl(hg, imagination::encode(cvae, context, s_t)) -
         nn::gaussian_kl(hg, imagination::encode(cvae, context, s_next));
}

inline double proxy_reward(double r_ex, double r_in, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("proxy_reward: lambda must be >= 0");
  return r_ex + lambda * r_in;
}

}  // namespace magi::policy
