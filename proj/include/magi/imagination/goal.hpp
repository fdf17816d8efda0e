#pragma once

#include "magi/imagination/cvae.hpp"

#include <Eigen/Core>

#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace magi::imagination {

enum class GoalStrategy { uniform, deterministic };

inline std::string_view strategy_name(GoalStrategy s) {
  return s == GoalStrategy::uniform ? "uniform" : "deterministic";
}

inline GoalStrategy strategy_from_name(std::string_view name) {
  if (name == "uniform") return GoalStrategy::uniform;
  if (name == "deterministic") return GoalStrategy::deterministic;
  throw std::invalid_argument("unknown goal strategy '" + std::string(name) + "'");
}

struct GoalActorConfig {
  GoalStrategy strategy = GoalStrategy::uniform;
  int samples = 16;        // M
  double range = 2.0;      // D
  int refresh_period = 1;  // steps a goal is held before regeneration

  void validate() const {
    if (samples < 1) throw std::invalid_argument("goal sample count must be >= 1");
    if (!(range > 0.0)) throw std::invalid_argument("goal sampling range must be positive");
    if (refresh_period < 1) throw std::invalid_argument("goal refresh period must be >= 1");
  }
};

struct GoalSample {
  Vector z;
  Vector goal;  // decoded s_{t+c}
  double value = 0.0;
};

// ---------------------------------------------------------------- goal critic

inline nn::ParamSet make_goal_critic(int state_dim, std::span<const int> hidden, std::mt19937_64& rng) {
  nn::ParamSet p(nn::mlp_layout(state_dim, hidden, 1, nn::Activation::relu, nn::Activation::linear));
  p.init_uniform(rng);
  return p;
}

inline double goal_critic_value(const nn::ParamSet& critic, const Vector& state) {
  return nn::mlp_forward(critic, state)[0];
}

using nn::LossAndGrads;

/// Mean over the batch of (1/N) sum_i [V(s_t) - Q^i(s_t, a_t^i)]^2.
/// `states` is state_dim x B; `q_values` is N x B.
inline LossAndGrads goal_critic_loss(const nn::ParamSet& critic, const Matrix& states, const Matrix& q_values) {
  if (q_values.rows() == 0) throw std::invalid_argument("goal_critic_loss: no agent critic values (N = 0)");
  if (states.cols() == 0 || q_values.cols() != states.cols())
    throw std::invalid_argument("goal_critic_loss: batch size mismatch");
  const double n = static_cast<double>(q_values.rows());
  const double b = static_cast<double>(states.cols());
  nn::MlpCache cache;
  const Matrix v = nn::mlp_forward(critic, states, &cache);
  const Matrix diff = (-q_values).rowwise() + v.row(0);
  LossAndGrads out;
  out.loss = diff.squaredNorm() / (n * b);
  nn::require_finite(out.loss, "goal_critic");
  const Matrix dv = diff.colwise().sum() * (2.0 / (n * b));
  out.grads = nn::mlp_backward(critic, cache, dv).params;
  return out;
}

// ----------------------------------------------------------------- goal actor

/// Deterministic sampler over reparameterization coefficients:
/// (s_t, mu, sigma) -> epsilon in [-D, D]^L via a tanh output scaled by D.
inline nn::ParamSet make_goal_actor(int state_dim, int latent_dim, std::span<const int> hidden, std::mt19937_64& rng) {
  nn::ParamSet p(nn::mlp_layout(state_dim + 2 * latent_dim, hidden, latent_dim, nn::Activation::relu,
                                nn::Activation::tanh));
  p.init_uniform(rng);
  return p;
}

inline Matrix goal_actor_input(const Matrix& s, const Matrix& mu, const Matrix& sigma) {
  Matrix in(s.rows() + mu.rows() + sigma.rows(), s.cols());
  in << s, mu, sigma;
  return in;
}

inline Vector goal_actor_forward(const nn::ParamSet& actor, const Vector& s, const Vector& mu, const Vector& sigma,
                                 double range) {
  if (mu.size() != sigma.size() || actor.input_dim() != s.size() + 2 * mu.size())
    throw std::invalid_argument("goal_actor_forward: dimension mismatch");
  return range * nn::mlp_forward(actor, goal_actor_input(s, mu, sigma)).col(0);
}

struct GoalActorGrad {
  double objective = 0.0;  // batch mean of V(decode(s, mu + sigma * pi(s, mu, sigma)))
  Vector ascent;           // gradient of the objective with respect to the actor parameters
};

/// Sampled deterministic policy gradient through the frozen decoder and goal
/// critic. The prior statistics are treated as inputs.
inline GoalActorGrad goal_actor_update(const nn::ParamSet& actor, const CvaeModel& cvae, const nn::ParamSet& critic,
                                       const Matrix& states, double range) {
  const Eigen::Index batch = states.cols();
  if (batch == 0) throw std::invalid_argument("goal_actor_update: empty batch");
  const GaussianBatch pr = prior_batch(cvae, states);
  nn::MlpCache actor_cache, dec_cache, critic_cache;
  const Matrix squashed = nn::mlp_forward(actor, goal_actor_input(states, pr.mu, pr.sigma), &actor_cache);
  const Matrix z = pr.mu + pr.sigma.cwiseProduct(range * squashed);
  const Matrix decoded = decode_batch(cvae, states, z, &dec_cache);
  const Matrix v = nn::mlp_forward(critic, decoded, &critic_cache);

  GoalActorGrad out;
  out.objective = v.mean();
  nn::require_finite(out.objective, "goal_actor");
  const Matrix dv = Matrix::Constant(1, batch, 1.0 / static_cast<double>(batch));
  const Matrix d_decoded = nn::mlp_input_grad(critic, critic_cache, dv);
  const Matrix d_dec_in = nn::mlp_input_grad(cvae.decoder, dec_cache, d_decoded);
  const Matrix d_squashed = range * d_dec_in.bottomRows(cvae.latent_dim).cwiseProduct(pr.sigma);
  out.ascent = nn::mlp_backward(actor, actor_cache, d_squashed).params;
  if (!out.ascent.allFinite()) throw nn::NonFiniteError("goal_actor");
  return out;
}

// ------------------------------------------------------------ goal generation

/// Scores every candidate decoded from z^j = mu_prior + sigma_prior * eps^j with
/// eps^j uniform in [-D, D]^L. Candidates are returned in draw order.
inline std::vector<GoalSample> imagine_goal_candidates(const CvaeModel& cvae, const nn::ParamSet& critic,
                                                       const Vector& s_t, int samples, double range,
                                                       std::mt19937_64& rng) {
  if (samples < 1) throw std::invalid_argument("imagine_goal: sample count must be >= 1");
  const nn::GaussianSpec pr = prior(cvae, s_t);
  std::uniform_real_distribution<double> u(-range, range);
  Matrix z(cvae.latent_dim, samples);
  for (int j = 0; j < samples; ++j) {
    Vector eps(cvae.latent_dim);
    for (int k = 0; k < cvae.latent_dim; ++k) eps[k] = u(rng);
    z.col(j) = nn::reparam_sample(pr, eps);
  }
  const Matrix s_rep = s_t.replicate(1, samples);
  const Matrix decoded = decode_batch(cvae, s_rep, z);
  std::vector<GoalSample> out(static_cast<std::size_t>(samples));
  for (int j = 0; j < samples; ++j) {
    Vector goal = decoded.col(j);
    const double value = goal_critic_value(critic, goal);
    out[static_cast<std::size_t>(j)] = {z.col(j), std::move(goal), value};
  }
  return out;
}

/// Highest-value candidate; ties resolve to the lowest index.
inline const GoalSample& select_best(const std::vector<GoalSample>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("select_best: no candidates");
  std::size_t best = 0;
  for (std::size_t j = 1; j < candidates.size(); ++j)
    if (candidates[j].value > candidates[best].value) best = j;
  return candidates[best];
}

inline GoalSample imagine_goal_uniform(const CvaeModel& cvae, const nn::ParamSet& critic, const Vector& s_t,
                                       int samples, double range, std::mt19937_64& rng) {
  return select_best(imagine_goal_candidates(cvae, critic, s_t, samples, range, rng));
}

inline GoalSample imagine_goal_deterministic(const CvaeModel& cvae, const nn::ParamSet& critic,
                                             const nn::ParamSet& actor, const Vector& s_t, double range) {
  const nn::GaussianSpec pr = prior(cvae, s_t);
  const Vector eps = goal_actor_forward(actor, s_t, pr.mu, pr.sigma, range);
  GoalSample g;
  g.z = nn::reparam_sample(pr, eps);
  g.goal = decode(cvae, s_t, g.z);
  g.value = goal_critic_value(critic, g.goal);
  return g;
}

}  // namespace magi::imagination
