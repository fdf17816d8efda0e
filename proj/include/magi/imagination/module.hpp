#pragma once

#include "magi/imagination/cvae.hpp"
#include "magi/imagination/goal.hpp"
#include "magi/nn/checkpoint.hpp"
#include "magi/nn/optim.hpp"

#include <random>
#include <vector>

namespace magi::imagination {

struct ImaginationConfig {
  int latent_dim = 8;
  int horizon = 4;
  std::vector<int> hidden{64, 64};
  GoalActorConfig goal;
  nn::AdamConfig cvae_opt{1e-3};
  nn::AdamConfig critic_opt{1e-3};
  nn::AdamConfig actor_opt{1e-4};
  double log_sigma_min = -5.0;
  double log_sigma_max = 2.0;
};

/// CVAE, goal critic and goal actor together with their optimizer states.
class Imagination {
 public:
  Imagination(int state_dim, ImaginationConfig config, std::mt19937_64& init_rng) : config_(std::move(config)) {
    config_.goal.validate();
    cvae_ = make_cvae(state_dim, config_.latent_dim, config_.horizon, config_.hidden, init_rng);
    cvae_.log_sigma_min = config_.log_sigma_min;
    cvae_.log_sigma_max = config_.log_sigma_max;
    critic_ = make_goal_critic(state_dim, config_.hidden, init_rng);
    actor_ = make_goal_actor(state_dim, config_.latent_dim, config_.hidden, init_rng);
    enc_opt_ = nn::OptimizerState(cvae_.encoder.size(), config_.cvae_opt);
    prior_opt_ = nn::OptimizerState(cvae_.prior.size(), config_.cvae_opt);
    dec_opt_ = nn::OptimizerState(cvae_.decoder.size(), config_.cvae_opt);
    critic_opt_ = nn::OptimizerState(critic_.size(), config_.critic_opt);
    actor_opt_ = nn::OptimizerState(actor_.size(), config_.actor_opt);
  }

  GoalSample generate(const Vector& s_t, std::mt19937_64& rng) const {
    if (config_.goal.strategy == GoalStrategy::uniform)
      return imagine_goal_uniform(cvae_, critic_, s_t, config_.goal.samples, config_.goal.range, rng);
    return imagine_goal_deterministic(cvae_, critic_, actor_, s_t, config_.goal.range);
  }

  CvaeLoss update_cvae(const Matrix& s_t, const Matrix& s_tc, std::mt19937_64& rng) {
    std::normal_distribution<double> n01;
    Matrix eps(cvae_.latent_dim, s_t.cols());
    for (Eigen::Index j = 0; j < eps.cols(); ++j)
      for (Eigen::Index k = 0; k < eps.rows(); ++k) eps(k, j) = n01(rng);
    auto r = cvae_loss_and_grads(cvae_, s_t, s_tc, eps);
    nn::adam_step(cvae_.encoder, r.grad_encoder, enc_opt_, "cvae_encoder");
    nn::adam_step(cvae_.prior, r.grad_prior, prior_opt_, "cvae_prior");
    nn::adam_step(cvae_.decoder, r.grad_decoder, dec_opt_, "cvae_decoder");
    return r;
  }

  double update_goal_critic(const Matrix& states, const Matrix& q_values) {
    auto r = goal_critic_loss(critic_, states, q_values);
    nn::adam_step(critic_, r.grads, critic_opt_, "goal_critic");
    return r.loss;
  }

  double update_goal_actor(const Matrix& states) {
    auto r = goal_actor_update(actor_, cvae_, critic_, states, config_.goal.range);
    nn::adam_step(actor_, -r.ascent, actor_opt_, "goal_actor");
    return r.objective;
  }

  void save(nn::Checkpoint& ck) const {
    ck.add("imagination/encoder", cvae_.encoder);
    ck.add("imagination/prior", cvae_.prior);
    ck.add("imagination/decoder", cvae_.decoder);
    ck.add("imagination/goal_critic", critic_);
    ck.add("imagination/goal_actor", actor_);
  }

  void load(const nn::Checkpoint& ck) {
    cvae_.encoder = ck.get("imagination/encoder", cvae_.encoder.layout());
    cvae_.prior = ck.get("imagination/prior", cvae_.prior.layout());
    cvae_.decoder = ck.get("imagination/decoder", cvae_.decoder.layout());
    critic_ = ck.get("imagination/goal_critic", critic_.layout());
    actor_ = ck.get("imagination/goal_actor", actor_.layout());
  }

  const ImaginationConfig& config() const { return config_; }
  const CvaeModel& cvae() const { return cvae_; }
  CvaeModel& cvae() { return cvae_; }
  const nn::ParamSet& goal_critic() const { return critic_; }
  nn::ParamSet& goal_critic() { return critic_; }
  const nn::ParamSet& goal_actor() const { return actor_; }
  nn::ParamSet& goal_actor() { return actor_; }

 private:
  ImaginationConfig config_;
  CvaeModel cvae_;
  nn::ParamSet critic_;
  nn::ParamSet actor_;
  nn::OptimizerState enc_opt_, prior_opt_, dec_opt_, critic_opt_, actor_opt_;
};

}  // namespace magi::imagination
