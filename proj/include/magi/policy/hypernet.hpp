#pragma once

#include "magi/nn/mlp.hpp"
#include "magi/nn/param_set.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace magi::policy {

using nn::Matrix;
using nn::Vector;

/// Which policy layers the hypernetwork produces.
enum class HypernetTarget { head, full };

inline HypernetTarget hypernet_target_from_name(std::string_view name) {
  if (name == "head") return HypernetTarget::head;
  if (name == "full") return HypernetTarget::full;
  throw std::invalid_argument("unknown hypernet target '" + std::string(name) + "'");
}

/// Goal-conditioned policy. A goal-independent trunk maps the observation to
/// features; the remaining layers take their weights from a hypernetwork fed
/// with the goal. The last generated layer is tanh-squashed.
struct PolicyNet {
  nn::ParamSet trunk;     // empty when the hypernetwork generates the full policy
  nn::ParamSet hypernet;  // goal -> generated parameter vector
  nn::Layout head;        // layout of the generated layers
  int obs_dim = 0;
  int goal_dim = 0;
  int action_dim = 0;

  std::size_t head_param_count() const { return nn::param_count(head); }
};

inline PolicyNet make_policy(int obs_dim, int goal_dim, int action_dim, std::span<const int> hidden,
                             HypernetTarget target, std::mt19937_64& rng) {
  using nn::Activation;
  if (hidden.empty()) throw std::invalid_argument("make_policy: at least one hidden layer required");
  PolicyNet p;
  p.obs_dim = obs_dim;
  p.goal_dim = goal_dim;
  p.action_dim = action_dim;
  if (target == HypernetTarget::head) {
    p.trunk = nn::ParamSet(nn::mlp_layout(obs_dim, hidden.first(hidden.size() - 1), hidden.back(), Activation::relu,
                                          Activation::relu));
    p.head = {{hidden.back(), action_dim, Activation::tanh}};
  } else {
    p.head = nn::mlp_layout(obs_dim, hidden, action_dim, Activation::relu, Activation::tanh);
  }
  p.hypernet = nn::ParamSet(nn::mlp_layout(goal_dim, hidden, static_cast<int>(p.head_param_count()),
                                           Activation::relu, Activation::linear));
  p.trunk.init_uniform(rng);
  p.hypernet.init_uniform(rng);
  return p;
}

/// Parameters of the generated layers for each goal column.
inline Matrix hypernet_params(const PolicyNet& p, const Matrix& goals, nn::MlpCache* cache = nullptr) {
  if (goals.rows() != p.goal_dim)
    throw std::invalid_argument("hypernet_params: goal length " + std::to_string(goals.rows()) + ", expected " +
                                std::to_string(p.goal_dim));
  return nn::mlp_forward(p.hypernet, goals, cache);
}

inline Vector hypernet_params(const PolicyNet& p, const Vector& goal) {
  return hypernet_params(p, Matrix(goal)).col(0);
}

struct PolicyCache {
  nn::MlpCache trunk;
  nn::MlpCache hyper;
  Matrix head_params;
  std::vector<Matrix> head_inputs;
  std::vector<Matrix> head_outputs;
};

namespace detail {

// Forward through layers whose parameters differ per sample (one column of
// `params` per sample).
inline Matrix per_sample_forward(const nn::Layout& layout, const Matrix& params, const Matrix& input,
                                 std::vector<Matrix>* inputs, std::vector<Matrix>* outputs) {
  Matrix x = input;
  std::size_t offset = 0;
  const Eigen::Index batch = input.cols();
  for (const auto& l : layout) {
    Matrix y(l.out, batch);
    for (Eigen::Index j = 0; j < batch; ++j) {
      const double* base = params.col(j).data() + offset;
      nn::RowMajorMap w(base, l.out, l.in);
      Eigen::Map<const Vector> b(base + static_cast<std::size_t>(l.in) * l.out, l.out);
      y.col(j).noalias() = w * x.col(j);
      y.col(j) += b;
    }
    nn::detail::apply_activation(l.act, y);
    if (inputs) inputs->push_back(std::move(x));
    x = std::move(y);
    if (outputs) outputs->push_back(x);
    offset += l.param_count();
  }
  return x;
}

}  // namespace detail

inline Matrix policy_forward(const PolicyNet& p, const Matrix& obs, const Matrix& goals, PolicyCache* cache = nullptr) {
  if (obs.rows() != p.obs_dim)
    throw std::invalid_argument("policy_forward: observation length " + std::to_string(obs.rows()) + ", expected " +
                                std::to_string(p.obs_dim));
  if (goals.cols() != obs.cols()) throw std::invalid_argument("policy_forward: batch size mismatch");
  if (cache) {
    cache->head_inputs.clear();
    cache->head_outputs.clear();
  }
  const Matrix features = nn::mlp_forward(p.trunk, obs, cache ? &cache->trunk : nullptr);
  Matrix params = hypernet_params(p, goals, cache ? &cache->hyper : nullptr);
  Matrix out = detail::per_sample_forward(p.head, params, features, cache ? &cache->head_inputs : nullptr,
                                          cache ? &cache->head_outputs : nullptr);
  if (cache) cache->head_params = std::move(params);
  return out;
}

struct PolicyGrads {
  Vector trunk;
  Vector hypernet;
  Matrix obs;
  Matrix goal;
};

/// Reverse pass through generated head, hypernetwork and trunk jointly.
inline PolicyGrads policy_backward(const PolicyNet& p, const PolicyCache& cache, const Matrix& d_action) {
  const Eigen::Index batch = d_action.cols();
  Matrix d_params = Matrix::Zero(cache.head_params.rows(), batch);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& l : p.head) {
    offsets.push_back(offset);
    offset += l.param_count();
  }
  Matrix grad = d_action;
  for (std::size_t k = p.head.size(); k-- > 0;) {
    const auto& l = p.head[k];
    nn::detail::activation_backward(l.act, cache.head_outputs[k], grad);
    Matrix next(l.in, batch);
    for (Eigen::Index j = 0; j < batch; ++j) {
      const double* base = cache.head_params.col(j).data() + offsets[k];
      double* gbase = d_params.col(j).data() + offsets[k];
      nn::MutRowMajorMap gw(gbase, l.out, l.in);
      Eigen::Map<Vector> gb(gbase + static_cast<std::size_t>(l.in) * l.out, l.out);
      gw.noalias() = grad.col(j) * cache.head_inputs[k].col(j).transpose();
      gb = grad.col(j);
      nn::RowMajorMap w(base, l.out, l.in);
      next.col(j).noalias() = w.transpose() * grad.col(j);
    }
    grad = std::move(next);
  }
  PolicyGrads g;
  g.trunk = Vector::Zero(static_cast<Eigen::Index>(p.trunk.size()));
  g.obs = nn::mlp_backward(p.trunk.layout(), p.trunk.values().data(), cache.trunk, grad, g.trunk.data());
  g.hypernet = Vector::Zero(static_cast<Eigen::Index>(p.hypernet.size()));
  g.goal = nn::mlp_backward(p.hypernet.layout(), p.hypernet.values().data(), cache.hyper, d_params, g.hypernet.data());
  return g;
}

/// Noise-perturbed action clamped to [-1, 1]. Pass a zero vector for greedy actions.
inline Vector agent_action(const PolicyNet& p, const Vector& obs, const Vector& goal, const Vector& noise) {
  Vector a = policy_forward(p, Matrix(obs), Matrix(goal)).col(0);
  if (noise.size() != a.size()) throw std::invalid_argument("agent_action: noise length mismatch");
  return (a + noise).cwiseMax(-1.0).cwiseMin(1.0);
}

}  // namespace magi::policy
