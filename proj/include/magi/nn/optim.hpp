#pragma once

#include "magi/nn/param_set.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace magi::nn {

/// Raised when a loss or gradient stops being finite. The message names the network.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(const std::string& network)
      : std::runtime_error("non-finite value in network '" + network + "'"), network_(network) {}
  const std::string& network() const { return network_; }

 private:
  std::string network_;
};

inline void require_finite(double value, std::string_view network) {
  if (!std::isfinite(value)) throw NonFiniteError(std::string(network));
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;
  AdamConfig config;

  OptimizerState() = default;
  OptimizerState(std::size_t n, AdamConfig cfg)
      : m(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
        v(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
        config(cfg) {}
};

/// Bias-corrected Adam descent step on `params` using the loss gradient `grads`.
inline void adam_step(ParamSet& params, const Eigen::VectorXd& grads, OptimizerState& state,
                      std::string_view network = "unnamed") {
  if (static_cast<std::size_t>(grads.size()) != params.size())
    throw std::invalid_argument("adam_step on '" + std::string(network) + "': gradient length " +
                                std::to_string(grads.size()) + " vs parameter length " +
                                std::to_string(params.size()));
  if (state.m.size() != grads.size() || state.v.size() != grads.size())
    throw std::invalid_argument("adam_step on '" + std::string(network) + "': optimizer state size mismatch");
  if (!grads.allFinite()) throw NonFiniteError(std::string(network));

  const auto& c = state.config;
  state.step += 1;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grads;
  state.v = c.beta2 * state.v + (1.0 - c.beta2) * grads.cwiseProduct(grads);
  const double t = static_cast<double>(state.step);
  const double m_corr = 1.0 - std::pow(c.beta1, t);
  const double v_corr = 1.0 - std::pow(c.beta2, t);
  params.values().array() -=
      c.lr * (state.m.array() / m_corr) / ((state.v.array() / v_corr).sqrt() + c.eps);
}

/// target' = (1 - tau) * target + tau * online
inline ParamSet soft_update(const ParamSet& target, const ParamSet& online, double tau) {
  if (!target.same_layout(online)) throw std::invalid_argument("soft_update: layout mismatch");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau outside [0, 1]");
  ParamSet out = target;
  if (tau == 1.0) {
    out.values() = online.values();
  } else if (tau != 0.0) {
    out.values() = (1.0 - tau) * target.values() + tau * online.values();
  }
  return out;
}

inline void soft_update_inplace(ParamSet& target, const ParamSet& online, double tau) {
  target = soft_update(target, online, tau);
}

}  // namespace magi::nn
