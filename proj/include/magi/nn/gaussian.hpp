#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace magi::nn {

/// Diagonal Gaussian over the latent space.
struct GaussianSpec {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;

  Eigen::Index dim() const { return mu.size(); }
};

inline void validate(const GaussianSpec& g) {
  if (g.mu.size() != g.sigma.size())
    throw std::invalid_argument("GaussianSpec: mu length " + std::to_string(g.mu.size()) + " vs sigma length " +
                                std::to_string(g.sigma.size()));
  for (Eigen::Index k = 0; k < g.sigma.size(); ++k)
    if (!(g.sigma[k] > 0.0)) throw std::invalid_argument("GaussianSpec: non-positive sigma at index " + std::to_string(k));
}

/// Closed-form KL[q || p] for diagonal Gaussians.
inline double gaussian_kl(const GaussianSpec& q, const GaussianSpec& p) {
  validate(q);
  validate(p);
  if (q.dim() != p.dim())
    throw std::invalid_argument("gaussian_kl: dimension " + std::to_string(q.dim()) + " vs " + std::to_string(p.dim()));
  const auto vq = q.sigma.array().square();
  const auto vp = p.sigma.array().square();
  const auto dm = (q.mu - p.mu).array().square();
  return ((p.sigma.array() / q.sigma.array()).log() + (vq + dm) / (2.0 * vp) - 0.5).sum();
}

/// Partial derivatives of gaussian_kl with respect to both means and both log-sigmas.
struct KlGrads {
  Eigen::VectorXd mu_q, log_sigma_q, mu_p, log_sigma_p;
};

inline KlGrads gaussian_kl_grads(const GaussianSpec& q, const GaussianSpec& p) {
  const Eigen::ArrayXd vp = p.sigma.array().square();
  const Eigen::ArrayXd ratio = q.sigma.array().square() / vp;
  const Eigen::ArrayXd diff = (q.mu - p.mu).array();
  KlGrads g;
  g.mu_q = (diff / vp).matrix();
  g.mu_p = -g.mu_q;
  g.log_sigma_q = (ratio - 1.0).matrix();
  g.log_sigma_p = (1.0 - ratio - diff.square() / vp).matrix();
  return g;
}

/// z = mu + sigma * epsilon
inline Eigen::VectorXd reparam_sample(const GaussianSpec& g, const Eigen::VectorXd& epsilon) {
  if (epsilon.size() != g.dim())
    throw std::invalid_argument("reparam_sample: epsilon length " + std::to_string(epsilon.size()) +
                                " vs dimension " + std::to_string(g.dim()));
  return g.mu + g.sigma.cwiseProduct(epsilon);
}

/// Log-density of a diagonal Gaussian, used by Monte Carlo checks.
inline double gaussian_log_density(const GaussianSpec& g, const Eigen::VectorXd& x) {
  constexpr double kLog2Pi = 1.8378770664093454836;
  const auto zs = ((x - g.mu).array() / g.sigma.array());
  return (-0.5 * zs.square() - g.sigma.array().log() - 0.5 * kLog2Pi).sum();
}

}  // namespace magi::nn
