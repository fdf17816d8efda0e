#pragma once

#include "magi/nn/gaussian.hpp"
#include "magi/nn/mlp.hpp"
#include "magi/nn/optim.hpp"
#include "magi/nn/param_set.hpp"

#include <Eigen/Core>

#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace magi::imagination {

using nn::Matrix;
using nn::Vector;

/// Conditional VAE over (s_t, s_{t+c}) pairs.
///   encoder: s_t ++ s_{t+c} -> (mu, log sigma)   posterior q(z | s_{t+c}, s_t)
///   prior:   s_t            -> (mu, log sigma)   p(z | s_t)
///   decoder: s_t ++ z       -> predicted s_{t+c}
struct CvaeModel {
  nn::ParamSet encoder;
  nn::ParamSet prior;
  nn::ParamSet decoder;
  int state_dim = 0;
  int latent_dim = 0;
  int horizon = 1;
  double log_sigma_min = -5.0;
  double log_sigma_max = 2.0;

  void validate() const {
    if (encoder.input_dim() != 2 * state_dim || encoder.output_dim() != 2 * latent_dim)
      throw std::invalid_argument("CVAE encoder layout does not match state/latent dimensions");
    if (prior.input_dim() != state_dim || prior.output_dim() != 2 * latent_dim)
      throw std::invalid_argument("CVAE prior layout does not match state/latent dimensions");
    if (decoder.input_dim() != state_dim + latent_dim || decoder.output_dim() != state_dim)
      throw std::invalid_argument("CVAE decoder layout does not match state/latent dimensions");
  }
};

inline CvaeModel make_cvae(int state_dim, int latent_dim, int horizon, std::span<const int> hidden,
                           std::mt19937_64& rng) {
  using nn::Activation;
  CvaeModel m;
  m.state_dim = state_dim;
  m.latent_dim = latent_dim;
  m.horizon = horizon;
  m.encoder = nn::ParamSet(nn::mlp_layout(2 * state_dim, hidden, 2 * latent_dim, Activation::relu, Activation::linear));
  m.prior = nn::ParamSet(nn::mlp_layout(state_dim, hidden, 2 * latent_dim, Activation::relu, Activation::linear));
  m.decoder = nn::ParamSet(nn::mlp_layout(state_dim + latent_dim, hidden, state_dim, Activation::relu, Activation::linear));
  m.encoder.init_uniform(rng);
  m.prior.init_uniform(rng);
  m.decoder.init_uniform(rng);
  return m;
}

/// Batched Gaussian head: rows [0, L) are means, rows [L, 2L) raw log-sigmas.
struct GaussianBatch {
  Matrix mu;
  Matrix sigma;
  Matrix log_sigma_mask;  // 1 where the clamp is inactive, else 0

  nn::GaussianSpec column(Eigen::Index j) const { return {mu.col(j), sigma.col(j)}; }
};

inline GaussianBatch split_gaussian(const Matrix& head, int latent, double log_min, double log_max) {
  GaussianBatch g;
  g.mu = head.topRows(latent);
  const Matrix raw = head.bottomRows(latent);
  g.sigma = raw.cwiseMax(log_min).cwiseMin(log_max).array().exp().matrix();
  g.log_sigma_mask = ((raw.array() >= log_min) && (raw.array() <= log_max)).cast<double>().matrix();
  return g;
}

inline void check_rows(const Matrix& m, int rows, const char* what) {
  if (m.rows() != rows)
    throw std::invalid_argument(std::string(what) + ": got length " + std::to_string(m.rows()) + ", expected " +
                                std::to_string(rows));
}

inline GaussianBatch encode_batch(const CvaeModel& m, const Matrix& s_t, const Matrix& s_tc, nn::MlpCache* cache = nullptr) {
  check_rows(s_t, m.state_dim, "encode s_t");
  check_rows(s_tc, m.state_dim, "encode s_{t+c}");
  Matrix in(2 * m.state_dim, s_t.cols());
  in << s_t, s_tc;
  return split_gaussian(nn::mlp_forward(m.encoder, in, cache), m.latent_dim, m.log_sigma_min, m.log_sigma_max);
}

inline GaussianBatch prior_batch(const CvaeModel& m, const Matrix& s_t, nn::MlpCache* cache = nullptr) {
  check_rows(s_t, m.state_dim, "prior s_t");
  return split_gaussian(nn::mlp_forward(m.prior, s_t, cache), m.latent_dim, m.log_sigma_min, m.log_sigma_max);
}

inline Matrix decode_batch(const CvaeModel& m, const Matrix& s_t, const Matrix& z, nn::MlpCache* cache = nullptr) {
  check_rows(s_t, m.state_dim, "decode s_t");
  check_rows(z, m.latent_dim, "decode z");
  Matrix in(m.state_dim + m.latent_dim, s_t.cols());
  in << s_t, z;
  return nn::mlp_forward(m.decoder, in, cache);
}

inline nn::GaussianSpec encode(const CvaeModel& m, const Vector& s_t, const Vector& s_tc) {
  return encode_batch(m, s_t, s_tc).column(0);
}

inline nn::GaussianSpec prior(const CvaeModel& m, const Vector& s_t) { return prior_batch(m, s_t).column(0); }

inline Vector decode(const CvaeModel& m, const Vector& s_t, const Vector& z) {
  return decode_batch(m, s_t, z).col(0);
}

struct CvaeLoss {
  double loss = 0.0;
  double kl = 0.0;     // batch mean of KL[q || p]
  double recon = 0.0;  // batch mean of 0.5 * ||decoded - s_{t+c}||^2
  Vector grad_encoder;
  Vector grad_prior;
  Vector grad_decoder;
};

/// Negative ELBO under a unit-variance Gaussian likelihood, one reparameterized
/// sample per pair. `epsilon` is latent x batch standard-normal noise.
inline CvaeLoss cvae_loss_and_grads(const CvaeModel& m, const Matrix& s_t, const Matrix& s_tc, const Matrix& epsilon) {
  const Eigen::Index batch = s_t.cols();
  if (batch == 0) throw std::invalid_argument("cvae_loss_and_grads: empty batch");
  if (s_tc.cols() != batch || epsilon.cols() != batch) throw std::invalid_argument("cvae_loss_and_grads: batch size mismatch");
  check_rows(epsilon, m.latent_dim, "cvae epsilon");
  const int L = m.latent_dim;
  const double inv_b = 1.0 / static_cast<double>(batch);

  nn::MlpCache enc_cache, prior_cache, dec_cache;
  const GaussianBatch q = encode_batch(m, s_t, s_tc, &enc_cache);
  const GaussianBatch p = prior_batch(m, s_t, &prior_cache);
  const Matrix z = q.mu + q.sigma.cwiseProduct(epsilon);
  const Matrix decoded = decode_batch(m, s_t, z, &dec_cache);

  const Matrix diff = decoded - s_tc;
  const Eigen::ArrayXXd vp = p.sigma.array().square();
  const Eigen::ArrayXXd ratio = q.sigma.array().square() / vp;
  const Eigen::ArrayXXd dmu = (q.mu - p.mu).array();
  const Eigen::ArrayXXd kl_terms = (p.sigma.array() / q.sigma.array()).log() + (ratio + dmu.square() / vp - 1.0) * 0.5;

  CvaeLoss out;
  out.kl = kl_terms.sum() * inv_b;
  out.recon = 0.5 * diff.squaredNorm() * inv_b;
  out.loss = out.kl + out.recon;
  nn::require_finite(out.loss, "cvae");

  out.grad_decoder = Vector::Zero(static_cast<Eigen::Index>(m.decoder.size()));
  const Matrix d_dec_in = nn::mlp_backward(m.decoder.layout(), m.decoder.values().data(), dec_cache, diff * inv_b,
                                           out.grad_decoder.data());
  const Matrix dz = d_dec_in.bottomRows(L);

  Matrix d_enc(2 * L, batch);
  d_enc.topRows(L) = dz + (dmu / vp).matrix() * inv_b;
  d_enc.bottomRows(L) = (dz.array() * epsilon.array() * q.sigma.array() + (ratio - 1.0) * inv_b).matrix()
                            .cwiseProduct(q.log_sigma_mask);
  out.grad_encoder = Vector::Zero(static_cast<Eigen::Index>(m.encoder.size()));
  nn::mlp_backward(m.encoder.layout(), m.encoder.values().data(), enc_cache, d_enc, out.grad_encoder.data());

  Matrix d_prior(2 * L, batch);
  d_prior.topRows(L) = (-dmu / vp).matrix() * inv_b;
  d_prior.bottomRows(L) = ((1.0 - ratio - dmu.square() / vp) * inv_b).matrix().cwiseProduct(p.log_sigma_mask);
  out.grad_prior = Vector::Zero(static_cast<Eigen::Index>(m.prior.size()));
  nn::mlp_backward(m.prior.layout(), m.prior.values().data(), prior_cache, d_prior, out.grad_prior.data());
  return out;
}

}  // namespace magi::imagination
