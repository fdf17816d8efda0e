#pragma once

#include "magi/nn/param_set.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace magi::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutRowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Per-layer inputs and post-activation outputs of one batched forward pass.
/// Columns are samples.
struct MlpCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> outputs;
  bool valid = false;

  const Matrix& output() const { return outputs.back(); }
};

namespace detail {

inline void apply_activation(Activation act, Matrix& m) {
  switch (act) {
    case Activation::linear: break;
    case Activation::tanh: m = m.array().tanh().matrix(); break;
    case Activation::relu: m = m.cwiseMax(0.0); break;
    case Activation::sigmoid: m = (1.0 / (1.0 + (-m.array()).exp())).matrix(); break;
  }
}

// Multiplies the incoming gradient by the activation derivative, written in
// terms of the layer output.
inline void activation_backward(Activation act, const Matrix& out, Matrix& grad) {
  switch (act) {
    case Activation::linear: break;
    case Activation::tanh: grad.array() *= 1.0 - out.array().square(); break;
    case Activation::relu: grad.array() *= (out.array() > 0.0).cast<double>(); break;
    case Activation::sigmoid: grad.array() *= out.array() * (1.0 - out.array()); break;
  }
}

inline std::string dim_error(const char* what, Eigen::Index got, Eigen::Index expected) {
  return std::string(what) + ": got length " + std::to_string(got) + ", expected " + std::to_string(expected);
}

}  // namespace detail

/// Batched forward pass over raw parameter storage laid out as in ParamSet.
/// An empty layout is the identity map.
inline Matrix mlp_forward(std::span<const Layer> layout, const double* values, const Matrix& input,
                          MlpCache* cache = nullptr) {
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
    cache->valid = false;
  }
  if (layout.empty()) {
    if (cache) {
      cache->outputs.push_back(input);
      cache->valid = true;
    }
    return input;
  }
  if (input.rows() != layout.front().in)
    throw std::invalid_argument(detail::dim_error("mlp_forward input", input.rows(), layout.front().in));

  Matrix x = input;
  std::size_t offset = 0;
  for (const auto& l : layout) {
    RowMajorMap w(values + offset, l.out, l.in);
    Eigen::Map<const Vector> b(values + offset + static_cast<std::size_t>(l.in) * l.out, l.out);
    Matrix y = w * x;
    y.colwise() += b;
    detail::apply_activation(l.act, y);
    if (cache) cache->inputs.push_back(std::move(x));
    x = std::move(y);
    if (cache) cache->outputs.push_back(x);
    offset += l.param_count();
  }
  if (cache) cache->valid = true;
  return x;
}

/// Reverse pass. Accumulates parameter gradients (summed over the batch) into
/// `param_grad` when non-null and returns the gradient with respect to the input.
inline Matrix mlp_backward(std::span<const Layer> layout, const double* values, const MlpCache& cache,
                           const Matrix& output_grad, double* param_grad) {
  if (!cache.valid) throw std::logic_error("mlp_backward called without a forward cache");
  if (layout.empty()) return output_grad;
  if (output_grad.rows() != layout.back().out || output_grad.cols() != cache.output().cols())
    throw std::invalid_argument(detail::dim_error("mlp_backward output_grad", output_grad.rows(), layout.back().out));

  std::vector<std::size_t> offsets(layout.size());
  std::size_t offset = 0;
  for (std::size_t k = 0; k < layout.size(); ++k) {
    offsets[k] = offset;
    offset += layout[k].param_count();
  }

  Matrix grad = output_grad;
  for (std::size_t k = layout.size(); k-- > 0;) {
    const auto& l = layout[k];
    detail::activation_backward(l.act, cache.outputs[k], grad);
    if (param_grad) {
      MutRowMajorMap gw(param_grad + offsets[k], l.out, l.in);
      Eigen::Map<Vector> gb(param_grad + offsets[k] + static_cast<std::size_t>(l.in) * l.out, l.out);
      gw.noalias() += grad * cache.inputs[k].transpose();
      gb.noalias() += grad.rowwise().sum();
    }
    RowMajorMap w(values + offsets[k], l.out, l.in);
    Matrix next = w.transpose() * grad;
    grad = std::move(next);
  }
  return grad;
}

inline Matrix mlp_forward(const ParamSet& params, const Matrix& input, MlpCache* cache = nullptr) {
  return mlp_forward(params.layout(), params.values().data(), input, cache);
}

inline Vector mlp_forward(const ParamSet& params, const Vector& input) {
  Matrix in = input;
  return mlp_forward(params, in).col(0);
}

struct LossAndGrads {
  double loss = 0.0;
  Vector grads;
};

struct MlpGrads {
  Vector params;
  Matrix input;
};

inline MlpGrads mlp_backward(const ParamSet& params, const MlpCache& cache, const Matrix& output_grad) {
  MlpGrads g;
  g.params = Vector::Zero(static_cast<Eigen::Index>(params.size()));
  g.input = mlp_backward(params.layout(), params.values().data(), cache, output_grad, g.params.data());
  return g;
}

// Input gradient only; skips the parameter-gradient products.
inline Matrix mlp_input_grad(const ParamSet& params, const MlpCache& cache, const Matrix& output_grad) {
  return mlp_backward(params.layout(), params.values().data(), cache, output_grad, nullptr);
}

}  // namespace magi::nn
