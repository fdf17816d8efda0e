#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace magi::nn {

enum class Activation : std::uint8_t { linear = 0, tanh = 1, relu = 2, sigmoid = 3 };

inline std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::linear: return "linear";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "unknown";
}

inline Activation activation_from_code(std::uint8_t code) {
  if (code > 3) throw std::invalid_argument("unknown activation code " + std::to_string(code));
  return static_cast<Activation>(code);
}

struct Layer {
  int in = 0;
  int out = 0;
  Activation act = Activation::linear;

  std::size_t param_count() const {
    return static_cast<std::size_t>(in) * static_cast<std::size_t>(out) + static_cast<std::size_t>(out);
  }
  friend bool operator==(const Layer&, const Layer&) = default;
};

using Layout = std::vector<Layer>;

inline std::size_t param_count(std::span<const Layer> layout) {
  std::size_t n = 0;
  for (const auto& l : layout) n += l.param_count();
  return n;
}

inline void validate_layout(std::span<const Layer> layout) {
  for (std::size_t k = 0; k < layout.size(); ++k) {
    if (layout[k].in <= 0 || layout[k].out <= 0)
      throw std::invalid_argument("layer " + std::to_string(k) + " has non-positive dimension");
    if (k > 0 && layout[k - 1].out != layout[k].in)
      throw std::invalid_argument("layer " + std::to_string(k) + " input " + std::to_string(layout[k].in) +
                                  " does not match previous output " + std::to_string(layout[k - 1].out));
  }
}

// Builds `in -> hidden... -> out` with the given hidden and output activations.
inline Layout mlp_layout(int in, std::span<const int> hidden, int out, Activation hidden_act,
                         Activation out_act) {
  Layout layout;
  int prev = in;
  for (int h : hidden) {
    layout.push_back({prev, h, hidden_act});
    prev = h;
  }
  layout.push_back({prev, out, out_act});
  validate_layout(layout);
  return layout;
}

inline Layout mlp_layout(int in, std::initializer_list<int> hidden, int out, Activation hidden_act,
                         Activation out_act) {
  std::vector<int> h(hidden);
  return mlp_layout(in, std::span<const int>(h), out, hidden_act, out_act);
}

/// Flat parameter vector of one dense network. Per layer the row-major
/// weight matrix (out x in) is followed by the bias vector.
class ParamSet {
 public:
  ParamSet() = default;

  explicit ParamSet(Layout layout) : layout_(std::move(layout)) {
    validate_layout(layout_);
    values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(layout_)));
  }

  ParamSet(Layout layout, Eigen::VectorXd values) : layout_(std::move(layout)), values_(std::move(values)) {
    validate_layout(layout_);
    if (static_cast<std::size_t>(values_.size()) != param_count(layout_))
      throw std::invalid_argument("parameter vector has " + std::to_string(values_.size()) +
                                  " values but layout requires " + std::to_string(param_count(layout_)));
  }

  const Layout& layout() const { return layout_; }
  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  bool empty() const { return layout_.empty(); }

  int input_dim() const { return layout_.empty() ? 0 : layout_.front().in; }
  int output_dim() const { return layout_.empty() ? 0 : layout_.back().out; }

  // Uniform in +-1/sqrt(fan_in) for weights and biases alike.
  void init_uniform(std::mt19937_64& rng, double scale = 1.0) {
    std::size_t offset = 0;
    for (const auto& l : layout_) {
      const double bound = scale / std::sqrt(static_cast<double>(l.in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (std::size_t k = 0; k < l.param_count(); ++k) values_[static_cast<Eigen::Index>(offset + k)] = dist(rng);
      offset += l.param_count();
    }
  }

  bool same_layout(const ParamSet& other) const { return layout_ == other.layout_; }

 private:
  Layout layout_;
  Eigen::VectorXd values_;
};

inline std::size_t param_count(const ParamSet& params) { return param_count(params.layout()); }

inline std::string describe(std::span<const Layer> layout) {
  std::string s;
  for (std::size_t k = 0; k < layout.size(); ++k) {
    if (k == 0) s += std::to_string(layout[k].in);
    s += "->" + std::to_string(layout[k].out) + "(" + std::string(to_string(layout[k].act)) + ")";
  }
  return s.empty() ? "<empty>" : s;
}

}  // namespace magi::nn
