#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace magi::trainer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One environment step. Observations are recomputed from the stored states.
struct Transition {
  Vector state;
  Vector actions;       // 2N joint action as executed
  double reward_ex = 0.0;
  Vector reward_in;     // per-agent intrinsic reward (zeros when unused)
  Vector next_state;
  Vector goal;          // goal in force at `state`
  Vector next_goal;     // goal in force at `next_state`
  bool terminal = false;
  std::int64_t episode = 0;
  int step = 0;         // index of `state` within its episode
};

struct HorizonPairs {
  Matrix s_t;   // state_dim x B
  Matrix s_tc;  // state_dim x B
  std::vector<std::size_t> first;  // logical indices of the starting transitions
};

/// Fixed-capacity ring of transitions. Logical index 0 is the oldest entry.
/// Keeps a running count of valid horizon pairs for the configured horizon.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int horizon) : capacity_(capacity), horizon_(horizon) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be >= 1");
    if (horizon < 1) throw std::invalid_argument("replay horizon must be >= 1");
    data_.reserve(std::min<std::size_t>(capacity, 1u << 16));
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  int horizon() const { return horizon_; }
  bool empty() const { return data_.empty(); }

  const Transition& at(std::size_t k) const {
    if (k >= data_.size()) throw std::out_of_range("replay index out of range");
    return data_[(head_ + k) % data_.size()];
  }

  void push(Transition t) {
    if (data_.size() == capacity_) {
      if (pair_valid(0, horizon_)) --valid_pairs_;
      data_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    } else {
      data_.push_back(std::move(t));
    }
    const std::int64_t newest = static_cast<std::int64_t>(data_.size()) - 1;
    if (newest - horizon_ >= 0 && pair_valid(static_cast<std::size_t>(newest - horizon_), horizon_)) ++valid_pairs_;
  }

  /// (k, k+c) holds two transitions of one episode exactly c steps apart.
  bool pair_valid(std::size_t k, int c) const {
    if (c < 1 || k + static_cast<std::size_t>(c) >= data_.size()) return false;
    const Transition& a = at(k);
    const Transition& b = at(k + static_cast<std::size_t>(c));
    return a.episode == b.episode && b.step - a.step == c;
  }

  std::size_t valid_pair_count() const { return valid_pairs_; }

  std::size_t valid_pair_count(int c) const {
    if (c == horizon_) return valid_pairs_;
    std::size_t n = 0;
    for (std::size_t k = 0; k < data_.size(); ++k) n += pair_valid(k, c) ? 1 : 0;
    return n;
  }

  /// Uniform indices with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const {
    if (data_.empty()) throw std::logic_error("sample from empty replay buffer");
    std::uniform_int_distribution<std::size_t> u(0, data_.size() - 1);
    std::vector<std::size_t> out(n);
    for (auto& k : out) k = u(rng);
    return out;
  }

  /// Uniform over valid in-episode pairs, with replacement. Returns nullopt
  /// when no valid pair exists yet.
  std::optional<HorizonPairs> sample_horizon_pairs(std::size_t n, int c, std::mt19937_64& rng) const {
    if (c < 1) throw std::invalid_argument("horizon must be >= 1");
    if (valid_pair_count(c) == 0 || n == 0) return std::nullopt;
    std::uniform_int_distribution<std::size_t> u(0, data_.size() - 1 - static_cast<std::size_t>(c));
    HorizonPairs out;
    const auto dim = at(0).state.size();
    out.s_t.resize(dim, static_cast<Eigen::Index>(n));
    out.s_tc.resize(dim, static_cast<Eigen::Index>(n));
    out.first.reserve(n);
    for (std::size_t j = 0; j < n;) {
      const std::size_t k = u(rng);
      if (!pair_valid(k, c)) continue;
      out.s_t.col(static_cast<Eigen::Index>(j)) = at(k).state;
      out.s_tc.col(static_cast<Eigen::Index>(j)) = at(k + static_cast<std::size_t>(c)).state;
      out.first.push_back(k);
      ++j;
    }
    return out;
  }

 private:
  std::vector<Transition> data_;
  std::size_t capacity_;
  std::size_t head_ = 0;
  int horizon_;
  std::size_t valid_pairs_ = 0;
};

}  // namespace magi::trainer
