#include "magi/trainer/replay.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace magi::trainer;

namespace {

Transition make(std::int64_t episode, int step, double tag = 0.0) {
  Transition t;
  t.state = Vector::Constant(3, static_cast<double>(step) + tag);
  t.state[0] = static_cast<double>(episode);
  t.state[1] = static_cast<double>(step);
  t.next_state = t.state;
  t.actions = Vector::Zero(2);
  t.reward_in = Vector::Zero(1);
  t.goal = t.next_goal = Vector::Zero(3);
  t.episode = episode;
  t.step = step;
  return t;
}

void push_episode(ReplayBuffer& b, std::int64_t episode, int length) {
  for (int s = 0; s < length; ++s) b.push(make(episode, s));
}

}  // namespace

TEST(Replay, RejectsBadConstruction) {
  EXPECT_THROW(ReplayBuffer(0, 4), std::invalid_argument);
  EXPECT_THROW(ReplayBuffer(10, 0), std::invalid_argument);
}

TEST(Replay, SingleEntryIsAlwaysSampled) {
  ReplayBuffer b(10, 4);
  std::mt19937_64 rng(1);
  EXPECT_THROW(b.sample_indices(1, rng), std::logic_error);
  b.push(make(0, 0, 0.5));
  for (auto k : b.sample_indices(16, rng)) {
    EXPECT_EQ(k, 0u);
    EXPECT_EQ(b.at(k).state, make(0, 0, 0.5).state);
  }
}

TEST(Replay, EvictsOldestAtCapacity) {
  ReplayBuffer b(5, 2);
  for (int s = 0; s < 8; ++s) b.push(make(0, s));
  EXPECT_EQ(b.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(b.at(k).step, static_cast<int>(k) + 3);
  EXPECT_THROW(b.at(5), std::out_of_range);
}

TEST(Replay, CountsValidPairsPerEpisode) {
  ReplayBuffer b(1000, 4);
  push_episode(b, 0, 25);
  EXPECT_EQ(b.valid_pair_count(), 21u);
  push_episode(b, 1, 25);
  EXPECT_EQ(b.valid_pair_count(), 42u);
  EXPECT_EQ(b.valid_pair_count(1), 48u);
  EXPECT_EQ(b.valid_pair_count(24), 2u);
  EXPECT_EQ(b.valid_pair_count(25), 0u);
}

TEST(Replay, HorizonAtEpisodeLengthIsNeverReady) {
  ReplayBuffer b(1000, 25);
  for (int e = 0; e < 10; ++e) push_episode(b, e, 25);
  std::mt19937_64 rng(2);
  EXPECT_EQ(b.valid_pair_count(), 0u);
  EXPECT_FALSE(b.sample_horizon_pairs(8, 25, rng).has_value());
  EXPECT_FALSE(ReplayBuffer(10, 2).sample_horizon_pairs(8, 2, rng).has_value());
  EXPECT_THROW(b.sample_horizon_pairs(8, 0, rng), std::invalid_argument);
}

TEST(Replay, SampledPairsNeverCrossEpisodes) {
  ReplayBuffer b(500, 4);
  std::mt19937_64 fill(3);
  std::uniform_int_distribution<int> len(1, 25);
  for (int e = 0; e < 60; ++e) push_episode(b, e, len(fill));
  std::mt19937_64 rng(4);
  const auto pairs = b.sample_horizon_pairs(20000, 4, rng);
  ASSERT_TRUE(pairs.has_value());
  for (Eigen::Index j = 0; j < pairs->s_t.cols(); ++j) {
    EXPECT_EQ(pairs->s_t(0, j), pairs->s_tc(0, j));
    EXPECT_EQ(pairs->s_tc(1, j) - pairs->s_t(1, j), 4.0);
    EXPECT_TRUE(b.pair_valid(pairs->first[static_cast<std::size_t>(j)], 4));
  }
}

TEST(Replay, PairSamplingIsUniformOverValidPairs) {
  ReplayBuffer b(100, 2);
  push_episode(b, 0, 5);  // 3 pairs
  push_episode(b, 1, 3);  // 1 pair
  std::mt19937_64 rng(5);
  const auto pairs = b.sample_horizon_pairs(40000, 2, rng);
  ASSERT_TRUE(pairs.has_value());
  std::vector<int> hits(b.size(), 0);
  for (auto k : pairs->first) ++hits[k];
  for (std::size_t k : {0u, 1u, 2u, 5u}) EXPECT_NEAR(hits[k] / 40000.0, 0.25, 0.01) << k;
  for (std::size_t k : {3u, 4u, 6u, 7u}) EXPECT_EQ(hits[k], 0);
}

TEST(Replay, IncrementalCountMatchesRescanUnderEviction) {
  ReplayBuffer b(97, 4);
  std::mt19937_64 fill(6);
  std::uniform_int_distribution<int> len(1, 25);
  for (int e = 0; e < 200; ++e) {
    const int n = len(fill);
    for (int s = 0; s < n; ++s) {
      b.push(make(e, s));
      std::size_t scan = 0;
      for (std::size_t k = 0; k < b.size(); ++k) scan += b.pair_valid(k, 4) ? 1 : 0;
      ASSERT_EQ(b.valid_pair_count(), scan) << "episode " << e << " step " << s;
    }
  }
}
