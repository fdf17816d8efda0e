#pragma once

#include "magi/env/world.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace magi::env {

/// Per-agent 2-D forces, agent-major: [ax0, ay0, ax1, ay1, ...].
using JointAction = Eigen::VectorXd;

struct StepEvents {
  int agent_collisions = 0;  // unordered overlapping agent pairs
  int agents_colliding = 0;  // agents involved in at least one overlap
  std::vector<int> pickups;  // landmark indices whose flag flipped this step
  int adversary_contacts = 0;
};

struct StepResult {
  GlobalState next_state;
  std::vector<Eigen::VectorXd> observations;
  double reward = 0.0;
  std::vector<double> agent_rewards;  // the shared reward, once per agent
  bool terminal = false;
  StepEvents events;
};

struct ResetResult {
  GlobalState state;
  std::vector<Eigen::VectorXd> observations;
};

inline Vec2 extract_agent_position(const WorldConfig& c, const Eigen::VectorXd& state, int agent) {
  if (agent < 0 || agent >= c.n_agents)
    throw std::out_of_range("agent index " + std::to_string(agent) + " out of range [0, " +
                            std::to_string(c.n_agents) + ")");
  const StateLayout lay(c);
  if (state.size() != lay.size())
    throw std::invalid_argument("state length " + std::to_string(state.size()) + " vs layout " +
                                std::to_string(lay.size()));
  return state.segment<2>(lay.agent(agent));
}

inline void set_agent_position(const WorldConfig& c, Eigen::VectorXd& state, int agent, const Vec2& pos) {
  if (agent < 0 || agent >= c.n_agents) throw std::out_of_range("agent index out of range");
  state.segment<2>(StateLayout(c).agent(agent)) = pos;
}

inline Eigen::VectorXd observe(const WorldConfig& c, const GlobalState& s, int agent) {
  const StateLayout lay(c);
  if (agent < 0 || agent >= c.n_agents)
    throw std::out_of_range("observe: agent index " + std::to_string(agent) + " out of range");
  if (s.size() != lay.size()) throw std::invalid_argument("observe: state length mismatch");
  Eigen::VectorXd o(lay.observation_size());
  const Vec2 p = s.segment<2>(lay.agent(agent));
  int k = 0;
  o.segment<4>(k) = s.segment<4>(lay.agent(agent));
  k += 4;
  for (int m = 0; m < c.n_landmarks; ++m) {
    const int off = lay.landmark(m);
    const bool gone = lay.flags && s[off + 2] > 0.5;
    o.segment<2>(k) = gone ? Vec2::Zero().eval() : (s.segment<2>(off) - p).eval();
    k += 2;
    if (lay.flags) o[k++] = s[off + 2];
  }
  for (int j = 0; j < c.n_agents; ++j) {
    if (j == agent) continue;
    o.segment<2>(k) = s.segment<2>(lay.agent(j)) - p;
    k += 2;
  }
  if (lay.adversary) {
    const int off = lay.adversary_offset();
    o.segment<2>(k) = s.segment<2>(off) - p;
    o.segment<2>(k + 2) = s.segment<2>(off + 2) - s.segment<2>(lay.agent(agent) + 2);
    k += 4;
  }
  return o;
}

inline std::vector<Eigen::VectorXd> observe_all(const WorldConfig& c, const GlobalState& s) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(c.n_agents));
  for (int i = 0; i < c.n_agents; ++i) out.push_back(observe(c, s, i));
  return out;
}

inline ResetResult reset(const WorldConfig& c, std::uint64_t seed) {
  c.validate();
  const StateLayout lay(c);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-c.arena, c.arena);
  GlobalState s = GlobalState::Zero(lay.size());
  for (int i = 0; i < c.n_agents; ++i) {
    s[lay.agent(i)] = pos(rng);
    s[lay.agent(i) + 1] = pos(rng);
  }
  for (int m = 0; m < c.n_landmarks; ++m) {
    s[lay.landmark(m)] = pos(rng);
    s[lay.landmark(m) + 1] = pos(rng);
  }
  if (lay.adversary) {
    s[lay.adversary_offset()] = pos(rng);
    s[lay.adversary_offset() + 1] = pos(rng);
  }
  return {s, observe_all(c, s)};
}

/// Shared team reward after the transition into `next`.
inline double reward_for(const WorldConfig& c, const GlobalState& next, const StepEvents& ev) {
  const StateLayout lay(c);
  const double collisions = c.collision_count == CollisionCount::pair ? ev.agent_collisions : ev.agents_colliding;
  switch (c.task) {
    case Task::navigation: {
      double dist = 0.0;
      for (int m = 0; m < c.n_landmarks; ++m) {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < c.n_agents; ++i)
          best = std::min(best, (next.segment<2>(lay.agent(i)) - next.segment<2>(lay.landmark(m))).norm());
        dist += best;
      }
      return -dist - c.collision_penalty * collisions;
    }
    case Task::treasure:
    case Task::treasure10:
      return static_cast<double>(ev.pickups.size()) - c.collision_penalty * collisions;
    case Task::predator_prey:
      return 10.0 * ev.adversary_contacts;
    case Task::keep_away:
      return static_cast<double>(ev.adversary_contacts) - c.collision_penalty * collisions;
  }
  throw std::invalid_argument("reward_for: unknown task");
}

namespace detail {

inline void integrate(Eigen::Ref<Eigen::VectorXd> pv, const Vec2& force, double mass, double max_speed,
                      const WorldConfig& c) {
  Vec2 v = (1.0 - c.damping) * pv.segment<2>(2) + force / mass * c.dt;
  const double speed = v.norm();
  if (speed > max_speed) v *= max_speed / speed;
  Vec2 p = pv.segment<2>(0) + v * c.dt;
  p = p.cwiseMax(-c.arena).cwiseMin(c.arena);
  pv.segment<2>(0) = p;
  pv.segment<2>(2) = v;
}

inline Vec2 clamp_action(const Vec2& a) { return a.cwiseMax(-1.0).cwiseMin(1.0); }

}  // namespace detail

/// Heuristic opponent: the prey flees the nearest predator with a wall-repulsion
/// term; the theft heads for the nearest unstolen treasure (lowest index on ties)
/// unless a guard is within the threat radius, in which case it flees that guard.
inline Vec2 scripted_adversary(const WorldConfig& c, const GlobalState& s) {
  if (!c.has_adversary())
    throw std::invalid_argument("scripted_adversary: task '" + std::string(task_name(c.task)) + "' has no adversary");
  const StateLayout lay(c);
  const Vec2 me = s.segment<2>(lay.adversary_offset());

  int nearest = -1;
  double nearest_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < c.n_agents; ++i) {
    const double d = (s.segment<2>(lay.agent(i)) - me).norm();
    if (d < nearest_d) {
      nearest_d = d;
      nearest = i;
    }
  }

  auto away_from = [&](int i) -> Vec2 {
    const Vec2 diff = me - s.segment<2>(lay.agent(i));
    const double n = diff.norm();
    return n > 0.0 ? Vec2(diff / n) : Vec2(1.0, 0.0);
  };

  Vec2 dir = Vec2::Zero();
  if (c.task == Task::predator_prey) {
    dir = away_from(nearest);
    for (int axis = 0; axis < 2; ++axis) {
      const double gap_hi = c.arena - me[axis];
      const double gap_lo = me[axis] + c.arena;
      if (gap_hi < c.wall_margin) dir[axis] -= (c.wall_margin - gap_hi) / c.wall_margin;
      if (gap_lo < c.wall_margin) dir[axis] += (c.wall_margin - gap_lo) / c.wall_margin;
    }
  } else {
    if (nearest >= 0 && nearest_d < c.threat_radius) {
      dir = away_from(nearest);
    } else {
      int target = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int m = 0; m < c.n_landmarks; ++m) {
        if (s[lay.landmark(m) + 2] > 0.5) continue;
        const double d = (s.segment<2>(lay.landmark(m)) - me).norm();
        if (d < best) {
          best = d;
          target = m;
        }
      }
      if (target >= 0 && best > 0.0) dir = (s.segment<2>(lay.landmark(target)) - me) / best;
    }
  }
  const double n = dir.norm();
  if (n > 1.0) dir /= n;
  return detail::clamp_action(dir);
}

/// Advances the world one step. `t` is the index of the step being taken
/// (0-based); the transition is terminal when t + 1 reaches the episode length.
inline StepResult step(const WorldConfig& c, const GlobalState& s, int t, const JointAction& actions,
                       std::optional<Vec2> adversary_action = std::nullopt) {
  const StateLayout lay(c);
  if (s.size() != lay.size()) throw std::invalid_argument("step: state length mismatch");
  if (actions.size() != 2 * c.n_agents)
    throw std::invalid_argument("step: joint action length " + std::to_string(actions.size()) + ", expected " +
                                std::to_string(2 * c.n_agents));
  if (actions.hasNaN()) throw std::invalid_argument("step: NaN in joint action");

  StepResult r;
  r.next_state = s;
  auto& n = r.next_state;
  for (int i = 0; i < c.n_agents; ++i) {
    const Vec2 a = detail::clamp_action(actions.segment<2>(2 * i));
    detail::integrate(n.segment<4>(lay.agent(i)), a, c.agent_mass, c.agent_max_speed, c);
  }
  if (lay.adversary) {
    Vec2 a = adversary_action ? *adversary_action : scripted_adversary(c, s);
    if (a.hasNaN()) throw std::invalid_argument("step: NaN in adversary action");
    detail::integrate(n.segment<4>(lay.adversary_offset()), detail::clamp_action(a), c.adversary_mass,
                      c.adversary_max_speed, c);
  }

  auto& ev = r.events;
  std::vector<bool> colliding(static_cast<std::size_t>(c.n_agents), false);
  const double agent_touch = 2.0 * c.agent_radius;
  for (int i = 0; i < c.n_agents; ++i) {
    for (int j = i + 1; j < c.n_agents; ++j) {
      if ((n.segment<2>(lay.agent(i)) - n.segment<2>(lay.agent(j))).norm() < agent_touch) {
        ++ev.agent_collisions;
        colliding[static_cast<std::size_t>(i)] = colliding[static_cast<std::size_t>(j)] = true;
      }
    }
  }
  ev.agents_colliding = static_cast<int>(std::count(colliding.begin(), colliding.end(), true));

  if (lay.flags) {
    const double touch = c.agent_radius + c.landmark_radius;
    for (int m = 0; m < c.n_landmarks; ++m) {
      const int off = lay.landmark(m);
      if (n[off + 2] > 0.5) continue;
      bool taken = false;
      if (c.task == Task::keep_away) {
        taken = (n.segment<2>(lay.adversary_offset()) - n.segment<2>(off)).norm() <
                c.adversary_radius + c.landmark_radius;
      } else {
        for (int i = 0; i < c.n_agents && !taken; ++i)
          taken = (n.segment<2>(lay.agent(i)) - n.segment<2>(off)).norm() < touch;
      }
      if (taken) {
        n[off + 2] = 1.0;
        if (c.task != Task::keep_away) ev.pickups.push_back(m);
      }
    }
  }

  if (lay.adversary) {
    const double touch = c.agent_radius + c.adversary_radius;
    for (int i = 0; i < c.n_agents; ++i)
      if ((n.segment<2>(lay.agent(i)) - n.segment<2>(lay.adversary_offset())).norm() < touch)
        ++ev.adversary_contacts;
  }

  r.reward = reward_for(c, n, ev);
  r.agent_rewards.assign(static_cast<std::size_t>(c.n_agents), r.reward);
  r.terminal = t + 1 >= c.episode_length;
  r.observations = observe_all(c, n);
  return r;
}

/// Optional replacement for the scripted opponent, e.g. a policy restored from a checkpoint.
using AdversaryPolicy = std::function<Vec2(const WorldConfig&, const GlobalState&)>;

/// Stateful wrapper that tracks the step counter of one episode.
class ParticleEnv {
 public:
  explicit ParticleEnv(WorldConfig config, AdversaryPolicy adversary = {})
      : config_(std::move(config)), adversary_(std::move(adversary)) {
    config_.validate();
  }

  ResetResult reset(std::uint64_t seed) {
    auto r = magi::env::reset(config_, seed);
    state_ = r.state;
    t_ = 0;
    return r;
  }

  StepResult step(const JointAction& actions) {
    std::optional<Vec2> adv;
    if (config_.has_adversary() && adversary_) adv = adversary_(config_, state_);
    auto r = magi::env::step(config_, state_, t_, actions, adv);
    state_ = r.next_state;
    ++t_;
    return r;
  }

  const WorldConfig& config() const { return config_; }
  const GlobalState& state() const { return state_; }
  int t() const { return t_; }

 private:
  WorldConfig config_;
  AdversaryPolicy adversary_;
  GlobalState state_;
  int t_ = 0;
};

}  // namespace magi::env
