#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <string_view>

namespace magi::env {

enum class Task { navigation, treasure, treasure10, predator_prey, keep_away };

inline std::string_view task_name(Task t) {
  switch (t) {
    case Task::navigation: return "navigation";
    case Task::treasure: return "treasure";
    case Task::treasure10: return "treasure10";
    case Task::predator_prey: return "predator_prey";
    case Task::keep_away: return "keep_away";
  }
  return "unknown";
}

inline Task task_from_name(std::string_view name) {
  for (Task t : {Task::navigation, Task::treasure, Task::treasure10, Task::predator_prey, Task::keep_away})
    if (task_name(t) == name) return t;
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

enum class CollisionCount { pair, agent };

struct WorldConfig {
  Task task = Task::navigation;
  int n_agents = 3;
  int n_landmarks = 3;
  int episode_length = 25;

  double dt = 0.1;
  double damping = 0.25;
  double agent_mass = 1.0;
  double adversary_mass = 0.75;
  double agent_radius = 0.05;
  double landmark_radius = 0.05;
  double adversary_radius = 0.05;
  double arena = 1.0;
  double agent_max_speed = 1.0;
  double adversary_max_speed = 1.3;

  // Scripted adversary behaviour.
  double threat_radius = 0.3;
  double wall_margin = 0.2;

  double collision_penalty = 1.0;
  CollisionCount collision_count = CollisionCount::pair;

  static WorldConfig for_task(Task task) {
    WorldConfig c;
    c.task = task;
    switch (task) {
      case Task::navigation: c.n_agents = 3; c.n_landmarks = 3; c.episode_length = 25; break;
      case Task::treasure: c.n_agents = 3; c.n_landmarks = 6; c.episode_length = 25; break;
      case Task::treasure10: c.n_agents = 10; c.n_landmarks = 20; c.episode_length = 25; break;
      case Task::predator_prey: c.n_agents = 3; c.n_landmarks = 0; c.episode_length = 100; break;
      case Task::keep_away: c.n_agents = 3; c.n_landmarks = 3; c.episode_length = 100; break;
    }
    return c;
  }

  bool has_adversary() const { return task == Task::predator_prey || task == Task::keep_away; }
  bool landmark_flags() const {
    return task == Task::treasure || task == Task::treasure10 || task == Task::keep_away;
  }

  void validate() const {
    if (n_agents < 1) throw std::invalid_argument("n_agents must be >= 1");
    if (n_landmarks < 0) throw std::invalid_argument("n_landmarks must be >= 0");
    if (episode_length < 1) throw std::invalid_argument("episode_length must be >= 1");
    if (!(dt > 0.0) || !(arena > 0.0)) throw std::invalid_argument("dt and arena must be positive");
    if (!(damping >= 0.0 && damping < 1.0)) throw std::invalid_argument("damping must lie in [0, 1)");
    if (!(agent_mass > 0.0) || !(adversary_mass > 0.0)) throw std::invalid_argument("masses must be positive");
    if (has_adversary() && !(adversary_max_speed > agent_max_speed))
      throw std::invalid_argument("adversary max speed must exceed agent max speed in adversarial tasks");
  }
};

/// Offsets into the flat global state vector.
///   agents:    x, y, vx, vy            (4 per agent)
///   landmarks: x, y [, flag]           (2 or 3 per landmark)
///   adversary: x, y, vx, vy            (predator_prey, keep_away)
struct StateLayout {
  int n_agents = 0;
  int n_landmarks = 0;
  bool flags = false;
  bool adversary = false;

  explicit StateLayout(const WorldConfig& c)
      : n_agents(c.n_agents), n_landmarks(c.n_landmarks), flags(c.landmark_flags()), adversary(c.has_adversary()) {}

  int landmark_stride() const { return flags ? 3 : 2; }
  int agent(int i) const { return 4 * i; }
  int landmark(int k) const { return 4 * n_agents + landmark_stride() * k; }
  int adversary_offset() const { return 4 * n_agents + landmark_stride() * n_landmarks; }
  int size() const { return adversary_offset() + (adversary ? 4 : 0); }

  // own pos/vel, landmarks relative (+flag), other agents relative, adversary relative pos/vel
  int observation_size() const {
    return 4 + landmark_stride() * n_landmarks + 2 * (n_agents - 1) + (adversary ? 4 : 0);
  }
};

using GlobalState = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;

}  // namespace magi::env
