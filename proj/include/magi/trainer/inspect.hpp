#pragma once

#include "magi/trainer/metrics.hpp"
#include "magi/trainer/trainer.hpp"

#include <string>
#include <vector>

namespace magi::trainer {

/// Agent position and the goal in force at one step.
struct GoalRow {
  int episode = 0;
  int step = 0;
  int agent = 0;
  double x = 0.0, y = 0.0;
  double goal_x = 0.0, goal_y = 0.0;
  double goal_value = 0.0;
};

/// One entity at one step. `kind` is agent, landmark or adversary.
struct EntityRow {
  int episode = 0;
  int step = 0;
  std::string kind;
  int id = 0;
  double x = 0.0, y = 0.0, vx = 0.0, vy = 0.0;
  double reward = 0.0;  // external reward of the step taken from this state
  double flag = 0.0;    // landmark collected/stolen flag
};

struct Inspection {
  std::vector<GoalRow> goals;
  std::vector<EntityRow> trajectory;
};

/// Greedy rollouts recording every agent's position next to the position it
/// holds in the current goal state. Uses the evaluation episode seeds.
inline Inspection inspect_goals(const Model& m, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("inspect_goals: episodes must be >= 1");
  const auto& w = m.world();
  const env::StateLayout lay(w);
  const Vector zero = Vector::Zero(2 * w.n_agents);
  Inspection out;
  for (int ep = 0; ep < episodes; ++ep) {
    auto goal_rng = make_stream(seed, kEvalGoals, static_cast<std::uint64_t>(ep));
    Rollout r(m);
    r.begin(eval_episode_seed(seed, ep), ep, goal_rng);
    while (r.active()) {
      const Vector s = r.state();
      const auto g = r.goal();
      const int t = r.t();
      const auto tr = r.advance(m.act(s, g.goal, zero), goal_rng, false);
      for (int i = 0; i < w.n_agents; ++i) {
        const auto p = env::extract_agent_position(w, s, i);
        const auto q = env::extract_agent_position(w, g.goal, i);
        out.goals.push_back({ep, t, i, p.x(), p.y(), q.x(), q.y(), g.value});
      }
      for (int i = 0; i < w.n_agents; ++i) {
        const int o = lay.agent(i);
        out.trajectory.push_back({ep, t, "agent", i, s[o], s[o + 1], s[o + 2], s[o + 3], tr.reward_ex, 0.0});
      }
      for (int k = 0; k < w.n_landmarks; ++k) {
        const int o = lay.landmark(k);
        out.trajectory.push_back({ep, t, "landmark", k, s[o], s[o + 1], 0.0, 0.0, tr.reward_ex, lay.flags ? s[o + 2] : 0.0});
      }
      if (lay.adversary) {
        const int o = lay.adversary_offset();
        out.trajectory.push_back({ep, t, "adversary", 0, s[o], s[o + 1], s[o + 2], s[o + 3], tr.reward_ex, 0.0});
      }
    }
  }
  return out;
}

inline std::string goals_csv(const std::vector<GoalRow>& rows) {
  std::string out = "episode,step,agent,x,y,goal_x,goal_y,goal_value\n";
  for (const auto& r : rows)
    out += std::to_string(r.episode) + "," + std::to_string(r.step) + "," + std::to_string(r.agent) + "," +
           format_real(r.x) + "," + format_real(r.y) + "," + format_real(r.goal_x) + "," + format_real(r.goal_y) + "," +
           format_real(r.goal_value) + "\n";
  return out;
}

inline std::string trajectory_csv(const std::vector<EntityRow>& rows) {
  std::string out = "episode,step,kind,id,x,y,vx,vy,reward,flag\n";
  for (const auto& r : rows)
    out += std::to_string(r.episode) + "," + std::to_string(r.step) + "," + r.kind + "," + std::to_string(r.id) + "," +
           format_real(r.x) + "," + format_real(r.y) + "," + format_real(r.vx) + "," + format_real(r.vy) + "," +
           format_real(r.reward) + "," + format_real(r.flag) + "\n";
  return out;
}

}  // namespace magi::trainer
