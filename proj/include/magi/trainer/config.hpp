#pragma once

#include "magi/env/world.hpp"
#include "magi/imagination/module.hpp"
#include "magi/policy/agent.hpp"
#include "magi/policy/reward.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace magi::trainer {

/// Malformed or unknown configuration input.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Backbone { magi, ddpg_independent, ddpg_centralized };

inline std::string_view backbone_name(Backbone b) {
  switch (b) {
    case Backbone::magi: return "magi";
    case Backbone::ddpg_independent: return "ddpg_independent";
    case Backbone::ddpg_centralized: return "ddpg_centralized";
  }
  return "unknown";
}

inline Backbone backbone_from_name(std::string_view s) {
  for (Backbone b : {Backbone::magi, Backbone::ddpg_independent, Backbone::ddpg_centralized})
    if (backbone_name(b) == s) return b;
  throw ConfigError("unknown backbone '" + std::string(s) + "'");
}

/// Where the policies' goal input comes from. `constant` feeds a zero vector.
enum class GoalSource { imagined, constant };

struct RunConfig {
  env::WorldConfig world = env::WorldConfig::for_task(env::Task::navigation);
  Backbone backbone = Backbone::magi;
  GoalSource goal_source = GoalSource::imagined;
  imagination::ImaginationConfig imagination;
  policy::AgentConfig agent;
  policy::RewardConfig reward;

  std::int64_t total_steps = 300000;
  std::int64_t eval_period = 5000;
  int eval_episodes = 32;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds{0};

  int batch_size = 256;
  std::int64_t replay_capacity = 1000000;
  std::int64_t warmup_steps = 5000;
  int cvae_period = 5;
  int train_period = 1;
  double noise_start = 0.1;
  double noise_end = 0.01;
  bool warmup_random = true;
  int rollout_workers = 1;
  std::string adversary_checkpoint;

  bool uses_imagination() const { return backbone == Backbone::magi; }
  bool imagined_goals() const { return uses_imagination() && goal_source == GoalSource::imagined; }
  double effective_lambda() const { return backbone == Backbone::magi ? reward.lambda : 0.0; }

  void validate() const {
    world.validate();
    imagination.goal.validate();
    reward.validate();
    const int c = imagination.horizon;
    if (c < 1) throw ConfigError("horizon must be >= 1");
    if (c >= world.episode_length)
      throw ConfigError("horizon " + std::to_string(c) + " must be shorter than the episode length " +
                        std::to_string(world.episode_length));
    if (imagination.latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    if (agent.hidden.empty() || imagination.hidden.empty()) throw ConfigError("hidden must list at least one width");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (replay_capacity < 1) throw ConfigError("replay_capacity must be >= 1");
    if (total_steps < 0 || warmup_steps < 0) throw ConfigError("step counts must be >= 0");
    if (eval_period < 1 || eval_episodes < 1) throw ConfigError("eval_period and eval_episodes must be >= 1");
    if (cvae_period < 1 || train_period < 1) throw ConfigError("update periods must be >= 1");
    if (rollout_workers < 1) throw ConfigError("rollout_workers must be >= 1");
    if (!(agent.gamma >= 0.0 && agent.gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (!(agent.tau >= 0.0 && agent.tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("key '" + key + "': cannot parse '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? "," : "") + std::to_string(xs[k]);
  return s;
}

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

/// Key/value binding table shared by the reader and the writer so that every
/// key round-trips.
struct ConfigKey {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<ConfigKey>& config_keys() {
  using detail::fmt_double;
  using detail::parse_bool;
  using detail::parse_number;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto num_d = [&k](std::string name, double RunConfig::*outer) {
      k.push_back({name, [outer, name](RunConfig& c, const std::string& v) { c.*outer = parse_number<double>(name, v); },
                   [outer](const RunConfig& c) { return fmt_double(c.*outer); }});
    };
    auto world_d = [&k](std::string name, double env::WorldConfig::*m) {
      k.push_back({name, [m, name](RunConfig& c, const std::string& v) { c.world.*m = parse_number<double>(name, v); },
                   [m](const RunConfig& c) { return fmt_double(c.world.*m); }});
    };
    auto world_i = [&k](std::string name, int env::WorldConfig::*m) {
      k.push_back({name, [m, name](RunConfig& c, const std::string& v) { c.world.*m = parse_number<int>(name, v); },
                   [m](const RunConfig& c) { return std::to_string(c.world.*m); }});
    };
    auto i64 = [&k](std::string name, std::int64_t RunConfig::*m) {
      k.push_back({name, [m, name](RunConfig& c, const std::string& v) { c.*m = parse_number<std::int64_t>(name, v); },
                   [m](const RunConfig& c) { return std::to_string(c.*m); }});
    };
    auto i32 = [&k](std::string name, int RunConfig::*m) {
      k.push_back({name, [m, name](RunConfig& c, const std::string& v) { c.*m = parse_number<int>(name, v); },
                   [m](const RunConfig& c) { return std::to_string(c.*m); }});
    };

    // Task selection resets the world to that task's defaults, so it is applied first.
    k.push_back({"task", [](RunConfig& c, const std::string& v) {
                   c.world = env::WorldConfig::for_task(env::task_from_name(v));
                 },
                 [](const RunConfig& c) { return std::string(env::task_name(c.world.task)); }});
    k.push_back({"backbone", [](RunConfig& c, const std::string& v) { c.backbone = backbone_from_name(v); },
                 [](const RunConfig& c) { return std::string(backbone_name(c.backbone)); }});
    k.push_back({"goal_source",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "imagined") c.goal_source = GoalSource::imagined;
                   else if (v == "constant") c.goal_source = GoalSource::constant;
                   else throw ConfigError("key 'goal_source': expected imagined|constant, got '" + v + "'");
                 },
                 [](const RunConfig& c) { return std::string(c.goal_source == GoalSource::imagined ? "imagined" : "constant"); }});

    // world
    world_i("n_agents", &env::WorldConfig::n_agents);
    world_i("n_landmarks", &env::WorldConfig::n_landmarks);
    world_i("episode_length", &env::WorldConfig::episode_length);
    world_d("dt", &env::WorldConfig::dt);
    world_d("damping", &env::WorldConfig::damping);
    world_d("agent_mass", &env::WorldConfig::agent_mass);
    world_d("adversary_mass", &env::WorldConfig::adversary_mass);
    world_d("agent_radius", &env::WorldConfig::agent_radius);
    world_d("landmark_radius", &env::WorldConfig::landmark_radius);
    world_d("adversary_radius", &env::WorldConfig::adversary_radius);
    world_d("arena", &env::WorldConfig::arena);
    world_d("agent_max_speed", &env::WorldConfig::agent_max_speed);
    world_d("adversary_max_speed", &env::WorldConfig::adversary_max_speed);
    world_d("threat_radius", &env::WorldConfig::threat_radius);
    world_d("wall_margin", &env::WorldConfig::wall_margin);
    world_d("collision_penalty", &env::WorldConfig::collision_penalty);
    k.push_back({"collision_count",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "pair") c.world.collision_count = env::CollisionCount::pair;
                   else if (v == "agent") c.world.collision_count = env::CollisionCount::agent;
                   else throw ConfigError("key 'collision_count': expected pair|agent, got '" + v + "'");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.world.collision_count == env::CollisionCount::pair ? "pair" : "agent");
                 }});

    // imagination
    k.push_back({"latent_dim", [](RunConfig& c, const std::string& v) { c.imagination.latent_dim = parse_number<int>("latent_dim", v); },
                 [](const RunConfig& c) { return std::to_string(c.imagination.latent_dim); }});
    k.push_back({"horizon", [](RunConfig& c, const std::string& v) { c.imagination.horizon = parse_number<int>("horizon", v); },
                 [](const RunConfig& c) { return std::to_string(c.imagination.horizon); }});
    k.push_back({"goal_strategy",
                 [](RunConfig& c, const std::string& v) {
                   try {
                     c.imagination.goal.strategy = imagination::strategy_from_name(v);
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(e.what());
                   }
                 },
                 [](const RunConfig& c) { return std::string(imagination::strategy_name(c.imagination.goal.strategy)); }});
    k.push_back({"sample_count", [](RunConfig& c, const std::string& v) { c.imagination.goal.samples = parse_number<int>("sample_count", v); },
                 [](const RunConfig& c) { return std::to_string(c.imagination.goal.samples); }});
    k.push_back({"sample_range", [](RunConfig& c, const std::string& v) { c.imagination.goal.range = parse_number<double>("sample_range", v); },
                 [](const RunConfig& c) { return fmt_double(c.imagination.goal.range); }});
    k.push_back({"goal_refresh", [](RunConfig& c, const std::string& v) { c.imagination.goal.refresh_period = parse_number<int>("goal_refresh", v); },
                 [](const RunConfig& c) { return std::to_string(c.imagination.goal.refresh_period); }});
    k.push_back({"lr_cvae", [](RunConfig& c, const std::string& v) { c.imagination.cvae_opt.lr = parse_number<double>("lr_cvae", v); },
                 [](const RunConfig& c) { return fmt_double(c.imagination.cvae_opt.lr); }});
    k.push_back({"lr_goal_critic", [](RunConfig& c, const std::string& v) { c.imagination.critic_opt.lr = parse_number<double>("lr_goal_critic", v); },
                 [](const RunConfig& c) { return fmt_double(c.imagination.critic_opt.lr); }});
    k.push_back({"lr_goal_actor", [](RunConfig& c, const std::string& v) { c.imagination.actor_opt.lr = parse_number<double>("lr_goal_actor", v); },
                 [](const RunConfig& c) { return fmt_double(c.imagination.actor_opt.lr); }});
    k.push_back({"log_sigma_min", [](RunConfig& c, const std::string& v) { c.imagination.log_sigma_min = parse_number<double>("log_sigma_min", v); },
                 [](const RunConfig& c) { return fmt_double(c.imagination.log_sigma_min); }});
    k.push_back({"log_sigma_max", [](RunConfig& c, const std::string& v) { c.imagination.log_sigma_max = parse_number<double>("log_sigma_max", v); },
                 [](const RunConfig& c) { return fmt_double(c.imagination.log_sigma_max); }});

    // agents
    k.push_back({"hidden",
                 [](RunConfig& c, const std::string& v) {
                   c.agent.hidden = detail::parse_list<int>("hidden", v);
                   c.imagination.hidden = c.agent.hidden;
                 },
                 [](const RunConfig& c) { return detail::join(c.agent.hidden); }});
    k.push_back({"hypernet_target",
                 [](RunConfig& c, const std::string& v) {
                   try {
                     c.agent.hypernet_target = policy::hypernet_target_from_name(v);
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(e.what());
                   }
                 },
                 [](const RunConfig& c) { return std::string(c.agent.hypernet_target == policy::HypernetTarget::head ? "head" : "full"); }});
    k.push_back({"gamma", [](RunConfig& c, const std::string& v) { c.agent.gamma = parse_number<double>("gamma", v); },
                 [](const RunConfig& c) { return fmt_double(c.agent.gamma); }});
    k.push_back({"tau", [](RunConfig& c, const std::string& v) { c.agent.tau = parse_number<double>("tau", v); },
                 [](const RunConfig& c) { return fmt_double(c.agent.tau); }});
    k.push_back({"lr_actor", [](RunConfig& c, const std::string& v) { c.agent.actor_opt.lr = parse_number<double>("lr_actor", v); },
                 [](const RunConfig& c) { return fmt_double(c.agent.actor_opt.lr); }});
    k.push_back({"lr_critic", [](RunConfig& c, const std::string& v) { c.agent.critic_opt.lr = parse_number<double>("lr_critic", v); },
                 [](const RunConfig& c) { return fmt_double(c.agent.critic_opt.lr); }});
    // Adam moments and stabilizer apply to every optimizer in the run.
    auto adam_all = [](RunConfig& c, double nn::AdamConfig::*m, double v) {
      for (nn::AdamConfig* a : {&c.agent.actor_opt, &c.agent.critic_opt, &c.imagination.cvae_opt,
                                &c.imagination.critic_opt, &c.imagination.actor_opt})
        a->*m = v;
    };
    k.push_back({"adam_beta1", [adam_all](RunConfig& c, const std::string& v) { adam_all(c, &nn::AdamConfig::beta1, parse_number<double>("adam_beta1", v)); },
                 [](const RunConfig& c) { return fmt_double(c.agent.actor_opt.beta1); }});
    k.push_back({"adam_beta2", [adam_all](RunConfig& c, const std::string& v) { adam_all(c, &nn::AdamConfig::beta2, parse_number<double>("adam_beta2", v)); },
                 [](const RunConfig& c) { return fmt_double(c.agent.actor_opt.beta2); }});
    k.push_back({"adam_eps", [adam_all](RunConfig& c, const std::string& v) { adam_all(c, &nn::AdamConfig::eps, parse_number<double>("adam_eps", v)); },
                 [](const RunConfig& c) { return fmt_double(c.agent.actor_opt.eps); }});

    // reward
    k.push_back({"lambda", [](RunConfig& c, const std::string& v) { c.reward.lambda = parse_number<double>("lambda", v); },
                 [](const RunConfig& c) { return fmt_double(c.reward.lambda); }});
    k.push_back({"intrinsic",
                 [](RunConfig& c, const std::string& v) {
                   try {
                     c.reward.variant = policy::intrinsic_from_name(v);
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(e.what());
                   }
                 },
                 [](const RunConfig& c) { return std::string(policy::intrinsic_name(c.reward.variant)); }});

    // run
    i64("total_steps", &RunConfig::total_steps);
    i64("eval_period", &RunConfig::eval_period);
    i32("eval_episodes", &RunConfig::eval_episodes);
    k.push_back({"seed",
                 [](RunConfig& c, const std::string& v) {
                   c.seed = parse_number<std::uint64_t>("seed", v);
                   c.seeds = {c.seed};
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    k.push_back({"seeds", [](RunConfig& c, const std::string& v) { c.seeds = detail::parse_list<std::uint64_t>("seeds", v); },
                 [](const RunConfig& c) { return detail::join(c.seeds); }});
    i32("batch_size", &RunConfig::batch_size);
    i64("replay_capacity", &RunConfig::replay_capacity);
    i64("warmup_steps", &RunConfig::warmup_steps);
    i32("cvae_period", &RunConfig::cvae_period);
    i32("train_period", &RunConfig::train_period);
    num_d("noise_start", &RunConfig::noise_start);
    num_d("noise_end", &RunConfig::noise_end);
    k.push_back({"warmup_random", [](RunConfig& c, const std::string& v) { c.warmup_random = parse_bool("warmup_random", v); },
                 [](const RunConfig& c) { return std::string(c.warmup_random ? "true" : "false"); }});
    i32("rollout_workers", &RunConfig::rollout_workers);
    k.push_back({"adversary_checkpoint", [](RunConfig& c, const std::string& v) { c.adversary_checkpoint = v; },
                 [](const RunConfig& c) { return c.adversary_checkpoint; }});
    return k;
  }();
  return keys;
}

/// Parses `key = value` lines; `#` starts a comment. Unknown or repeated keys
/// are errors. `seed` is applied after `seeds` so a lone seed wins.
inline RunConfig parse_config(std::string_view text) {
  std::map<std::string, std::pair<std::string, int>> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!entries.emplace(key, std::pair{value, line_no}).second)
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }

  const auto& keys = config_keys();
  for (const auto& [name, _] : entries) {
    bool known = false;
    for (const auto& k : keys) known = known || k.name == name;
    if (!known) throw ConfigError("unknown config key '" + name + "'");
  }

  RunConfig cfg;
  auto apply = [&](const std::string& name) {
    if (auto it = entries.find(name); it != entries.end()) {
      for (const auto& k : keys)
        if (k.name == name) k.set(cfg, it->second.first);
    }
  };
  apply("task");
  for (const auto& k : keys)
    if (k.name != "task" && k.name != "seed") apply(k.name);
  if (entries.count("seed") && !entries.count("seeds")) apply("seed");
  else if (entries.count("seed")) {
    cfg.seed = detail::parse_number<std::uint64_t>("seed", entries.at("seed").first);
  } else if (entries.count("seeds")) {
    cfg.seed = cfg.seeds.front();
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

/// Writes every key, in table order.
inline std::string write_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : config_keys()) {
    const std::string v = k.get(cfg);
    if (v.empty()) continue;
    out += k.name + " = " + v + "\n";
  }
  return out;
}

}  // namespace magi::trainer
