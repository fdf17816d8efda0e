#pragma once

#include "magi/env/particle_env.hpp"
#include "magi/imagination/module.hpp"
#include "magi/nn/checkpoint.hpp"
#include "magi/policy/agent.hpp"
#include "magi/policy/reward.hpp"
#include "magi/trainer/config.hpp"
#include "magi/trainer/metrics.hpp"
#include "magi/trainer/replay.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace magi::trainer {

/// Independent generator for one purpose within a run.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a),    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

enum Stream : std::uint64_t {
  kInitAgents = 1,
  kInitImagination,
  kEnv,
  kExplore,
  kReplay,
  kPairs,
  kCvaeNoise,
  kGoals,
  kEval,
  kEvalGoals,
  kWorker,
};

/// Loads an opponent policy (state -> 2 tanh outputs) from section "adversary/policy".
inline env::AdversaryPolicy load_adversary(const std::string& path, const env::WorldConfig& world) {
  const auto ck = nn::Checkpoint::load(path);
  nn::ParamSet p = ck.get("adversary/policy");
  if (p.input_dim() != env::StateLayout(world).size() || p.output_dim() != 2)
    throw nn::CheckpointError("adversary policy in '" + path + "' does not match the task state layout");
  return [p](const env::WorldConfig&, const env::GlobalState& s) -> env::Vec2 {
    return nn::mlp_forward(p, Vector(s)).head<2>();
  };
}

/// All networks of one run: per-agent learners (or a single centralized one)
/// and, for the magi backbone, the imagination module.
class Model {
 public:
  Model(const RunConfig& cfg, std::uint64_t seed) : cfg_(cfg), layout_(cfg.world) {
    cfg_.validate();
    const int sd = layout_.size();
    const int od = layout_.observation_size();
    const int n = cfg_.world.n_agents;
    auto init = make_stream(seed, kInitAgents);
    if (centralized()) {
      agents.emplace_back(sd, n * od, sd, 2 * n, cfg_.agent, init);
    } else {
      for (int i = 0; i < n; ++i) agents.emplace_back(sd, od, sd, 2, cfg_.agent, init);
    }
    if (cfg_.uses_imagination()) {
      auto r = make_stream(seed, kInitImagination);
      imagination.emplace(sd, cfg_.imagination, r);
    }
    if (!cfg_.adversary_checkpoint.empty() && cfg_.world.has_adversary())
      adversary = load_adversary(cfg_.adversary_checkpoint, cfg_.world);
  }

  const RunConfig& config() const { return cfg_; }
  const env::WorldConfig& world() const { return cfg_.world; }
  int state_dim() const { return layout_.size(); }
  bool centralized() const { return cfg_.backbone == Backbone::ddpg_centralized; }

  static std::string learner_prefix(const Model& m, std::size_t i) {
    return m.centralized() ? std::string("central") : "agent/" + std::to_string(i);
  }

  imagination::GoalSample goal(const Vector& s, std::mt19937_64& rng) const {
    if (cfg_.imagined_goals()) return imagination->generate(s, rng);
    imagination::GoalSample g;
    g.z = Vector::Zero(cfg_.imagination.latent_dim);
    g.goal = Vector::Zero(state_dim());
    return g;
  }

  /// Observation columns seen by learner i for each state column.
  Matrix observations(const Matrix& states, std::size_t learner) const {
    const int od = layout_.observation_size();
    const int n = cfg_.world.n_agents;
    Matrix out(centralized() ? n * od : od, states.cols());
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
      const Vector s = states.col(j);
      if (centralized()) {
        for (int i = 0; i < n; ++i) out.col(j).segment(i * od, od) = env::observe(cfg_.world, s, i);
      } else {
        out.col(j) = env::observe(cfg_.world, s, static_cast<int>(learner));
      }
    }
    return out;
  }

  /// Joint action in [-1, 1]^{2N}; `noise` has length 2N.
  Vector act(const Vector& s, const Vector& goal, const Vector& noise) const {
    const int n = cfg_.world.n_agents;
    if (centralized()) return policy::agent_action(agents[0].policy, observations(Matrix(s), 0).col(0), goal, noise);
    Vector a(2 * n);
    for (int i = 0; i < n; ++i)
      a.segment<2>(2 * i) = policy::agent_action(agents[static_cast<std::size_t>(i)].policy,
                                                 env::observe(cfg_.world, s, i), goal, noise.segment<2>(2 * i));
    return a;
  }

  nn::Checkpoint checkpoint() const {
    nn::Checkpoint ck;
    for (std::size_t i = 0; i < agents.size(); ++i) agents[i].save(ck, learner_prefix(*this, i));
    if (imagination) imagination->save(ck);
    return ck;
  }

  /// Throws CheckpointError on a missing section or a layout mismatch.
  void load(const nn::Checkpoint& ck) {
    for (std::size_t i = 0; i < agents.size(); ++i) agents[i].load(ck, learner_prefix(*this, i));
    if (imagination) imagination->load(ck);
  }

  std::vector<policy::AgentLearner> agents;
  std::optional<imagination::Imagination> imagination;
  env::AdversaryPolicy adversary;

 private:
  RunConfig cfg_;
  env::StateLayout layout_;
};

/// One episode in progress: environment state, step counter and the goal in force.
class Rollout {
 public:
  explicit Rollout(const Model& m) : model_(&m) {}

  void begin(std::uint64_t env_seed, std::int64_t episode, std::mt19937_64& goal_rng) {
    state_ = env::reset(model_->world(), env_seed).state;
    t_ = 0;
    episode_ = episode;
    active_ = true;
    goal_ = model_->goal(state_, goal_rng);
  }

  bool active() const { return active_; }
  const Vector& state() const { return state_; }
  const imagination::GoalSample& goal() const { return goal_; }
  int t() const { return t_; }
  std::int64_t episode() const { return episode_; }

  Transition advance(const Vector& actions, std::mt19937_64& goal_rng, bool with_intrinsic = true) {
    const auto& world = model_->world();
    const auto& cfg = model_->config();
    std::optional<env::Vec2> adv;
    if (world.has_adversary() && model_->adversary) adv = model_->adversary(world, state_);
    auto r = env::step(world, state_, t_, actions, adv);

    Transition tr;
    tr.state = state_;
    tr.actions = actions.cwiseMax(-1.0).cwiseMin(1.0);
    tr.reward_ex = r.reward;
    tr.reward_in = Vector::Zero(world.n_agents);
    if (with_intrinsic && cfg.uses_imagination()) {
      for (int i = 0; i < world.n_agents; ++i) {
        tr.reward_in[i] = cfg.reward.variant == policy::IntrinsicVariant::euclidean
                              ? policy::intrinsic_reward_euclidean(world, goal_.goal, state_, r.next_state, i)
                              : policy::intrinsic_reward_latent(model_->imagination->cvae(), goal_.goal, state_,
                                                                r.next_state, state_);
      }
    }
    tr.next_state = r.next_state;
    tr.goal = goal_.goal;
    tr.terminal = r.terminal;
    tr.episode = episode_;
    tr.step = t_;

    state_ = std::move(r.next_state);
    ++t_;
    if (r.terminal) {
      active_ = false;
    } else if (t_ % cfg.imagination.goal.refresh_period == 0) {
      goal_ = model_->goal(state_, goal_rng);
    }
    tr.next_goal = goal_.goal;
    return tr;
  }

 private:
  const Model* model_;
  Vector state_;
  imagination::GoalSample goal_;
  int t_ = 0;
  std::int64_t episode_ = 0;
  bool active_ = false;
};

struct EvalStats {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> returns;
};

inline std::uint64_t eval_episode_seed(std::uint64_t seed, int episode) {
  return make_stream(seed, kEval, static_cast<std::uint64_t>(episode))();
}

/// Noise-free episodes scored by external reward only. Episode k depends on
/// (seed, k) alone, so the statistics do not depend on `workers`.
inline EvalStats evaluate(const Model& m, int episodes, std::uint64_t seed, int workers = 1) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  EvalStats st;
  st.returns.assign(static_cast<std::size_t>(episodes), 0.0);
  const Vector zero = Vector::Zero(2 * m.world().n_agents);
  auto run_one = [&](int ep) {
    auto goal_rng = make_stream(seed, kEvalGoals, static_cast<std::uint64_t>(ep));
    Rollout r(m);
    r.begin(eval_episode_seed(seed, ep), ep, goal_rng);
    double total = 0.0;
    while (r.active()) total += r.advance(m.act(r.state(), r.goal().goal, zero), goal_rng, false).reward_ex;
    st.returns[static_cast<std::size_t>(ep)] = total;
  };
  if (workers <= 1) {
    for (int ep = 0; ep < episodes; ++ep) run_one(ep);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int ep = w; ep < episodes; ep += workers) run_one(ep);
      });
    for (auto& t : pool) t.join();
  }
  double sum = 0.0;
  for (double r : st.returns) sum += r;
  st.mean = sum / episodes;
  double ss = 0.0;
  for (double r : st.returns) ss += (r - st.mean) * (r - st.mean);
  st.std = std::sqrt(ss / episodes);
  return st;
}

/// Builds the model for `cfg`, restores `ck` into it and evaluates.
inline EvalStats evaluate(const RunConfig& cfg, const nn::Checkpoint& ck, int episodes, std::uint64_t seed) {
  Model m(cfg, cfg.seed);
  m.load(ck);
  return evaluate(m, episodes, seed, cfg.rollout_workers);
}

struct PairAudit {
  std::int64_t checked = 0;
  std::int64_t violations = 0;
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  nn::Checkpoint checkpoint;
  PairAudit audit;
};

class Trainer {
 public:
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  explicit Trainer(const RunConfig& cfg)
      : cfg_(cfg),
        model_(cfg, cfg.seed),
        replay_(static_cast<std::size_t>(cfg.replay_capacity), cfg.imagination.horizon),
        rollout_(model_),
        env_rng_(make_stream(cfg.seed, kEnv)),
        explore_rng_(make_stream(cfg.seed, kExplore)),
        replay_rng_(make_stream(cfg.seed, kReplay)),
        pair_rng_(make_stream(cfg.seed, kPairs)),
        cvae_rng_(make_stream(cfg.seed, kCvaeNoise)),
        goal_rng_(make_stream(cfg.seed, kGoals)),
        eval_seed_(make_stream(cfg.seed, kEval)()),
        started_(std::chrono::steady_clock::now()) {
    reset_accumulators();
  }

  const RunConfig& config() const { return cfg_; }
  const Model& model() const { return model_; }
  Model& model() { return model_; }
  const ReplayBuffer& replay() const { return replay_; }
  const std::vector<MetricsRow>& metrics() const { return metrics_; }
  const PairAudit& audit() const { return audit_; }
  std::int64_t env_steps() const { return steps_; }
  std::uint64_t eval_seed() const { return eval_seed_; }

  double noise_std() const {
    if (cfg_.total_steps <= 0) return cfg_.noise_start;
    const double frac = std::min(1.0, static_cast<double>(steps_) / static_cast<double>(cfg_.total_steps));
    return cfg_.noise_start + (cfg_.noise_end - cfg_.noise_start) * frac;
  }

  /// One environment step followed by the scheduled updates (single rollout worker).
  void step() {
    if (!rollout_.active()) rollout_.begin(env_rng_(), episodes_++, goal_rng_);
    const Vector a = exploratory_action(rollout_.state(), rollout_.goal().goal, explore_rng_, steps_);
    record(rollout_.advance(a, goal_rng_));
  }

  TrainResult run(const std::function<void(const MetricsRow&)>& on_row = {}) {
    on_row_ = on_row;
    if (cfg_.rollout_workers <= 1) {
      while (steps_ < cfg_.total_steps) step();
    } else {
      while (steps_ < cfg_.total_steps) parallel_round();
    }
    return {metrics_, model_.checkpoint(), audit_};
  }

 private:
  Vector exploratory_action(const Vector& s, const Vector& goal, std::mt19937_64& rng, std::int64_t at_step) const {
    const int dim = 2 * cfg_.world.n_agents;
    if (at_step < cfg_.warmup_steps && cfg_.warmup_random) {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      Vector a(dim);
      for (int k = 0; k < dim; ++k) a[k] = u(rng);
      return a;
    }
    std::normal_distribution<double> n01;
    const double sd = noise_std();
    Vector noise(dim);
    for (int k = 0; k < dim; ++k) noise[k] = sd * n01(rng);
    return model_.act(s, goal, noise);
  }

  // Episodes are collected concurrently against a frozen model, then fed to
  // the learner in worker order.
  void parallel_round() {
    const int k = cfg_.rollout_workers;
    std::vector<std::vector<Transition>> batches(static_cast<std::size_t>(k));
    std::vector<std::thread> pool;
    const std::int64_t base_episode = episodes_;
    const std::int64_t at_step = steps_;
    for (int w = 0; w < k; ++w) {
      pool.emplace_back([this, w, base_episode, at_step, &batches] {
        const auto ep = base_episode + w;
        auto rng = make_stream(cfg_.seed, kWorker, static_cast<std::uint64_t>(ep));
        std::mt19937_64 goal_rng(rng());
        Rollout r(model_);
        r.begin(rng(), ep, goal_rng);
        auto& out = batches[static_cast<std::size_t>(w)];
        while (r.active()) {
          const auto step_index = at_step + static_cast<std::int64_t>(out.size());
          out.push_back(r.advance(exploratory_action(r.state(), r.goal().goal, rng, step_index), goal_rng));
        }
      });
    }
    for (auto& t : pool) t.join();
    episodes_ += k;
    for (auto& b : batches)
      for (auto& tr : b) {
        if (steps_ >= cfg_.total_steps) return;
        record(std::move(tr));
      }
  }

  void record(Transition tr) {
    if (cfg_.uses_imagination()) {
      for (Eigen::Index i = 0; i < tr.reward_in.size(); ++i) intrinsic_.add(tr.reward_in[i]);
    }
    replay_.push(std::move(tr));
    ++steps_;
    if (steps_ > cfg_.warmup_steps && steps_ % cfg_.train_period == 0) update();
    if (steps_ % cfg_.eval_period == 0) emit_row();
  }

  struct Mean {
    double sum = 0.0;
    std::int64_t n = 0;
    void add(double v) {
      sum += v;
      ++n;
    }
    double value() const { return n ? sum / static_cast<double>(n) : std::nan(""); }
  };

  void reset_accumulators() {
    intrinsic_ = {};
    cvae_loss_ = {};
    goal_critic_loss_ = {};
    critic_loss_.assign(model_.agents.size(), Mean{});
  }

  void update() {
    const int nb = cfg_.batch_size;
    const int n = cfg_.world.n_agents;
    auto& im = model_.imagination;

    if (im && steps_ % cfg_.cvae_period == 0) {
      const int c = cfg_.imagination.horizon;
      if (auto pairs = replay_.sample_horizon_pairs(static_cast<std::size_t>(nb), c, pair_rng_)) {
        for (std::size_t k : pairs->first) {
          const auto& a = replay_.at(k);
          const auto& b = replay_.at(k + static_cast<std::size_t>(c));
          ++audit_.checked;
          if (a.episode != b.episode || b.step - a.step != c) ++audit_.violations;
        }
        cvae_loss_.add(im->update_cvae(pairs->s_t, pairs->s_tc, cvae_rng_).loss);
      }
    }

    const auto idx = replay_.sample_indices(static_cast<std::size_t>(nb), replay_rng_);
    const int sd = model_.state_dim();
    Matrix s(sd, nb), s2(sd, nb), g(sd, nb), g2(sd, nb), a(2 * n, nb), rex(1, nb), rin(n, nb), done(1, nb);
    for (int j = 0; j < nb; ++j) {
      const auto& t = replay_.at(idx[static_cast<std::size_t>(j)]);
      s.col(j) = t.state;
      s2.col(j) = t.next_state;
      g.col(j) = t.goal;
      g2.col(j) = t.next_goal;
      a.col(j) = t.actions;
      rex(0, j) = t.reward_ex;
      rin.col(j) = t.reward_in;
      done(0, j) = t.terminal ? 1.0 : 0.0;
    }

    if (im) {
      Matrix q(n, nb);
      for (int i = 0; i < n; ++i) q.row(i) = model_.agents[static_cast<std::size_t>(i)].q_values(s, a.middleRows(2 * i, 2));
      goal_critic_loss_.add(im->update_goal_critic(s, q));
      if (cfg_.imagination.goal.strategy == imagination::GoalStrategy::deterministic) im->update_goal_actor(s);
    }

    const double lambda = cfg_.effective_lambda();
    for (std::size_t i = 0; i < model_.agents.size(); ++i) {
      policy::AgentBatch b;
      b.states = s;
      b.next_states = s2;
      b.obs = model_.observations(s, i);
      b.next_obs = model_.observations(s2, i);
      b.goals = g;
      b.next_goals = g2;
      b.actions = model_.centralized() ? a : Matrix(a.middleRows(2 * static_cast<Eigen::Index>(i), 2));
      b.rewards.resize(1, nb);
      for (int j = 0; j < nb; ++j)
        b.rewards(0, j) = model_.centralized() ? rex(0, j)
                                               : policy::proxy_reward(rex(0, j), rin(static_cast<Eigen::Index>(i), j), lambda);
      b.done = done;
      const auto st = policy::train_agent(model_.agents[i], b, Model::learner_prefix(model_, i));
      critic_loss_[i].add(st.critic_loss);
    }
  }

  void emit_row() {
    const auto ev = evaluate(model_, cfg_.eval_episodes, eval_seed_, cfg_.rollout_workers);
    MetricsRow row;
    row.env_step = steps_;
    row.mean_return = ev.mean;
    row.std_return = ev.std;
    row.intrinsic_mean = intrinsic_.value();
    row.cvae_loss = cvae_loss_.value();
    row.goal_critic_loss = goal_critic_loss_.value();
    for (const auto& m : critic_loss_) row.critic_loss.push_back(m.value());
    row.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    metrics_.push_back(row);
    reset_accumulators();
    if (on_row_) on_row_(row);
  }

  RunConfig cfg_;
  Model model_;
  ReplayBuffer replay_;
  Rollout rollout_;
  std::mt19937_64 env_rng_, explore_rng_, replay_rng_, pair_rng_, cvae_rng_, goal_rng_;
  std::uint64_t eval_seed_;
  std::chrono::steady_clock::time_point started_;
  std::int64_t steps_ = 0;
  std::int64_t episodes_ = 0;
  std::vector<MetricsRow> metrics_;
  PairAudit audit_;
  Mean intrinsic_, cvae_loss_, goal_critic_loss_;
  std::vector<Mean> critic_loss_;
  std::function<void(const MetricsRow&)> on_row_;
};

inline TrainResult train(const RunConfig& cfg, const std::function<void(const MetricsRow&)>& on_row = {}) {
  Trainer t(cfg);
  return t.run(on_row);
}

}  // namespace magi::trainer
