#pragma once

#include "magi/trainer/metrics.hpp"
#include "magi/trainer/trainer.hpp"

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace magi::trainer {

enum class AblationAxis { sample_size, horizon };

inline std::string_view axis_name(AblationAxis a) { return a == AblationAxis::sample_size ? "sample_size" : "horizon"; }

inline AblationAxis axis_from_name(std::string_view s) {
  if (s == "sample_size") return AblationAxis::sample_size;
  if (s == "horizon") return AblationAxis::horizon;
  throw ConfigError("unknown ablation axis '" + std::string(s) + "' (expected sample_size or horizon)");
}

inline RunConfig with_axis(RunConfig cfg, AblationAxis axis, int value) {
  if (axis == AblationAxis::sample_size) cfg.imagination.goal.samples = value;
  else cfg.imagination.horizon = value;
  cfg.validate();
  return cfg;
}

struct AblationRun {
  AblationAxis axis = AblationAxis::sample_size;
  int value = 0;
  std::uint64_t seed = 0;
  std::vector<MetricsRow> metrics;
  EvalStats final_eval;
};

/// One train + evaluate per (value, seed) over base.seeds. Every configuration
/// is validated before the first run starts.
inline std::vector<AblationRun> run_ablation(const RunConfig& base, AblationAxis axis, const std::vector<int>& values,
                                             const std::function<void(const AblationRun&)>& on_run = {}) {
  if (values.empty()) throw ConfigError("run_ablation: no values given");
  for (int v : values) (void)with_axis(base, axis, v);
  std::vector<AblationRun> runs;
  for (int v : values) {
    for (std::uint64_t seed : base.seeds) {
      RunConfig cfg = with_axis(base, axis, v);
      cfg.seed = seed;
      Trainer t(cfg);
      AblationRun r;
      r.axis = axis;
      r.value = v;
      r.seed = seed;
      r.metrics = t.run().metrics;
      r.final_eval = evaluate(t.model(), cfg.eval_episodes, t.eval_seed(), cfg.rollout_workers);
      if (on_run) on_run(r);
      runs.push_back(std::move(r));
    }
  }
  return runs;
}

/// Every metrics row of every run, prefixed with axis, value and seed.
inline std::string ablation_csv(const std::vector<AblationRun>& runs, std::size_t learners) {
  std::string out = "axis,value,seed," + metrics_header(learners) + "\n";
  for (const auto& r : runs) {
    const std::string body = metrics_csv(r.metrics, learners);
    const std::string prefix = std::string(axis_name(r.axis)) + "," + std::to_string(r.value) + "," + std::to_string(r.seed) + ",";
    std::size_t pos = body.find('\n') + 1;
    while (pos < body.size()) {
      const auto end = body.find('\n', pos);
      out += prefix + body.substr(pos, end - pos + 1);
      pos = end + 1;
    }
  }
  return out;
}

inline std::string ablation_summary_csv(const std::vector<AblationRun>& runs) {
  std::string out = "axis,value,seed,final_mean_return,final_std_return\n";
  for (const auto& r : runs)
    out += std::string(axis_name(r.axis)) + "," + std::to_string(r.value) + "," + std::to_string(r.seed) + "," +
           format_real(r.final_eval.mean) + "," + format_real(r.final_eval.std) + "\n";
  return out;
}

}  // namespace magi::trainer
