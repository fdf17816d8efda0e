#include "magi/cli/plot.hpp"
#include "magi/nn/checkpoint.hpp"
#include "magi/trainer/ablation.hpp"
#include "magi/trainer/config.hpp"
#include "magi/trainer/inspect.hpp"
#include "magi/trainer/metrics.hpp"
#include "magi/trainer/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace magi;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;

/// Refusal to clobber an existing run directory; reported as a usage error.
struct OverwriteError : trainer::ConfigError {
  using trainer::ConfigError::ConfigError;
};

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool force = false;
  int episodes = 0;
  std::string axis;
  std::string values;
  std::string metric;
  std::string checkpoint;
  std::vector<std::string> files;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw std::runtime_error("write failed for '" + path.string() + "'");
}

fs::path output_root() {
  const char* env = std::getenv("MAGI_OUT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

fs::path resolve_out(const Options& o, const std::string& default_name) {
  return o.out.empty() ? output_root() / default_name : fs::path(o.out);
}

void claim_directory(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw OverwriteError("'" + dir.string() + "' exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir) && !force)
    throw OverwriteError("run directory '" + dir.string() + "' already exists; pass --force to overwrite");
  fs::create_directories(dir);
}

trainer::RunConfig load_config(const Options& o) {
  std::string path = o.config;
  if (path.empty() && !o.out.empty()) path = (fs::path(o.out) / "config.cfg").string();
  if (path.empty()) throw trainer::ConfigError("--config is required");
  auto cfg = trainer::load_config(path);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.seeds = {*o.seed};
  }
  return cfg;
}

std::string config_stem(const Options& o) { return o.config.empty() ? std::string("run") : fs::path(o.config).stem().string(); }

nn::Checkpoint load_checkpoint(const Options& o) {
  std::string path = o.checkpoint;
  if (path.empty() && !o.out.empty()) path = (fs::path(o.out) / "checkpoints" / "final.ckpt").string();
  if (path.empty()) throw trainer::ConfigError("--checkpoint (or --out pointing at a run directory) is required");
  return nn::Checkpoint::load(path);
}

int cmd_train(const Options& o) {
  const auto cfg = load_config(o);
  const fs::path dir = resolve_out(o, config_stem(o) + "-seed" + std::to_string(cfg.seed));
  claim_directory(dir, o.force);
  fs::create_directories(dir / "checkpoints");
  write_file(dir / "config.cfg", trainer::write_config(cfg));

  trainer::Trainer t(cfg);
  const std::size_t learners = t.model().agents.size();
  write_file(dir / "metrics.csv", trainer::metrics_header(learners) + "\n");
  auto on_row = [&](const trainer::MetricsRow& row) {
    write_file(dir / "metrics.csv", trainer::metrics_csv(t.metrics(), learners));
    write_file(dir / "timing.csv", trainer::timing_csv(t.metrics()));
    t.model().checkpoint().save(dir / "checkpoints" / ("step_" + std::to_string(row.env_step) + ".ckpt"));
    std::fprintf(stderr, "step %lld  return %.4f +- %.4f  (%.0fs)\n", static_cast<long long>(row.env_step),
                 row.mean_return, row.std_return, row.wall_clock);
  };
  const auto result = t.run(on_row);
  write_file(dir / "metrics.csv", trainer::metrics_csv(result.metrics, learners));
  write_file(dir / "timing.csv", trainer::timing_csv(result.metrics));
  result.checkpoint.save(dir / "checkpoints" / "final.ckpt");
  std::printf("run directory: %s\n", dir.string().c_str());
  return kOk;
}

int cmd_eval(const Options& o) {
  const auto cfg = load_config(o);
  const auto ck = load_checkpoint(o);
  const int episodes = o.episodes > 0 ? o.episodes : cfg.eval_episodes;
  const std::uint64_t seed = o.seed ? *o.seed : trainer::make_stream(cfg.seed, trainer::kEval)();
  const auto st = trainer::evaluate(cfg, ck, episodes, seed);
  std::printf("task=%s episodes=%d mean_return=%s std_return=%s\n", std::string(env::task_name(cfg.world.task)).c_str(),
              episodes, trainer::format_real(st.mean).c_str(), trainer::format_real(st.std).c_str());
  return kOk;
}

int cmd_ablate(const Options& o) {
  const auto cfg = load_config(o);
  const auto axis = trainer::axis_from_name(o.axis);
  std::vector<int> values;
  try {
    values = trainer::detail::parse_list<int>("--values", o.values);
  } catch (const trainer::ConfigError&) {
    throw trainer::ConfigError("--values must be a comma-separated list of integers");
  }
  for (int v : values) (void)trainer::with_axis(cfg, axis, v);
  const fs::path dir = resolve_out(o, config_stem(o) + "-ablate-" + o.axis);
  claim_directory(dir, o.force);
  write_file(dir / "config.cfg", trainer::write_config(cfg));
  const std::size_t learners = trainer::Model(cfg, cfg.seed).agents.size();
  std::vector<trainer::AblationRun> done;
  const auto runs = trainer::run_ablation(cfg, axis, values, [&](const trainer::AblationRun& r) {
    done.push_back(r);
    write_file(dir / "ablation.csv", trainer::ablation_csv(done, learners));
    write_file(dir / "ablation_summary.csv", trainer::ablation_summary_csv(done));
    std::fprintf(stderr, "%s=%d seed=%llu final return %.4f\n", o.axis.c_str(), r.value,
                 static_cast<unsigned long long>(r.seed), r.final_eval.mean);
  });
  write_file(dir / "ablation.csv", trainer::ablation_csv(runs, learners));
  write_file(dir / "ablation_summary.csv", trainer::ablation_summary_csv(runs));
  std::printf("ablation directory: %s\n", dir.string().c_str());
  return kOk;
}

int cmd_inspect(const Options& o) {
  const auto cfg = load_config(o);
  const auto ck = load_checkpoint(o);
  trainer::Model m(cfg, cfg.seed);
  m.load(ck);
  const int episodes = o.episodes > 0 ? o.episodes : 1;
  const std::uint64_t seed = o.seed ? *o.seed : trainer::make_stream(cfg.seed, trainer::kEval)();
  const fs::path dir = resolve_out(o, config_stem(o) + "-inspect");
  if (fs::exists(dir / "goals.csv") && !o.force)
    throw OverwriteError("'" + (dir / "goals.csv").string() + "' already exists; pass --force to overwrite");
  const auto ins = trainer::inspect_goals(m, episodes, seed);
  fs::create_directories(dir);
  write_file(dir / "goals.csv", trainer::goals_csv(ins.goals));
  write_file(dir / "trajectory.csv", trainer::trajectory_csv(ins.trajectory));
  std::printf("wrote %zu goal rows to %s\n", ins.goals.size(), (dir / "goals.csv").string().c_str());
  return kOk;
}

int cmd_plot(const Options& o) {
  std::vector<trainer::CsvTable> tables;
  for (const auto& f : o.files) tables.push_back(trainer::read_metrics_csv(f));
  const std::vector<std::string> metrics = o.metric.empty() ? cli::plottable_metrics(tables.front())
                                                             : std::vector<std::string>{o.metric};
  std::vector<std::pair<std::string, std::string>> charts;
  for (const auto& metric : metrics) {
    std::vector<cli::Series> series;
    for (std::size_t k = 0; k < tables.size(); ++k)
      series.push_back(cli::extract_series(tables[k], metric, fs::path(o.files[k]).stem().string()));
    charts.emplace_back(metric, cli::render_svg(metric, series));
  }
  const fs::path dir = resolve_out(o, "plots");
  fs::create_directories(dir);
  for (const auto& [metric, svg] : charts) {
    const auto path = dir / (metric + ".svg");
    write_file(path, svg);
    std::printf("%s\n", path.string().c_str());
  }
  return kOk;
}

int cmd_param_count(const Options& o) {
  const auto cfg = load_config(o);
  trainer::Model m(cfg, cfg.seed);
  const auto ck = m.checkpoint();
  std::size_t total = 0;
  std::printf("%-32s %12s  %s\n", "network", "parameters", "layout");
  for (const auto& [name, params] : ck.sections()) {
    if (name.find("target_") != std::string::npos) continue;
    std::printf("%-32s %12zu  %s\n", name.c_str(), params.size(), nn::describe(params.layout()).c_str());
    total += params.size();
  }
  std::printf("%-32s %12zu\n", "total (online networks)", total);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MAGI: imagined-goal consensus for cooperative multi-agent RL"};
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* c, bool required) {
    auto* opt = c->add_option("--config", o.config, "Run configuration (key = value file)");
    if (required) opt->required();
  };
  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Seed override"); };

  auto* train = app.add_subcommand("train", "Train one run; writes config copy, metrics.csv and checkpoints/");
  add_config(train, true);
  add_seed(train);
  train->add_option("--out", o.out, "Run directory (default $MAGI_OUT/<config>-seed<seed>)");
  train->add_flag("--force", o.force, "Overwrite an existing run directory");

  auto* eval = app.add_subcommand("eval", "Noise-free evaluation of a checkpoint (external reward only)");
  add_config(eval, false);
  add_seed(eval);
  eval->add_option("--out", o.out, "Run directory providing config.cfg and checkpoints/final.ckpt");
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  eval->add_option("--episodes", o.episodes, "Episodes (default eval_episodes)")->check(CLI::PositiveNumber);

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate once per axis value and seed");
  add_config(ablate, true);
  add_seed(ablate);
  ablate->add_option("--axis", o.axis, "sample_size or horizon")->required();
  ablate->add_option("--values", o.values, "Comma-separated values, e.g. 1,4,16")->required();
  ablate->add_option("--out", o.out, "Output directory");
  ablate->add_flag("--force", o.force, "Overwrite an existing output directory");

  auto* inspect = app.add_subcommand("inspect-goals", "Export agent trajectories with their imagined goals");
  add_config(inspect, false);
  add_seed(inspect);
  inspect->add_option("--out", o.out, "Run directory (reads config and checkpoint, writes goals.csv)");
  inspect->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  inspect->add_option("--episodes", o.episodes, "Episodes (default 1)")->check(CLI::PositiveNumber);
  inspect->add_flag("--force", o.force, "Overwrite an existing goals.csv");

  auto* plot = app.add_subcommand("plot", "Render metrics CSVs as SVG line charts");
  plot->add_option("files", o.files, "Metrics CSV files")->required();
  plot->add_option("--metric", o.metric, "Metric column (default: all)");
  plot->add_option("--out", o.out, "Output directory (default $MAGI_OUT/plots)");

  auto* params = app.add_subcommand("param-count", "Per-network parameter table");
  add_config(params, true);
  add_seed(params);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "\n" << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kUsage;
  }

  try {
    if (train->parsed()) return cmd_train(o);
    if (eval->parsed()) return cmd_eval(o);
    if (ablate->parsed()) return cmd_ablate(o);
    if (inspect->parsed()) return cmd_inspect(o);
    if (plot->parsed()) return cmd_plot(o);
    if (params->parsed()) return cmd_param_count(o);
  } catch (const trainer::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
