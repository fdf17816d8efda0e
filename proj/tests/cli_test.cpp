#include "magi/trainer/metrics.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const char* kSmallRun =
    "task = navigation\n"
    "hidden = 16,16\n"
    "latent_dim = 3\n"
    "sample_count = 4\n"
    "batch_size = 16\n"
    "replay_capacity = 5000\n"
    "warmup_steps = 50\n"
    "total_steps = 200\n"
    "eval_period = 100\n"
    "eval_episodes = 2\n";

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("magi_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

  Result run(const std::string& args) {
    const auto out = dir_ / ".stdout", err = dir_ / ".stderr";
    const std::string cmd = "cd '" + dir_.string() + "' && MAGI_OUT='" + (dir_ / "runs").string() + "' '" +
                            MAGI_CLI_PATH + "' " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    fs::remove(out);
    fs::remove(err);
    return r;
  }

  std::vector<fs::path> listing() const {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(dir_)) out.push_back(e.path());
    return out;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, TrainWritesRunDirectory) {
  const auto cfg = write("nav.cfg", kSmallRun);
  const auto r = run("train --config nav.cfg --seed 7");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto run_dir = dir_ / "runs" / "nav-seed7";
  EXPECT_TRUE(fs::exists(run_dir / "config.cfg"));
  EXPECT_TRUE(fs::exists(run_dir / "checkpoints" / "final.ckpt"));
  EXPECT_TRUE(fs::exists(run_dir / "checkpoints" / "step_100.ckpt"));
  const auto table = magi::trainer::read_metrics_csv((run_dir / "metrics.csv").string());
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[1][0], 200.0);
  EXPECT_NE(slurp(run_dir / "config.cfg").find("seed = 7"), std::string::npos);
  EXPECT_EQ(slurp(cfg), kSmallRun);
}

TEST_F(Cli, UnknownFlagIsUsageErrorWithoutFiles) {
  write("nav.cfg", kSmallRun);
  const auto before = listing();
  const auto r = run("train --config nav.cfg --sede 7");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--config"), std::string::npos);
  EXPECT_EQ(listing(), before);
  EXPECT_EQ(run("fly --config nav.cfg").code, 1);
  EXPECT_EQ(run("").code, 1);
}

TEST_F(Cli, UnknownConfigKeyIsUsageError) {
  write("typo.cfg", std::string(kSmallRun) + "lamda = 0.1\n");
  const auto r = run("train --config typo.cfg");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("lamda"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "runs"));
  EXPECT_EQ(run("train --config missing.cfg").code, 1);
}

TEST_F(Cli, RefusesToOverwriteWithoutForce) {
  write("nav.cfg", kSmallRun);
  ASSERT_EQ(run("train --config nav.cfg --out run").code, 0);
  const auto metrics = slurp(dir_ / "run" / "metrics.csv");
  const auto r = run("train --config nav.cfg --out run");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--force"), std::string::npos);
  EXPECT_EQ(slurp(dir_ / "run" / "metrics.csv"), metrics);
  ASSERT_EQ(run("train --config nav.cfg --out run --force").code, 0);
  EXPECT_EQ(slurp(dir_ / "run" / "metrics.csv"), metrics);
}

TEST_F(Cli, EvalReadsRunDirectory) {
  write("nav.cfg", kSmallRun);
  ASSERT_EQ(run("train --config nav.cfg --out run").code, 0);
  const auto a = run("eval --out run --episodes 3");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_TRUE(std::regex_search(a.out, std::regex("task=navigation episodes=3 mean_return=-?[0-9.e+-]+ std_return=")));
  EXPECT_EQ(run("eval --out run --episodes 3").out, a.out);
  const auto b = run("eval --config nav.cfg --checkpoint run/checkpoints/final.ckpt --episodes 3");
  EXPECT_EQ(b.code, 0);
  EXPECT_EQ(b.out, a.out);
  EXPECT_EQ(run("eval --out nowhere").code, 1);
  EXPECT_EQ(run("eval --config nav.cfg --checkpoint nothing.ckpt").code, 2);
}

TEST_F(Cli, ParamCountTable) {
  write("nav.cfg", kSmallRun);
  const auto r = run("param-count --config nav.cfg");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* name : {"agent/0/critic", "agent/2/hypernet", "agent/1/policy_trunk", "imagination/encoder"})
    EXPECT_NE(r.out.find(name), std::string::npos) << name;
  EXPECT_EQ(r.out.find("target_"), std::string::npos);

  std::smatch m;
  ASSERT_TRUE(std::regex_search(r.out, m, std::regex("total \\(online networks\\)\\s+([0-9]+)")));
  const long total = std::stol(m[1]);
  long sum = 0;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.rfind("total", 0) == 0) break;
    std::istringstream cells(line);
    std::string name;
    long n = 0;
    cells >> name >> n;
    sum += n;
  }
  EXPECT_EQ(sum, total);
  // critic on 18 + 2 inputs, two hidden layers of 16
  EXPECT_TRUE(std::regex_search(r.out, std::regex("agent/0/critic\\s+" + std::to_string(20 * 16 + 16 + 16 * 16 + 16 + 16 + 1) + "\\b")));
}

TEST_F(Cli, PlotTwoFilesGivesTwoPolylines) {
  const std::string header = magi::trainer::metrics_header(3) + "\n";
  write("a.csv", header + "100,-50,1,nan,nan,nan,1,1,1\n200,-40,1,nan,nan,nan,1,1,1\n");
  write("b.csv", header + "100,-45,1,nan,nan,nan,1,1,1\n200,-42,1,nan,nan,nan,1,1,1\n");
  const auto r = run("plot a.csv b.csv --metric mean_return --out plots");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto svg = slurp(dir_ / "plots" / "mean_return.svg");
  std::size_t polylines = 0;
  for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++polylines;
  EXPECT_EQ(polylines, 2u);
  EXPECT_NE(svg.find(">a<"), std::string::npos);
  EXPECT_NE(svg.find(">b<"), std::string::npos);

  ASSERT_EQ(run("plot a.csv --out all").code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "all" / "critic_loss_2.svg"));
}

TEST_F(Cli, PlotRejectsMalformedCsv) {
  write("empty.csv", magi::trainer::metrics_header(3) + "\n");
  const auto r = run("plot empty.csv");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("empty.csv:"), std::string::npos);
  write("bad.csv", magi::trainer::metrics_header(3) + "\n100,x,1,1,1,1,1,1,1\n");
  const auto b = run("plot bad.csv");
  EXPECT_EQ(b.code, 2);
  EXPECT_NE(b.err.find("bad.csv:2"), std::string::npos);
  EXPECT_EQ(run("plot").code, 1);
}

TEST_F(Cli, MonotoneSeriesGivesMonotonePolyline) {
  std::string csv = magi::trainer::metrics_header(1) + "\n";
  for (int k = 1; k <= 20; ++k)
    csv += std::to_string(k * 10) + "," + std::to_string(-100.0 + k * k * 0.2) + ",0,nan,nan,nan,1\n";
  write("up.csv", csv);
  ASSERT_EQ(run("plot up.csv --metric mean_return --out p").code, 0);
  const auto svg = slurp(dir_ / "p" / "mean_return.svg");
  std::smatch m;
  ASSERT_TRUE(std::regex_search(svg, m, std::regex("<polyline[^>]*points=\"([^\"]*)\"")));
  std::istringstream pts(m[1].str());
  std::string pair;
  std::vector<double> xs, ys;
  while (pts >> pair) {
    const auto comma = pair.find(',');
    xs.push_back(std::stod(pair.substr(0, comma)));
    ys.push_back(std::stod(pair.substr(comma + 1)));
  }
  ASSERT_EQ(ys.size(), 20u);
  for (std::size_t k = 1; k < ys.size(); ++k) {
    EXPECT_GT(xs[k], xs[k - 1]);
    EXPECT_LT(ys[k], ys[k - 1]);  // screen y grows downward
  }
}

TEST_F(Cli, InspectGoalsExport) {
  write("nav.cfg", std::string(kSmallRun) + "goal_refresh = 5\n");
  ASSERT_EQ(run("train --config nav.cfg --out run").code, 0);
  const auto r = run("inspect-goals --out run --seed 3");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = slurp(dir_ / "run" / "goals.csv");
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "episode,step,agent,x,y,goal_x,goal_y,goal_value");
  std::map<int, std::vector<std::string>> goal_by_agent;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    const auto cells = magi::trainer::split_csv_line(line);
    ASSERT_EQ(cells.size(), 8u);
    goal_by_agent[std::stoi(cells[2])].push_back(cells[5] + "," + cells[6] + "," + cells[7]);
  }
  EXPECT_EQ(rows, 75);
  for (const auto& [agent, goals] : goal_by_agent) {
    ASSERT_EQ(goals.size(), 25u);
    for (std::size_t t = 1; t < goals.size(); ++t) {
      if (t % 5 != 0) {
        EXPECT_EQ(goals[t], goals[t - 1]) << "agent " << agent << " step " << t;
      }
    }
  }
  EXPECT_TRUE(fs::exists(dir_ / "run" / "trajectory.csv"));

  EXPECT_EQ(run("inspect-goals --out run --seed 3").code, 1);
  ASSERT_EQ(run("inspect-goals --out run --seed 3 --force").code, 0);
  EXPECT_EQ(slurp(dir_ / "run" / "goals.csv"), text);
}

TEST_F(Cli, InspectGoalsTaskMismatchIsRuntimeError) {
  write("nav.cfg", kSmallRun);
  ASSERT_EQ(run("train --config nav.cfg --out run").code, 0);
  std::string treasure = kSmallRun;
  treasure.replace(treasure.find("navigation"), 10, "treasure");
  write("treasure.cfg", treasure);
  const auto r = run("inspect-goals --config treasure.cfg --checkpoint run/checkpoints/final.ckpt --out t");
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(dir_ / "t" / "goals.csv"));
}

TEST_F(Cli, AblateWritesSummary) {
  write("nav.cfg", std::string(kSmallRun) + "seeds = 0,1\n");
  const auto r = run("ablate --config nav.cfg --axis sample_size --values 1,2 --out abl");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto summary = slurp(dir_ / "abl" / "ablation_summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 5);
  EXPECT_EQ(run("ablate --config nav.cfg --axis width --values 1 --out x").code, 1);
  EXPECT_EQ(run("ablate --config nav.cfg --axis horizon --values 2,30 --out y").code, 1);
  EXPECT_FALSE(fs::exists(dir_ / "y"));
}
