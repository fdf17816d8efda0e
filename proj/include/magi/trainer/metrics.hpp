#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace magi::trainer {

struct MetricsRow {
  std::int64_t env_step = 0;
  double mean_return = 0.0;  // external reward, noise-free evaluation
  double std_return = 0.0;
  double intrinsic_mean = std::numeric_limits<double>::quiet_NaN();
  double cvae_loss = std::numeric_limits<double>::quiet_NaN();
  double goal_critic_loss = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> critic_loss;  // one per learner
  double wall_clock = 0.0;          // seconds since the run started; written to timing.csv
};

/// Malformed metrics file; carries the file name and 1-based line.
class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string metrics_header(std::size_t learners) {
  std::string h = "env_step,mean_return,std_return,intrinsic_mean,cvae_loss,goal_critic_loss";
  for (std::size_t i = 0; i < learners; ++i) h += ",critic_loss_" + std::to_string(i);
  return h;
}

/// Deterministic columns only; wall-clock lives in timing.csv.
inline std::string metrics_csv(const std::vector<MetricsRow>& rows, std::size_t learners) {
  std::string out = metrics_header(learners) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.env_step) + "," + format_real(r.mean_return) + "," + format_real(r.std_return) + "," +
           format_real(r.intrinsic_mean) + "," + format_real(r.cvae_loss) + "," + format_real(r.goal_critic_loss);
    for (std::size_t i = 0; i < learners; ++i)
      out += "," + format_real(i < r.critic_loss.size() ? r.critic_loss[i] : std::nan(""));
    out += "\n";
  }
  return out;
}

inline std::string timing_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "env_step,wall_clock\n";
  for (const auto& r : rows) out += std::to_string(r.env_step) + "," + format_real(r.wall_clock) + "\n";
  return out;
}

/// A parsed numeric CSV: header names and rows of equal width.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
      if (columns[k] == name) return static_cast<int>(k);
    return -1;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Requires the metrics header prefix and at least one data row.
inline CsvTable parse_metrics_csv(const std::string& text, const std::string& name) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) -> CsvError {
    return CsvError(name + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      t.columns = split_csv_line(line);
      if (t.columns.size() < 6 || t.columns[0] != "env_step" || t.columns[1] != "mean_return")
        throw fail("missing metrics header");
      continue;
    }
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.columns.size())
      throw fail("expected " + std::to_string(t.columns.size()) + " fields, got " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        const double v = std::stod(c, &used);
        if (used != c.size()) throw std::invalid_argument(c);
        row.push_back(v);
      } catch (const std::exception&) {
        throw fail("not a number: '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (line_no == 0) throw fail("empty file");
  if (t.rows.empty()) throw fail("no data rows");
  return t;
}

inline CsvTable read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw CsvError(path + ":0: cannot open");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_metrics_csv(ss.str(), path);
}

}  // namespace magi::trainer
