#include "sar/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "sar/common.hpp"

namespace sar {

const char* const kMetricsHeader =
    "timestep,episode_return,eval_return_train_styles,eval_return_test_styles,"
    "l_div,g_critic,actor_loss,critic_loss,gen_loss";

std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

MetricsWriter::MetricsWriter(const std::string& path) : out_(path, std::ios::trunc), path_(path) {
  if (!out_) throw ArtifactError("cannot open metrics file for writing: " + path);
  out_ << kMetricsHeader << "\n";
}

void MetricsWriter::append(const MetricsRow& r) {
  if (r.timestep <= last_timestep_) {
    throw MetricError("metrics timestep must increase: " + std::to_string(r.timestep) +
                      " after " + std::to_string(last_timestep_));
  }
  for (double loss : {r.l_div, r.g_critic, r.actor_loss, r.critic_loss, r.gen_loss}) {
    if (!std::isfinite(loss)) {
      throw MetricError("non-finite loss in metrics row at timestep " +
                        std::to_string(r.timestep));
    }
  }
  out_ << r.timestep << ',' << format_metric(r.episode_return) << ','
       << format_metric(r.eval_return_train_styles) << ','
       << format_metric(r.eval_return_test_styles) << ',' << format_metric(r.l_div) << ','
       << format_metric(r.g_critic) << ',' << format_metric(r.actor_loss) << ','
       << format_metric(r.critic_loss) << ',' << format_metric(r.gen_loss) << '\n';
  out_.flush();
  last_timestep_ = r.timestep;
  ++rows_;
}

TimingWriter::TimingWriter(const std::string& path) : out_(path, std::ios::trunc) {
  if (!out_) throw ArtifactError("cannot open timing file for writing: " + path);
  out_ << "timestep,wall_time_s\n";
}

void TimingWriter::append(int64_t timestep, double wall_time_s) {
  out_ << timestep << ',' << format_metric(wall_time_s) << '\n';
  out_.flush();
}

int64_t MetricsTable::column_index(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int64_t>(i);
  }
  return -1;
}

std::vector<double> MetricsTable::column(const std::string& name) const {
  const int64_t idx = column_index(name);
  if (idx < 0) throw MetricError("unknown metric column '" + name + "'");
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[idx]);
  return out;
}

MetricsTable read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("metrics file not found: " + path);
  MetricsTable t;
  std::string line;
  if (!std::getline(in, line)) throw ArtifactError("empty metrics file: " + path);
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) t.columns.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::vector<double> vals;
    while (std::getline(row, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
    if (vals.size() != t.columns.size()) {
      throw ArtifactError("ragged metrics row in " + path);
    }
    t.rows.push_back(std::move(vals));
  }
  return t;
}

std::vector<double> ema_series(const std::vector<double>& xs, double c) {
  std::vector<double> out(xs.size());
  double s = 0;
  bool started = false;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (std::isnan(xs[i])) {
      out[i] = started ? s : std::nan("");
      continue;
    }
    s = started ? c * s + (1 - c) * xs[i] : xs[i];
    started = true;
    out[i] = s;
  }
  return out;
}

}  // namespace sar
