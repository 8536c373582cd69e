#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace sar {

/// One logging-interval row. Columns that do not apply at a given step
/// (no episode finished, no evaluation ran) are NaN and serialize as
/// "nan". Loss columns must be finite.
struct MetricsRow {
  int64_t timestep = 0;
  double episode_return = 0;
  double eval_return_train_styles = 0;
  double eval_return_test_styles = 0;
  double l_div = 0;
  double g_critic = 0;
  double actor_loss = 0;
  double critic_loss = 0;
  double gen_loss = 0;
};

extern const char* const kMetricsHeader;

/// Append-only CSV writer with a stable header and 17-significant-digit
/// serialization, so identical runs produce byte-identical files.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);

  /// Enforces strictly increasing timesteps and finite losses.
  void append(const MetricsRow& row);
  int64_t rows() const { return rows_; }

 private:
  std::ofstream out_;
  std::string path_;
  int64_t last_timestep_ = -1;
  int64_t rows_ = 0;
};

/// Wall-clock sidecar, kept out of metrics.csv so that file stays
/// deterministic.
class TimingWriter {
 public:
  explicit TimingWriter(const std::string& path);
  void append(int64_t timestep, double wall_time_s);

 private:
  std::ofstream out_;
};

struct MetricsTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;  // row-major, NaN for blanks

  int64_t column_index(const std::string& name) const;  // -1 if absent
  std::vector<double> column(const std::string& name) const;
};

/// Parses a metrics.csv written by MetricsWriter (or any simple numeric
/// CSV with a header line).
MetricsTable read_metrics_csv(const std::string& path);

/// s_0 = x_0, s_t = c * s_{t-1} + (1 - c) * x_t. NaN inputs are skipped:
/// the smoothed value carries forward.
std::vector<double> ema_series(const std::vector<double>& xs, double c);

/// Serializes one double with 17 significant digits (shortest exact form
/// is not needed; stability is).
std::string format_metric(double v);

}  // namespace sar
