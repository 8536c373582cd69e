#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sar/agents.hpp"
#include "sar/config.hpp"
#include "sar/envs.hpp"
#include "sar/harness.hpp"

namespace sar {

// ---------------------------------------------------------------------------
// Run loading

/// A run directory opened for inspection: parsed config, a matching
/// environment, and the networks restored from the newest checkpoint.
struct LoadedRun {
  RunConfig cfg;
  std::unique_ptr<Env> env;
  std::unique_ptr<PpoNet> ppo;  // exactly one of ppo/sac is set
  std::unique_ptr<SacNet> sac;
  std::unique_ptr<PerturbGenerator> gen;
  int64_t step = 0;
  std::string checkpoint_path;

  const Encoder& encoder() const;
  EvalPolicy policy() const;
};

/// Reads config.json and restores from the highest-numbered checkpoint.
/// Missing config or checkpoints throw ArtifactError; a config that fails
/// validation throws ConfigError.
LoadedRun load_run(const std::string& run_dir);

// ---------------------------------------------------------------------------
// Variant comparison

/// Functional label for a run's loss configuration: "sar", "no-gcritic",
/// "gcritic-only", "mixstyle-only", or "base", with "+trans" or "+color"
/// appended when input augmentation is on.
std::string variant_name(const RunConfig& cfg);

struct CompareCell {
  double mean = 0;
  double stddev = 0;  // population std over per-seed means
  int64_t seeds = 0;
  int64_t rank = 0;  // 1 = best mean in this pool; ties broken by lower std
};

struct CompareReport {
  std::string env;
  std::vector<std::string> pools;     // column order, train before test
  std::vector<std::string> variants;  // sorted by rank in the last pool
  std::vector<std::vector<CompareCell>> cells;  // [variant][pool]
};

/// Aggregates eval.json results across run directories, grouping by
/// variant. Refuses mixed environments, mismatched pool sets, duplicate
/// seeds within a variant, and variants with fewer than `min_seeds` seeds.
CompareReport build_compare(const std::vector<std::string>& run_dirs, int64_t min_seeds);

std::string compare_to_text(const CompareReport& r);
std::string compare_to_json(const CompareReport& r);

// ---------------------------------------------------------------------------
// Learning-curve plots

struct PlotSeries {
  std::string name;
  std::vector<double> timesteps, values;  // equal length, finite values only
};

/// Reads one metric column from a run's metrics.csv, smooths it with
/// ema_series(c), and drops rows where the metric is NaN. Throws
/// MetricError for unknown columns (listing the available ones) and for
/// series with no finite values.
PlotSeries load_series(const std::string& run_dir, const std::string& metric, double smooth);

/// Self-contained SVG line chart: one polyline per series, axes labeled
/// timestep vs the metric, and a legend. Output is a pure function of the
/// inputs.
std::string render_svg(const std::vector<PlotSeries>& series, const std::string& metric);

/// Long-format CSV of the smoothed series: run,timestep,<metric>.
std::string series_to_csv(const std::vector<PlotSeries>& series, const std::string& metric);

// ---------------------------------------------------------------------------
// Embedding analysis

struct AnalyzeResult {
  StyleGap gap;
  std::string pool;
  int64_t n_states = 0, n_styles = 0;
  uint64_t seed = 0;
  int64_t step = 0;  // checkpoint the encoder came from
};

/// Style-sensitivity index of a trained run's branch-point embedding.
AnalyzeResult analyze_run(const std::string& run_dir, const std::string& pool,
                          int64_t n_states, int64_t n_styles, uint64_t seed);

std::string analyze_to_json(const AnalyzeResult& r);

}  // namespace sar
