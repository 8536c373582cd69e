#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sar/agents.hpp"
#include "sar/checkpoint.hpp"
#include "sar/config.hpp"
#include "sar/envs.hpp"

namespace sar {

// ---------------------------------------------------------------------------
// Parameter naming

/// Stable name -> tensor pairs covering every learnable array, in the same
/// order as the corresponding params() accessors. The tensors are views:
/// restoring into them updates the live model.
std::vector<std::pair<std::string, Tensor>> named_params(const PpoNet& net);
std::vector<std::pair<std::string, Tensor>> named_params(const SacNet& net);
std::vector<std::pair<std::string, Tensor>> named_params(const PerturbGenerator& gen);

Checkpoint snapshot_params(const std::vector<std::pair<std::string, Tensor>>& named,
                           uint64_t config_hash, int64_t step);
/// Throws ArtifactError when a named array is missing or has the wrong size.
void restore_params(const std::vector<std::pair<std::string, Tensor>>& named,
                    const Checkpoint& ckpt);

// ---------------------------------------------------------------------------
// Run directories

/// <runs_root>/<run_dir_name(cfg)>, wiped if it already exists, with
/// config.json (resolved config + its hash) and checkpoints/ inside.
/// Returns the run directory path.
std::string prepare_run_dir(const RunConfig& cfg, const std::string& runs_root);

// ---------------------------------------------------------------------------
// Evaluation

/// Deterministic per-observation action choice: exactly one of the two
/// callbacks is set, matching the env's action kind.
struct EvalPolicy {
  std::function<int64_t(const Tensor& obs)> act_discrete;
  std::function<std::vector<double>(const Tensor& obs)> act_continuous;
};

/// Greedy policies (argmax probability / gaussian mean), built on a
/// gradient-free forward pass with no mixing or perturbation.
EvalPolicy eval_policy(const PpoNet& net);
EvalPolicy eval_policy(const SacNet& net);

struct EvalSpec {
  std::string style_mode = "pool";  // pool | single
  int64_t style_id = 0;             // single mode only
  std::string pool = "train";      // pool mode: train | test; also the label
  int64_t episodes = 10;
  uint64_t seed = 0;
};

struct EvalResult {
  std::string pool;
  double mean = 0;
  double stddev = 0;  // population
  int64_t episodes = 0;
  uint64_t seed = 0;
  std::vector<double> returns;        // per episode
  std::vector<uint64_t> layout_seeds;
  std::vector<int64_t> style_ids;
};

/// Rolls out `spec.episodes` full episodes with deterministic actions.
/// Styles come from the named pool (or the fixed id), layouts from the
/// eval stream; training RNG streams are never touched.
EvalResult evaluate(Env& env, const EvalPolicy& policy, const EvalSpec& spec);

/// {"<pool>": {pool, mean, std, episodes, seed}, ...}
void write_eval_json(const std::string& path, const std::vector<EvalResult>& results);

// ---------------------------------------------------------------------------
// Embedding diagnostics

using EmbedFn = std::function<std::vector<double>(const Tensor& obs)>;

struct StyleGap {
  double cross_style = 0;  // same state, different styles
  double cross_state = 0;  // different states, same style
  double ratio = 0;        // cross_style / cross_state, 0 when both are 0
};

/// Embeds reset observations over an n_states x n_styles grid (layout
/// seeds derived from `seed`, styles drawn from the pool without
/// replacement) and reports mean pairwise L2 distances along each axis.
/// Requires at least two states and two styles.
StyleGap embedding_style_gap(Env& env, const EmbedFn& embed, int64_t n_states, int64_t n_styles,
                             const std::string& pool, uint64_t seed);

/// Flattened branch-point features of a single observation.
EmbedFn branch_embed_fn(const Encoder& enc);

// ---------------------------------------------------------------------------
// Reward normalization (on-policy trainer only)

/// Divides rewards by the running standard deviation of the discounted
/// return accumulator. Raw rewards are what gets logged; only the update
/// sees scaled ones.
class RewardNormalizer {
 public:
  explicit RewardNormalizer(double gamma) : gamma_(gamma) {}
  double normalize(double reward, bool done);

 private:
  double gamma_ = 0.999;
  double acc_ = 0.0;
  double mean_ = 0.0, var_ = 1.0, count_ = 1e-4;
};

// ---------------------------------------------------------------------------
// Training

struct TrainResult {
  std::string run_dir;
  double final_eval_train = 0;
  double final_eval_test = 0;  // NaN when the run trains on a single style
};

/// Writes checkpoints/nan_snapshot.bin plus nan_diagnostic.json into the
/// run dir and throws NumericError naming both.
[[noreturn]] void abort_with_snapshot(const std::string& run_dir, const Checkpoint& snap,
                                      int64_t timestep, const std::string& what);

TrainResult train_ppo(const RunConfig& cfg, const std::string& runs_root);
TrainResult train_sac(const RunConfig& cfg, const std::string& runs_root);

/// Validates, prepares the run directory, and dispatches on cfg.algorithm.
TrainResult train(const RunConfig& cfg, const std::string& runs_root);

}  // namespace sar
