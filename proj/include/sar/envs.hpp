#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sar/rng.hpp"
#include "sar/tensor.hpp"

namespace sar {

// ---------------------------------------------------------------------------
// Styles

/// Rendering parameters derived deterministically from a style id. Styles
/// touch only background pixels; entity geometry, colors, and dynamics are
/// style-independent.
struct StyleSpec {
  int64_t style_id = 0;
  std::array<std::array<double, 3>, 3> palette{};  // base colors in [0.15, 0.85]
  int background = 0;                              // 0 solid, 1 checker, 2 stripes, 3 noise
  int phase = 0;
  double jitter = 0.0;  // per-pixel noise amplitude in [0, 0.1]

  static StyleSpec from_id(int64_t style_id);
};

/// "train" -> ids 0..199, "test" -> ids 10000..10099. Unknown pool names
/// are a config error.
std::vector<int64_t> style_pool_ids(const std::string& pool);

// ---------------------------------------------------------------------------
// Gridworld

inline constexpr int kGridSize = 8;
inline constexpr int kCellPx = 4;
inline constexpr int64_t kGridBudget = 64;

struct GridLayout {
  int agent_x = 0, agent_y = 0;
  std::array<std::pair<int, int>, 3> collectibles{};
  std::array<std::pair<int, int>, 2> hazards{};

  static GridLayout from_seed(uint64_t seed);
};

struct GridState {
  GridLayout layout;
  int x = 0, y = 0;
  std::array<bool, 3> collected{};
  int64_t t = 0;
  bool done = false;
};

/// 3x32x32 frame: background per style (with per-timestep jitter), then
/// hazards, uncollected collectibles, and the agent in fixed saturated
/// colors. All values quantized to multiples of 1/1024.
Tensor render_gridworld(const GridState& s, const StyleSpec& style);

/// Best achievable return (collectible count) within the step budget,
/// avoiding hazards: pairwise BFS distances plus enumeration of visit
/// orders over collectible subsets.
double gridworld_optimal_return(const GridLayout& layout, int64_t budget = kGridBudget);

// ---------------------------------------------------------------------------
// Point mass

inline constexpr int64_t kPointHorizon = 200;
inline constexpr int kPointFrameStack = 3;

struct PointState {
  double px = 0.5, py = 0.5;
  double vx = 0, vy = 0;
  double gx = 0.5, gy = 0.5;
  int64_t t = 0;
  bool done = false;
};

/// Damped double integrator with walls: v <- 0.9 v + 0.1 a, p <- p + 0.1 v,
/// positions clamped to [0,1] (velocity component zeroed on contact).
/// Actions are expected in [-1,1]; callers clamp.
PointState pointmass_step(const PointState& s, double ax, double ay);

double pointmass_reward(const PointState& s);

Tensor render_pointmass(const PointState& s, const StyleSpec& style);

// ---------------------------------------------------------------------------
// Environment interface

struct StepResult {
  Tensor obs;
  double reward = 0;
  bool done = false;
  bool action_clamped = false;
};

class Env {
 public:
  virtual ~Env() = default;

  virtual Shape obs_shape() const = 0;
  virtual bool discrete() const = 0;
  virtual int64_t action_count() const = 0;  // discrete arity, 0 otherwise
  virtual int64_t action_dim() const = 0;    // continuous dims, 0 otherwise
  virtual int64_t frame_stack() const = 0;

  virtual Tensor reset(uint64_t layout_seed, int64_t style_id) = 0;
  virtual StepResult step_discrete(int64_t action);
  virtual StepResult step_continuous(const std::vector<double>& action);

  /// Most recent single rendered frame [3,32,32] (the stacked observation
  /// is built from these).
  virtual Tensor latest_frame() const = 0;
  virtual bool episode_done() const = 0;
  virtual int64_t steps_taken() const = 0;
};

class GridworldEnv final : public Env {
 public:
  Shape obs_shape() const override { return {3, 32, 32}; }
  bool discrete() const override { return true; }
  int64_t action_count() const override { return 4; }
  int64_t action_dim() const override { return 0; }
  int64_t frame_stack() const override { return 1; }

  Tensor reset(uint64_t layout_seed, int64_t style_id) override;
  StepResult step_discrete(int64_t action) override;
  Tensor latest_frame() const override { return frame_; }
  bool episode_done() const override { return state_.done; }
  int64_t steps_taken() const override { return state_.t; }

  const GridState& state() const { return state_; }
  double optimal_return() const { return gridworld_optimal_return(state_.layout); }

 private:
  GridState state_;
  StyleSpec style_;
  Tensor frame_;
};

class PointMassEnv final : public Env {
 public:
  Shape obs_shape() const override { return {3 * kPointFrameStack, 32, 32}; }
  bool discrete() const override { return false; }
  int64_t action_count() const override { return 0; }
  int64_t action_dim() const override { return 2; }
  int64_t frame_stack() const override { return kPointFrameStack; }

  Tensor reset(uint64_t layout_seed, int64_t style_id) override;
  StepResult step_continuous(const std::vector<double>& action) override;
  Tensor latest_frame() const override { return frames_.back(); }
  bool episode_done() const override { return state_.done; }
  int64_t steps_taken() const override { return state_.t; }

  const PointState& state() const { return state_; }

 private:
  Tensor stacked() const;
  PointState state_;
  StyleSpec style_;
  std::vector<Tensor> frames_;  // oldest first, size kPointFrameStack
};

/// Registry: "gridworld-v0", "pointmass-v0".
std::unique_ptr<Env> make_env(const std::string& id);

// ---------------------------------------------------------------------------
// Augmentations (applied to update minibatches, never to stored frames)

/// Deterministic cores: callers pick the parameters.
Tensor translate_frame(const Tensor& obs, int64_t dx, int64_t dy);
Tensor cutout_frame(const Tensor& obs, int64_t x0, int64_t y0, int64_t w, int64_t h,
                    const std::vector<double>& color);

/// Pad-and-crop shift by per-sample (dx, dy) uniform in [-max_shift,
/// max_shift], zero padding. obs is [B,C,H,W].
Tensor aug_random_translate(const Tensor& obs, RngStream& rng, int64_t max_shift = 4);

/// One rectangle per sample (sides uniform in [4,12] px, clamped to the
/// frame) filled with one uniform random color. obs is [B,C,H,W].
Tensor aug_color_cutout(const Tensor& obs, RngStream& rng);

}  // namespace sar
