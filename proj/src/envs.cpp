#include "sar/envs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sar/common.hpp"

namespace sar {

namespace {

// Saturated foreground colors, fixed across all styles. Background values
// live in [0.05, 0.95] after jitter, so pure 0/1 components only ever come
// from entities; tests key on that.
constexpr double kAgentColor[3] = {1.0, 1.0, 1.0};
constexpr double kCollectibleColor[3] = {1.0, 1.0, 0.0};
constexpr double kHazardColor[3] = {1.0, 0.0, 0.0};
constexpr double kGoalColor[3] = {0.0, 1.0, 1.0};

constexpr int kImg = 32;

double quantize(double v) {
  v = std::min(1.0, std::max(0.0, v));
  return std::round(v * 1024.0) / 1024.0;
}

double unit_from_hash(uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

uint64_t style_base(int64_t style_id, const char* what) {
  return splitmix64(static_cast<uint64_t>(style_id) ^ fnv1a64(what));
}

// Background color for pixel (x, y), before jitter.
const std::array<double, 3>& background_color(const StyleSpec& st, int x, int y) {
  switch (st.background) {
    case 1:  // checker, 8 px blocks
      return st.palette[((x / 8) + (y / 8) + st.phase) & 1];
    case 2:  // vertical stripes, 4 px
      return st.palette[((x + st.phase) / 4) % 2 == 0 ? 0 : 2];
    case 3: {  // static per-style noise
      uint64_t h = splitmix64(style_base(st.style_id, "bg-noise") ^
                              static_cast<uint64_t>(y * kImg + x));
      return st.palette[h % 3];
    }
    default:
      return st.palette[0];
  }
}

// Paints the styled background for timestep t into a [3,32,32] buffer.
void paint_background(std::vector<double>& img, const StyleSpec& st, int64_t t) {
  const uint64_t jitter_seed = splitmix64(style_base(st.style_id, "jitter") ^
                                          static_cast<uint64_t>(t));
  for (int y = 0; y < kImg; ++y) {
    for (int x = 0; x < kImg; ++x) {
      const auto& base = background_color(st, x, y);
      const uint64_t h = splitmix64(jitter_seed ^ static_cast<uint64_t>(y * kImg + x));
      for (int c = 0; c < 3; ++c) {
        double v = base[c];
        if (st.jitter > 0.0) {
          // One hash per pixel, decorrelated per channel.
          const double u = unit_from_hash(splitmix64(h + static_cast<uint64_t>(c)));
          v += st.jitter * (2.0 * u - 1.0);
        }
        img[(c * kImg + y) * kImg + x] = quantize(v);
      }
    }
  }
}

void paint_cell(std::vector<double>& img, int cx, int cy, const double color[3]) {
  for (int c = 0; c < 3; ++c) {
    for (int dy = 0; dy < kCellPx; ++dy) {
      for (int dx = 0; dx < kCellPx; ++dx) {
        img[(c * kImg + cy * kCellPx + dy) * kImg + cx * kCellPx + dx] = color[c];
      }
    }
  }
}

void paint_block2(std::vector<double>& img, double ux, double uy, const double color[3]) {
  int px = std::min<int>(kImg - 2, static_cast<int>(std::lround(ux * (kImg - 1))));
  int py = std::min<int>(kImg - 2, static_cast<int>(std::lround(uy * (kImg - 1))));
  for (int c = 0; c < 3; ++c) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        img[(c * kImg + py + dy) * kImg + px + dx] = color[c];
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// StyleSpec

StyleSpec StyleSpec::from_id(int64_t style_id) {
  StyleSpec st;
  st.style_id = style_id;
  RngStream rng(style_base(style_id, "style-params"));
  for (auto& color : st.palette) {
    for (auto& ch : color) ch = rng.uniform(0.15, 0.85);
  }
  st.background = static_cast<int>(rng.uniform_int(4));
  st.phase = static_cast<int>(rng.uniform_int(8));
  st.jitter = rng.uniform(0.0, 0.1);
  return st;
}

std::vector<int64_t> style_pool_ids(const std::string& pool) {
  std::vector<int64_t> ids;
  if (pool == "train") {
    for (int64_t i = 0; i < 200; ++i) ids.push_back(i);
  } else if (pool == "test") {
    for (int64_t i = 0; i < 100; ++i) ids.push_back(10000 + i);
  } else {
    throw ConfigError("unknown style pool '" + pool + "' (expected train or test)");
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Gridworld

GridLayout GridLayout::from_seed(uint64_t seed) {
  RngStream rng(splitmix64(seed ^ fnv1a64("grid-layout")));
  std::array<int, 6> cells{};
  int filled = 0;
  while (filled < 6) {
    int cell = static_cast<int>(rng.uniform_int(kGridSize * kGridSize));
    bool dup = false;
    for (int i = 0; i < filled; ++i) dup = dup || cells[i] == cell;
    if (!dup) cells[filled++] = cell;
  }
  GridLayout lay;
  lay.agent_x = cells[0] % kGridSize;
  lay.agent_y = cells[0] / kGridSize;
  for (int i = 0; i < 3; ++i) {
    lay.collectibles[i] = {cells[1 + i] % kGridSize, cells[1 + i] / kGridSize};
  }
  for (int i = 0; i < 2; ++i) {
    lay.hazards[i] = {cells[4 + i] % kGridSize, cells[4 + i] / kGridSize};
  }
  return lay;
}

Tensor render_gridworld(const GridState& s, const StyleSpec& style) {
  std::vector<double> img(3 * kImg * kImg);
  paint_background(img, style, s.t);
  for (const auto& [hx, hy] : s.layout.hazards) paint_cell(img, hx, hy, kHazardColor);
  for (int i = 0; i < 3; ++i) {
    if (!s.collected[i]) {
      paint_cell(img, s.layout.collectibles[i].first, s.layout.collectibles[i].second,
                 kCollectibleColor);
    }
  }
  paint_cell(img, s.x, s.y, kAgentColor);
  return Tensor::from_data({3, kImg, kImg}, std::move(img));
}

double gridworld_optimal_return(const GridLayout& layout, int64_t budget) {
  // BFS distances from each waypoint (agent start + collectibles), walking
  // around hazards.
  auto blocked = [&](int x, int y) {
    for (const auto& [hx, hy] : layout.hazards) {
      if (hx == x && hy == y) return true;
    }
    return false;
  };
  std::array<std::pair<int, int>, 4> waypoints{
      std::pair<int, int>{layout.agent_x, layout.agent_y}, layout.collectibles[0],
      layout.collectibles[1], layout.collectibles[2]};
  std::array<std::array<int, 4>, 4> dist{};
  for (int w = 0; w < 4; ++w) {
    std::array<int, kGridSize * kGridSize> d;
    d.fill(-1);
    std::vector<int> queue;
    auto [sx, sy] = waypoints[w];
    if (!blocked(sx, sy)) {
      d[sy * kGridSize + sx] = 0;
      queue.push_back(sy * kGridSize + sx);
    }
    for (size_t head = 0; head < queue.size(); ++head) {
      int cur = queue[head];
      int cx = cur % kGridSize, cy = cur / kGridSize;
      const int nx[4] = {cx, cx, cx - 1, cx + 1};
      const int ny[4] = {cy - 1, cy + 1, cy, cy};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || nx[k] >= kGridSize || ny[k] < 0 || ny[k] >= kGridSize) continue;
        if (blocked(nx[k], ny[k])) continue;
        int idx = ny[k] * kGridSize + nx[k];
        if (d[idx] < 0) {
          d[idx] = d[cur] + 1;
          queue.push_back(idx);
        }
      }
    }
    for (int v = 0; v < 4; ++v) {
      auto [tx, ty] = waypoints[v];
      dist[w][v] = d[ty * kGridSize + tx];
    }
  }

  // Best collectible count over all visit orders of all subsets.
  int best = 0;
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end());
  do {
    // Prefixes of each permutation cover every ordered subset.
    int64_t cost = 0;
    int prev = 0;  // waypoint index of the agent start
    for (int k = 0; k < 3; ++k) {
      int next = 1 + order[k];
      if (dist[prev][next] < 0) break;
      cost += dist[prev][next];
      if (cost > budget) break;
      best = std::max(best, k + 1);
      prev = next;
    }
  } while (std::next_permutation(order.begin(), order.end()));
  return static_cast<double>(best);
}

Tensor GridworldEnv::reset(uint64_t layout_seed, int64_t style_id) {
  state_ = GridState{};
  state_.layout = GridLayout::from_seed(layout_seed);
  state_.x = state_.layout.agent_x;
  state_.y = state_.layout.agent_y;
  style_ = StyleSpec::from_id(style_id);
  frame_ = render_gridworld(state_, style_);
  return frame_;
}

StepResult GridworldEnv::step_discrete(int64_t action) {
  if (state_.done) throw std::logic_error("step() after episode end");
  if (action < 0 || action >= 4) {
    throw std::invalid_argument("gridworld action must be in [0,4): got " +
                                std::to_string(action));
  }
  const int dx[4] = {0, 0, -1, 1};
  const int dy[4] = {-1, 1, 0, 0};
  int nx = state_.x + dx[action];
  int ny = state_.y + dy[action];
  if (nx >= 0 && nx < kGridSize && ny >= 0 && ny < kGridSize) {
    state_.x = nx;
    state_.y = ny;
  }
  state_.t += 1;

  StepResult r;
  for (const auto& [hx, hy] : state_.layout.hazards) {
    if (state_.x == hx && state_.y == hy) {
      r.reward = -1.0;
      state_.done = true;
    }
  }
  if (!state_.done) {
    for (int i = 0; i < 3; ++i) {
      if (!state_.collected[i] && state_.layout.collectibles[i].first == state_.x &&
          state_.layout.collectibles[i].second == state_.y) {
        state_.collected[i] = true;
        r.reward += 1.0;
      }
    }
    const bool all = state_.collected[0] && state_.collected[1] && state_.collected[2];
    if (all || state_.t >= kGridBudget) state_.done = true;
  }
  r.done = state_.done;
  frame_ = render_gridworld(state_, style_);
  r.obs = frame_;
  return r;
}

// ---------------------------------------------------------------------------
// Point mass

PointState pointmass_step(const PointState& s, double ax, double ay) {
  PointState n = s;
  n.vx = 0.9 * s.vx + 0.1 * ax;
  n.vy = 0.9 * s.vy + 0.1 * ay;
  n.px = s.px + 0.1 * n.vx;
  n.py = s.py + 0.1 * n.vy;
  if (n.px < 0.0 || n.px > 1.0) {
    n.px = std::min(1.0, std::max(0.0, n.px));
    n.vx = 0.0;
  }
  if (n.py < 0.0 || n.py > 1.0) {
    n.py = std::min(1.0, std::max(0.0, n.py));
    n.vy = 0.0;
  }
  n.t = s.t + 1;
  return n;
}

double pointmass_reward(const PointState& s) {
  const double dx = s.px - s.gx, dy = s.py - s.gy;
  return std::exp(-(dx * dx + dy * dy));
}

Tensor render_pointmass(const PointState& s, const StyleSpec& style) {
  std::vector<double> img(3 * kImg * kImg);
  paint_background(img, style, s.t);
  paint_block2(img, s.gx, s.gy, kGoalColor);
  paint_block2(img, s.px, s.py, kAgentColor);
  return Tensor::from_data({3, kImg, kImg}, std::move(img));
}

Tensor PointMassEnv::reset(uint64_t layout_seed, int64_t style_id) {
  RngStream rng(splitmix64(layout_seed ^ fnv1a64("point-layout")));
  state_ = PointState{};
  do {
    state_.px = rng.uniform(0.1, 0.9);
    state_.py = rng.uniform(0.1, 0.9);
    state_.gx = rng.uniform(0.2, 0.8);
    state_.gy = rng.uniform(0.2, 0.8);
  } while (std::hypot(state_.px - state_.gx, state_.py - state_.gy) < 0.2);
  style_ = StyleSpec::from_id(style_id);
  frames_.assign(kPointFrameStack, render_pointmass(state_, style_));
  return stacked();
}

StepResult PointMassEnv::step_continuous(const std::vector<double>& action) {
  if (state_.done) throw std::logic_error("step() after episode end");
  if (action.size() != 2) {
    throw std::invalid_argument("point-mass action must have 2 components, got " +
                                std::to_string(action.size()));
  }
  StepResult r;
  double ax = action[0], ay = action[1];
  if (ax < -1.0 || ax > 1.0 || ay < -1.0 || ay > 1.0) {
    ax = std::min(1.0, std::max(-1.0, ax));
    ay = std::min(1.0, std::max(-1.0, ay));
    r.action_clamped = true;
  }
  state_ = pointmass_step(state_, ax, ay);
  r.reward = pointmass_reward(state_);
  if (state_.t >= kPointHorizon) state_.done = true;
  r.done = state_.done;
  frames_.erase(frames_.begin());
  frames_.push_back(render_pointmass(state_, style_));
  r.obs = stacked();
  return r;
}

Tensor PointMassEnv::stacked() const {
  std::vector<double> out;
  out.reserve(3 * kPointFrameStack * kImg * kImg);
  for (const Tensor& f : frames_) {
    out.insert(out.end(), f.values().begin(), f.values().end());
  }
  return Tensor::from_data({3 * kPointFrameStack, kImg, kImg}, std::move(out));
}

// ---------------------------------------------------------------------------
// Registry and default step stubs

StepResult Env::step_discrete(int64_t) {
  throw std::logic_error("environment does not take discrete actions");
}

StepResult Env::step_continuous(const std::vector<double>&) {
  throw std::logic_error("environment does not take continuous actions");
}

std::unique_ptr<Env> make_env(const std::string& id) {
  if (id == "gridworld-v0") return std::make_unique<GridworldEnv>();
  if (id == "pointmass-v0") return std::make_unique<PointMassEnv>();
  throw ConfigError("unknown environment id '" + id +
                    "' (expected gridworld-v0 or pointmass-v0)");
}

// ---------------------------------------------------------------------------
// Augmentations

namespace {

void check_image_batch(const Tensor& obs) {
  if (obs.ndim() != 4) {
    throw std::invalid_argument("augmentations expect [B,C,H,W], got " +
                                shape_str(obs.shape()));
  }
}

}  // namespace

Tensor translate_frame(const Tensor& obs, int64_t dx, int64_t dy) {
  check_image_batch(obs);
  const int64_t b = obs.dim(0), c = obs.dim(1), h = obs.dim(2), w = obs.dim(3);
  std::vector<double> out(obs.size(), 0.0);
  const auto& in = obs.values();
  for (int64_t n = 0; n < b; ++n) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const int64_t base = (n * c + ch) * h * w;
      for (int64_t y = 0; y < h; ++y) {
        const int64_t sy = y - dy;
        if (sy < 0 || sy >= h) continue;
        for (int64_t x = 0; x < w; ++x) {
          const int64_t sx = x - dx;
          if (sx < 0 || sx >= w) continue;
          out[base + y * w + x] = in[base + sy * w + sx];
        }
      }
    }
  }
  return Tensor::from_data(obs.shape(), std::move(out));
}

Tensor cutout_frame(const Tensor& obs, int64_t x0, int64_t y0, int64_t w, int64_t h,
                    const std::vector<double>& color) {
  check_image_batch(obs);
  const int64_t c = obs.dim(1), ih = obs.dim(2), iw = obs.dim(3);
  if (static_cast<int64_t>(color.size()) != c) {
    throw std::invalid_argument("cutout color must have one value per channel");
  }
  std::vector<double> out = obs.values();
  for (int64_t n = 0; n < obs.dim(0); ++n) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const int64_t base = (n * c + ch) * ih * iw;
      for (int64_t y = y0; y < std::min(ih, y0 + h); ++y) {
        for (int64_t x = x0; x < std::min(iw, x0 + w); ++x) {
          out[base + y * iw + x] = color[ch];
        }
      }
    }
  }
  return Tensor::from_data(obs.shape(), std::move(out));
}

Tensor aug_random_translate(const Tensor& obs, RngStream& rng, int64_t max_shift) {
  check_image_batch(obs);
  const int64_t b = obs.dim(0), c = obs.dim(1), h = obs.dim(2), w = obs.dim(3);
  std::vector<double> out(obs.size(), 0.0);
  const auto& in = obs.values();
  for (int64_t n = 0; n < b; ++n) {
    const int64_t dx = rng.uniform_int(2 * max_shift + 1) - max_shift;
    const int64_t dy = rng.uniform_int(2 * max_shift + 1) - max_shift;
    for (int64_t ch = 0; ch < c; ++ch) {
      const int64_t base = (n * c + ch) * h * w;
      for (int64_t y = 0; y < h; ++y) {
        const int64_t sy = y - dy;
        if (sy < 0 || sy >= h) continue;
        for (int64_t x = 0; x < w; ++x) {
          const int64_t sx = x - dx;
          if (sx < 0 || sx >= w) continue;
          out[base + y * w + x] = in[base + sy * w + sx];
        }
      }
    }
  }
  return Tensor::from_data(obs.shape(), std::move(out));
}

Tensor aug_color_cutout(const Tensor& obs, RngStream& rng) {
  check_image_batch(obs);
  const int64_t b = obs.dim(0), c = obs.dim(1), h = obs.dim(2), w = obs.dim(3);
  std::vector<double> out = obs.values();
  for (int64_t n = 0; n < b; ++n) {
    const int64_t rw = std::min<int64_t>(w, 4 + rng.uniform_int(9));
    const int64_t rh = std::min<int64_t>(h, 4 + rng.uniform_int(9));
    const int64_t x0 = rng.uniform_int(w - rw + 1);
    const int64_t y0 = rng.uniform_int(h - rh + 1);
    for (int64_t ch = 0; ch < c; ++ch) {
      const double color = rng.uniform(0.0, 1.0);
      const int64_t base = (n * c + ch) * h * w;
      for (int64_t y = y0; y < y0 + rh; ++y) {
        for (int64_t x = x0; x < x0 + rw; ++x) {
          out[base + y * w + x] = color;
        }
      }
    }
  }
  return Tensor::from_data(obs.shape(), std::move(out));
}

}  // namespace sar
