#pragma once

#include <cstdint>
#include <vector>

#include "sar/rng.hpp"
#include "sar/tensor.hpp"

namespace sar {

/// On-policy storage for one rollout. Everything the update needs is
/// captured at collection time; the buffer must be full before an update
/// and is cleared afterwards.
class RolloutBuffer {
 public:
  RolloutBuffer(int64_t capacity, const Shape& obs_shape, int64_t act_dim);

  void push(const Tensor& obs, int64_t action_d, const std::vector<double>& action_c,
            double reward, bool done, double value, double logp);
  bool full() const { return size_ == capacity_; }
  int64_t size() const { return size_; }
  int64_t capacity() const { return capacity_; }
  void clear();

  /// Gathers the observations at `idx` into one [n, C, H, W] batch.
  Tensor gather_obs(const std::vector<int64_t>& idx) const;
  std::vector<int64_t> gather_actions_discrete(const std::vector<int64_t>& idx) const;
  Tensor gather_actions_continuous(const std::vector<int64_t>& idx) const;
  Tensor gather(const std::vector<double>& field, const std::vector<int64_t>& idx) const;

  const std::vector<double>& rewards() const { return rewards_; }
  const std::vector<uint8_t>& dones() const { return dones_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& logps() const { return logps_; }

 private:
  int64_t capacity_ = 0, size_ = 0, obs_size_ = 0, act_dim_ = 0;
  Shape obs_shape_;
  std::vector<double> obs_;        // capacity * obs_size
  std::vector<int64_t> actions_d_;
  std::vector<double> actions_c_;  // capacity * act_dim
  std::vector<double> rewards_, values_, logps_;
  std::vector<uint8_t> dones_;
};

/// Off-policy ring buffer over single rendered frames. Frames are stored
/// once as uint16 multiples of 1/1024 (lossless for rendered observations)
/// and stacked on sampling; a transition's stack pads backwards with its
/// episode's first frame.
class ReplayBuffer {
 public:
  ReplayBuffer(int64_t capacity, int64_t frame_stack, const Shape& frame_shape, int64_t act_dim);

  /// Registers the first frame of a fresh episode. Must be called before
  /// the episode's first push and after every terminal push.
  void begin_episode(const Tensor& first_frame);
  /// Records one transition; `next_frame` is the single new frame produced
  /// by the step (not the stacked observation).
  void push(const std::vector<double>& action, double reward, bool done,
            const Tensor& next_frame);

  int64_t size() const { return size_; }
  int64_t capacity() const { return capacity_; }

  struct Batch {
    Tensor obs, next_obs;   // [B, k*C, H, W]
    Tensor actions;         // [B, act_dim]
    Tensor rewards, dones;  // [B]
  };
  /// Uniform sample with replacement. Throws when fewer than `batch`
  /// transitions are stored.
  Batch sample(int64_t batch, RngStream& rng) const;

 private:
  void write_frame(int64_t slot, const Tensor& frame);
  void read_stack(int64_t slot_newest, double* out) const;

  int64_t capacity_ = 0, size_ = 0, head_ = 0;
  int64_t stack_ = 1, frame_size_ = 0, act_dim_ = 0;
  Shape frame_shape_;
  std::vector<uint16_t> frames_;   // capacity * frame_size
  std::vector<uint16_t> pending_;  // newest obs frame awaiting its push
  bool pending_start_ = false;
  std::vector<double> actions_, rewards_;
  std::vector<uint8_t> dones_, ep_start_;
};

}  // namespace sar
