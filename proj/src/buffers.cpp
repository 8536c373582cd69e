#include "sar/buffers.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "sar/common.hpp"

namespace sar {

namespace {

uint16_t quantize_u16(double v) {
  v = std::min(1.0, std::max(0.0, v));
  return static_cast<uint16_t>(std::lround(v * 1024.0));
}

}  // namespace

// ---------------------------------------------------------------------------
// RolloutBuffer

RolloutBuffer::RolloutBuffer(int64_t capacity, const Shape& obs_shape, int64_t act_dim)
    : capacity_(capacity),
      obs_size_(shape_numel(obs_shape)),
      act_dim_(act_dim),
      obs_shape_(obs_shape) {
  if (capacity <= 0) throw std::invalid_argument("rollout capacity must be positive");
  obs_.resize(capacity_ * obs_size_);
  actions_d_.resize(capacity_);
  actions_c_.resize(capacity_ * std::max<int64_t>(1, act_dim_));
  rewards_.resize(capacity_);
  values_.resize(capacity_);
  logps_.resize(capacity_);
  dones_.resize(capacity_);
}

void RolloutBuffer::push(const Tensor& obs, int64_t action_d,
                         const std::vector<double>& action_c, double reward, bool done,
                         double value, double logp) {
  if (full()) throw std::logic_error("rollout buffer already full");
  if (obs.size() != obs_size_) {
    throw std::invalid_argument("rollout observation size mismatch: got " +
                                std::to_string(obs.size()) + ", expected " +
                                std::to_string(obs_size_));
  }
  const auto& v = obs.values();
  std::copy(v.begin(), v.end(), obs_.begin() + size_ * obs_size_);
  actions_d_[size_] = action_d;
  if (act_dim_ > 0) {
    if (static_cast<int64_t>(action_c.size()) != act_dim_) {
      throw std::invalid_argument("rollout action size mismatch");
    }
    std::copy(action_c.begin(), action_c.end(), actions_c_.begin() + size_ * act_dim_);
  }
  rewards_[size_] = reward;
  dones_[size_] = done ? 1 : 0;
  values_[size_] = value;
  logps_[size_] = logp;
  ++size_;
}

void RolloutBuffer::clear() { size_ = 0; }

Tensor RolloutBuffer::gather_obs(const std::vector<int64_t>& idx) const {
  Shape out_shape{static_cast<int64_t>(idx.size())};
  out_shape.insert(out_shape.end(), obs_shape_.begin(), obs_shape_.end());
  std::vector<double> out(idx.size() * obs_size_);
  for (size_t i = 0; i < idx.size(); ++i) {
    std::copy(obs_.begin() + idx[i] * obs_size_, obs_.begin() + (idx[i] + 1) * obs_size_,
              out.begin() + i * obs_size_);
  }
  return Tensor::from_data(out_shape, std::move(out));
}

std::vector<int64_t> RolloutBuffer::gather_actions_discrete(
    const std::vector<int64_t>& idx) const {
  std::vector<int64_t> out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[i] = actions_d_[idx[i]];
  return out;
}

Tensor RolloutBuffer::gather_actions_continuous(const std::vector<int64_t>& idx) const {
  std::vector<double> out(idx.size() * act_dim_);
  for (size_t i = 0; i < idx.size(); ++i) {
    std::copy(actions_c_.begin() + idx[i] * act_dim_,
              actions_c_.begin() + (idx[i] + 1) * act_dim_, out.begin() + i * act_dim_);
  }
  return Tensor::from_data({static_cast<int64_t>(idx.size()), act_dim_}, std::move(out));
}

Tensor RolloutBuffer::gather(const std::vector<double>& field,
                             const std::vector<int64_t>& idx) const {
  std::vector<double> out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[i] = field[idx[i]];
  return Tensor::from_data({static_cast<int64_t>(idx.size())}, std::move(out));
}

// ---------------------------------------------------------------------------
// ReplayBuffer

ReplayBuffer::ReplayBuffer(int64_t capacity, int64_t frame_stack, const Shape& frame_shape,
                           int64_t act_dim)
    : capacity_(capacity),
      stack_(frame_stack),
      frame_size_(shape_numel(frame_shape)),
      act_dim_(act_dim),
      frame_shape_(frame_shape) {
  if (capacity <= 0) throw std::invalid_argument("replay capacity must be positive");
  if (frame_stack <= 0) throw std::invalid_argument("frame stack must be positive");
  frames_.resize(capacity_ * frame_size_);
  pending_.resize(frame_size_);
  actions_.resize(capacity_ * act_dim_);
  rewards_.resize(capacity_);
  dones_.resize(capacity_);
  ep_start_.resize(capacity_);
}

void ReplayBuffer::begin_episode(const Tensor& first_frame) {
  if (first_frame.size() != frame_size_) {
    throw std::invalid_argument("replay frame size mismatch");
  }
  const auto& v = first_frame.values();
  for (int64_t i = 0; i < frame_size_; ++i) pending_[i] = quantize_u16(v[i]);
  pending_start_ = true;
}

void ReplayBuffer::push(const std::vector<double>& action, double reward, bool done,
                        const Tensor& next_frame) {
  if (static_cast<int64_t>(action.size()) != act_dim_) {
    throw std::invalid_argument("replay action size mismatch");
  }
  if (next_frame.size() != frame_size_) {
    throw std::invalid_argument("replay frame size mismatch");
  }
  const int64_t slot = head_;
  std::memcpy(frames_.data() + slot * frame_size_, pending_.data(),
              frame_size_ * sizeof(uint16_t));
  ep_start_[slot] = pending_start_ ? 1 : 0;
  std::copy(action.begin(), action.end(), actions_.begin() + slot * act_dim_);
  rewards_[slot] = reward;
  dones_[slot] = done ? 1 : 0;

  const auto& v = next_frame.values();
  for (int64_t i = 0; i < frame_size_; ++i) pending_[i] = quantize_u16(v[i]);
  pending_start_ = false;

  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

// Fills out[stack * frame_size] with the frames ending at `slot_newest`,
// walking backwards within the episode and padding with its first frame.
void ReplayBuffer::read_stack(int64_t slot_newest, double* out) const {
  const int64_t oldest = size_ == capacity_ ? head_ : 0;
  int64_t slot = slot_newest;
  for (int64_t s = stack_ - 1; s >= 0; --s) {
    const uint16_t* src = frames_.data() + slot * frame_size_;
    double* dst = out + s * frame_size_;
    for (int64_t i = 0; i < frame_size_; ++i) dst[i] = src[i] / 1024.0;
    // stop walking at the episode start or the eviction edge
    if (!ep_start_[slot] && slot != oldest) {
      slot = (slot - 1 + capacity_) % capacity_;
    }
  }
}

ReplayBuffer::Batch ReplayBuffer::sample(int64_t batch, RngStream& rng) const {
  if (size_ < batch) throw std::logic_error("replay buffer smaller than batch");
  const int64_t stacked = stack_ * frame_size_;
  std::vector<double> obs(batch * stacked), next_obs(batch * stacked);
  std::vector<double> actions(batch * act_dim_), rewards(batch), dones(batch);
  std::vector<double> tmp(stacked);

  for (int64_t b = 0; b < batch; ++b) {
    const int64_t logical = rng.uniform_int(size_);
    const int64_t slot = size_ == capacity_ ? (head_ + logical) % capacity_ : logical;
    read_stack(slot, obs.data() + b * stacked);
    // next stack = this stack shifted by one plus the frame that followed;
    // for the newest transition that frame is still pending
    const bool newest = logical == size_ - 1;
    if (newest) {
      std::copy(obs.begin() + b * stacked + frame_size_, obs.begin() + (b + 1) * stacked,
                next_obs.begin() + b * stacked);
      double* last = next_obs.data() + b * stacked + (stack_ - 1) * frame_size_;
      for (int64_t i = 0; i < frame_size_; ++i) last[i] = pending_[i] / 1024.0;
    } else {
      read_stack((slot + 1) % capacity_, next_obs.data() + b * stacked);
    }
    std::copy(actions_.begin() + slot * act_dim_, actions_.begin() + (slot + 1) * act_dim_,
              actions.begin() + b * act_dim_);
    rewards[b] = rewards_[slot];
    dones[b] = dones_[slot];
  }

  Shape obs_shape{batch, stack_ * frame_shape_[0]};
  obs_shape.insert(obs_shape.end(), frame_shape_.begin() + 1, frame_shape_.end());
  Batch out;
  out.obs = Tensor::from_data(obs_shape, std::move(obs));
  out.next_obs = Tensor::from_data(obs_shape, std::move(next_obs));
  out.actions = Tensor::from_data({batch, act_dim_}, std::move(actions));
  out.rewards = Tensor::from_data({batch}, std::move(rewards));
  out.dones = Tensor::from_data({batch}, std::move(dones));
  return out;
}

}  // namespace sar
