#pragma once

#include <initializer_list>
#include <memory>
#include <utility>
#include <vector>

#include "sar/common.hpp"

namespace sar {

namespace detail {
struct Node;
}

/// Dense 64-bit float tensor with reverse-mode autodiff.
///
/// Copying a Tensor copies a handle, not the buffer. Every differentiable
/// op appends an entry to a thread-local tape; backward() replays the tape
/// in reverse (execution order is a valid topological order) and then
/// clears it, so one forward pass supports exactly one backward pass.
/// All reductions run in a fixed element order: same inputs, same bits.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from_data(const Shape& shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const;
  int64_t size() const;
  int64_t ndim() const;
  int64_t dim(int64_t i) const;

  bool requires_grad() const;
  void set_requires_grad(bool rg);

  const std::vector<double>& values() const;
  /// Mutable access to the raw buffer. Meant for initialization and
  /// optimizer steps on leaves; mutating a node that is already part of a
  /// recorded graph invalidates that tape.
  std::vector<double>& raw_values();

  double item() const;  // scalar tensors only
  double at(std::initializer_list<int64_t> idx) const;

  bool has_grad() const;
  const std::vector<double>& grad() const;
  std::vector<double>& raw_grad();
  void zero_grad();

  /// Same buffer, detached from the graph (no grad, nothing recorded).
  Tensor detach() const;
  /// Deep copy of the buffer (leaf, keeps requires_grad).
  Tensor clone() const;

  std::shared_ptr<detail::Node> node() const { return n_; }
  static Tensor wrap(std::shared_ptr<detail::Node> n);

 private:
  std::shared_ptr<detail::Node> n_;
};

/// Scoped guard that disables tape recording (rollouts, eval, targets).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

/// Accumulates d(loss)/d(leaf) into .grad for every requires_grad tensor
/// reachable from `loss`, then clears the tape. `loss` must be scalar and
/// the tape non-empty (a second backward without a fresh forward throws).
void backward(const Tensor& loss);

size_t tape_size();
void clear_tape();

// ---- elementwise (broadcasting: trailing-aligned, dims equal or 1) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);  // throws std::domain_error on x <= 0
Tensor softplus(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);

Tensor min_elementwise(const Tensor& a, const Tensor& b);
/// Hard clip; gradient passes where lo <= x <= hi and is zero outside.
Tensor clip(const Tensor& x, double lo, double hi);

// ---- shape ----
Tensor reshape(const Tensor& x, const Shape& shape);
Tensor broadcast_to(const Tensor& x, const Shape& shape);
Tensor concat_lastdim(const Tensor& a, const Tensor& b);

// ---- reductions (fixed iteration order) ----
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor reduce_sum(const Tensor& x, const std::vector<int64_t>& axes, bool keepdims);
Tensor reduce_mean(const Tensor& x, const std::vector<int64_t>& axes, bool keepdims);
/// Row max over the last dim, detached from the graph (used for the
/// numerically stable softmax shift).
Tensor max_lastdim_detached(const Tensor& x);

// ---- linear algebra / conv ----
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
/// Cross-correlation, NCHW, symmetric zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, int64_t stride, int64_t padding);
Tensor avg_pool2x2(const Tensor& x);

// ---- rows / distributions ----
/// Stable softmax over the last dim of [B, A]; rows sum to 1 within 1e-9.
/// Throws NumericError on non-finite logits.
Tensor softmax_logits_to_probs(const Tensor& logits);
Tensor log_softmax_lastdim(const Tensor& logits);
/// out[i] = x[i, idx[i]] for x of shape [B, A].
Tensor take_per_row(const Tensor& x, const std::vector<int64_t>& idx);
/// Gathers rows along dim 0: out[i] = x[idx[i]]. Gradient scatter-adds.
Tensor index_select0(const Tensor& x, const std::vector<int64_t>& idx);

/// Per-channel spatial mean and sigma = sqrt(var + kEpsStat) of a
/// [B,C,H,W] map, both shaped [B,C]. Population variance (divisor H*W).
std::pair<Tensor, Tensor> channel_stats(const Tensor& z);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace sar
