#pragma once

#include <vector>

#include "sar/rng.hpp"
#include "sar/tensor.hpp"

namespace sar {

/// Fully connected layer, x[B,in] -> x*W + b.
struct Dense {
  Tensor w, b;

  Dense() = default;
  /// He-uniform init scaled by `gain` (sqrt(2) for relu trunks, small for
  /// output heads). Bias starts at zero.
  Dense(int64_t in, int64_t out, RngStream& rng, double gain);
  static Dense zeros(int64_t in, int64_t out);

  Tensor forward(const Tensor& x) const;
  std::vector<Tensor> params() const { return {w, b}; }
  int64_t in_dim() const { return w.dim(0); }
  int64_t out_dim() const { return w.dim(1); }
};

/// 3x3-style conv layer with bias, NCHW.
struct Conv2dLayer {
  Tensor w, b;
  int64_t stride = 1, pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(int64_t cin, int64_t cout, int64_t k, int64_t stride, int64_t pad,
              RngStream& rng, double gain);

  Tensor forward(const Tensor& x) const;
  std::vector<Tensor> params() const { return {w, b}; }
};

/// Adam with bias correction. Params keep their gradients until the owner
/// zeroes them; step() consumes whatever is in .grad at call time.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step();
  void zero_grad();
  const std::vector<Tensor>& params() const { return params_; }
  double lr() const { return lr_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_ = 0, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int64_t t_ = 0;
};

/// Scoped requires_grad toggle: freezes the given params on construction and
/// restores their previous flags on destruction. Frozen params skip gradient
/// accumulation entirely, so off-group backward work is avoided.
class FreezeGuard {
 public:
  explicit FreezeGuard(const std::vector<Tensor>& params);
  ~FreezeGuard();
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<Tensor> params_;
  std::vector<bool> prev_;
};

/// target <- (1 - tau) * target + tau * online, elementwise, no tape.
void polyak_update(std::vector<Tensor> target, const std::vector<Tensor>& online, double tau);

/// Hard copy online -> target, no tape.
void hard_copy(std::vector<Tensor> target, const std::vector<Tensor>& online);

int64_t param_count(const std::vector<Tensor>& params);

}  // namespace sar
