#include "sar/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace sar {

namespace {
Tensor he_uniform(const Shape& shape, int64_t fan_in, double gain, RngStream& rng) {
  double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from_data(shape, std::move(v), true);
}
}  // namespace

Dense::Dense(int64_t in, int64_t out, RngStream& rng, double gain)
    : w(he_uniform({in, out}, in, gain, rng)), b(Tensor::zeros({out}, true)) {}

Dense Dense::zeros(int64_t in, int64_t out) {
  Dense d;
  d.w = Tensor::zeros({in, out}, true);
  d.b = Tensor::zeros({out}, true);
  return d;
}

Tensor Dense::forward(const Tensor& x) const { return add(matmul(x, w), b); }

Conv2dLayer::Conv2dLayer(int64_t cin, int64_t cout, int64_t k, int64_t stride, int64_t pad,
                         RngStream& rng, double gain)
    : w(he_uniform({cout, cin, k, k}, cin * k * k, gain, rng)),
      b(Tensor::zeros({cout}, true)),
      stride(stride),
      pad(pad) {}

Tensor Conv2dLayer::forward(const Tensor& x) const {
  Tensor y = conv2d(x, w, stride, pad);
  return add(y, reshape(b, {1, b.dim(0), 1, 1}));
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].raw_values();
    auto& g = params_[i].raw_grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      p[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

FreezeGuard::FreezeGuard(const std::vector<Tensor>& params) : params_(params) {
  prev_.reserve(params_.size());
  for (auto& p : params_) {
    prev_.push_back(p.requires_grad());
    p.set_requires_grad(false);
  }
}

FreezeGuard::~FreezeGuard() {
  for (size_t i = 0; i < params_.size(); ++i) params_[i].set_requires_grad(prev_[i]);
}

void polyak_update(std::vector<Tensor> target, const std::vector<Tensor>& online, double tau) {
  if (target.size() != online.size())
    throw std::invalid_argument("polyak_update: param list size mismatch");
  for (size_t i = 0; i < target.size(); ++i) {
    auto& t = target[i].raw_values();
    const auto& o = online[i].values();
    if (t.size() != o.size()) throw std::invalid_argument("polyak_update: param shape mismatch");
    for (size_t j = 0; j < t.size(); ++j) t[j] = (1.0 - tau) * t[j] + tau * o[j];
  }
}

void hard_copy(std::vector<Tensor> target, const std::vector<Tensor>& online) {
  if (target.size() != online.size())
    throw std::invalid_argument("hard_copy: param list size mismatch");
  for (size_t i = 0; i < target.size(); ++i) target[i].raw_values() = online[i].values();
}

int64_t param_count(const std::vector<Tensor>& params) {
  int64_t n = 0;
  for (auto& p : params) n += p.size();
  return n;
}

}  // namespace sar
