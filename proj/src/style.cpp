#include "sar/style.hpp"

#include <stdexcept>

#include "sar/common.hpp"

namespace sar {

namespace {

void check_map(const Tensor& z, const char* op) {
  if (z.ndim() != 4)
    throw std::invalid_argument(std::string(op) + " expects [B,C,H,W], got " +
                                shape_str(z.shape()));
}

void check_stats(const Tensor& z, const StyleStats& s, const char* op) {
  Shape want{z.dim(0), z.dim(1)};
  if (s.beta.shape() != want || s.gamma.shape() != want)
    throw std::invalid_argument(std::string(op) + " stats must be " + shape_str(want) +
                                ", got beta " + shape_str(s.beta.shape()) + ", gamma " +
                                shape_str(s.gamma.shape()));
}

// Shared arithmetic path: scale * (z - mu) / sigma + shift with [B,C] stats
// broadcast over H,W. adain and style_perturb both route through here so
// that identical inputs produce bitwise identical outputs.
Tensor apply_channel_affine(const Tensor& z, const Tensor& mu, const Tensor& sigma,
                            const Tensor& scale, const Tensor& shift) {
  int64_t b = z.dim(0), c = z.dim(1);
  auto r = [&](const Tensor& t) { return reshape(t, {b, c, 1, 1}); };
  return add(mul(r(scale), div(sub(z, r(mu)), r(sigma))), r(shift));
}

}  // namespace

Tensor instance_norm(const Tensor& z, const StyleStats& s) {
  check_map(z, "instance_norm");
  check_stats(z, s, "instance_norm");
  auto [mu, sigma] = channel_stats(z);
  return apply_channel_affine(z, mu, sigma, s.gamma, s.beta);
}

Tensor adain(const Tensor& z, const Tensor& z_src) {
  check_map(z, "adain");
  check_map(z_src, "adain");
  if (z.shape() != z_src.shape())
    throw std::invalid_argument("adain content/source shapes differ: " + shape_str(z.shape()) +
                                " vs " + shape_str(z_src.shape()));
  auto [mu, sigma] = channel_stats(z);
  auto [mu_src, sigma_src] = channel_stats(z_src);
  return apply_channel_affine(z, mu, sigma, sigma_src, mu_src);
}

Tensor style_perturb(const Tensor& z, const StyleStats& s) {
  check_map(z, "style_perturb");
  check_stats(z, s, "style_perturb");
  auto [mu, sigma] = channel_stats(z);
  return apply_channel_affine(z, mu, sigma, s.gamma, s.beta);
}

Tensor style_mix_batch(const Tensor& z, const std::vector<int64_t>& perm) {
  check_map(z, "style_mix_batch");
  int64_t b = z.dim(0);
  if (static_cast<int64_t>(perm.size()) != b)
    throw std::invalid_argument("style_mix_batch permutation size " +
                                std::to_string(perm.size()) + " != batch " + std::to_string(b));
  std::vector<bool> seen(b, false);
  for (int64_t p : perm) {
    if (p < 0 || p >= b || seen[p])
      throw std::invalid_argument("style_mix_batch: not a permutation of the batch");
    seen[p] = true;
  }
  return adain(z, index_select0(z, perm));
}

Tensor style_mix_batch(const Tensor& z, RngStream& rng) {
  check_map(z, "style_mix_batch");
  return style_mix_batch(z, rng.permutation(z.dim(0)));
}

PerturbGenerator::PerturbGenerator(int64_t channels, int64_t hidden, RngStream& rng)
    : fc1_(channels, hidden, rng, std::sqrt(2.0)),
      fc2_(hidden, hidden, rng, std::sqrt(2.0)),
      head_beta_(Dense::zeros(hidden, channels)),
      head_gamma_(Dense::zeros(hidden, channels)),
      channels_(channels) {}

StyleStats PerturbGenerator::generate(const Tensor& z) const {
  check_map(z, "PerturbGenerator::generate");
  if (z.dim(1) != channels_)
    throw std::invalid_argument("PerturbGenerator built for " + std::to_string(channels_) +
                                " channels, got map " + shape_str(z.shape()));
  for (double v : z.values())
    if (!std::isfinite(v)) throw NumericError("PerturbGenerator::generate: non-finite input");
  Tensor pooled = reduce_mean(z, {2, 3}, false);  // [B,C]
  Tensor h = tanh(fc1_.forward(pooled));
  h = tanh(fc2_.forward(h));
  StyleStats s;
  s.beta = head_beta_.forward(h);
  s.gamma = add_scalar(softplus(head_gamma_.forward(h)), kEpsGamma);
  return s;
}

std::vector<Tensor> PerturbGenerator::params() const {
  return {fc1_.w, fc1_.b, fc2_.w, fc2_.b, head_beta_.w, head_beta_.b, head_gamma_.w,
          head_gamma_.b};
}

}  // namespace sar
