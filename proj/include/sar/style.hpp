#pragma once

#include <vector>

#include "sar/nets.hpp"
#include "sar/tensor.hpp"

namespace sar {

/// Per-channel affine style parameters for a batch: shift beta and scale
/// gamma, both [B,C]. Gammas produced by the generator are strictly
/// positive by construction (softplus + kEpsGamma).
struct StyleStats {
  Tensor beta;
  Tensor gamma;
};

/// gamma * (z - mu(z)) / sigma(z) + beta, stats per channel over H,W.
Tensor instance_norm(const Tensor& z, const StyleStats& s);

/// Re-styles content z with the channel statistics of z_src:
/// sigma(z_src) * (z - mu(z)) / sigma(z) + mu(z_src).
Tensor adain(const Tensor& z, const Tensor& z_src);

/// Applies externally supplied stats in place of the map's own:
/// gamma * (z - mu(z)) / sigma(z) + beta. Gradients flow through mu(z)
/// and sigma(z) as well as the stats.
Tensor style_perturb(const Tensor& z, const StyleStats& s);

/// adain(z, z[perm]); `perm` must be a permutation of the batch. The
/// identity permutation is a valid draw and then reproduces adain(z, z).
Tensor style_mix_batch(const Tensor& z, const std::vector<int64_t>& perm);
/// Convenience overload drawing the permutation from `rng`.
Tensor style_mix_batch(const Tensor& z, RngStream& rng);

/// Adversarial stats generator: global average pool over H,W, a two-layer
/// tanh MLP, then separate beta / gamma heads. Heads start at zero so the
/// initial perturbation is the constant (softplus(0)+kEpsGamma, 0) style.
class PerturbGenerator {
 public:
  PerturbGenerator() = default;
  PerturbGenerator(int64_t channels, int64_t hidden, RngStream& rng);

  /// z[B,C,H,W] -> stats ([B,C] beta, [B,C] gamma > 0).
  StyleStats generate(const Tensor& z) const;

  std::vector<Tensor> params() const;
  int64_t channels() const { return channels_; }

 private:
  Dense fc1_, fc2_, head_beta_, head_gamma_;
  int64_t channels_ = 0;
};

}  // namespace sar
