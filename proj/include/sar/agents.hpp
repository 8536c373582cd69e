#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sar/nets.hpp"
#include "sar/style.hpp"
#include "sar/tensor.hpp"

namespace sar {

// ---------------------------------------------------------------------------
// Encoder

struct EncoderConfig {
  int64_t in_channels = 3;
  int64_t height = 32, width = 32;
  int64_t c1 = 8, c2 = 8, c3 = 16;
  int64_t embed_dim = 64;
};

/// Three conv blocks (conv 3x3 -> relu -> 2x2 avg downsample) with the
/// branch point after block 2, then flatten + affine + relu to the
/// embedding. Style ops act on the branch-point map.
struct Encoder {
  Conv2dLayer b1, b2, b3;
  Dense fc;
  EncoderConfig cfg;

  Encoder() = default;
  Encoder(const EncoderConfig& cfg, RngStream& rng);

  /// obs [B,C,H,W] in [0,1] -> branch features [B,c2,H/4,W/4].
  Tensor to_branch(const Tensor& obs) const;
  /// branch features -> embedding [B,embed_dim].
  Tensor from_branch(const Tensor& z) const;
  Tensor encode(const Tensor& obs) const { return from_branch(to_branch(obs)); }

  Shape branch_shape(int64_t batch) const;
  std::vector<Tensor> params() const;
};

// ---------------------------------------------------------------------------
// Policy distributions

inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 2.0;

/// Categorical (probs from logits) or diagonal Gaussian (mean, clamped
/// log-std) action distribution. Tensors stay attached to the graph they
/// were built from.
struct PolicyDist {
  enum class Kind { Categorical, Gaussian };
  Kind kind = Kind::Categorical;

  Tensor logits, log_probs, probs;  // categorical, all [B,A]
  Tensor mean, log_std;             // gaussian, [B,D]

  static PolicyDist categorical(const Tensor& logits);
  static PolicyDist gaussian(const Tensor& mean, const Tensor& log_std_raw);

  int64_t batch() const;
  int64_t arity() const;  // |A| or action dim

  Tensor log_prob(const std::vector<int64_t>& actions) const;  // categorical, [B]
  Tensor log_prob(const Tensor& actions) const;                // gaussian, [B]
  Tensor entropy() const;                                      // [B]

  int64_t sample(int64_t row, RngStream& rng) const;  // categorical, inverse CDF
  /// Reparameterized gaussian sample mean + exp(log_std) * eps.
  Tensor rsample(const Tensor& eps) const;

  /// Deterministic action for evaluation: argmax prob (ties -> lowest
  /// index) or the gaussian mean.
  int64_t mode(int64_t row) const;
  std::vector<double> mean_action(int64_t row) const;
};

/// Row-wise KL[p ‖ q], shape [B]. Throws on family/arity mismatch.
Tensor kl_rows(const PolicyDist& p, const PolicyDist& q);

/// mean over the batch of KL[dist_clean ‖ dist_adv], floored at 0 per row.
/// Bitwise-identical inputs give exactly 0.
Tensor l_div(const PolicyDist& dist_clean, const PolicyDist& dist_adv);

// ---------------------------------------------------------------------------
// Actor-critic bundles

/// PPO: shared encoder, categorical-or-gaussian policy head, scalar V head.
struct PpoNet {
  Encoder enc;
  Dense pi_head;     // embedding -> logits (discrete) or mean (continuous)
  Dense pi_log_std;  // embedding -> log std, continuous only
  Dense v_head;      // embedding -> 1
  bool continuous = false;
  int64_t act_dim = 0;

  PpoNet() = default;
  PpoNet(const EncoderConfig& cfg, int64_t act_dim, bool continuous, RngStream& rng);

  PolicyDist dist_from_embed(const Tensor& embed) const;
  Tensor value_from_embed(const Tensor& embed) const;  // [B]

  std::vector<Tensor> actor_params() const;   // encoder + policy head
  std::vector<Tensor> critic_params() const;  // value head
  std::vector<Tensor> all_params() const;
};

/// Convenience pair matching the branch-point contract: B3 + flatten +
/// heads applied to a (possibly mixed or perturbed) branch map.
std::pair<PolicyDist, Tensor> heads_from_branch(const PpoNet& net, const Tensor& z);

/// SAC: shared encoder, gaussian policy, twin Q heads plus target copies,
/// learnable log temperature.
struct SacNet {
  struct QHead {
    Dense h, out;
    QHead() = default;
    QHead(int64_t embed_dim, int64_t act_dim, int64_t hidden, RngStream& rng);
    Tensor forward(const Tensor& embed, const Tensor& act) const;  // [B]
    std::vector<Tensor> params() const;
  };

  Encoder enc;
  Dense pi_trunk, pi_mean, pi_log_std;
  QHead q1, q2, q1_target, q2_target;
  Tensor log_alpha;
  int64_t act_dim = 0;

  SacNet() = default;
  SacNet(const EncoderConfig& cfg, int64_t act_dim, int64_t hidden, double init_alpha,
         RngStream& rng);

  PolicyDist dist_from_embed(const Tensor& embed) const;
  double alpha() const;

  std::vector<Tensor> actor_params() const;   // encoder + policy trunk/heads
  std::vector<Tensor> critic_params() const;  // twin online Q heads
  std::vector<Tensor> target_params() const;
};

// ---------------------------------------------------------------------------
// Objectives

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> value_targets;
};

/// GAE(gamma, lam) over one env's trajectory. `values` carries T+1 entries
/// (bootstrap last); dones[t] marks a terminal transition at step t.
GaeResult gae_advantages(const std::vector<double>& rewards, const std::vector<double>& values,
                         const std::vector<uint8_t>& dones, double gamma, double lam);

/// Clipped-ratio policy loss with entropy bonus:
/// -E[min(r A, clip(r, 1-eps, 1+eps) A)] - entropy_coef * mean(entropy).
Tensor ppo_actor_loss(const Tensor& logp_new, const Tensor& logp_old, const Tensor& advantages,
                      double clip_eps, const Tensor& entropy_rows, double entropy_coef);

Tensor ppo_critic_loss(const Tensor& values, const Tensor& targets);

/// y = r + gamma * (1 - done) * (min_q_next - alpha * logp_next).
Tensor sac_value_target(const Tensor& reward, const Tensor& done, double gamma,
                        const Tensor& min_q_next, const Tensor& logp_next, double alpha);

// ---------------------------------------------------------------------------
// SAR loss assembly (PPO form; the SAC trainer composes the same pieces)

struct SarLossBundle {
  Tensor actor_loss, critic_loss, gen_loss, l_div, g_critic, entropy_bonus;
};

/// Which parameter group the forward pass is being built for. Exactly one
/// group keeps requires_grad; everything else is computed as constants so
/// the tape stays small and per-group updates see a fresh graph.
enum class GradSide { Actor, Generator, Critic, None };

/// Override for the adversarial stats source (tests inject identity stats
/// built from channel_stats; production uses the generator).
using StatsFn = std::function<StyleStats(const Tensor& z)>;

struct SarPpoInputs {
  Tensor obs;                                // [B,C,H,W]
  std::vector<int64_t> actions_discrete;     // one of the two action forms
  Tensor actions_continuous;
  Tensor logp_old;       // [B], constants
  Tensor advantages;     // [B], constants, normalized upstream
  Tensor value_targets;  // [B], constants
  const std::vector<int64_t>* perm = nullptr;  // mixing permutation, or none
  double clip_eps = 0.2;
  double entropy_coef = 0.01;
  double lambda_eff = 0.0;        // lambda * warm-up indicator
  double lambda_prime_eff = 0.0;  // lambda' * warm-up indicator
  double kappa_eff = 0.0;         // kappa * warm-up indicator
};

/// Builds the full loss bundle with the clean branch mixed (when a
/// permutation is given) and the adversarial branch perturbed by the
/// generator's stats. Requires gen when any adversarial coefficient is
/// active. All returned tensors are scalars.
SarLossBundle sar_losses_ppo(const PpoNet& net, const PerturbGenerator* gen,
                             const SarPpoInputs& in, GradSide side,
                             const StatsFn* stats_override = nullptr);

struct SarOptimizers {
  Adam actor, generator, critic;
};

struct UpdateStats {
  double actor_loss = 0, critic_loss = 0, gen_loss = 0;
  double l_div = 0, g_critic = 0, entropy = 0;
};

/// One minibatch update: critic -> generator -> actor, each on a fresh
/// forward pass, with the other groups' parameters held fixed. Generator
/// update is skipped entirely while lambda'_eff == 0, so its parameters
/// stay bit-identical through warm-up.
UpdateStats update_step_ppo(const PpoNet& net, const PerturbGenerator* gen,
                            const SarPpoInputs& in, SarOptimizers& opt);

// ---------------------------------------------------------------------------
// SAC update

struct SacBatch {
  Tensor obs, next_obs;   // [B, stack*C, H, W]
  Tensor actions;         // [B, D]
  Tensor rewards, dones;  // [B]
};

struct SarSacInputs {
  SacBatch batch;
  const std::vector<int64_t>* perm = nullptr;  // mixing permutation, or none
  Tensor eps_target;  // [B,D] standard normals for the Bellman target action
  Tensor eps_actor;   // [B,D] for the actor's reparameterized action
  Tensor eps_proxy;   // [B,D] shared across clean/perturbed value proxies
  double gamma = 0.99;
  double target_entropy = -2.0;
  double lambda_eff = 0.0;
  double lambda_prime_eff = 0.0;
  double kappa_eff = 0.0;
};

struct SacOptimizers {
  Adam actor, generator, critic, alpha;
};

struct SacUpdateStats {
  double actor_loss = 0, critic_loss = 0, gen_loss = 0, alpha_loss = 0;
  double l_div = 0, g_critic = 0, alpha = 0, entropy = 0;
  bool actor_updated = false;
};

/// One gradient step on a replay batch: critic -> generator -> actor and
/// temperature, the last two only when update_actor is set. The critic
/// trains the twin Q heads alone (encoder features are constants); the
/// actor trains encoder + policy with Q heads and generator frozen. The
/// Bellman target uses the target Q heads and never trains anything.
/// Target-network Polyak averaging is the caller's job.
SacUpdateStats update_step_sac(const SacNet& net, const PerturbGenerator* gen,
                               const SarSacInputs& in, SacOptimizers& opt, bool update_actor);

}  // namespace sar
