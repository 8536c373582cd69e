#pragma once

#include <cstdint>
#include <string>

namespace sar {

/// Everything a training run needs, serialized verbatim into the run
/// directory. Fields set to their "auto" sentinel are filled by resolve():
/// embed_dim 0 -> 64 (ppo) / 50 (sac), lambda_prime < 0 -> lambda.
struct RunConfig {
  std::string algorithm = "ppo";  // ppo | sac
  std::string env = "gridworld-v0";
  uint64_t seed = 1;
  int64_t total_timesteps = 300000;

  // adversarial game
  double lambda = 0.1;
  double lambda_prime = -1.0;  // auto: equal to lambda
  double kappa = 1.0;
  bool mixing = true;
  int64_t warmup_timesteps = 0;

  // styles
  std::string style_mode = "pool";  // pool | single
  int64_t style_id = 0;             // used when style_mode == single

  // evaluation and persistence
  int64_t eval_every = 0;  // 0 -> final evaluation only
  int64_t eval_episodes = 10;
  int64_t checkpoint_every = 0;  // 0 -> final checkpoint only
  int64_t log_every = 256;       // sac metrics cadence; ppo logs per rollout
  std::string augmentation = "none";  // none | trans | color

  // encoder
  int64_t embed_dim = 0;  // auto
  int64_t c1 = 8, c2 = 8, c3 = 16;
  int64_t gen_hidden = 64;

  // ppo
  double ppo_gamma = 0.999;
  double gae_lambda = 0.95;
  int64_t rollout_steps = 256;
  int64_t ppo_epochs = 3;
  int64_t minibatches = 8;
  double clip_eps = 0.2;
  double entropy_coef = 0.01;
  double ppo_lr = 5e-4;
  bool reward_norm = true;

  // sac
  double sac_gamma = 0.99;
  double tau = 0.01;
  double alpha_init = 0.1;
  double alpha_lr = 1e-4;
  double sac_lr = 1e-3;
  int64_t batch_size = 128;
  int64_t replay_capacity = 100000;
  int64_t init_steps = 1000;
  int64_t target_interval = 2;
  int64_t actor_interval = 2;
  int64_t q_hidden = 128;
};

/// Fills auto fields. Idempotent.
RunConfig resolve(RunConfig cfg);

/// Field-level validation; throws ConfigError naming the offending field.
/// Expects a resolved config.
void validate(const RunConfig& cfg);

/// Canonical JSON (sorted keys) of a resolved config.
std::string config_to_json(const RunConfig& cfg);
/// Strict parse: unknown fields are a ConfigError. Missing fields keep
/// their defaults.
RunConfig config_from_json(const std::string& text);

/// FNV-1a over the canonical JSON of the resolved config.
uint64_t config_hash(const RunConfig& cfg);
std::string config_hash_hex(const RunConfig& cfg);

/// <algo>-<env>-s<seed>-<hash8>
std::string run_dir_name(const RunConfig& cfg);

}  // namespace sar
