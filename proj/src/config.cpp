#include "sar/config.hpp"

#include <cmath>
#include <set>

#include "json.hpp"
#include "sar/common.hpp"
#include "sar/envs.hpp"
#include "sar/rng.hpp"

namespace sar {

using nlohmann::json;

RunConfig resolve(RunConfig cfg) {
  if (cfg.embed_dim == 0) cfg.embed_dim = cfg.algorithm == "sac" ? 50 : 64;
  if (cfg.lambda_prime < 0) cfg.lambda_prime = cfg.lambda;
  return cfg;
}

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("config field '" + field + "': " + what);
}

}  // namespace

void validate(const RunConfig& cfg) {
  require(cfg.algorithm == "ppo" || cfg.algorithm == "sac", "algorithm",
          "must be 'ppo' or 'sac', got '" + cfg.algorithm + "'");
  require(cfg.env == "gridworld-v0" || cfg.env == "pointmass-v0", "env",
          "unknown environment id '" + cfg.env + "'");
  if (cfg.algorithm == "sac") {
    require(cfg.env == "pointmass-v0", "env", "sac needs a continuous-action environment");
  }
  require(cfg.total_timesteps > 0, "total_timesteps", "must be positive");
  require(cfg.lambda >= 0, "lambda", "must be >= 0");
  require(cfg.lambda_prime >= 0, "lambda_prime", "must be >= 0");
  require(cfg.kappa >= 0, "kappa", "must be >= 0");
  require(cfg.warmup_timesteps >= 0, "warmup_timesteps", "must be >= 0");
  require(cfg.style_mode == "pool" || cfg.style_mode == "single", "style_mode",
          "must be 'pool' or 'single', got '" + cfg.style_mode + "'");
  require(cfg.style_id >= 0, "style_id", "must be >= 0");
  require(cfg.eval_every >= 0, "eval_every", "must be >= 0");
  require(cfg.eval_episodes > 0, "eval_episodes", "must be positive");
  require(cfg.checkpoint_every >= 0, "checkpoint_every", "must be >= 0");
  require(cfg.log_every > 0, "log_every", "must be positive");
  require(cfg.augmentation == "none" || cfg.augmentation == "trans" ||
              cfg.augmentation == "color",
          "augmentation", "must be one of none, trans, color; got '" + cfg.augmentation + "'");
  require(cfg.embed_dim > 0, "embed_dim", "must be positive");
  require(cfg.c1 > 0 && cfg.c2 > 0 && cfg.c3 > 0, "c1/c2/c3",
          "channel counts must be positive");
  require(cfg.gen_hidden > 0, "gen_hidden", "must be positive");

  require(cfg.ppo_gamma > 0 && cfg.ppo_gamma <= 1, "ppo_gamma", "must be in (0, 1]");
  require(cfg.gae_lambda >= 0 && cfg.gae_lambda <= 1, "gae_lambda", "must be in [0, 1]");
  require(cfg.rollout_steps > 0, "rollout_steps", "must be positive");
  require(cfg.ppo_epochs > 0, "ppo_epochs", "must be positive");
  require(cfg.minibatches > 0, "minibatches", "must be positive");
  require(cfg.rollout_steps % cfg.minibatches == 0, "minibatches",
          "must divide rollout_steps");
  require(cfg.clip_eps > 0, "clip_eps", "must be positive");
  require(cfg.entropy_coef >= 0, "entropy_coef", "must be >= 0");
  require(cfg.ppo_lr > 0, "ppo_lr", "must be positive");

  require(cfg.sac_gamma > 0 && cfg.sac_gamma <= 1, "sac_gamma", "must be in (0, 1]");
  require(cfg.tau > 0 && cfg.tau <= 1, "tau", "must be in (0, 1]");
  require(cfg.alpha_init > 0, "alpha_init", "must be positive");
  require(cfg.alpha_lr > 0, "alpha_lr", "must be positive");
  require(cfg.sac_lr > 0, "sac_lr", "must be positive");
  require(cfg.batch_size > 0, "batch_size", "must be positive");
  require(cfg.replay_capacity >= cfg.batch_size, "replay_capacity",
          "must be >= batch_size");
  require(cfg.init_steps >= 0, "init_steps", "must be >= 0");
  require(cfg.target_interval > 0, "target_interval", "must be positive");
  require(cfg.actor_interval > 0, "actor_interval", "must be positive");
  require(cfg.q_hidden > 0, "q_hidden", "must be positive");
}

namespace {

json config_to_json_obj(const RunConfig& c) {
  json j;
  j["algorithm"] = c.algorithm;
  j["env"] = c.env;
  j["seed"] = c.seed;
  j["total_timesteps"] = c.total_timesteps;
  j["lambda"] = c.lambda;
  j["lambda_prime"] = c.lambda_prime;
  j["kappa"] = c.kappa;
  j["mixing"] = c.mixing;
  j["warmup_timesteps"] = c.warmup_timesteps;
  j["style_mode"] = c.style_mode;
  j["style_id"] = c.style_id;
  j["eval_every"] = c.eval_every;
  j["eval_episodes"] = c.eval_episodes;
  j["checkpoint_every"] = c.checkpoint_every;
  j["log_every"] = c.log_every;
  j["augmentation"] = c.augmentation;
  j["embed_dim"] = c.embed_dim;
  j["c1"] = c.c1;
  j["c2"] = c.c2;
  j["c3"] = c.c3;
  j["gen_hidden"] = c.gen_hidden;
  j["ppo_gamma"] = c.ppo_gamma;
  j["gae_lambda"] = c.gae_lambda;
  j["rollout_steps"] = c.rollout_steps;
  j["ppo_epochs"] = c.ppo_epochs;
  j["minibatches"] = c.minibatches;
  j["clip_eps"] = c.clip_eps;
  j["entropy_coef"] = c.entropy_coef;
  j["ppo_lr"] = c.ppo_lr;
  j["reward_norm"] = c.reward_norm;
  j["sac_gamma"] = c.sac_gamma;
  j["tau"] = c.tau;
  j["alpha_init"] = c.alpha_init;
  j["alpha_lr"] = c.alpha_lr;
  j["sac_lr"] = c.sac_lr;
  j["batch_size"] = c.batch_size;
  j["replay_capacity"] = c.replay_capacity;
  j["init_steps"] = c.init_steps;
  j["target_interval"] = c.target_interval;
  j["actor_interval"] = c.actor_interval;
  j["q_hidden"] = c.q_hidden;
  return j;
}

template <typename T>
void pull(const json& j, const char* key, T& out, std::set<std::string>& seen) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
    seen.insert(key);
  }
}

}  // namespace

std::string config_to_json(const RunConfig& cfg) { return config_to_json_obj(cfg).dump(2); }

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  RunConfig c;
  std::set<std::string> seen;
  pull(j, "algorithm", c.algorithm, seen);
  pull(j, "env", c.env, seen);
  pull(j, "seed", c.seed, seen);
  pull(j, "total_timesteps", c.total_timesteps, seen);
  pull(j, "lambda", c.lambda, seen);
  pull(j, "lambda_prime", c.lambda_prime, seen);
  pull(j, "kappa", c.kappa, seen);
  pull(j, "mixing", c.mixing, seen);
  pull(j, "warmup_timesteps", c.warmup_timesteps, seen);
  pull(j, "style_mode", c.style_mode, seen);
  pull(j, "style_id", c.style_id, seen);
  pull(j, "eval_every", c.eval_every, seen);
  pull(j, "eval_episodes", c.eval_episodes, seen);
  pull(j, "checkpoint_every", c.checkpoint_every, seen);
  pull(j, "log_every", c.log_every, seen);
  pull(j, "augmentation", c.augmentation, seen);
  pull(j, "embed_dim", c.embed_dim, seen);
  pull(j, "c1", c.c1, seen);
  pull(j, "c2", c.c2, seen);
  pull(j, "c3", c.c3, seen);
  pull(j, "gen_hidden", c.gen_hidden, seen);
  pull(j, "ppo_gamma", c.ppo_gamma, seen);
  pull(j, "gae_lambda", c.gae_lambda, seen);
  pull(j, "rollout_steps", c.rollout_steps, seen);
  pull(j, "ppo_epochs", c.ppo_epochs, seen);
  pull(j, "minibatches", c.minibatches, seen);
  pull(j, "clip_eps", c.clip_eps, seen);
  pull(j, "entropy_coef", c.entropy_coef, seen);
  pull(j, "ppo_lr", c.ppo_lr, seen);
  pull(j, "reward_norm", c.reward_norm, seen);
  pull(j, "sac_gamma", c.sac_gamma, seen);
  pull(j, "tau", c.tau, seen);
  pull(j, "alpha_init", c.alpha_init, seen);
  pull(j, "alpha_lr", c.alpha_lr, seen);
  pull(j, "sac_lr", c.sac_lr, seen);
  pull(j, "batch_size", c.batch_size, seen);
  pull(j, "replay_capacity", c.replay_capacity, seen);
  pull(j, "init_steps", c.init_steps, seen);
  pull(j, "target_interval", c.target_interval, seen);
  pull(j, "actor_interval", c.actor_interval, seen);
  pull(j, "q_hidden", c.q_hidden, seen);

  for (auto it = j.begin(); it != j.end(); ++it) {
    // metadata keys written alongside the fields, allowed so a run's
    // config.json round-trips
    if (it.key() == "config_hash" || it.key() == "schema") continue;
    if (!seen.count(it.key())) {
      throw ConfigError("unknown config field '" + it.key() + "'");
    }
  }
  return c;
}

uint64_t config_hash(const RunConfig& cfg) {
  return fnv1a64(config_to_json_obj(resolve(cfg)).dump());
}

std::string config_hash_hex(const RunConfig& cfg) {
  char buf[17];
  snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  return buf;
}

std::string run_dir_name(const RunConfig& cfg) {
  return cfg.algorithm + "-" + cfg.env + "-s" + std::to_string(cfg.seed) + "-" +
         config_hash_hex(cfg).substr(0, 8);
}

}  // namespace sar
