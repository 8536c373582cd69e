#include <chrono>
#include <cmath>
#include <limits>

#include "sar/buffers.hpp"
#include "sar/common.hpp"
#include "sar/harness.hpp"
#include "sar/metrics.hpp"

namespace sar {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

Tensor batch_of_one(const Tensor& obs) {
  return reshape(obs, {1, obs.dim(0), obs.dim(1), obs.dim(2)});
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double v : xs) s += v;
  return s / static_cast<double>(xs.size());
}

}  // namespace

TrainResult train_ppo(const RunConfig& cfg, const std::string& runs_root) {
  const std::string run_dir = prepare_run_dir(cfg, runs_root);
  const uint64_t hash = config_hash(cfg);

  RngStreams streams(cfg.seed);
  auto env = make_env(cfg.env);
  auto ev_env = make_env(cfg.env);

  EncoderConfig ec;
  ec.in_channels = env->obs_shape()[0];
  ec.c1 = cfg.c1;
  ec.c2 = cfg.c2;
  ec.c3 = cfg.c3;
  ec.embed_dim = cfg.embed_dim;
  const bool continuous = !env->discrete();
  const int64_t act_dim = continuous ? env->action_dim() : env->action_count();

  PpoNet net(ec, act_dim, continuous, streams.policy_init);
  PerturbGenerator gen(cfg.c2, cfg.gen_hidden, streams.generator_init);
  SarOptimizers opt{Adam(net.actor_params(), cfg.ppo_lr), Adam(gen.params(), cfg.ppo_lr),
                    Adam(net.critic_params(), cfg.ppo_lr)};

  auto named = named_params(net);
  for (const auto& p : named_params(gen)) named.push_back(p);

  RolloutBuffer buf(cfg.rollout_steps, env->obs_shape(), continuous ? act_dim : 0);
  RewardNormalizer rnorm(cfg.ppo_gamma);
  MetricsWriter metrics(run_dir + "/metrics.csv");
  TimingWriter timing(run_dir + "/timing.csv");

  std::vector<int64_t> train_ids;
  if (cfg.style_mode == "pool") train_ids = style_pool_ids("train");
  auto reset_env = [&]() {
    const int64_t sid = train_ids.empty()
                            ? cfg.style_id
                            : train_ids[streams.env.uniform_int(
                                  static_cast<int64_t>(train_ids.size()))];
    return env->reset(streams.env.next_u64(), sid);
  };

  auto eval_seed_at = [&](int64_t step) {
    return splitmix64(splitmix64(cfg.seed ^ fnv1a64("eval")) + static_cast<uint64_t>(step));
  };
  EvalPolicy greedy = eval_policy(net);
  auto run_eval = [&](int64_t step) {
    std::vector<EvalResult> out;
    EvalSpec spec;
    spec.style_mode = cfg.style_mode;
    spec.style_id = cfg.style_id;
    spec.episodes = cfg.eval_episodes;
    spec.seed = eval_seed_at(step);
    spec.pool = "train";
    out.push_back(evaluate(*ev_env, greedy, spec));
    if (cfg.style_mode == "pool") {
      spec.pool = "test";
      spec.seed = splitmix64(spec.seed);
      out.push_back(evaluate(*ev_env, greedy, spec));
    }
    return out;
  };

  const int64_t n_updates = cfg.total_timesteps / cfg.rollout_steps;
  const int64_t mb_size = cfg.rollout_steps / cfg.minibatches;
  const auto t0 = std::chrono::steady_clock::now();

  int64_t step = 0;
  int64_t next_checkpoint = cfg.checkpoint_every;
  int64_t next_eval = cfg.eval_every;
  Tensor obs = reset_env();
  double ep_return = 0.0;
  std::vector<double> window_returns;
  std::vector<EvalResult> final_evals;

  try {
    for (int64_t u = 0; u < n_updates; ++u) {
      // ---- collect one rollout ----
      for (int64_t t = 0; t < cfg.rollout_steps; ++t) {
        int64_t a_d = 0;
        std::vector<double> a_c;
        double value = 0.0, logp = 0.0;
        {
          NoGradGuard ng;
          Tensor embed = net.enc.encode(batch_of_one(obs));
          PolicyDist d = net.dist_from_embed(embed);
          value = net.value_from_embed(embed).values()[0];
          if (continuous) {
            std::vector<double> ev(act_dim);
            for (auto& e : ev) e = streams.action.normal();
            Tensor a = d.rsample(Tensor::from_data({1, act_dim}, ev));
            a_c = a.values();
            logp = d.log_prob(a).values()[0];
          } else {
            a_d = d.sample(0, streams.action);
            logp = d.log_prob(std::vector<int64_t>{a_d}).values()[0];
          }
        }
        StepResult sr = continuous ? env->step_continuous(a_c) : env->step_discrete(a_d);
        ep_return += sr.reward;
        const double r = cfg.reward_norm ? rnorm.normalize(sr.reward, sr.done) : sr.reward;
        buf.push(obs, a_d, a_c, r, sr.done, value, logp);
        ++step;
        if (sr.done) {
          window_returns.push_back(ep_return);
          ep_return = 0.0;
          obs = reset_env();
        } else {
          obs = sr.obs;
        }
        if (cfg.checkpoint_every > 0 && step >= next_checkpoint) {
          save_checkpoint(run_dir + "/checkpoints/step_" + std::to_string(step) + ".bin",
                          snapshot_params(named, hash, step));
          next_checkpoint += cfg.checkpoint_every;
        }
      }

      // ---- advantages ----
      double v_boot = 0.0;
      {
        NoGradGuard ng;
        v_boot = net.value_from_embed(net.enc.encode(batch_of_one(obs))).values()[0];
      }
      std::vector<double> values = buf.values();
      values.push_back(v_boot);
      GaeResult gae =
          gae_advantages(buf.rewards(), values, buf.dones(), cfg.ppo_gamma, cfg.gae_lambda);

      // ---- updates ----
      const bool warm = step >= cfg.warmup_timesteps;
      std::vector<double> m_actor, m_critic, m_gen, m_ldiv, m_gap;
      for (int64_t epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
        std::vector<int64_t> order = streams.minibatch.permutation(cfg.rollout_steps);
        for (int64_t m = 0; m < cfg.minibatches; ++m) {
          std::vector<int64_t> idx(order.begin() + m * mb_size,
                                   order.begin() + (m + 1) * mb_size);
          SarPpoInputs in;
          in.obs = buf.gather_obs(idx);
          if (cfg.augmentation == "trans") {
            in.obs = aug_random_translate(in.obs, streams.augmentation);
          } else if (cfg.augmentation == "color") {
            in.obs = aug_color_cutout(in.obs, streams.augmentation);
          }
          if (continuous) {
            in.actions_continuous = buf.gather_actions_continuous(idx);
          } else {
            in.actions_discrete = buf.gather_actions_discrete(idx);
          }
          in.logp_old = buf.gather(buf.logps(), idx);
          in.value_targets = buf.gather(gae.value_targets, idx);

          std::vector<double> adv(mb_size);
          for (int64_t i = 0; i < mb_size; ++i) adv[i] = gae.advantages[idx[i]];
          const double am = mean_of(adv);
          double sq = 0.0;
          for (double v : adv) sq += (v - am) * (v - am);
          const double as = std::sqrt(sq / static_cast<double>(mb_size));
          for (double& v : adv) v = (v - am) / (as + 1e-8);
          in.advantages = Tensor::from_data({mb_size}, adv);

          std::vector<int64_t> mix;
          if (cfg.mixing) {
            mix = streams.permutation.permutation(mb_size);
            in.perm = &mix;
          }
          in.clip_eps = cfg.clip_eps;
          in.entropy_coef = cfg.entropy_coef;
          in.lambda_eff = warm ? cfg.lambda : 0.0;
          in.lambda_prime_eff = warm ? cfg.lambda_prime : 0.0;
          in.kappa_eff = warm ? cfg.kappa : 0.0;

          UpdateStats us = update_step_ppo(net, &gen, in, opt);
          m_actor.push_back(us.actor_loss);
          m_critic.push_back(us.critic_loss);
          m_gen.push_back(us.gen_loss);
          m_ldiv.push_back(us.l_div);
          m_gap.push_back(us.g_critic);
        }
      }
      buf.clear();

      // ---- evaluation ----
      const bool last = u == n_updates - 1;
      double ev_train = kNan, ev_test = kNan;
      if (last || (cfg.eval_every > 0 && step >= next_eval)) {
        while (cfg.eval_every > 0 && step >= next_eval) next_eval += cfg.eval_every;
        std::vector<EvalResult> evs = run_eval(step);
        ev_train = evs[0].mean;
        if (evs.size() > 1) ev_test = evs[1].mean;
        if (last) final_evals = std::move(evs);
      }

      // ---- metrics row ----
      MetricsRow row;
      row.timestep = step;
      row.episode_return = window_returns.empty() ? kNan : mean_of(window_returns);
      window_returns.clear();
      row.eval_return_train_styles = ev_train;
      row.eval_return_test_styles = ev_test;
      row.l_div = mean_of(m_ldiv);
      row.g_critic = mean_of(m_gap);
      row.actor_loss = mean_of(m_actor);
      row.critic_loss = mean_of(m_critic);
      row.gen_loss = mean_of(m_gen);
      metrics.append(row);
      timing.append(step, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                              .count());
    }
  } catch (const NumericError& e) {
    abort_with_snapshot(run_dir, snapshot_params(named, hash, step), step, e.what());
  }

  save_checkpoint(run_dir + "/checkpoints/step_" + std::to_string(step) + ".bin",
                  snapshot_params(named, hash, step));
  if (final_evals.empty()) final_evals = run_eval(step);  // total < one rollout
  write_eval_json(run_dir + "/eval.json", final_evals);

  TrainResult res;
  res.run_dir = run_dir;
  res.final_eval_train = final_evals[0].mean;
  res.final_eval_test = final_evals.size() > 1 ? final_evals[1].mean : kNan;
  return res;
}

}  // namespace sar
