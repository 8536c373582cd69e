#include <algorithm>
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

double mean_or(const std::vector<double>& xs, double fallback) {
  if (xs.empty()) return fallback;
  double s = 0.0;
  for (double v : xs) s += v;
  return s / static_cast<double>(xs.size());
}

}  // namespace

TrainResult train_sac(const RunConfig& cfg, const std::string& runs_root) {
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
  const int64_t act_dim = env->action_dim();

  SacNet net(ec, act_dim, cfg.q_hidden, cfg.alpha_init, streams.policy_init);
  PerturbGenerator gen(cfg.c2, cfg.gen_hidden, streams.generator_init);
  SacOptimizers opt{Adam(net.actor_params(), cfg.sac_lr), Adam(gen.params(), cfg.sac_lr),
                    Adam(net.critic_params(), cfg.sac_lr),
                    Adam(std::vector<Tensor>{net.log_alpha}, cfg.alpha_lr)};

  auto named = named_params(net);
  for (const auto& p : named_params(gen)) named.push_back(p);

  Shape frame_shape = {3, 32, 32};
  ReplayBuffer replay(cfg.replay_capacity, env->frame_stack(), frame_shape, act_dim);
  MetricsWriter metrics(run_dir + "/metrics.csv");
  TimingWriter timing(run_dir + "/timing.csv");

  std::vector<int64_t> train_ids;
  if (cfg.style_mode == "pool") train_ids = style_pool_ids("train");
  auto reset_env = [&]() {
    const int64_t sid = train_ids.empty()
                            ? cfg.style_id
                            : train_ids[streams.env.uniform_int(
                                  static_cast<int64_t>(train_ids.size()))];
    Tensor obs = env->reset(streams.env.next_u64(), sid);
    replay.begin_episode(env->latest_frame());
    return obs;
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

  const auto t0 = std::chrono::steady_clock::now();
  int64_t step = 0;
  int64_t next_checkpoint = cfg.checkpoint_every;
  int64_t next_eval = cfg.eval_every;
  int64_t next_log = cfg.log_every;
  Tensor obs = reset_env();
  double ep_return = 0.0;
  std::vector<double> window_returns;
  std::vector<double> m_actor, m_critic, m_gen, m_ldiv, m_gap;
  std::vector<EvalResult> final_evals;

  try {
    while (step < cfg.total_timesteps) {
      // ---- act ----
      std::vector<double> action(act_dim);
      if (step < cfg.init_steps) {
        for (auto& a : action) a = streams.action.uniform(-1.0, 1.0);
      } else {
        NoGradGuard ng;
        PolicyDist d = net.dist_from_embed(net.enc.encode(batch_of_one(obs)));
        std::vector<double> ev(act_dim);
        for (auto& e : ev) e = streams.action.normal();
        action = d.rsample(Tensor::from_data({1, act_dim}, ev)).values();
        for (auto& a : action) a = std::clamp(a, -1.0, 1.0);
      }
      StepResult sr = env->step_continuous(action);
      ep_return += sr.reward;
      replay.push(action, sr.reward, sr.done, env->latest_frame());
      ++step;
      if (sr.done) {
        window_returns.push_back(ep_return);
        ep_return = 0.0;
        obs = reset_env();
      } else {
        obs = sr.obs;
      }

      // ---- update ----
      if (step > cfg.init_steps && replay.size() >= cfg.batch_size) {
        const bool warm = step >= cfg.warmup_timesteps;
        const bool update_actor = step % cfg.actor_interval == 0;
        SarSacInputs in;
        ReplayBuffer::Batch b = replay.sample(cfg.batch_size, streams.minibatch);
        in.batch = SacBatch{b.obs, b.next_obs, b.actions, b.rewards, b.dones};
        auto draw_eps = [&]() {
          std::vector<double> ev(cfg.batch_size * act_dim);
          for (auto& e : ev) e = streams.minibatch.normal();
          return Tensor::from_data({cfg.batch_size, act_dim}, ev);
        };
        in.eps_target = draw_eps();
        in.eps_actor = draw_eps();
        in.eps_proxy = draw_eps();
        std::vector<int64_t> mix;
        if (cfg.mixing) {
          mix = streams.permutation.permutation(cfg.batch_size);
          in.perm = &mix;
        }
        in.gamma = cfg.sac_gamma;
        in.target_entropy = -static_cast<double>(act_dim);
        in.lambda_eff = warm ? cfg.lambda : 0.0;
        in.lambda_prime_eff = warm ? cfg.lambda_prime : 0.0;
        in.kappa_eff = warm ? cfg.kappa : 0.0;

        SacUpdateStats us = update_step_sac(net, &gen, in, opt, update_actor);
        m_critic.push_back(us.critic_loss);
        m_gen.push_back(us.gen_loss);
        m_gap.push_back(us.g_critic);
        if (us.actor_updated) {
          m_actor.push_back(us.actor_loss);
          m_ldiv.push_back(us.l_div);
        }
        if (step % cfg.target_interval == 0) {
          polyak_update(net.target_params(), net.critic_params(), cfg.tau);
        }
      }

      if (cfg.checkpoint_every > 0 && step >= next_checkpoint) {
        save_checkpoint(run_dir + "/checkpoints/step_" + std::to_string(step) + ".bin",
                        snapshot_params(named, hash, step));
        next_checkpoint += cfg.checkpoint_every;
      }

      // ---- metrics ----
      const bool last = step == cfg.total_timesteps;
      if (step >= next_log || last) {
        while (step >= next_log) next_log += cfg.log_every;
        double ev_train = kNan, ev_test = kNan;
        if (last || (cfg.eval_every > 0 && step >= next_eval)) {
          while (cfg.eval_every > 0 && step >= next_eval) next_eval += cfg.eval_every;
          std::vector<EvalResult> evs = run_eval(step);
          ev_train = evs[0].mean;
          if (evs.size() > 1) ev_test = evs[1].mean;
          if (last) final_evals = std::move(evs);
        }
        MetricsRow row;
        row.timestep = step;
        row.episode_return = mean_or(window_returns, kNan);
        row.eval_return_train_styles = ev_train;
        row.eval_return_test_styles = ev_test;
        row.l_div = mean_or(m_ldiv, 0.0);
        row.g_critic = mean_or(m_gap, 0.0);
        row.actor_loss = mean_or(m_actor, 0.0);
        row.critic_loss = mean_or(m_critic, 0.0);
        row.gen_loss = mean_or(m_gen, 0.0);
        metrics.append(row);
        timing.append(step, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                .count());
        window_returns.clear();
        m_actor.clear();
        m_critic.clear();
        m_gen.clear();
        m_ldiv.clear();
        m_gap.clear();
      }
    }
  } catch (const NumericError& e) {
    abort_with_snapshot(run_dir, snapshot_params(named, hash, step), step, e.what());
  }

  save_checkpoint(run_dir + "/checkpoints/step_" + std::to_string(step) + ".bin",
                  snapshot_params(named, hash, step));
  if (final_evals.empty()) final_evals = run_eval(step);
  write_eval_json(run_dir + "/eval.json", final_evals);

  TrainResult res;
  res.run_dir = run_dir;
  res.final_eval_train = final_evals[0].mean;
  res.final_eval_test = final_evals.size() > 1 ? final_evals[1].mean : kNan;
  return res;
}

}  // namespace sar
