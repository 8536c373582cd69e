#include "sar/agents.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

#include "sar/common.hpp"

namespace sar {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_rows_match(const PolicyDist& p, const PolicyDist& q) {
  if (p.kind != q.kind) {
    throw std::invalid_argument("KL between different distribution families");
  }
  if (p.batch() != q.batch() || p.arity() != q.arity()) {
    throw std::invalid_argument("KL between distributions of different shape");
  }
}

void check_all_finite(const Tensor& t, const char* what) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Encoder

Encoder::Encoder(const EncoderConfig& c, RngStream& rng) : cfg(c) {
  const double g = std::sqrt(2.0);
  b1 = Conv2dLayer(c.in_channels, c.c1, 3, 1, 1, rng, g);
  b2 = Conv2dLayer(c.c1, c.c2, 3, 1, 1, rng, g);
  b3 = Conv2dLayer(c.c2, c.c3, 3, 1, 1, rng, g);
  const int64_t flat = c.c3 * (c.height / 8) * (c.width / 8);
  fc = Dense(flat, c.embed_dim, rng, g);
}

Tensor Encoder::to_branch(const Tensor& obs) const {
  if (obs.ndim() != 4 || obs.dim(1) != cfg.in_channels || obs.dim(2) != cfg.height ||
      obs.dim(3) != cfg.width) {
    throw std::invalid_argument("encoder expects observations [B," +
                                std::to_string(cfg.in_channels) + "," +
                                std::to_string(cfg.height) + "," + std::to_string(cfg.width) +
                                "], got " + shape_str(obs.shape()));
  }
  for (double v : obs.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("encoder expects observations scaled to [0,1]");
    }
  }
  Tensor h = avg_pool2x2(relu(b1.forward(obs)));
  return avg_pool2x2(relu(b2.forward(h)));
}

Tensor Encoder::from_branch(const Tensor& z) const {
  // Non-finite branch features would be silently zeroed by the next relu
  // (NaN and -inf compare false, inf turns into NaN inside the conv), so
  // this is the last place they are reliably visible.
  check_all_finite(z, "branch features");
  Tensor h = avg_pool2x2(relu(b3.forward(z)));
  const int64_t b = h.dim(0);
  const int64_t flat = h.size() / b;
  return relu(fc.forward(reshape(h, {b, flat})));
}

Shape Encoder::branch_shape(int64_t batch) const {
  return {batch, cfg.c2, cfg.height / 4, cfg.width / 4};
}

std::vector<Tensor> Encoder::params() const {
  return {b1.w, b1.b, b2.w, b2.b, b3.w, b3.b, fc.w, fc.b};
}

// ---------------------------------------------------------------------------
// PolicyDist

PolicyDist PolicyDist::categorical(const Tensor& logits) {
  if (logits.ndim() != 2) {
    throw std::invalid_argument("categorical logits must be [B,A], got " +
                                shape_str(logits.shape()));
  }
  PolicyDist d;
  d.kind = Kind::Categorical;
  d.logits = logits;
  d.probs = softmax_logits_to_probs(logits);
  d.log_probs = log_softmax_lastdim(logits);
  return d;
}

PolicyDist PolicyDist::gaussian(const Tensor& mean, const Tensor& log_std_raw) {
  if (mean.ndim() != 2 || log_std_raw.ndim() != 2 || mean.shape() != log_std_raw.shape()) {
    throw std::invalid_argument("gaussian head expects matching [B,D] mean and log std");
  }
  check_all_finite(mean, "gaussian mean");
  PolicyDist d;
  d.kind = Kind::Gaussian;
  d.mean = mean;
  d.log_std = clip(log_std_raw, kLogStdMin, kLogStdMax);
  return d;
}

int64_t PolicyDist::batch() const {
  return kind == Kind::Categorical ? logits.dim(0) : mean.dim(0);
}

int64_t PolicyDist::arity() const {
  return kind == Kind::Categorical ? logits.dim(1) : mean.dim(1);
}

Tensor PolicyDist::log_prob(const std::vector<int64_t>& actions) const {
  if (kind != Kind::Categorical) {
    throw std::invalid_argument("integer actions require a categorical distribution");
  }
  return take_per_row(log_probs, actions);
}

Tensor PolicyDist::log_prob(const Tensor& actions) const {
  if (kind != Kind::Gaussian) {
    throw std::invalid_argument("tensor actions require a gaussian distribution");
  }
  if (actions.shape() != mean.shape()) {
    throw std::invalid_argument("action batch shape " + shape_str(actions.shape()) +
                                " does not match distribution " + shape_str(mean.shape()));
  }
  Tensor d = sub(actions, mean);
  Tensor quad = mul(square(d), exp(mul_scalar(log_std, -2.0)));
  Tensor per_dim = add(mul_scalar(quad, 0.5), log_std);
  Tensor row = reduce_sum(per_dim, {1}, false);
  return neg(add_scalar(row, 0.5 * kLog2Pi * static_cast<double>(arity())));
}

Tensor PolicyDist::entropy() const {
  if (kind == Kind::Categorical) {
    return neg(reduce_sum(mul(probs, log_probs), {1}, false));
  }
  const double c = 0.5 * (1.0 + kLog2Pi) * static_cast<double>(arity());
  return add_scalar(reduce_sum(log_std, {1}, false), c);
}

int64_t PolicyDist::sample(int64_t row, RngStream& rng) const {
  if (kind != Kind::Categorical) {
    throw std::invalid_argument("index sampling requires a categorical distribution");
  }
  const auto& p = probs.values();
  const int64_t a = arity();
  const double u = rng.uniform();
  double acc = 0.0;
  for (int64_t i = 0; i < a; ++i) {
    acc += p[row * a + i];
    if (u < acc) return i;
  }
  return a - 1;
}

Tensor PolicyDist::rsample(const Tensor& eps) const {
  if (kind != Kind::Gaussian) {
    throw std::invalid_argument("reparameterized sampling requires a gaussian distribution");
  }
  if (eps.shape() != mean.shape()) {
    throw std::invalid_argument("noise shape " + shape_str(eps.shape()) +
                                " does not match distribution " + shape_str(mean.shape()));
  }
  return add(mean, mul(exp(log_std), eps));
}

int64_t PolicyDist::mode(int64_t row) const {
  if (kind != Kind::Categorical) {
    throw std::invalid_argument("mode() is for categorical distributions");
  }
  const auto& p = probs.values();
  const int64_t a = arity();
  int64_t best = 0;
  for (int64_t i = 1; i < a; ++i) {
    if (p[row * a + i] > p[row * a + best]) best = i;
  }
  return best;
}

std::vector<double> PolicyDist::mean_action(int64_t row) const {
  if (kind != Kind::Gaussian) {
    throw std::invalid_argument("mean_action() is for gaussian distributions");
  }
  const auto& m = mean.values();
  const int64_t d = arity();
  std::vector<double> out(d);
  for (int64_t i = 0; i < d; ++i) out[i] = m[row * d + i];
  return out;
}

Tensor kl_rows(const PolicyDist& p, const PolicyDist& q) {
  check_rows_match(p, q);
  if (p.kind == PolicyDist::Kind::Categorical) {
    return reduce_sum(mul(p.probs, sub(p.log_probs, q.log_probs)), {1}, false);
  }
  // Diagonal gaussians, composed so identical inputs cancel exactly:
  // sum_d [ (ls_q - ls_p) + 0.5 exp(2(ls_p - ls_q))
  //         + 0.5 (mu_p - mu_q)^2 exp(-2 ls_q) ] - D/2
  Tensor diff = sub(q.log_std, p.log_std);
  Tensor term = add(diff, mul_scalar(exp(mul_scalar(diff, -2.0)), 0.5));
  Tensor md = sub(p.mean, q.mean);
  term = add(term, mul_scalar(mul(square(md), exp(mul_scalar(q.log_std, -2.0))), 0.5));
  return add_scalar(reduce_sum(term, {1}, false), -0.5 * static_cast<double>(p.arity()));
}

Tensor l_div(const PolicyDist& dist_clean, const PolicyDist& dist_adv) {
  return mean_all(relu(kl_rows(dist_clean, dist_adv)));
}

// ---------------------------------------------------------------------------
// PpoNet

PpoNet::PpoNet(const EncoderConfig& cfg, int64_t act_dim_, bool continuous_, RngStream& rng)
    : enc(cfg, rng), continuous(continuous_), act_dim(act_dim_) {
  pi_head = Dense(cfg.embed_dim, act_dim_, rng, 0.01);
  if (continuous_) pi_log_std = Dense(cfg.embed_dim, act_dim_, rng, 0.01);
  v_head = Dense(cfg.embed_dim, 1, rng, 1.0);
}

PolicyDist PpoNet::dist_from_embed(const Tensor& embed) const {
  if (continuous) {
    return PolicyDist::gaussian(pi_head.forward(embed), pi_log_std.forward(embed));
  }
  return PolicyDist::categorical(pi_head.forward(embed));
}

Tensor PpoNet::value_from_embed(const Tensor& embed) const {
  return reshape(v_head.forward(embed), {embed.dim(0)});
}

std::vector<Tensor> PpoNet::actor_params() const {
  std::vector<Tensor> p = enc.params();
  p.push_back(pi_head.w);
  p.push_back(pi_head.b);
  if (continuous) {
    p.push_back(pi_log_std.w);
    p.push_back(pi_log_std.b);
  }
  return p;
}

std::vector<Tensor> PpoNet::critic_params() const { return {v_head.w, v_head.b}; }

std::vector<Tensor> PpoNet::all_params() const {
  std::vector<Tensor> p = actor_params();
  for (const auto& t : critic_params()) p.push_back(t);
  return p;
}

std::pair<PolicyDist, Tensor> heads_from_branch(const PpoNet& net, const Tensor& z) {
  Tensor embed = net.enc.from_branch(z);
  return {net.dist_from_embed(embed), net.value_from_embed(embed)};
}

// ---------------------------------------------------------------------------
// SacNet

SacNet::QHead::QHead(int64_t embed_dim, int64_t act_dim, int64_t hidden, RngStream& rng) {
  h = Dense(embed_dim + act_dim, hidden, rng, std::sqrt(2.0));
  out = Dense(hidden, 1, rng, 1.0);
}

Tensor SacNet::QHead::forward(const Tensor& embed, const Tensor& act) const {
  Tensor x = concat_lastdim(embed, act);
  return reshape(out.forward(relu(h.forward(x))), {embed.dim(0)});
}

std::vector<Tensor> SacNet::QHead::params() const { return {h.w, h.b, out.w, out.b}; }

SacNet::SacNet(const EncoderConfig& cfg, int64_t act_dim_, int64_t hidden, double init_alpha,
               RngStream& rng)
    : enc(cfg, rng), act_dim(act_dim_) {
  pi_trunk = Dense(cfg.embed_dim, hidden, rng, std::sqrt(2.0));
  pi_mean = Dense(hidden, act_dim_, rng, 0.01);
  pi_log_std = Dense(hidden, act_dim_, rng, 0.01);
  q1 = QHead(cfg.embed_dim, act_dim_, hidden, rng);
  q2 = QHead(cfg.embed_dim, act_dim_, hidden, rng);
  q1_target = QHead(cfg.embed_dim, act_dim_, hidden, rng);
  q2_target = QHead(cfg.embed_dim, act_dim_, hidden, rng);
  hard_copy(q1_target.params(), q1.params());
  hard_copy(q2_target.params(), q2.params());
  log_alpha = Tensor::scalar(std::log(init_alpha), true);
}

PolicyDist SacNet::dist_from_embed(const Tensor& embed) const {
  Tensor h = relu(pi_trunk.forward(embed));
  return PolicyDist::gaussian(pi_mean.forward(h), pi_log_std.forward(h));
}

double SacNet::alpha() const { return std::exp(log_alpha.item()); }

std::vector<Tensor> SacNet::actor_params() const {
  std::vector<Tensor> p = enc.params();
  for (const auto& d : {&pi_trunk, &pi_mean, &pi_log_std}) {
    p.push_back(d->w);
    p.push_back(d->b);
  }
  return p;
}

std::vector<Tensor> SacNet::critic_params() const {
  std::vector<Tensor> p = q1.params();
  for (const auto& t : q2.params()) p.push_back(t);
  return p;
}

std::vector<Tensor> SacNet::target_params() const {
  std::vector<Tensor> p = q1_target.params();
  for (const auto& t : q2_target.params()) p.push_back(t);
  return p;
}

// ---------------------------------------------------------------------------
// Objectives

GaeResult gae_advantages(const std::vector<double>& rewards, const std::vector<double>& values,
                         const std::vector<uint8_t>& dones, double gamma, double lam) {
  const size_t t_len = rewards.size();
  if (t_len == 0) throw std::invalid_argument("advantage estimation over an empty rollout");
  if (values.size() != t_len + 1) {
    throw std::invalid_argument("values must carry one bootstrap entry past the rollout");
  }
  if (dones.size() != t_len) {
    throw std::invalid_argument("dones length does not match rollout length");
  }
  GaeResult r;
  r.advantages.resize(t_len);
  r.value_targets.resize(t_len);
  double acc = 0.0;
  for (size_t i = t_len; i-- > 0;) {
    const double nonterm = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * nonterm * values[i + 1] - values[i];
    acc = delta + gamma * lam * nonterm * acc;
    r.advantages[i] = acc;
    r.value_targets[i] = acc + values[i];
  }
  return r;
}

Tensor ppo_actor_loss(const Tensor& logp_new, const Tensor& logp_old, const Tensor& advantages,
                      double clip_eps, const Tensor& entropy_rows, double entropy_coef) {
  Tensor ratio = exp(sub(logp_new, logp_old));
  check_all_finite(ratio, "probability ratio");
  Tensor s1 = mul(ratio, advantages);
  Tensor s2 = mul(clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps), advantages);
  Tensor loss = neg(mean_all(min_elementwise(s1, s2)));
  if (entropy_coef != 0.0) {
    loss = sub(loss, mul_scalar(mean_all(entropy_rows), entropy_coef));
  }
  return loss;
}

Tensor ppo_critic_loss(const Tensor& values, const Tensor& targets) {
  if (values.shape() != targets.shape()) {
    throw std::invalid_argument("value/target shape mismatch: " + shape_str(values.shape()) +
                                " vs " + shape_str(targets.shape()));
  }
  return mean_all(square(sub(values, targets)));
}

Tensor sac_value_target(const Tensor& reward, const Tensor& done, double gamma,
                        const Tensor& min_q_next, const Tensor& logp_next, double alpha) {
  Tensor cont = neg(add_scalar(done, -1.0));  // 1 - done
  Tensor soft_v = sub(min_q_next, mul_scalar(logp_next, alpha));
  return add(reward, mul_scalar(mul(cont, soft_v), gamma));
}

// ---------------------------------------------------------------------------
// SAR loss assembly

SarLossBundle sar_losses_ppo(const PpoNet& net, const PerturbGenerator* gen,
                             const SarPpoInputs& in, GradSide side,
                             const StatsFn* stats_override) {
  const bool want_adv = side == GradSide::Generator || in.lambda_eff != 0.0 ||
                        in.lambda_prime_eff != 0.0 || in.kappa_eff != 0.0;
  if (want_adv && gen == nullptr && stats_override == nullptr) {
    throw std::runtime_error("adversarial term requested before generator initialized");
  }

  // Branch features: live only for the actor pass.
  Tensor z;
  {
    std::optional<NoGradGuard> ng;
    if (side != GradSide::Actor) ng.emplace();
    z = net.enc.to_branch(in.obs);
  }

  // Adversarial branch. The generator's stats stay differentiable w.r.t.
  // its input, so the actor pass sees gradients through them while the
  // generator's own weights are held fixed.
  Tensor embed_adv;
  PolicyDist dist_adv;
  bool have_adv = false;
  if (want_adv) {
    Tensor z_adv;
    {
      std::optional<NoGradGuard> ng;
      std::optional<FreezeGuard> freeze_gen;
      if (side == GradSide::Critic || side == GradSide::None) ng.emplace();
      if (side == GradSide::Actor && gen != nullptr) freeze_gen.emplace(gen->params());
      StyleStats stats = stats_override ? (*stats_override)(z) : gen->generate(z);
      z_adv = style_perturb(z, stats);
    }
    {
      std::optional<NoGradGuard> ng;
      std::optional<FreezeGuard> freeze_net;
      if (side == GradSide::Critic || side == GradSide::None) ng.emplace();
      if (side == GradSide::Generator) freeze_net.emplace(net.all_params());
      embed_adv = net.enc.from_branch(z_adv);
      dist_adv = net.dist_from_embed(embed_adv);
    }
    have_adv = true;
  }

  // Clean branch, mixed across the batch when a permutation is given.
  Tensor embed_clean;
  PolicyDist dist_clean;
  {
    std::optional<NoGradGuard> ng;
    if (side != GradSide::Actor) ng.emplace();
    Tensor z_clean = in.perm ? style_mix_batch(z, *in.perm) : z;
    embed_clean = net.enc.from_branch(z_clean);
    dist_clean = net.dist_from_embed(embed_clean);
  }

  // Values: live only for the critic pass.
  Tensor v_clean, v_adv;
  {
    std::optional<NoGradGuard> ng;
    if (side != GradSide::Critic) ng.emplace();
    v_clean = net.value_from_embed(embed_clean);
    if (have_adv) v_adv = net.value_from_embed(embed_adv);
  }

  SarLossBundle out;
  Tensor entropy_rows = dist_clean.entropy();
  out.entropy_bonus = mean_all(entropy_rows);

  Tensor logp_new = in.actions_continuous.defined() ? dist_clean.log_prob(in.actions_continuous)
                                                    : dist_clean.log_prob(in.actions_discrete);
  Tensor base_actor =
      ppo_actor_loss(logp_new, in.logp_old, in.advantages, in.clip_eps, entropy_rows,
                     in.entropy_coef);
  Tensor base_critic = ppo_critic_loss(v_clean, in.value_targets);

  if (have_adv) {
    out.l_div = l_div(dist_clean, dist_adv);
    out.g_critic = mean_all(square(sub(v_clean, v_adv)));
    out.gen_loss = mul_scalar(out.l_div, -in.lambda_prime_eff);
    out.actor_loss = in.lambda_eff != 0.0
                         ? add(base_actor, mul_scalar(out.l_div, in.lambda_eff))
                         : base_actor;
    out.critic_loss = in.kappa_eff != 0.0
                          ? add(base_critic, mul_scalar(out.g_critic, in.kappa_eff))
                          : base_critic;
  } else {
    out.l_div = Tensor::scalar(0.0);
    out.g_critic = Tensor::scalar(0.0);
    out.gen_loss = Tensor::scalar(0.0);
    out.actor_loss = base_actor;
    out.critic_loss = base_critic;
  }
  return out;
}

namespace {

double finite_item(const Tensor& t, const char* what) {
  const double v = t.item();
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what + " in update step");
  return v;
}

}  // namespace

SacUpdateStats update_step_sac(const SacNet& net, const PerturbGenerator* gen,
                               const SarSacInputs& in, SacOptimizers& opt, bool update_actor) {
  const bool want_adv =
      in.lambda_eff != 0.0 || in.lambda_prime_eff != 0.0 || in.kappa_eff != 0.0;
  if (want_adv && gen == nullptr) {
    throw std::runtime_error("adversarial term requested before generator initialized");
  }
  const double alpha = net.alpha();
  SacUpdateStats s;
  s.alpha = alpha;

  // --- critic: twin Q heads only, everything upstream is constant ---
  {
    Tensor y, e, e_adv, a_pi, a_pi_adv;
    {
      NoGradGuard ng;
      Tensor e_next = net.enc.encode(in.batch.next_obs);
      PolicyDist d_next = net.dist_from_embed(e_next);
      Tensor a_next = d_next.rsample(in.eps_target);
      Tensor logp_next = d_next.log_prob(a_next);
      Tensor q_next = min_elementwise(net.q1_target.forward(e_next, a_next),
                                      net.q2_target.forward(e_next, a_next));
      y = sac_value_target(in.batch.rewards, in.batch.dones, in.gamma, q_next, logp_next, alpha);

      Tensor z = net.enc.to_branch(in.batch.obs);
      e = net.enc.from_branch(z);
      if (want_adv) {
        Tensor z_adv = style_perturb(z, gen->generate(z));
        e_adv = net.enc.from_branch(z_adv);
        a_pi = net.dist_from_embed(e).rsample(in.eps_proxy);
        a_pi_adv = net.dist_from_embed(e_adv).rsample(in.eps_proxy);
      }
    }
    Tensor q1v = net.q1.forward(e, in.batch.actions);
    Tensor q2v = net.q2.forward(e, in.batch.actions);
    Tensor loss = add(mean_all(square(sub(q1v, y))), mean_all(square(sub(q2v, y))));
    if (want_adv) {
      // Same reparameterization noise on both sides, so identity
      // perturbations cancel exactly.
      Tensor q_pi = min_elementwise(net.q1.forward(e, a_pi), net.q2.forward(e, a_pi));
      Tensor q_pi_adv =
          min_elementwise(net.q1.forward(e_adv, a_pi_adv), net.q2.forward(e_adv, a_pi_adv));
      Tensor gap = mean_all(square(sub(q_pi, q_pi_adv)));
      s.g_critic = finite_item(gap, "value consistency gap");
      if (in.kappa_eff != 0.0) loss = add(loss, mul_scalar(gap, in.kappa_eff));
    }
    s.critic_loss = finite_item(loss, "critic loss");
    opt.critic.zero_grad();
    backward(loss);
    opt.critic.step();
  }

  // --- generator: maximize divergence, policy and encoder frozen ---
  if (gen != nullptr && in.lambda_prime_eff != 0.0) {
    Tensor z;
    {
      NoGradGuard ng;
      z = net.enc.to_branch(in.batch.obs);
    }
    Tensor z_adv = style_perturb(z, gen->generate(z));
    PolicyDist d_adv;
    {
      FreezeGuard freeze_net(net.actor_params());
      d_adv = net.dist_from_embed(net.enc.from_branch(z_adv));
    }
    PolicyDist d_clean;
    {
      NoGradGuard ng;
      Tensor z_clean = in.perm ? style_mix_batch(z, *in.perm) : z;
      d_clean = net.dist_from_embed(net.enc.from_branch(z_clean));
    }
    Tensor loss = mul_scalar(l_div(d_clean, d_adv), -in.lambda_prime_eff);
    s.gen_loss = finite_item(loss, "generator loss");
    opt.generator.zero_grad();
    backward(loss);
    opt.generator.step();
  }

  // --- actor + temperature ---
  if (update_actor) {
    Tensor z = net.enc.to_branch(in.batch.obs);
    Tensor z_clean = in.perm ? style_mix_batch(z, *in.perm) : z;
    Tensor e = net.enc.from_branch(z_clean);
    PolicyDist d = net.dist_from_embed(e);
    Tensor a = d.rsample(in.eps_actor);
    Tensor logp = d.log_prob(a);
    Tensor q_pi;
    {
      FreezeGuard freeze_q(net.critic_params());
      q_pi = min_elementwise(net.q1.forward(e, a), net.q2.forward(e, a));
    }
    Tensor loss = mean_all(sub(mul_scalar(logp, alpha), q_pi));
    if (want_adv) {
      Tensor z_adv;
      {
        FreezeGuard freeze_gen(gen->params());
        z_adv = style_perturb(z, gen->generate(z));
      }
      PolicyDist d_adv = net.dist_from_embed(net.enc.from_branch(z_adv));
      Tensor div = l_div(d, d_adv);
      s.l_div = finite_item(div, "policy divergence");
      if (in.lambda_eff != 0.0) loss = add(loss, mul_scalar(div, in.lambda_eff));
    }
    s.actor_loss = finite_item(loss, "actor loss");
    double mean_logp = 0.0;
    for (double v : logp.values()) mean_logp += v;
    mean_logp /= static_cast<double>(logp.size());
    s.entropy = -mean_logp;
    opt.actor.zero_grad();
    backward(loss);
    opt.actor.step();

    Tensor alpha_loss = mul_scalar(net.log_alpha, -(mean_logp + in.target_entropy));
    s.alpha_loss = finite_item(alpha_loss, "temperature loss");
    opt.alpha.zero_grad();
    backward(alpha_loss);
    opt.alpha.step();
    s.alpha = net.alpha();
    s.actor_updated = true;
  }
  return s;
}

UpdateStats update_step_ppo(const PpoNet& net, const PerturbGenerator* gen,
                            const SarPpoInputs& in, SarOptimizers& opt) {
  UpdateStats s;
  {
    SarLossBundle b = sar_losses_ppo(net, gen, in, GradSide::Critic);
    s.critic_loss = finite_item(b.critic_loss, "critic loss");
    s.g_critic = finite_item(b.g_critic, "value consistency gap");
    opt.critic.zero_grad();
    backward(b.critic_loss);
    opt.critic.step();
  }
  if (gen != nullptr && in.lambda_prime_eff != 0.0) {
    SarLossBundle b = sar_losses_ppo(net, gen, in, GradSide::Generator);
    s.gen_loss = finite_item(b.gen_loss, "generator loss");
    opt.generator.zero_grad();
    backward(b.gen_loss);
    opt.generator.step();
  }
  {
    SarLossBundle b = sar_losses_ppo(net, gen, in, GradSide::Actor);
    s.actor_loss = finite_item(b.actor_loss, "actor loss");
    s.l_div = finite_item(b.l_div, "policy divergence");
    s.entropy = finite_item(b.entropy_bonus, "entropy");
    opt.actor.zero_grad();
    backward(b.actor_loss);
    opt.actor.step();
  }
  return s;
}

}  // namespace sar
