#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "sar/agents.hpp"
#include "sar/common.hpp"
#include "sar/nets.hpp"
#include "sar/rng.hpp"
#include "sar/style.hpp"
#include "sar/tensor.hpp"
#include "support/oracles.hpp"

using namespace sar;

namespace {

// Literal recursive form of the advantage estimate, independent of the
// library's backward-scan implementation.
double gae_oracle(const std::vector<double>& r, const std::vector<double>& v,
                  const std::vector<uint8_t>& d, double gamma, double lam, size_t t) {
  const double nonterm = d[t] ? 0.0 : 1.0;
  const double delta = r[t] + gamma * nonterm * v[t + 1] - v[t];
  if (t + 1 == r.size()) return delta;
  return delta + gamma * lam * nonterm * gae_oracle(r, v, d, gamma, lam, t + 1);
}

struct Fixture {
  EncoderConfig cfg;
  PpoNet net;
  PerturbGenerator gen;
  Tensor obs;
  std::vector<int64_t> actions;
  Tensor logp_old, advantages, value_targets;
  std::vector<int64_t> perm_identity, perm_rot;

  explicit Fixture(uint64_t seed, bool randomize_gen_heads = true) {
    RngStream rng(seed);
    net = PpoNet(cfg, 4, false, rng);
    gen = PerturbGenerator(cfg.c2, 64, rng);
    if (randomize_gen_heads) {
      RngStream wr(seed + 1);
      for (Tensor p : gen.params()) {
        for (auto& x : p.raw_values()) x += wr.uniform(-0.2, 0.2);
      }
    }
    obs = oracle::random_tensor({4, 3, 32, 32}, rng, 0.0, 1.0);
    perm_identity = {0, 1, 2, 3};
    perm_rot = {1, 2, 3, 0};

    // Collect the "rollout" view with the same net, no mixing.
    NoGradGuard ng;
    Tensor embed = net.enc.encode(obs);
    PolicyDist dist = net.dist_from_embed(embed);
    for (int64_t i = 0; i < 4; ++i) actions.push_back(dist.sample(i, rng));
    logp_old = dist.log_prob(actions);
    std::vector<double> adv, tgt;
    for (int i = 0; i < 4; ++i) {
      adv.push_back(rng.uniform(-1.0, 1.0));
      tgt.push_back(rng.uniform(-0.5, 0.5));
    }
    advantages = Tensor::from_data({4}, std::move(adv));
    value_targets = Tensor::from_data({4}, std::move(tgt));
  }

  SarPpoInputs inputs(double lambda, double lambda_prime, double kappa,
                      const std::vector<int64_t>* perm) const {
    SarPpoInputs in;
    in.obs = obs;
    in.actions_discrete = actions;
    in.logp_old = logp_old;
    in.advantages = advantages;
    in.value_targets = value_targets;
    in.perm = perm;
    in.lambda_eff = lambda;
    in.lambda_prime_eff = lambda_prime;
    in.kappa_eff = kappa;
    return in;
  }
};

StatsFn identity_stats = [](const Tensor& z) {
  auto [mu, sigma] = channel_stats(z);
  return StyleStats{mu, sigma};
};

std::vector<std::vector<double>> snapshot(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.push_back(p.values());
  return out;
}

bool bitwise_equal(const std::vector<std::vector<double>>& a,
                   const std::vector<Tensor>& b) {
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i].values()) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("encoder: branch shape, determinism, input validation") {
  RngStream rng(21);
  EncoderConfig cfg;
  Encoder enc(cfg, rng);

  Tensor zero = Tensor::zeros({2, 3, 32, 32});
  Tensor zb = enc.to_branch(zero);
  CHECK(zb.shape() == Shape{2, 8, 8, 8});
  for (double v : zb.values()) CHECK(std::isfinite(v));

  // Identical observations produce identical branch rows.
  Tensor one = oracle::random_tensor({1, 3, 32, 32}, rng, 0.0, 1.0);
  std::vector<double> dup = one.values();
  dup.insert(dup.end(), one.values().begin(), one.values().end());
  Tensor two = Tensor::from_data({2, 3, 32, 32}, std::move(dup));
  Tensor rows = enc.to_branch(two);
  const int64_t half = rows.size() / 2;
  for (int64_t i = 0; i < half; ++i) CHECK(rows.values()[i] == rows.values()[half + i]);

  Tensor embed = enc.from_branch(rows);
  CHECK(embed.shape() == Shape{2, 64});

  CHECK_THROWS_AS(enc.to_branch(Tensor::zeros({2, 3, 16, 16})), std::invalid_argument);
  CHECK_THROWS_AS(enc.to_branch(Tensor::zeros({2, 3, 32})), std::invalid_argument);
  CHECK_THROWS_AS(enc.to_branch(Tensor::full({1, 3, 32, 32}, 1.5)), std::invalid_argument);
  CHECK_THROWS_AS(enc.to_branch(Tensor::full({1, 3, 32, 32}, -0.1)), std::invalid_argument);
}

TEST_CASE("heads: uniform on equal logits, normalization, constant batch") {
  RngStream rng(22);
  EncoderConfig cfg;
  PpoNet net(cfg, 4, false, rng);

  Tensor obs = oracle::random_tensor({3, 3, 32, 32}, rng, 0.0, 1.0);
  Tensor z = net.enc.to_branch(obs);
  auto [dist, value] = heads_from_branch(net, z);
  REQUIRE(dist.probs.shape() == Shape{3, 4});
  REQUIRE(value.shape() == Shape{3});
  for (int64_t b = 0; b < 3; ++b) {
    double s = 0;
    for (int64_t a = 0; a < 4; ++a) s += dist.probs.values()[b * 4 + a];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }

  // Zeroed policy head gives exactly uniform probabilities.
  for (auto& x : net.pi_head.w.raw_values()) x = 0.0;
  for (auto& x : net.pi_head.b.raw_values()) x = 0.0;
  auto [uniform, v2] = heads_from_branch(net, z);
  for (double p : uniform.probs.values()) CHECK(p == 0.25);

  // A constant-z batch yields identical rows.
  Tensor const_z = Tensor::full({2, 8, 8, 8}, 0.3);
  auto [same, v3] = heads_from_branch(net, const_z);
  for (int64_t a = 0; a < 4; ++a) {
    CHECK(same.probs.values()[a] == same.probs.values()[4 + a]);
  }
  CHECK(v3.values()[0] == v3.values()[1]);

  // Non-finite activations are rejected at the distribution. (A NaN fed in
  // here would die at the first relu, since relu(NaN) compares false and
  // yields 0; +inf survives rectification and must trip the logits check.)
  Tensor bad = Tensor::full({1, 8, 8, 8}, std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(heads_from_branch(net, bad), NumericError);
}

TEST_CASE("policy distributions: clamping, sampling, entropy") {
  // log-std clamps to [-10, 2].
  Tensor mean = Tensor::zeros({1, 2});
  Tensor wide = Tensor::from_data({1, 2}, {5.0, -20.0});
  PolicyDist g = PolicyDist::gaussian(mean, wide);
  CHECK(g.log_std.values()[0] == 2.0);
  CHECK(g.log_std.values()[1] == -10.0);

  // logp of a sample is finite, discrete and continuous.
  RngStream rng(23);
  Tensor logits = oracle::random_tensor({2, 5}, rng);
  PolicyDist c = PolicyDist::categorical(logits);
  for (int64_t row = 0; row < 2; ++row) {
    int64_t a = c.sample(row, rng);
    CHECK(a >= 0);
    CHECK(a < 5);
  }
  Tensor lp = c.log_prob(std::vector<int64_t>{c.sample(0, rng), c.sample(1, rng)});
  for (double v : lp.values()) CHECK(std::isfinite(v));

  Tensor eps = oracle::random_tensor({1, 2}, rng);
  Tensor a = g.rsample(eps);
  Tensor glp = g.log_prob(a);
  CHECK(std::isfinite(glp.values()[0]));

  // Gaussian entropy matches the closed form sum(ls) + D/2 (1 + ln 2pi).
  Tensor ls = Tensor::from_data({1, 2}, {0.5, -0.3});
  PolicyDist g2 = PolicyDist::gaussian(Tensor::zeros({1, 2}), ls);
  double expect = 0.5 - 0.3 + 0.5 * 2.0 * (1.0 + std::log(2.0 * M_PI));
  CHECK(g2.entropy().values()[0] == doctest::Approx(expect).epsilon(1e-12));

  // Categorical entropy of a uniform 4-way dist is ln 4.
  PolicyDist u = PolicyDist::categorical(Tensor::zeros({1, 4}));
  CHECK(u.entropy().values()[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // Gaussian logp sanity against the density formula.
  Tensor m = Tensor::from_data({1, 1}, {0.3});
  Tensor s0 = Tensor::from_data({1, 1}, {0.2});
  PolicyDist g3 = PolicyDist::gaussian(m, s0);
  Tensor at = Tensor::from_data({1, 1}, {1.0});
  double sd = std::exp(0.2);
  double ref = -0.5 * std::pow((1.0 - 0.3) / sd, 2) - 0.2 - 0.5 * std::log(2.0 * M_PI);
  CHECK(g3.log_prob(at).values()[0] == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("gae: terminal step, one-step reduction, exact oracle match") {
  auto single = gae_advantages({1.0}, {0.0, 0.0}, {1}, 0.999, 0.95);
  CHECK(single.advantages[0] == 1.0);
  CHECK(single.value_targets[0] == 1.0);

  // lam = 0 reduces to the one-step TD error.
  std::vector<double> r{0.5, -0.2, 1.0};
  std::vector<double> v{0.1, 0.4, -0.3, 0.2};
  std::vector<uint8_t> d{0, 0, 0};
  auto td = gae_advantages(r, v, d, 0.9, 0.0);
  for (size_t t = 0; t < 3; ++t) {
    CHECK(td.advantages[t] == doctest::Approx(r[t] + 0.9 * v[t + 1] - v[t]).epsilon(1e-15));
  }

  // Random 5-step rollout with a mid-episode terminal: exact match against
  // the recursive oracle.
  RngStream rng(24);
  std::vector<double> rr, vv;
  std::vector<uint8_t> dd{0, 0, 1, 0, 0};
  for (int i = 0; i < 5; ++i) rr.push_back(rng.uniform(-1, 1));
  for (int i = 0; i < 6; ++i) vv.push_back(rng.uniform(-1, 1));
  auto got = gae_advantages(rr, vv, dd, 0.999, 0.95);
  for (size_t t = 0; t < 5; ++t) {
    double want = gae_oracle(rr, vv, dd, 0.999, 0.95, t);
    CHECK(got.advantages[t] == want);
    CHECK(got.value_targets[t] == want + vv[t]);
  }

  CHECK_THROWS_AS(gae_advantages({}, {0.0}, {}, 0.99, 0.95), std::invalid_argument);
  CHECK_THROWS_AS(gae_advantages({1.0}, {0.0}, {0}, 0.99, 0.95), std::invalid_argument);
  CHECK_THROWS_AS(gae_advantages({1.0}, {0.0, 0.0}, {}, 0.99, 0.95), std::invalid_argument);
}

TEST_CASE("ppo actor loss: ratio-one baseline and frozen clip points") {
  // ratio == 1 everywhere: loss is -mean(A) before the entropy term.
  Tensor lp = Tensor::from_data({3}, {-0.5, -1.0, -2.0});
  Tensor adv = Tensor::from_data({3}, {0.3, -0.7, 1.1});
  Tensor ent = Tensor::zeros({3});
  Tensor l0 = ppo_actor_loss(lp, lp, adv, 0.2, ent, 0.0);
  CHECK(l0.item() == doctest::Approx(-(0.3 - 0.7 + 1.1) / 3.0).epsilon(1e-12));

  // A=1, ratio=1.5, eps=0.2: the clipped objective binds at 1.2.
  Tensor lnew = Tensor::from_data({1}, {std::log(1.5)});
  Tensor lold = Tensor::zeros({1});
  Tensor a1 = Tensor::full({1}, 1.0);
  CHECK(ppo_actor_loss(lnew, lold, a1, 0.2, Tensor::zeros({1}), 0.0).item() ==
        doctest::Approx(-1.2).epsilon(1e-12));

  // A=-1, ratio=0.5, eps=0.2: the clip floor binds, objective -0.8.
  Tensor lhalf = Tensor::from_data({1}, {std::log(0.5)});
  Tensor am1 = Tensor::full({1}, -1.0);
  CHECK(ppo_actor_loss(lhalf, lold, am1, 0.2, Tensor::zeros({1}), 0.0).item() ==
        doctest::Approx(0.8).epsilon(1e-12));

  // Entropy bonus is weighted and subtracted.
  Tensor ent2 = Tensor::from_data({1}, {1.3});
  double with = ppo_actor_loss(lnew, lold, a1, 0.2, ent2, 0.01).item();
  double without = ppo_actor_loss(lnew, lold, a1, 0.2, ent2, 0.0).item();
  CHECK(with == doctest::Approx(without - 0.01 * 1.3).epsilon(1e-12));

  // Non-finite ratio is rejected.
  Tensor huge = Tensor::full({1}, 1000.0);
  Tensor tiny = Tensor::full({1}, -1000.0);
  CHECK_THROWS_AS(ppo_actor_loss(huge, tiny, a1, 0.2, Tensor::zeros({1}), 0.0), NumericError);
}

TEST_CASE("ppo critic loss: zero, frozen value, concat linearity") {
  Tensor v = Tensor::from_data({2}, {0.3, -0.4});
  CHECK(ppo_critic_loss(v, v).item() == 0.0);

  CHECK(ppo_critic_loss(Tensor::from_data({1}, {0.0}), Tensor::from_data({1}, {2.0})).item() ==
        doctest::Approx(4.0).epsilon(1e-15));

  RngStream rng(25);
  Tensor a = oracle::random_tensor({4}, rng);
  Tensor b = oracle::random_tensor({4}, rng);
  Tensor ta = oracle::random_tensor({4}, rng);
  Tensor tb = oracle::random_tensor({4}, rng);
  double joint = ppo_critic_loss(concat_lastdim(a, b), concat_lastdim(ta, tb)).item();
  double halves = 0.5 * (ppo_critic_loss(a, ta).item() + ppo_critic_loss(b, tb).item());
  CHECK(joint == doctest::Approx(halves).epsilon(1e-12));

  CHECK_THROWS_AS(ppo_critic_loss(a, concat_lastdim(ta, tb)), std::invalid_argument);
}

TEST_CASE("sac value target: stub, terminal masking, myopic reduction") {
  // Q=2, logpi=-1, alpha=0.1, r=0, non-terminal, gamma=1 -> 2.1.
  Tensor r0 = Tensor::zeros({1});
  Tensor nd = Tensor::zeros({1});
  Tensor q2t = Tensor::full({1}, 2.0);
  Tensor lpm1 = Tensor::full({1}, -1.0);
  CHECK(sac_value_target(r0, nd, 1.0, q2t, lpm1, 0.1).item() ==
        doctest::Approx(2.1).epsilon(1e-15));

  // Terminal transitions ignore the bootstrap entirely.
  Tensor r1 = Tensor::full({1}, 1.0);
  Tensor done = Tensor::full({1}, 1.0);
  Tensor qbig = Tensor::full({1}, 123.0);
  CHECK(sac_value_target(r1, done, 0.99, qbig, lpm1, 0.1).item() == 1.0);

  // gamma = 0 is myopic.
  CHECK(sac_value_target(r1, nd, 0.0, qbig, lpm1, 0.1).item() == 1.0);
}

TEST_CASE("l_div: exact zeros, frozen categorical and gaussian values") {
  // Identical distributions: exactly zero, both families.
  RngStream rng(26);
  Tensor logits = oracle::random_tensor({3, 4}, rng);
  PolicyDist p = PolicyDist::categorical(logits);
  PolicyDist q = PolicyDist::categorical(logits);
  CHECK(l_div(p, q).item() == 0.0);

  Tensor mean = oracle::random_tensor({3, 2}, rng);
  Tensor ls = oracle::random_tensor({3, 2}, rng, -1.0, 1.0);
  CHECK(l_div(PolicyDist::gaussian(mean, ls), PolicyDist::gaussian(mean, ls)).item() == 0.0);

  // [0.5,0.5] vs [0.25,0.75]: 0.5 ln2 + 0.5 ln(2/3).
  Tensor lp2 = Tensor::from_data({1, 2}, {std::log(0.5), std::log(0.5)});
  Tensor lq2 = Tensor::from_data({1, 2}, {std::log(0.25), std::log(0.75)});
  double frozen = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  double got = l_div(PolicyDist::categorical(lp2), PolicyDist::categorical(lq2)).item();
  CHECK(got == doctest::Approx(frozen).epsilon(1e-9));
  CHECK(got == doctest::Approx(0.1438).epsilon(1e-3));

  // N(0,1) vs N(1,1) -> exactly 0.5 by the closed form.
  PolicyDist ga = PolicyDist::gaussian(Tensor::zeros({1, 1}), Tensor::zeros({1, 1}));
  PolicyDist gb = PolicyDist::gaussian(Tensor::full({1, 1}, 1.0), Tensor::zeros({1, 1}));
  CHECK(l_div(ga, gb).item() == 0.5);

  // Any difference in the probability vectors makes it strictly positive.
  Tensor nudged = logits.clone();
  nudged.raw_values()[0] += 1e-4;
  CHECK(l_div(p, PolicyDist::categorical(nudged)).item() > 0.0);

  // Family and arity mismatches are rejected.
  CHECK_THROWS_AS(l_div(p, ga), std::invalid_argument);
  CHECK_THROWS_AS(l_div(p, PolicyDist::categorical(Tensor::zeros({3, 5}))),
                  std::invalid_argument);
}

TEST_CASE("sac nets: target init, polyak residual, temperature") {
  RngStream rng(27);
  EncoderConfig cfg;
  SacNet net(cfg, 2, 64, 0.1, rng);

  CHECK(bitwise_equal(snapshot(net.critic_params()), net.target_params()));
  CHECK(net.alpha() == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(net.log_alpha.requires_grad());

  // Perturb online weights, take one Polyak step, check the residual is 0.
  RngStream nrng(28);
  for (Tensor p : net.critic_params()) {
    for (auto& x : p.raw_values()) x += nrng.uniform(-0.1, 0.1);
  }
  auto target_old = snapshot(net.target_params());
  auto online = snapshot(net.critic_params());
  const double tau = 0.01;
  polyak_update(net.target_params(), net.critic_params(), tau);
  auto target_new = net.target_params();
  size_t k = 0;
  double worst = 0.0;
  for (size_t i = 0; i < target_new.size(); ++i) {
    const auto& tn = target_new[i].values();
    for (size_t j = 0; j < tn.size(); ++j, ++k) {
      double want = (1.0 - tau) * target_old[i][j] + tau * online[i][j];
      worst = std::max(worst, std::fabs(tn[j] - want));
    }
  }
  CHECK(worst <= 1e-12);

  // Gaussian policy head with clamped log-std.
  Tensor obs = oracle::random_tensor({2, 3, 32, 32}, rng, 0.0, 1.0);
  PolicyDist d = net.dist_from_embed(net.enc.encode(obs));
  CHECK(d.kind == PolicyDist::Kind::Gaussian);
  for (double v : d.log_std.values()) {
    CHECK(v >= -10.0);
    CHECK(v <= 2.0);
  }
}

TEST_CASE("sar losses: generator required when adversarial terms active") {
  Fixture fx(31);
  auto in = fx.inputs(0.1, 0.1, 0.5, nullptr);
  CHECK_THROWS_WITH_AS(sar_losses_ppo(fx.net, nullptr, in, GradSide::None),
                       "adversarial term requested before generator initialized",
                       std::runtime_error);
  // With every coefficient at zero no generator is needed.
  auto off = fx.inputs(0.0, 0.0, 0.0, nullptr);
  CHECK_NOTHROW(sar_losses_ppo(fx.net, nullptr, off, GradSide::None));
}

TEST_CASE("sar losses: identity perturbation and exact zero gap") {
  Fixture fx(32);

  // Unmixed clean branch vs identity-stats perturbation: numeric noise only.
  auto in = fx.inputs(0.1, 0.1, 1.0, nullptr);
  SarLossBundle noise = sar_losses_ppo(fx.net, nullptr, in, GradSide::None, &identity_stats);
  CHECK(noise.l_div.item() >= 0.0);
  CHECK(noise.l_div.item() < 1e-9);
  CHECK(noise.g_critic.item() >= 0.0);
  CHECK(noise.g_critic.item() < 1e-9);

  // Identity permutation mixing + identity stats share one arithmetic path,
  // so both branches match bit for bit and the gaps are exactly zero.
  auto in_id = fx.inputs(0.1, 0.1, 1.0, &fx.perm_identity);
  SarLossBundle exact = sar_losses_ppo(fx.net, nullptr, in_id, GradSide::None, &identity_stats);
  CHECK(exact.l_div.item() == 0.0);
  CHECK(exact.g_critic.item() == 0.0);
}

TEST_CASE("sar losses: identity perturbation adds exactly nothing to critic grads") {
  Fixture fx(33);
  clear_tape();

  auto grads_with_kappa = [&](double kappa) {
    for (Tensor p : fx.net.critic_params()) p.zero_grad();
    auto in = fx.inputs(0.1, 0.1, kappa, &fx.perm_identity);
    SarLossBundle b = sar_losses_ppo(fx.net, nullptr, in, GradSide::Critic, &identity_stats);
    backward(b.critic_loss);
    std::vector<std::vector<double>> g;
    for (Tensor p : fx.net.critic_params()) g.push_back(p.raw_grad());
    return g;
  };

  auto g_on = grads_with_kappa(1.0);
  auto g_off = grads_with_kappa(0.0);
  REQUIRE(g_on.size() == g_off.size());
  for (size_t i = 0; i < g_on.size(); ++i) {
    for (size_t j = 0; j < g_on[i].size(); ++j) CHECK(g_on[i][j] == g_off[i][j]);
  }
}

TEST_CASE("sar losses: gen_loss is exactly -lambda' * l_div") {
  Fixture fx(34);
  for (double lp : {0.7, 0.01, 0.0}) {
    auto in = fx.inputs(0.3, lp, 0.2, &fx.perm_rot);
    SarLossBundle b = sar_losses_ppo(fx.net, &fx.gen, in, GradSide::None);
    CHECK(b.gen_loss.item() == -lp * b.l_div.item());
    CHECK(b.l_div.item() >= 0.0);
    CHECK(b.g_critic.item() >= 0.0);
  }
}

TEST_CASE("sar losses: zero coefficients reduce to base + mixing") {
  Fixture fx(35);
  auto in = fx.inputs(0.0, 0.0, 0.0, &fx.perm_rot);
  SarLossBundle b = sar_losses_ppo(fx.net, &fx.gen, in, GradSide::None);

  // Manual forward along the mixed clean path only.
  NoGradGuard ng;
  Tensor z = fx.net.enc.to_branch(fx.obs);
  Tensor zc = style_mix_batch(z, fx.perm_rot);
  Tensor embed = fx.net.enc.from_branch(zc);
  PolicyDist dist = fx.net.dist_from_embed(embed);
  Tensor manual_actor = ppo_actor_loss(dist.log_prob(fx.actions), fx.logp_old, fx.advantages,
                                       in.clip_eps, dist.entropy(), in.entropy_coef);
  Tensor manual_critic = ppo_critic_loss(fx.net.value_from_embed(embed), fx.value_targets);

  CHECK(b.actor_loss.item() == manual_actor.item());
  CHECK(b.critic_loss.item() == manual_critic.item());
  CHECK(b.l_div.item() == 0.0);
  CHECK(b.gen_loss.item() == 0.0);
  CHECK(b.g_critic.item() == 0.0);
}

TEST_CASE("min-max coupling: generator gradient is the negated divergence gradient") {
  Fixture fx(36);
  clear_tape();
  const double lambda = 0.37;  // lambda' == lambda

  auto in = fx.inputs(lambda, lambda, 0.0, &fx.perm_rot);

  for (Tensor p : fx.gen.params()) p.zero_grad();
  SarLossBundle b1 = sar_losses_ppo(fx.net, &fx.gen, in, GradSide::Generator);
  backward(b1.gen_loss);
  std::vector<std::vector<double>> g_gen;
  for (Tensor p : fx.gen.params()) g_gen.push_back(p.raw_grad());

  for (Tensor p : fx.gen.params()) p.zero_grad();
  SarLossBundle b2 = sar_losses_ppo(fx.net, &fx.gen, in, GradSide::Generator);
  backward(mul_scalar(b2.l_div, lambda));
  size_t idx = 0;
  bool any_nonzero = false;
  for (Tensor p : fx.gen.params()) {
    const auto& g2 = p.raw_grad();
    for (size_t j = 0; j < g2.size(); ++j) {
      CHECK(g_gen[idx][j] == -g2[j]);
      if (g2[j] != 0.0) any_nonzero = true;
    }
    ++idx;
  }
  CHECK(any_nonzero);
}

TEST_CASE("ppo ratio equals one on the first minibatch after collection") {
  Fixture fx(37);
  NoGradGuard ng;
  // Update-time forward, no mixing, same parameters as collection.
  Tensor embed = fx.net.enc.encode(fx.obs);
  PolicyDist dist = fx.net.dist_from_embed(embed);
  Tensor logp_new = dist.log_prob(fx.actions);
  for (int64_t i = 0; i < 4; ++i) {
    double ratio = std::exp(logp_new.values()[i] - fx.logp_old.values()[i]);
    CHECK(ratio == doctest::Approx(1.0).epsilon(1e-9));
  }

  // With identity-permutation mixing the branch passes through the restyle
  // arithmetic; the ratio stays 1 to float-level tolerance.
  Tensor z = fx.net.enc.to_branch(fx.obs);
  Tensor zc = style_mix_batch(z, fx.perm_identity);
  PolicyDist mixed = fx.net.dist_from_embed(fx.net.enc.from_branch(zc));
  Tensor logp_mixed = mixed.log_prob(fx.actions);
  for (int64_t i = 0; i < 4; ++i) {
    double ratio = std::exp(logp_mixed.values()[i] - fx.logp_old.values()[i]);
    CHECK(ratio == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("update step: zero lambda leaves the generator untouched") {
  Fixture fx(38);
  clear_tape();
  SarOptimizers opt{Adam(fx.net.actor_params(), 5e-4), Adam(fx.gen.params(), 5e-4),
                    Adam(fx.net.critic_params(), 5e-4)};
  auto gen_before = snapshot(fx.gen.params());
  auto actor_before = snapshot(fx.net.actor_params());

  auto in = fx.inputs(0.0, 0.0, 0.0, &fx.perm_rot);
  UpdateStats s = update_step_ppo(fx.net, &fx.gen, in, opt);
  CHECK(std::isfinite(s.actor_loss));
  CHECK(std::isfinite(s.critic_loss));
  CHECK(s.gen_loss == 0.0);

  CHECK(bitwise_equal(gen_before, fx.gen.params()));
  CHECK_FALSE(bitwise_equal(actor_before, fx.net.actor_params()));
}

TEST_CASE("update step: adam descends a quadratic stub") {
  clear_tape();
  Tensor w = Tensor::from_data({3}, {3.0, -2.0, 0.5}, true);
  Adam opt({w}, 0.05);
  auto loss_of = [&] { return mean_all(square(w)); };
  double before = loss_of().item();
  for (int i = 0; i < 5; ++i) {
    opt.zero_grad();
    backward(loss_of());
    opt.step();
  }
  {
    NoGradGuard ng;
    CHECK(loss_of().item() < before);
  }
}

TEST_CASE("update step: deterministic across identical runs") {
  auto run = [&](uint64_t seed) {
    Fixture fx(seed);
    clear_tape();
    SarOptimizers opt{Adam(fx.net.actor_params(), 5e-4), Adam(fx.gen.params(), 5e-4),
                      Adam(fx.net.critic_params(), 5e-4)};
    for (int i = 0; i < 3; ++i) {
      auto in = fx.inputs(0.1, 0.1, 0.5, &fx.perm_rot);
      update_step_ppo(fx.net, &fx.gen, in, opt);
    }
    std::vector<std::vector<double>> all;
    for (const Tensor& p : fx.net.all_params()) all.push_back(p.values());
    for (const Tensor& p : fx.gen.params()) all.push_back(p.values());
    return all;
  };
  auto a = run(40);
  auto b = run(40);
  CHECK(a == b);
  // Generator moved (lambda' > 0), so the min-max side is genuinely active.
  Fixture fresh(40);
  size_t idx = a.size() - fresh.gen.params().size();
  bool gen_moved = false;
  for (const Tensor& p : fresh.gen.params()) {
    if (a[idx++] != p.values()) gen_moved = true;
  }
  CHECK(gen_moved);
}

TEST_CASE("update step: a consumed graph cannot be replayed") {
  Fixture fx(41);
  clear_tape();
  auto in = fx.inputs(0.1, 0.1, 0.5, &fx.perm_rot);
  SarLossBundle b = sar_losses_ppo(fx.net, &fx.gen, in, GradSide::Actor);
  backward(b.actor_loss);
  CHECK_THROWS_AS(backward(b.actor_loss), std::runtime_error);
}
