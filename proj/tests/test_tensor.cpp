#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sar/tensor.hpp"
#include "support/oracles.hpp"

using namespace sar;

TEST_CASE("add: exact values and broadcasting") {
  auto a = Tensor::from_data({2}, {1, 2});
  auto b = Tensor::from_data({2}, {3, 4});
  auto c = add(a, b);
  CHECK(c.values() == std::vector<double>{4, 6});

  auto s = Tensor::from_data({1}, {1});
  auto v = Tensor::from_data({3}, {1, 2, 3});
  auto r = add(s, v);
  CHECK(r.shape() == Shape{3});
  CHECK(r.values() == std::vector<double>{2, 3, 4});
}

TEST_CASE("mul by ones is identity") {
  RngStream rng(7);
  auto x = oracle::random_tensor({3, 4}, rng);
  auto ones = Tensor::full({3, 4}, 1.0);
  CHECK(mul(x, ones).values() == x.values());
}

TEST_CASE("binary ops match explicit tiling oracle") {
  RngStream rng(11);
  Shape cases[][2] = {
      {{2, 3}, {3}},  {{4, 1}, {1, 5}}, {{2, 1, 3}, {2, 4, 3}}, {{1}, {6}},
      {{2, 2}, {2, 2}}, {{3, 1, 1}, {3, 2, 5}},
  };
  for (auto& pair : cases) {
    auto a = oracle::random_tensor(pair[0], rng);
    auto b = oracle::random_tensor(pair[1], rng, 0.5, 2.0);  // keep divisors away from 0
    auto out = div(mul(add(a, b), sub(a, b)), b);
    auto ta = oracle::tile_to(a, out.shape());
    auto tb = oracle::tile_to(b, out.shape());
    for (size_t i = 0; i < ta.size(); ++i) {
      double expect = (ta[i] + tb[i]) * (ta[i] - tb[i]) / tb[i];
      CHECK(out.values()[i] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("shape mismatch names both shapes") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({4, 5});
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2,3]"), std::invalid_argument);
  try {
    add(a, b);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("[4,5]") != std::string::npos);
  }
}

TEST_CASE("matmul: values and errors") {
  auto a = Tensor::from_data({1, 2}, {1, 2});
  auto b = Tensor::from_data({2, 1}, {3, 4});
  CHECK(matmul(a, b).values() == std::vector<double>{11});

  auto id = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  auto x = Tensor::from_data({2, 2}, {5, 6, 7, 8});
  CHECK(matmul(x, id).values() == x.values());

  CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);
  CHECK_THROWS_AS(matmul(a, Tensor::zeros({3})), std::invalid_argument);
}

TEST_CASE("conv2d: frozen examples") {
  // 1x1 all-ones kernel sums channels
  auto x = Tensor::from_data({1, 2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
  auto k1 = Tensor::full({1, 2, 1, 1}, 1.0);
  auto y = conv2d(x, k1, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(y.values() == std::vector<double>{11, 22, 33, 44});

  // 2x2 input, 2x2 ones kernel, no padding -> [[10]]
  auto x2 = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  auto k2 = Tensor::full({1, 1, 2, 2}, 1.0);
  auto y2 = conv2d(x2, k2, 1, 0);
  CHECK(y2.shape() == Shape{1, 1, 1, 1});
  CHECK(y2.values() == std::vector<double>{10});

  // padding=1 keeps 3x3 shape with a 3x3 kernel
  auto x3 = Tensor::full({2, 3, 3, 3}, 1.0);
  auto k3 = Tensor::full({4, 3, 3, 3}, 1.0);
  CHECK(conv2d(x3, k3, 1, 1).shape() == Shape{2, 4, 3, 3});

  // stride 2 halves 4x4
  auto x4 = Tensor::full({1, 1, 4, 4}, 1.0);
  auto k4 = Tensor::full({1, 1, 2, 2}, 1.0);
  CHECK(conv2d(x4, k4, 2, 0).shape() == Shape{1, 1, 2, 2});

  CHECK_THROWS_AS(conv2d(x2, Tensor::zeros({1, 2, 2, 2}), 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(conv2d(x2, Tensor::zeros({1, 1, 5, 5}), 1, 0), std::invalid_argument);
}

TEST_CASE("nonlinearities: frozen values") {
  auto x = Tensor::from_data({3}, {-1, 0, 2});
  CHECK(relu(x).values() == std::vector<double>{0, 0, 2});
  CHECK(tanh(Tensor::scalar(0)).item() == 0.0);
  CHECK(softplus(Tensor::scalar(0)).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(exp(Tensor::scalar(1)).item() == doctest::Approx(M_E).epsilon(1e-12));
  CHECK_THROWS_AS(log(Tensor::from_data({2}, {1, 0})), std::domain_error);
  CHECK_THROWS_AS(log(Tensor::from_data({1}, {-3})), std::domain_error);
}

TEST_CASE("channel_stats: values, constant channel, batch independence") {
  auto z = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  auto [mu, sig] = channel_stats(z);
  CHECK(mu.shape() == Shape{1, 1});
  CHECK(mu.item() == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(sig.item() == doctest::Approx(std::sqrt(1.25 + kEpsStat)).epsilon(1e-15));

  auto zc = Tensor::full({1, 2, 3, 3}, 7.0);
  auto [mc, sc] = channel_stats(zc);
  CHECK(mc.values()[0] == doctest::Approx(7.0));
  CHECK(sc.values()[0] == doctest::Approx(std::sqrt(kEpsStat)).epsilon(1e-12));
  CHECK(sc.values()[1] == doctest::Approx(std::sqrt(kEpsStat)).epsilon(1e-12));

  // second batch element must not bleed into the first
  RngStream rng(3);
  auto z0 = oracle::random_tensor({1, 2, 4, 4}, rng);
  std::vector<double> both = z0.values();
  auto z1 = oracle::random_tensor({1, 2, 4, 4}, rng);
  both.insert(both.end(), z1.values().begin(), z1.values().end());
  auto [m2, s2] = channel_stats(Tensor::from_data({2, 2, 4, 4}, both));
  auto [m0, s0] = channel_stats(z0);
  CHECK(m2.at({0, 0}) == m0.at({0, 0}));
  CHECK(m2.at({0, 1}) == m0.at({0, 1}));
  CHECK(s2.at({0, 0}) == s0.at({0, 0}));

  CHECK_THROWS_AS(channel_stats(Tensor::zeros({2, 3})), std::invalid_argument);
}

TEST_CASE("channel_stats matches plain statistics oracle") {
  RngStream rng(17);
  auto z = oracle::random_tensor({3, 4, 5, 6}, rng);
  auto [mu, sig] = channel_stats(z);
  for (int64_t b = 0; b < 3; ++b)
    for (int64_t c = 0; c < 4; ++c) {
      std::vector<double> chan;
      for (int64_t i = 0; i < 30; ++i) chan.push_back(z.values()[(b * 4 + c) * 30 + i]);
      CHECK(mu.at({b, c}) == doctest::Approx(oracle::mean_of(chan)).epsilon(1e-12));
      CHECK(sig.at({b, c}) ==
            doctest::Approx(std::sqrt(oracle::var_of(chan) + kEpsStat)).epsilon(1e-12));
    }
}

TEST_CASE("softmax: frozen values, normalization, shift invariance") {
  auto p = softmax_logits_to_probs(Tensor::from_data({1, 2}, {0, 0}));
  CHECK(p.values()[0] == doctest::Approx(0.5).epsilon(1e-12));

  auto q = softmax_logits_to_probs(
      Tensor::from_data({1, 2}, {std::log(1.0), std::log(3.0)}));
  CHECK(q.values()[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(q.values()[1] == doctest::Approx(0.75).epsilon(1e-12));

  RngStream rng(23);
  auto logits = oracle::random_tensor({5, 7}, rng, -30, 30);
  auto probs = softmax_logits_to_probs(logits);
  for (int64_t r = 0; r < 5; ++r) {
    double s = 0;
    for (int64_t c = 0; c < 7; ++c) s += probs.at({r, c});
    CHECK(std::fabs(s - 1.0) < 1e-9);
  }
  auto shifted = softmax_logits_to_probs(add_scalar(logits, 123.5));
  for (size_t i = 0; i < probs.values().size(); ++i)
    CHECK(probs.values()[i] == doctest::Approx(shifted.values()[i]).epsilon(1e-9));

  CHECK_THROWS_AS(
      softmax_logits_to_probs(Tensor::from_data({1, 2}, {1.0, std::nan("")})), NumericError);
  CHECK_THROWS_AS(
      softmax_logits_to_probs(Tensor::from_data({1, 1}, {INFINITY})), NumericError);
}

TEST_CASE("backward: frozen examples") {
  // d(x^2)/dx at 3 is 6
  auto x = Tensor::scalar(3, true);
  auto y = square(x);
  backward(y);
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));

  // grad of sum is ones
  auto v = Tensor::from_data({4}, {1, 2, 3, 4}, true);
  backward(sum_all(v));
  CHECK(v.grad() == std::vector<double>(4, 1.0));
}

TEST_CASE("backward: error cases") {
  auto x = Tensor::from_data({2}, {1, 2}, true);
  auto y = mul(x, x);
  CHECK_THROWS_AS(backward(y), std::invalid_argument);  // non-scalar
  auto s = sum_all(y);
  backward(s);
  CHECK_THROWS_AS(backward(s), std::runtime_error);  // tape consumed
}

TEST_CASE("backward: linearity of accumulated grads") {
  RngStream rng(5);
  auto make_loss = [](const Tensor& w) {
    return mean_all(square(sub(tanh(w), Tensor::full(w.shape(), 0.3))));
  };
  auto w = oracle::random_tensor({3, 3}, rng, -1, 1, true);

  auto l1 = make_loss(w);
  auto l2 = mean_all(exp(mul_scalar(w, 0.5)));
  backward(add(l1, l2));
  auto combined = w.grad();

  w.zero_grad();
  backward(make_loss(w));
  backward(mean_all(exp(mul_scalar(w, 0.5))));  // accumulates
  for (size_t i = 0; i < combined.size(); ++i)
    CHECK(combined[i] == doctest::Approx(w.grad()[i]).epsilon(1e-12));
}

TEST_CASE("NoGradGuard suppresses recording") {
  auto x = Tensor::from_data({2}, {1, 2}, true);
  clear_tape();
  {
    NoGradGuard ng;
    auto y = sum_all(mul(x, x));
    CHECK(tape_size() == 0);
    CHECK_THROWS_AS(backward(y), std::runtime_error);
  }
  auto y = sum_all(mul(x, x));
  CHECK(tape_size() > 0);
  backward(y);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
}

TEST_CASE("finite differences agree with autodiff across ops") {
  RngStream rng(99);
  double worst = 0.0;
  auto check = [&](Tensor& leaf, const std::function<Tensor()>& f) {
    leaf.zero_grad();
    clear_tape();
    backward(f());
    auto ad = leaf.grad();
    auto fd = oracle::fd_grad(leaf, [&] {
      NoGradGuard ng;
      return f().item();
    });
    worst = std::max(worst, oracle::max_grad_err(ad, fd));
  };

  auto a = oracle::random_tensor({3, 4}, rng, -2, 2, true);
  auto b = oracle::random_tensor({4}, rng, 0.5, 2.0, true);
  check(a, [&] { return mean_all(mul(add(a, b), sub(a, b))); });
  check(b, [&] { return mean_all(div(a, b)); });

  auto m1 = oracle::random_tensor({3, 5}, rng, -1, 1, true);
  auto m2 = oracle::random_tensor({5, 2}, rng, -1, 1, true);
  check(m1, [&] { return mean_all(square(matmul(m1, m2))); });
  check(m2, [&] { return mean_all(tanh(matmul(m1, m2))); });

  auto xc = oracle::random_tensor({2, 3, 6, 6}, rng, -1, 1, true);
  auto wc = oracle::random_tensor({4, 3, 3, 3}, rng, -0.5, 0.5, true);
  check(xc, [&] { return mean_all(square(conv2d(xc, wc, 1, 1))); });
  check(wc, [&] { return mean_all(square(conv2d(xc, wc, 2, 1))); });

  // keep relu inputs away from the kink
  auto xr = Tensor::from_data({4}, {-1.5, -0.4, 0.7, 1.2}, true);
  check(xr, [&] { return sum_all(relu(xr)); });

  auto xe = oracle::random_tensor({6}, rng, -1.5, 1.5, true);
  check(xe, [&] { return mean_all(exp(xe)); });
  check(xe, [&] { return mean_all(softplus(xe)); });
  auto xl = oracle::random_tensor({6}, rng, 0.2, 3.0, true);
  check(xl, [&] { return mean_all(log(xl)); });
  check(xl, [&] { return mean_all(sqrt(xl)); });

  auto xs = oracle::random_tensor({3, 5}, rng, -2, 2, true);
  check(xs, [&] { return mean_all(square(softmax_logits_to_probs(xs))); });
  check(xs, [&] { return mean_all(square(log_softmax_lastdim(xs))); });
  check(xs, [&] { return mean_all(take_per_row(log_softmax_lastdim(xs), {4, 0, 2})); });

  auto xz = oracle::random_tensor({2, 3, 4, 4}, rng, -2, 2, true);
  check(xz, [&] {
    auto [mu, sig] = channel_stats(xz);
    return mean_all(add(square(mu), sig));
  });
  check(xz, [&] { return mean_all(avg_pool2x2(xz)); });
  check(xz, [&] { return mean_all(square(reduce_mean(xz, {1, 3}, false))); });
  check(xz, [&] { return mean_all(square(reduce_sum(xz, {0, 2}, true))); });
  check(xz, [&] { return mean_all(square(reshape(xz, {8, 12}))); });
  check(xz, [&] { return mean_all(square(broadcast_to(reduce_mean(xz, {2, 3}, true),
                                                      {2, 3, 4, 4}))); });

  auto ca = oracle::random_tensor({4, 3}, rng, -1, 1, true);
  auto cb = oracle::random_tensor({4, 2}, rng, -1, 1, true);
  check(ca, [&] { return mean_all(square(concat_lastdim(ca, cb))); });
  check(cb, [&] { return mean_all(tanh(concat_lastdim(ca, cb))); });

  // min/clip: nudge away from ties and boundaries
  auto pa = Tensor::from_data({4}, {0.3, -0.9, 1.4, -0.2}, true);
  auto pb = Tensor::from_data({4}, {0.8, -1.5, 0.2, 0.4}, true);
  check(pa, [&] { return mean_all(min_elementwise(pa, pb)); });
  check(pb, [&] { return mean_all(min_elementwise(pa, pb)); });
  auto pc = Tensor::from_data({5}, {0.5, 1.4, 0.9, 1.9, 0.1}, true);
  check(pc, [&] { return mean_all(mul(clip(pc, 0.8, 1.2), pc)); });

  CHECK(worst < 1e-4);
  MESSAGE("max relative grad error: " << worst);
}

TEST_CASE("instance-normalized maps have unit stats") {
  RngStream rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    auto z = oracle::random_tensor({2, 3, 8, 8}, rng, -2, 2);
    auto [mu, sig] = channel_stats(z);
    int64_t b = z.dim(0), c = z.dim(1);
    auto zn = div(sub(z, reshape(mu, {b, c, 1, 1})), reshape(sig, {b, c, 1, 1}));
    auto [mun, sign] = channel_stats(zn);
    for (double m : mun.values()) CHECK(std::fabs(m) < 1e-6);
    for (double s : sign.values()) CHECK(std::fabs(s - 1.0) < 1e-4);
  }
}

TEST_CASE("reductions and reshape keep exact element identities") {
  auto x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(sum_all(x).item() == 21.0);
  CHECK(mean_all(x).item() == 3.5);
  auto rs = reduce_sum(x, {0}, false);
  CHECK(rs.shape() == Shape{3});
  CHECK(rs.values() == std::vector<double>{5, 7, 9});
  auto rm = reduce_mean(x, {1}, true);
  CHECK(rm.shape() == Shape{2, 1});
  CHECK(rm.values() == std::vector<double>{2, 5});
  CHECK(reshape(x, {3, 2}).values() == x.values());
  CHECK_THROWS_AS(reshape(x, {4, 2}), std::invalid_argument);
  CHECK_THROWS_AS(reduce_sum(x, {2}, false), std::invalid_argument);

  auto mx = max_lastdim_detached(x);
  CHECK(mx.values() == std::vector<double>{3, 6});
  CHECK_FALSE(mx.requires_grad());
}

TEST_CASE("take_per_row bounds checking") {
  auto x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(take_per_row(x, {2, 0}).values() == std::vector<double>{3, 4});
  CHECK_THROWS_AS(take_per_row(x, {3, 0}), std::out_of_range);
  CHECK_THROWS_AS(take_per_row(x, {0}), std::invalid_argument);
}
