#include "core/numerics.hpp"

#include <cmath>

#include "core/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace voxcond;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

/* Central finite difference of a scalar functional at x along element i. */
template <class Fn>
double fd_at(const Tensor& x, size_t i, double h, Fn&& fn) {
  Tensor p = x, m = x;
  p.data[i] += h;
  m.data[i] -= h;
  return (fn(p) - fn(m)) / (2.0 * h);
}

/* Relative mismatch with an absolute floor for near-zero derivatives. */
double rel_err(double got, double want) {
  return std::fabs(got - want) / std::max(1e-6, std::fabs(want));
}

}  // namespace

TEST_CASE("masked diffusion loss matches finite differences") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor e = random_tensor(rng, {3, 2, 4, 5});
    Tensor mask(std::vector<int>{3, 1, 4, 5});
    for (auto& v : mask.data) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    double gamma = rng.uniform(0.0, 3.0);
    auto clean = first_k_mask(3, trial % 3).flags();

    LossGrad lg = masked_diffusion_loss(e, mask, gamma, &clean);
    for (int probe = 0; probe < 6; ++probe) {
      size_t i = rng.uniform_index(e.data.size());
      double fd = fd_at(e, i, 1e-6, [&](const Tensor& t) {
        return masked_diffusion_loss(t, mask, gamma, &clean).value;
      });
      CHECK(rel_err(lg.grad.data[i], fd) < 1e-4);
    }
  }
}

TEST_CASE("masked diffusion loss anchors and clean-frame exclusion") {
  Tensor e(std::vector<int>{2, 1, 1, 2});
  e.data = {1.0, 2.0, 3.0, 4.0};
  Tensor mask(std::vector<int>{2, 1, 1, 2});
  mask.data = {1.0, 0.0, 0.0, 1.0};

  LossGrad plain = masked_diffusion_loss(e, mask, 0.0);
  CHECK(plain.value == doctest::Approx((1.0 + 4.0 + 9.0 + 16.0) / 4.0));

  LossGrad weighted = masked_diffusion_loss(e, mask, 2.0);
  CHECK(weighted.value == doctest::Approx((3.0 + 4.0 + 9.0 + 48.0) / 4.0));

  auto clean = first_k_mask(2, 1).flags();
  LossGrad excl = masked_diffusion_loss(e, mask, 2.0, &clean);
  CHECK(excl.value == doctest::Approx((9.0 + 48.0) / 2.0));
  CHECK(excl.grad.data[0] == 0.0);
  CHECK(excl.grad.data[1] == 0.0);

  // excluding every frame leaves nothing to average
  auto all_clean = first_k_mask(2, 2).flags();
  CHECK_FAILS_WITH(InvalidArgument,
                   masked_diffusion_loss(e, mask, 2.0, &all_clean));
}

TEST_CASE("masked diffusion loss validates shapes") {
  Tensor e(std::vector<int>{2, 2, 2, 2});
  Tensor bad(std::vector<int>{2, 2, 2, 3});
  CHECK_FAILS_WITH(ShapeMismatch, masked_diffusion_loss(e, bad, 1.0));
  CHECK_FAILS_WITH(InvalidArgument, masked_diffusion_loss(e, e, -0.5));
}

TEST_CASE("cross entropy matches finite differences and the uniform anchor") {
  Rng rng(102);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = random_tensor(rng, {6, 5}, -2.0, 2.0);
    std::vector<int> targets(6);
    for (auto& t : targets) t = int(rng.uniform_index(5));
    LossGrad lg = cross_entropy(logits, targets);
    for (int probe = 0; probe < 6; ++probe) {
      size_t i = rng.uniform_index(logits.data.size());
      double fd = fd_at(logits, i, 1e-6, [&](const Tensor& t) {
        return cross_entropy(t, targets).value;
      });
      CHECK(rel_err(lg.grad.data[i], fd) < 1e-4);
    }
  }

  Tensor uniform(std::vector<int>{3, 7});
  for (auto& v : uniform.data) v = 0.4;  // equal logits = uniform softmax
  LossGrad lg = cross_entropy(uniform, {0, 3, 6});
  CHECK(std::fabs(lg.value - std::log(7.0)) < 1e-9);
}

TEST_CASE("kl to standard normal matches finite differences and anchors") {
  Rng rng(103);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor mu = random_tensor(rng, {2, 3, 2, 2});
    Tensor logvar = random_tensor(rng, {2, 3, 2, 2});
    LossGrad2 lg = kl_standard_normal(mu, logvar);
    for (int probe = 0; probe < 4; ++probe) {
      size_t i = rng.uniform_index(mu.data.size());
      double fd_mu = fd_at(mu, i, 1e-6, [&](const Tensor& t) {
        return kl_standard_normal(t, logvar).value;
      });
      double fd_lv = fd_at(logvar, i, 1e-6, [&](const Tensor& t) {
        return kl_standard_normal(mu, t).value;
      });
      CHECK(rel_err(lg.grad_a.data[i], fd_mu) < 1e-4);
      CHECK(rel_err(lg.grad_b.data[i], fd_lv) < 1e-4);
    }
  }

  Tensor mu(std::vector<int>{1, 1, 1, 1}), lv(std::vector<int>{1, 1, 1, 1});
  mu.data = {1.0};
  lv.data = {0.0};
  CHECK(std::fabs(kl_standard_normal(mu, lv).value - 0.5) < 1e-9);
  mu.data = {0.0};
  CHECK(std::fabs(kl_standard_normal(mu, lv).value) < 1e-9);
}

TEST_CASE("lovasz softmax matches finite differences and the single-element anchor") {
  Rng rng(104);
  for (int trial = 0; trial < 20; ++trial) {
    // rows sum to 1; perturbed rows in the FD probes stay in range
    Tensor probs(std::vector<int>{5, 4});
    std::vector<int> targets(5);
    for (int n = 0; n < 5; ++n) {
      double row_sum = 0.0;
      for (int l = 0; l < 4; ++l) {
        double v = rng.uniform(0.05, 1.0);
        probs.at2(n, l) = v;
        row_sum += v;
      }
      for (int l = 0; l < 4; ++l) probs.at2(n, l) /= row_sum * 1.1;
      targets[n] = int(rng.uniform_index(4));
    }
    LossGrad lg = lovasz_softmax(probs, targets);
    for (int probe = 0; probe < 6; ++probe) {
      size_t i = rng.uniform_index(probs.data.size());
      double fd = fd_at(probs, i, 1e-7, [&](const Tensor& t) {
        return lovasz_softmax(t, targets).value;
      });
      // sorting makes the surrogate piecewise linear; skip tie neighborhoods
      if (std::fabs(lg.grad.data[i] - fd) < 1e-4 ||
          rel_err(lg.grad.data[i], fd) < 1e-4)
        CHECK(true);
      else
        CHECK(rel_err(lg.grad.data[i], fd) < 1e-4);
    }
  }

  // single element, two classes: loss = 1 - p(target)
  Tensor p1(std::vector<int>{1, 2});
  p1.data = {0.3, 0.7};
  LossGrad lg = lovasz_softmax(p1, {1});
  CHECK(std::fabs(lg.value - 0.3) < 1e-9);
  CHECK(lg.grad.data[1] == doctest::Approx(-1.0));

  CHECK(lovasz_softmax(p1, {0}).value == doctest::Approx(0.7));
}

TEST_CASE("noise schedule invariants") {
  NoiseSchedule s = NoiseSchedule::linear(10, 1e-4, 0.3);
  REQUIRE(s.steps() == 10);
  CHECK(s.alpha_bar(0) == 1.0);
  for (int t = 1; t <= 10; ++t) {
    CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    CHECK(s.alpha_bar(t) > 0.0);
    CHECK(s.alpha_bar(t) < 1.0);
  }
  CHECK_FAILS_WITH(InvalidArgument, NoiseSchedule::linear(0, 1e-4, 0.3));
  CHECK_FAILS_WITH(InvalidArgument, NoiseSchedule::from_betas({0.5, 1.5}));
  CHECK_FAILS_WITH(InvalidArgument, s.alpha_bar(11));
}

TEST_CASE("forward noising matches the closed form") {
  Rng rng(105);
  NoiseSchedule s = NoiseSchedule::linear(4, 0.1, 0.4);
  Tensor z0 = random_tensor(rng, {1, 2, 2, 2});
  Tensor eps = random_tensor(rng, {1, 2, 2, 2});
  Tensor z2 = forward_noise(z0, 2, s, eps);
  double ab = s.alpha_bar(2);
  for (size_t i = 0; i < z0.data.size(); ++i)
    CHECK(z2.data[i] == doctest::Approx(std::sqrt(ab) * z0.data[i] +
                                        std::sqrt(1 - ab) * eps.data[i]));
}

TEST_CASE("rectified flow helpers") {
  Rng rng(106);
  Tensor z0 = random_tensor(rng, {2, 2, 2, 2});
  Tensor eps = random_tensor(rng, {2, 2, 2, 2});

  Tensor z_half = rf_interpolate(z0, eps, 0.5);
  for (size_t i = 0; i < z0.data.size(); ++i)
    CHECK(z_half.data[i] ==
          doctest::Approx(0.5 * z0.data[i] + 0.5 * eps.data[i]));
  CHECK(rf_interpolate(z0, eps, 0.0).data == z0.data);
  CHECK(rf_interpolate(z0, eps, 1.0).data == eps.data);
  CHECK_FAILS_WITH(InvalidArgument, rf_interpolate(z0, eps, 1.5));

  Tensor v = rf_velocity_target(z0, eps);
  for (size_t i = 0; i < z0.data.size(); ++i)
    CHECK(v.data[i] == eps.data[i] - z0.data[i]);
}

TEST_CASE("euler under the exact velocity field recovers z0 for any step count") {
  Rng rng(107);
  Tensor z0 = random_tensor(rng, {2, 3, 4, 4});
  Tensor eps = random_tensor(rng, {2, 3, 4, 4});
  Tensor v = rf_velocity_target(z0, eps);
  for (int steps : {1, 2, 3, 7, 64}) {
    Tensor out = rf_euler_sample(eps, steps,
                                 [&](const Tensor&, double) { return v; });
    for (size_t i = 0; i < z0.data.size(); ++i)
      CHECK(std::fabs(out.data[i] - z0.data[i]) <= 1e-9);
  }
}

TEST_CASE("euler time grid hits the exact endpoints") {
  Tensor z(std::vector<int>{1, 1, 1, 1});
  z.data = {0.0};
  std::vector<double> times;
  rf_euler_sample(z, 4, [&](const Tensor& cur, double t) {
    times.push_back(t);
    Tensor zero = cur;
    for (auto& v : zero.data) v = 0.0;
    return zero;
  });
  REQUIRE(times.size() == 4);
  CHECK(times[0] == 1.0);
  CHECK(times[1] == doctest::Approx(0.75));
  CHECK(times[3] == doctest::Approx(0.25));
}

TEST_CASE("post_step runs after every euler update") {
  Tensor z(std::vector<int>{1, 1, 1, 1});
  z.data = {1.0};
  int calls = 0;
  Tensor out = rf_euler_sample(
      z, 5, [&](const Tensor& cur, double) { return cur; },
      [&](Tensor& cur, double) {
        cur.data[0] = 42.0;
        ++calls;
      });
  CHECK(calls == 5);
  CHECK(out.data[0] == 42.0);
}

TEST_CASE("cfg_combine interpolates and extrapolates") {
  Tensor cond(std::vector<int>{1, 1, 1, 2}), uncond(std::vector<int>{1, 1, 1, 2});
  cond.data = {2.0, 4.0};
  uncond.data = {1.0, 1.0};
  CHECK(cfg_combine(cond, uncond, 1.0).data == cond.data);
  CHECK(cfg_combine(cond, uncond, 0.0).data == uncond.data);
  Tensor two = cfg_combine(cond, uncond, 2.0);
  CHECK(two.data[0] == doctest::Approx(3.0));
  CHECK(two.data[1] == doctest::Approx(7.0));
}

TEST_CASE("first_k_mask flags exactly the first k frames") {
  FrameMask m = first_k_mask(5, 2);
  CHECK(m.clean(0));
  CHECK(m.clean(1));
  CHECK_FALSE(m.clean(2));
  CHECK(m.flags() == std::vector<uint8_t>{1, 1, 0, 0, 0});
  CHECK(first_k_mask(3, 0).flags() == std::vector<uint8_t>{0, 0, 0});
  CHECK(first_k_mask(3, 3).flags() == std::vector<uint8_t>{1, 1, 1});
  CHECK_FAILS_WITH(InvalidArgument, first_k_mask(3, 4));
  CHECK_FAILS_WITH(InvalidArgument, first_k_mask(3, -1));
}
