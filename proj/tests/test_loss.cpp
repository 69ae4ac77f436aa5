#include <doctest.h>

#include <cmath>
#include <functional>

#include "autodiff/ops.hpp"
#include "loss/contrastive.hpp"
#include "profile/attention_pool.hpp"
#include "support/gradcheck.hpp"
#include "util/error.hpp"

using namespace cellclip;
using namespace cellclip::loss;
using ad::Tensor64;

namespace {

Tensor64 unit_rows(Rng& rng, std::size_t n, std::size_t d, bool grad = false) {
  std::vector<double> v(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      v[i * d + j] = rng.normal();
      ss += v[i * d + j] * v[i * d + j];
    }
    for (std::size_t j = 0; j < d; ++j) v[i * d + j] /= std::sqrt(ss);
  }
  return Tensor64::leaf({n, d}, std::move(v), grad);
}

std::vector<double> dots(const Tensor64& p, const Tensor64& q) {
  const std::size_t n = p.rows(), m = q.rows(), d = p.cols();
  std::vector<double> s(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < d; ++k) s[i * m + j] += p.at(i, k) * q.at(j, k);
  return s;
}

// Independent cross-entropy oracle over an explicit logit table.
double soft_ce(const std::vector<double>& logits, const std::vector<double>& weights, std::size_t n,
               bool by_column) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto at = [&](std::size_t j) { return by_column ? logits[j * n + i] : logits[i * n + j]; };
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, at(j));
    double lse = 0.0;
    for (std::size_t j = 0; j < n; ++j) lse += std::exp(at(j) - mx);
    lse = mx + std::log(lse);
    double wsum = 0.0, acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      wsum += weights[i * n + j];
      acc += weights[i * n + j] * (at(j) - lse);
    }
    total += -acc / wsum;
  }
  return total / static_cast<double>(n);
}

WeightMatrix identity_weights(std::size_t n) {
  WeightMatrix w{n, std::vector<double>(n * n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) w.w[i * n + i] = 1.0;
  return w;
}

WeightMatrix random_weights(Rng& rng, std::size_t n) {
  WeightMatrix w{n, std::vector<double>(n * n, 1.0)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) w.w[i * n + j] = w.w[j * n + i] = rng.uniform();
  return w;
}

profile::PooledProfile pooled(Rng& rng, std::size_t c, std::size_t d) {
  std::vector<float> v(c * d);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return {"x", c, d, std::move(v), std::nullopt};
}

Tensor64 scalar(double v) { return Tensor64::scalar(v); }

}  // namespace

TEST_SUITE("loss") {

TEST_CASE("logit scale") {
  LogitScale<float> s(kDefaultLogitScale);
  CHECK(s.value() == doctest::Approx(14.3).epsilon(1e-6));
  CHECK(s.factor().item() == doctest::Approx(14.3).epsilon(1e-6));
  LogitScale<double> d(kDefaultLogitScale, ScaleMode::divisor);
  CHECK(d.factor().item() == doctest::Approx(1.0 / 14.3).epsilon(1e-12));
  CHECK_THROWS_AS(LogitScale<float>(0.0), Error);
  CHECK_THROWS_AS(LogitScale<float>(101.0), Error);

  LogitScale<double> big(99.0);
  auto theta = big.parameter().var;
  theta.mutable_value()[0] = 10.0;
  CHECK(big.value() == 100.0);
  CHECK(big.factor().item() == 100.0);
  big.clamp();
  CHECK(theta.item() == doctest::Approx(std::log(100.0)).epsilon(1e-12));
}

TEST_CASE("clip loss examples") {
  Rng rng(1);
  auto one_p = unit_rows(rng, 1, 4), one_q = unit_rows(rng, 1, 4);
  CHECK(clip_loss(one_p, one_q, scalar(14.3)).item() == 0.0);

  for (std::size_t n : {2u, 5u}) {
    std::vector<double> p(n * 3), q(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
      p[i * 3] = 1.0;
      q[i * 3 + 1] = 0.6;
      q[i * 3 + 2] = 0.8;
    }
    auto loss = clip_loss(Tensor64::leaf({n, 3}, p), Tensor64::leaf({n, 3}, q), scalar(14.3));
    CHECK(loss.item() == doctest::Approx(2.0 * std::log(double(n))).epsilon(1e-12));
  }

  // N=2 by hand: p0=(1,0), p1=(0,1), q0=(0.6,0.8), q1=(1,0), scale 2.
  auto p = Tensor64::leaf({2, 2}, {1, 0, 0, 1});
  auto q = Tensor64::leaf({2, 2}, {0.6, 0.8, 1, 0});
  // logits: [[1.2, 2], [1.6, 0]]
  const double u2v = 0.5 * (-(1.2 - std::log(std::exp(1.2) + std::exp(2.0))) -
                            (0.0 - std::log(std::exp(1.6) + std::exp(0.0))));
  const double v2u = 0.5 * (-(1.2 - std::log(std::exp(1.2) + std::exp(1.6))) -
                            (0.0 - std::log(std::exp(2.0) + std::exp(0.0))));
  CHECK(clip_loss_u2v(p, q, scalar(2)).item() == doctest::Approx(u2v).epsilon(1e-12));
  CHECK(clip_loss_v2u(p, q, scalar(2)).item() == doctest::Approx(v2u).epsilon(1e-12));
  CHECK(clip_loss(p, q, scalar(2)).item() == doctest::Approx(u2v + v2u).epsilon(1e-12));

  auto bad = Tensor64::leaf({2, 2}, {2, 0, 0, 1});
  CHECK_THROWS_AS(clip_loss(bad, q, scalar(2)), Error);
  CHECK_THROWS_AS(clip_loss(p, unit_rows(rng, 3, 2), scalar(2)), Error);
}

TEST_CASE("cwcl weights examples") {
  Rng rng(2);
  auto a = pooled(rng, 2, 3);
  std::vector<profile::PooledProfile> same{a, a, a};
  auto w = cwcl_weights(same);
  for (double v : w.w) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_NOTHROW(w.validate());

  std::vector<profile::PooledProfile> orth{
      {"a", 2, 3, {1, 0, 0, 1, 0, 0}, std::nullopt},
      {"b", 2, 3, {0, 1, 0, 0, 1, 0}, std::nullopt},
      {"c", 2, 3, {0, 0, 1, 0, 0, 1}, std::nullopt}};
  auto wo = cwcl_weights(orth);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(wo.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.5).epsilon(1e-12));

  std::vector<profile::PooledProfile> four{pooled(rng, 3, 5), pooled(rng, 3, 5), pooled(rng, 3, 5),
                                           pooled(rng, 3, 5)};
  auto w4 = cwcl_weights(four);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double sum_cos = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        double ab = 0, aa = 0, bb = 0;
        for (std::size_t k = 0; k < 5; ++k) {
          const double x = four[i].values[c * 5 + k], y = four[j].values[c * 5 + k];
          ab += x * y;
          aa += x * x;
          bb += y * y;
        }
        sum_cos += ab / std::sqrt(aa * bb);
      }
      CHECK(w4.at(i, j) == doctest::Approx(sum_cos / 6.0 + 0.5).epsilon(1e-9));
    }
  }
  CHECK_NOTHROW(w4.validate());
  WeightMatrix asym{2, {1, 0.3, 0.4, 1}};
  CHECK_THROWS_AS(asym.validate(), Error);
}

TEST_CASE("cwcl loss examples") {
  Rng rng(3);
  auto p = unit_rows(rng, 4, 5), q = unit_rows(rng, 4, 5);
  CHECK(cwcl_loss(p, q, identity_weights(4), scalar(14.3)).item() ==
        clip_loss_u2v(p, q, scalar(14.3)).item());

  std::vector<double> e(4 * 2, 0.0);
  for (std::size_t i = 0; i < 4; ++i) e[i * 2] = 1.0;
  auto flat = Tensor64::leaf({4, 2}, e);
  WeightMatrix ones{4, std::vector<double>(16, 1.0)};
  CHECK(cwcl_loss(flat, flat, ones, scalar(5)).item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // 3×3 by hand with scale 1 so the logits are the raw dot products.
  auto p3 = Tensor64::leaf({3, 2}, {1, 0, 0, 1, 0.6, 0.8});
  auto q3 = Tensor64::leaf({3, 2}, {0, 1, 0.8, 0.6, 1, 0});
  WeightMatrix w3{3, {1, 0.2, 0.7, 0.2, 1, 0.4, 0.7, 0.4, 1}};
  // logits rows: [0, .8, 1], [1, .6, 0], [.8, .96, .6]
  const double r0 = std::log(std::exp(0.0) + std::exp(0.8) + std::exp(1.0));
  const double r1 = std::log(std::exp(1.0) + std::exp(0.6) + std::exp(0.0));
  const double r2 = std::log(std::exp(0.8) + std::exp(0.96) + std::exp(0.6));
  const double l0 = -(1 * (0 - r0) + 0.2 * (0.8 - r0) + 0.7 * (1 - r0)) / 1.9;
  const double l1 = -(0.2 * (1 - r1) + 1 * (0.6 - r1) + 0.4 * (0 - r1)) / 1.6;
  const double l2 = -(0.7 * (0.8 - r2) + 0.4 * (0.96 - r2) + 1 * (0.6 - r2)) / 2.1;
  CHECK(cwcl_loss(p3, q3, w3, scalar(1)).item() == doctest::Approx((l0 + l1 + l2) / 3).epsilon(1e-12));

  WeightMatrix zero_row{3, {0, 0, 0, 0, 1, 0, 0, 0, 1}};
  CHECK_THROWS_AS(cwcl_loss(p3, q3, zero_row, scalar(1)), Error);
  CHECK_THROWS_AS(cwcl_loss(p3, q3, identity_weights(2), scalar(1)), Error);
}

TEST_CASE("total loss examples") {
  Rng rng(4);
  auto p = unit_rows(rng, 4, 6), q = unit_rows(rng, 4, 6);
  CHECK(total_loss(p, q, identity_weights(4), scalar(14.3)).item() ==
        clip_loss(p, q, scalar(14.3)).item());
  auto p1 = unit_rows(rng, 1, 6), q1 = unit_rows(rng, 1, 6);
  CHECK(total_loss(p1, q1, identity_weights(1), scalar(14.3)).item() == 0.0);

  auto w = random_weights(rng, 4);
  auto logits = dots(p, q);
  for (auto& v : logits) v *= 14.3;
  auto eye = identity_weights(4).w;
  const double expect = soft_ce(logits, w.w, 4, false) + soft_ce(logits, eye, 4, true);
  CHECK(total_loss(p, q, w, scalar(14.3)).item() == doctest::Approx(expect).epsilon(1e-11));
}

TEST_CASE("sigmoid pair loss examples") {
  auto x = Tensor64::leaf({1, 2}, {1, 0});
  CHECK(sigmoid_pair_loss(x, x, scalar(10), scalar(-10)).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Positive logit grows with the scale while no negatives exist.
  double prev = INFINITY;
  for (double s : {0.5, 1.0, 2.0, 4.0}) {
    const double l = sigmoid_pair_loss(x, x, scalar(s), scalar(0)).item();
    CHECK(l < prev);
    prev = l;
  }

  // 2×2 hand: p=(1,0),(0,1); q=(0.6,0.8),(1,0); scale 2, bias -1 -> logits [[.2, 1], [.6, -1]].
  auto p = Tensor64::leaf({2, 2}, {1, 0, 0, 1});
  auto q = Tensor64::leaf({2, 2}, {0.6, 0.8, 1, 0});
  auto ls = [](double z) { return -std::log1p(std::exp(-z)); };
  const double expect = -(ls(0.2) + ls(-1.0) + ls(-0.6) + ls(-1.0)) / 2.0;
  CHECK(sigmoid_pair_loss(p, q, scalar(2), scalar(-1)).item() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("losses are non-negative and permutation equivariant") {
  Rng rng(5);
  for (int t = 0; t < 25; ++t) {
    const std::size_t n = 1 + rng.below(6), d = 2 + rng.below(5);
    auto p = unit_rows(rng, n, d), q = unit_rows(rng, n, d);
    auto w = random_weights(rng, n);
    const double s = 0.5 + 20 * rng.uniform();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm.begin(), perm.end());
    auto pp = ad::gather_rows(p, std::span<const std::size_t>(perm));
    auto qp = ad::gather_rows(q, std::span<const std::size_t>(perm));
    WeightMatrix wp{n, std::vector<double>(n * n)};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) wp.w[i * n + j] = w.at(perm[i], perm[j]);

    const double c = clip_loss(p, q, scalar(s)).item();
    const double cw = cwcl_loss(p, q, w, scalar(s)).item();
    CHECK(c >= 0.0);
    CHECK(cw >= 0.0);
    CHECK(std::abs(c - clip_loss(pp, qp, scalar(s)).item()) < 1e-6);
    CHECK(std::abs(cw - cwcl_loss(pp, qp, wp, scalar(s)).item()) < 1e-6);
    CHECK(std::abs(total_loss(p, q, w, scalar(s)).item() - total_loss(pp, qp, wp, scalar(s)).item()) < 1e-6);
    CHECK(std::abs(sigmoid_pair_loss(p, q, scalar(s), scalar(-3)).item() -
                   sigmoid_pair_loss(pp, qp, scalar(s), scalar(-3)).item()) < 1e-6);
  }
}

TEST_CASE("loss gradients match finite differences on N=3, dim=4") {
  enum Kind { kClip, kCwcl, kTotal, kSigmoid };
  Rng rng(6);
  auto w = random_weights(rng, 3);
  for (Kind kind : {kClip, kCwcl, kTotal, kSigmoid}) {
    // Raw rows go through l2_normalize so perturbations stay on the sphere.
    auto raw64_p = unit_rows(rng, 3, 4, true), raw64_q = unit_rows(rng, 3, 4, true);
    auto theta64 = Tensor64::scalar(std::log(3.0), true);
    auto bias64 = Tensor64::scalar(-1.5, true);
    auto to32 = [](const Tensor64& x) {
      std::vector<float> v(x.value().begin(), x.value().end());
      return ad::Tensor::leaf(x.shape(), v, true);
    };
    auto raw32_p = to32(raw64_p), raw32_q = to32(raw64_q), theta32 = to32(theta64), bias32 = to32(bias64);
    auto to64 = [](const ad::Tensor& x) {
      return Tensor64::leaf(x.shape(), std::vector<double>(x.value().begin(), x.value().end()), true);
    };
    raw64_p = to64(raw32_p);
    raw64_q = to64(raw32_q);
    theta64 = to64(theta32);
    bias64 = to64(bias32);

    auto build = [&](auto p, auto q, auto theta, auto bias) {
      auto np = ad::l2_normalize_rows(p), nq = ad::l2_normalize_rows(q);
      auto f = ad::exp(theta);
      switch (kind) {
        case kClip: return clip_loss(np, nq, f);
        case kCwcl: return cwcl_loss(np, nq, w, f);
        case kTotal: return total_loss(np, nq, w, f);
        default: return sigmoid_pair_loss(np, nq, f, bias);
      }
    };
    std::function<Tensor64()> f64 = [&] { return build(raw64_p, raw64_q, theta64, bias64); };
    std::function<ad::Tensor()> f32 = [&] { return build(raw32_p, raw32_q, theta32, bias32); };
    std::vector<Tensor64> v64{raw64_p, raw64_q, theta64};
    std::vector<ad::Tensor> v32{raw32_p, raw32_q, theta32};
    if (kind == kSigmoid) {
      v64.push_back(bias64);
      v32.push_back(bias32);
    }
    auto fd = testing::numeric_gradients(f64, v64, 1e-5);
    INFO("loss kind " << int(kind));
    CHECK(testing::compare(testing::analytic_gradients(f64, v64), fd).worst < 1e-5);
    CHECK(testing::compare(testing::analytic_gradients(f32, v32), fd).worst < 1e-3);
  }
}

TEST_CASE("soft weights carry no gradient") {
  Rng rng(7);
  profile::GatedAttentionPool<double> pool(2, 3, {4, false}, rng);
  for (auto& p : pool.parameters())
    for (auto& x : p.var.mutable_value()) x = 0.5 * rng.normal();
  std::vector<profile::InstanceBag> bags;
  for (int b = 0; b < 3; ++b) {
    profile::InstanceBag bag{"p" + std::to_string(b), {}};
    for (int k = 0; k < 3; ++k) {
      auto pr = pooled(rng, 2, 3);
      bag.instances.push_back({"i", 2, 3, pr.values});
    }
    bags.push_back(bag);
  }
  auto q = unit_rows(rng, 3, 6);
  auto run = [&](const WeightMatrix* cached) {
    std::vector<Tensor64> rows;
    std::vector<profile::PooledProfile> plain;
    for (const auto& bag : bags) {
      auto out = pool.forward(bag);
      rows.push_back(ad::reshape(out.pooled, {1, 6}));
      plain.push_back({bag.perturbation_id, 2, 3,
                       std::vector<float>(out.pooled.value().begin(), out.pooled.value().end()),
                       std::nullopt});
    }
    const auto w = cached ? *cached : cwcl_weights(plain);
    auto p = ad::l2_normalize_rows(ad::concat_rows<double>(rows));
    auto params = testing::vars_of(pool.parameters());
    std::function<Tensor64()> f = [&] { return cwcl_loss(p, q, w, scalar(5)); };
    return std::make_pair(testing::analytic_gradients(f, params), w);
  };
  auto [fresh, w] = run(nullptr);
  auto [cached, w2] = run(&w);
  CHECK(fresh == cached);
  const std::vector<profile::PooledProfile> none;
  CHECK_THROWS_AS(cwcl_weights(none), Error);
}

}  // TEST_SUITE
