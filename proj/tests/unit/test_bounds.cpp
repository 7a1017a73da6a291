#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ssg/bounds.hpp"
#include "ssg/errors.hpp"
#include "ssg/quad.hpp"
#include "ssg/series.hpp"

using namespace ssg;

namespace {

ModelParams half_alpha() {
  ModelParams p;
  p.m = 0.0;
  p.hbar = 1.0;
  p.a = std::sqrt(2.0 * std::numbers::pi);  // alpha = 1/2
  p.mu = 1.0;
  p.T = -1.0;
  return p;
}

BoundInputs inputs(const ModelParams& p, double cQ = 1.5, double K = 0.3) {
  BoundInputs in;
  in.params = p;
  in.cQ = cQ;
  in.K = K;
  in.g = single_bump(0.0, 0.0, 0.3);
  return in;
}

}  // namespace

TEST(Bounds, CqTrivialCases) {
  ModelParams p;
  p.T = 2.0;  // switch-on after the whole diamond: Q vanishes on it
  EXPECT_EQ(c_q_constant(QKernel::massless(p), 1.0, 1.0), 1.0);
  p.T = -1.0;
  EXPECT_EQ(c_q_constant(QKernel::massless(p), 0.0, 1.0), 1.0);
  const double c1 = c_q_constant(QKernel::massless(p), 1.0, 0.5);
  const double c2 = c_q_constant(QKernel::massless(p), 1.0, 1.0);
  const double c3 = c_q_constant(QKernel::massless(p), 1.5, 1.0);
  EXPECT_GE(c1, 1.0);
  EXPECT_LE(c1, c2);
  EXPECT_LE(c2, c3);
}

TEST(Bounds, CqSharpCutoffMatchesClosedFormScan) {
  ModelParams p;
  p.T = 0.0;
  p.rampWidth = 1e-4;
  const double cq = c_q_constant(QKernel::massless(p), 1.0, 1.0);
  // scan the sharp closed form over the same grid; the maximum sits at the top corner
  double mx = 0.0;
  const int grid = 17;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      const auto z = SpacetimePoint::from_null(-1.0 + 2.0 * i / (grid - 1), -1.0 + 2.0 * j / (grid - 1));
      mx = std::max(mx, covariance_q0_sharp(z, z, 0.0));
    }
  EXPECT_NEAR(mx, covariance_q0_sharp({1.0, 0.0}, {1.0, 0.0}, 0.0), 1e-12);
  EXPECT_NEAR(cq, std::exp(0.5 * mx), 1e-3 * cq);
}

TEST(Bounds, CqFromTableNeedsCoverage) {
  ModelParams p;
  p.m = 1.0;
  p.mu = 0.5;
  const QTable t = build_q_table(p, 8, 8);
  EXPECT_THROW(c_q_constant(t, 1.0, 1.0), Error);
  EXPECT_GE(c_q_constant(t, 1.0, 0.5, 5), 1.0);
}

TEST(Bounds, ConditioningConstants) {
  ModelParams p;
  p.m = 0.0;
  const auto z = conditioning_constants(p, 256);
  EXPECT_EQ(z.K, 0.0);
  EXPECT_EQ(z.NhatL1, 0.0);
  p.m = 1.0;
  const auto c = conditioning_constants(p, 256);
  EXPECT_GT(c.K, 0.0);
  EXPECT_GE(c.NhatL1, 0.0);
  EXPECT_LE(c.NhatL1, c.K);
  EXPECT_LT(c.change, 0.05);
  EXPECT_TRUE(std::isfinite(c.K));
  EXPECT_THROW(conditioning_constants(p, 100), Error);
}

TEST(Bounds, CutoffShape) {
  EXPECT_EQ(conditioning_cutoff({0.5, 1.0}, 1.0), 1.0);
  EXPECT_EQ(conditioning_cutoff({2.0, 1.0}, 1.0), 0.0);
  const double mid = conditioning_cutoff({1.25, 1.25}, 1.0);
  EXPECT_GT(mid, 0.0);
  EXPECT_LT(mid, 1.0);
}

TEST(Bounds, CTildeIsThePairIntegral) {
  const double alpha = 0.5, p = 1.5, mu = 0.5;
  IntegrandSpec s;
  s.boxes = {{-mu, mu, -mu, mu}, {-mu, mu, -mu, mu}};
  s.links = {{0, 1, alpha * p}};
  s.integrand = [&](const SpacetimePoint* z) {
    return std::complex<double>(std::pow(std::abs(lorentzian_square(z[0] - z[1])), -alpha * p));
  };
  const QuadResult r = integrate(s, 1 << 16, 5);
  const double ct = c_tilde(alpha, p, mu);
  EXPECT_NEAR(ct * ct, r.real(), 4.0 * r.error + 1e-3 * ct * ct);
  EXPECT_THROW(c_tilde(0.5, 2.0, 1.0), Error);
}

TEST(Bounds, LqNorms) {
  const SmearingFunction g = single_bump(0.1, 0.0, 0.4, 2.0);
  EXPECT_NEAR(lq_norm(g, INFINITY), 2.0, 1e-3);
  // L1 norm of a bump against a polar-coordinate oracle
  double l1 = 0.0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const double r = (i + 0.5) / n;
    l1 += 2.0 * std::exp(1.0 - 1.0 / (1.0 - r * r)) * 2.0 * std::numbers::pi * r / n;
  }
  l1 *= 0.4 * 0.4;
  EXPECT_NEAR(lq_norm(g, 1.0, 512), l1, 1e-6 * l1);
}

TEST(Bounds, QsBoundFormula) {
  const auto in = inputs(half_alpha());
  const auto b0 = qs_term_bound(0, 1.5, in);
  EXPECT_EQ(b0.boundValue, 2.0);
  EXPECT_TRUE(b0.satisfied);
  const auto b2 = qs_term_bound(2, 1.5, in, 1e-3);
  const double q = 3.0;
  const double gq = lq_norm(in.g, q);
  const double ct = c_tilde(0.5, 1.5, 1.0);
  const double direct = 2.0 * std::pow(2.0, 2 * 0.5) * std::pow(1.5, 4) / std::pow(2.0, 1.0 - 1.0 / 1.5) *
                        std::pow(2.0 * std::exp(0.5 * in.params.a * in.params.a * 0.3), 2) * gq * gq *
                        std::pow(ct, 2 / 1.5);
  EXPECT_NEAR(b2.boundValue, direct, 1e-12 * direct);
  EXPECT_DOUBLE_EQ(b2.q, 3.0);
  EXPECT_TRUE(b2.satisfied);
  EXPECT_FALSE(qs_term_bound(2, 1.5, in, 2.0 * direct).satisfied);
  EXPECT_THROW(qs_term_bound(1, 2.5, in), Error);
  EXPECT_THROW(qs_term_bound(1, 0.5, in), Error);
  EXPECT_TRUE(std::isinf(qs_term_bound(1, 1.0, in).q));
}

TEST(Bounds, RatioEventuallyBelowOneOnlyWithoutQ) {
  // the ratio is x (n + 1)^{-1/3} C_Q^{2n+1}; without Q it drops below one once n^{1/3} beats x
  auto in = inputs(half_alpha(), 1.0);
  auto ratio = [&](int n) {
    return std::exp(qs_term_log_bound(n + 1, 1.5, in) - qs_term_log_bound(n, 1.5, in));
  };
  EXPECT_GT(ratio(10), 1.0);
  EXPECT_LT(ratio(100000), 1.0);
  in.cQ = 1.01;
  EXPECT_GT(ratio(100000), 1.0);
}

TEST(Bounds, FieldTermBounds) {
  auto in = inputs(half_alpha());
  EXPECT_EQ(field_term_bound(0, FieldTerm::J, 1.5, in).boundValue, 0.0);
  EXPECT_THROW(field_term_bound(1, FieldTerm::J, 1.5, in), Error);
  in.gTildeNorm = 0.2;
  const double qs = qs_term_bound(3, 1.5, in).boundValue;
  const double j = field_term_bound(3, FieldTerm::J, 1.5, in).boundValue;
  // n 2^n / 2 * |g~| / |g| relative to half the S-matrix bound
  EXPECT_NEAR(j, qs / 2.0 * 3.0 * 8.0 / 2.0 * 0.2 / lq_norm(in.g, 3.0), 1e-12 * j);
}

TEST(Bounds, TailBound) {
  auto in = inputs(half_alpha(), 1.0);
  double prev = INFINITY;
  for (int N : {0, 2, 5, 10, 20}) {
    const double t = tail_bound(N, 1.5, in);
    EXPECT_TRUE(std::isfinite(t));
    EXPECT_LE(t, prev);
    prev = t;
  }
  in.params.lambda = 1e-3;
  prev = INFINITY;
  for (int N : {0, 1, 2, 5, 10}) {
    const double t = tail_bound(N, 1.5, in);
    EXPECT_LT(t, prev);
    prev = t;
  }
  in.cQ = 1.2;
  EXPECT_TRUE(std::isinf(tail_bound(3, 1.5, in)));
  // p = 1 removes the factorial: the terms are geometric and sum only for small coupling
  in.cQ = 1.0;
  EXPECT_TRUE(std::isfinite(tail_bound(3, 1.0, in)));
  in.params.lambda = 1.0;
  EXPECT_TRUE(std::isinf(tail_bound(3, 1.0, in)));
}

TEST(Bounds, CauchyDeterminant) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto sample = [&](int n) {
    std::vector<SpacetimePoint> pts;
    for (int i = 0; i < n; ++i) pts.push_back({U(rng), U(rng)});
    return pts;
  };
  EXPECT_NEAR(cauchy_det_check({{0.1, 0.3}}, {{0.7, -0.2}}), 0.0, 1e-15);
  for (int n : {2, 3, 4}) {
    int done = 0;
    while (done < 100) {
      const auto X = sample(n), Y = sample(n);
      double r;
      try {
        r = cauchy_det_check(X, Y);
      } catch (const Error&) {
        continue;
      }
      EXPECT_LT(r, n == 2 ? 1e-10 : 1e-8);
      ++done;
    }
  }
  EXPECT_THROW(cauchy_det_check({{0.0, 0.0}, {0.5, 0.5}}, {{0.2, 0.1}, {0.3, -0.4}}), Error);
}

TEST(Bounds, QsTermsSatisfyTheBound) {
  const ModelParams p = half_alpha();
  SeriesContext ctx;
  ctx.params = p;
  ctx.g = single_bump(0.0, 0.0, 0.3);
  ctx.q = std::make_shared<QKernel>(QKernel::massless(p));
  ctx.budget = 1 << 14;
  BoundInputs in;
  in.params = p;
  in.g = ctx.g;
  in.cQ = c_q_constant(*ctx.q, p.a, p.mu);
  in.K = 0.0;  // massless: H = H0
  for (int n = 1; n <= 2; ++n) {
    const QuadResult v = evaluate_terms(qs_term(n), ctx, p.hbar);
    const double measured = std::abs(v.value) + 3.0 * v.error;
    const auto r = qs_term_bound(n, 1.5, in, measured);
    std::printf("n=%d |S_n| %.4g bound %.4g\n", n, std::abs(v.value), r.boundValue);
    EXPECT_TRUE(r.satisfied);
  }
  // first order is i lambda / hbar times the dressed integral of g
  const QuadResult s1 = evaluate_terms(qs_term(1), ctx, p.hbar);
  IntegrandSpec s;
  s.boxes = {ctx.g.null_box()};
  s.integrand = [&](const SpacetimePoint* z) { return std::complex<double>(gq_weight(z[0], p, *ctx.q, ctx.g)); };
  const QuadResult gq = integrate(s, 1 << 14, 1);
  EXPECT_NEAR(s1.value.real(), 0.0, 1e-15);
  EXPECT_NEAR(s1.value.imag(), gq.real(), 3.0 * std::hypot(s1.error, gq.error));
}
