#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "ssg/kernels.hpp"

using namespace ssg;

namespace {

ModelParams massive_params() {
  ModelParams p;
  p.m = 1.0;
  p.a = 1.0;
  p.mu = 1.0;
  p.muRef = 1.0;
  p.T = -1.0;
  return p;
}

// Q by nested Simpson over the cone meet in null coordinates, with series Bessel
double q_reference(SpacetimePoint z, SpacetimePoint zp, const ModelParams& p, int n = 400) {
  const double ua = std::min(z.u(), zp.u()), va = std::min(z.v(), zp.v());
  if (ua + va <= 2.0 * p.T) return 0.0;
  auto g = [&](SpacetimePoint d) {
    const double s2 = -lorentzian_square(d);
    return 0.5 * oracle::j0(p.m * std::sqrt(std::max(s2, 0.0)));
  };
  auto outer = [&](double uh) {
    auto inner = [&](double vh) {
      const SpacetimePoint zh = SpacetimePoint::from_null(uh, vh);
      const double c = chi_cutoff(zh.t, p.T, p.rampWidth);
      return 0.5 * c * c * g(z - zh) * g(zp - zh);
    };
    return oracle::simpson(inner, 2.0 * p.T - uh, va, n);
  };
  return oracle::simpson(outer, 2.0 * p.T - va, ua, n);
}

}  // namespace

TEST(Kernels, ChiCutoffExamples) {
  EXPECT_EQ(chi_cutoff(-1.0, 0.0), 0.0);
  EXPECT_EQ(chi_cutoff(2.0, 0.0), 1.0);
  const double c = chi_cutoff(0.5, 0.0);
  EXPECT_GT(c, 0.0);
  EXPECT_LT(c, 1.0);
  for (double s : {0.1, 0.25, 0.4, 0.5, 0.77}) {
    const double e0 = std::exp(-1.0 / s), e1 = std::exp(-1.0 / (1.0 - s));
    EXPECT_NEAR(chi_cutoff(s, 0.0), e0 / (e0 + e1), 1e-15);
    EXPECT_NEAR(chi_cutoff(s, 0.0) + chi_cutoff(1.0 - s, 0.0), 1.0, 1e-15);
  }
  double prev = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double c2 = chi_cutoff(-0.1 + 1.2 * i / 1000.0, 0.0);
    EXPECT_GE(c2, prev);
    prev = c2;
  }
}

TEST(Kernels, LorentzianSquareFactored) {
  const double eps = std::ldexp(1.0, -30);
  const SpacetimePoint z{1.0 + eps, 1.0};
  EXPECT_EQ(lorentzian_square(z), -eps * (2.0 + eps));
  EXPECT_TRUE(in_future_cone({1.0, 1.0}));
  EXPECT_FALSE(in_future_cone({1.0, 1.0 + 1e-12}));
}

TEST(Kernels, RetardedExamples) {
  EXPECT_EQ(retarded_massless({1, 0}, SignConvention::paper), -0.5);
  EXPECT_EQ(retarded_massless({1, 0}, SignConvention::green), 0.5);
  EXPECT_EQ(retarded_massless({-1, 0}, SignConvention::green), 0.0);
  EXPECT_EQ(retarded_massless({1, 2}, SignConvention::green), 0.0);
  EXPECT_NEAR(retarded_massive({2, 0}, 1.0, SignConvention::green), 0.5 * oracle::j0(2.0), 1e-14);
  EXPECT_NEAR(retarded_massive({2, 0}, 1.0, SignConvention::green), 0.1119454, 1e-7);
  EXPECT_EQ(retarded_massive({1, 1}, 3.0, SignConvention::green), 0.5);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-3, 3);
  for (int i = 0; i < 200; ++i) {
    const SpacetimePoint z{U(rng), U(rng)};
    EXPECT_EQ(retarded_massive(z, 0.0, SignConvention::paper), retarded_massless(z, SignConvention::paper));
  }
}

TEST(Kernels, RetardedSupportAndReflection) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-4, 4);
  for (int i = 0; i < 10000; ++i) {
    const SpacetimePoint z{U(rng), U(rng)};
    if (!in_future_cone(z)) EXPECT_EQ(retarded_massive(z, 0.7, SignConvention::green), 0.0);
    EXPECT_EQ(advanced(z, 0.7, SignConvention::green), retarded_massive(-z, 0.7, SignConvention::green));
  }
  EXPECT_EQ(advanced({-2, 0}, 1.0, SignConvention::green), retarded_massive({2, 0}, 1.0, SignConvention::green));
  EXPECT_EQ(advanced({1, 0}, 1.0, SignConvention::green), 0.0);
  EXPECT_EQ(advanced({0, 0.5}, 1.0, SignConvention::green), 0.0);
}

TEST(Kernels, HadamardAgainstSeriesBessel) {
  EXPECT_NEAR(hadamard_massive({0, 1}, 1.0), oracle::k0(1.0) / (2 * std::numbers::pi), 1e-13);
  EXPECT_NEAR(hadamard_massive({0, 1}, 1.0), 0.0670081, 1e-7);
  for (double s : {0.1, 0.5, 1.3, 2.7}) {
    EXPECT_NEAR(hadamard_massive({s, 0}, 1.0), -0.25 * oracle::y0(s), 1e-12);
    EXPECT_NEAR(hadamard_massive({0.3, 0.3 + s}, 0.8),
                oracle::k0(0.8 * std::sqrt(lorentzian_square({0.3, 0.3 + s})) ) / (2 * std::numbers::pi), 1e-12);
  }
  EXPECT_NEAR(hadamard_massless({0, 2}, 1.0), 0.0, 1e-15);
  EXPECT_NEAR(hadamard_massless({2, 0}, 1.0), 0.0, 1e-15);
  EXPECT_THROW(hadamard_massive({1, 1}, 1.0), Error);
  EXPECT_THROW(hadamard_massless({1, 1}, 1.0), Error);
}

TEST(Kernels, PropagatorIdentities) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-2, 2);
  const std::complex<double> I(0, 1);
  for (auto conv : {SignConvention::green, SignConvention::paper}) {
    for (int i = 0; i < 1000; ++i) {
      const SpacetimePoint z{U(rng), U(rng)};
      if (std::abs(lorentzian_square(z)) < 1e-6) continue;
      const double m = 0.9;
      const auto w = wightman(z, m, conv), f = feynman(z, m, conv), af = antifeynman(z, m, conv);
      const double H = hadamard_massive(z, m);
      const double scale = std::abs(w) + 1.0;
      EXPECT_LT(std::abs(f - w - I * advanced(z, m, conv)), 1e-12 * scale);
      EXPECT_LT(std::abs(af - w + I * retarded_massive(z, m, conv)), 1e-12 * scale);
      EXPECT_LT(std::abs(f.real() - H), 1e-12 * scale);
      EXPECT_LT(std::abs(af.real() - H), 1e-12 * scale);
      EXPECT_LT(std::abs(w.imag() - 0.5 * pauli_jordan(z, m, conv)), 1e-12 * scale);
    }
  }
}

TEST(Kernels, CovarianceSharpClosedForm) {
  EXPECT_DOUBLE_EQ(covariance_q0_sharp({1, 0}, {1, 0}, 0.0), 0.25);
  EXPECT_DOUBLE_EQ(covariance_q0_sharp({1, 0}, {1, 1}, 0.0), 0.0625);
  EXPECT_DOUBLE_EQ(covariance_q0_sharp({0.2, 0.1}, {0.2, 0.1}, -1.0), 0.25 * 1.2 * 1.2);
  EXPECT_DOUBLE_EQ(covariance_q0_sharp({1, 0}, {0.3, 0.1}, -1.0), 0.25 * 1.3 * 1.3);
  EXPECT_EQ(covariance_q0_sharp({0.1, -3}, {0.1, 3}, 0.0), 0.0);
}

TEST(Kernels, CovarianceMasslessNearSharp) {
  ModelParams p;
  p.m = 0.0;
  p.T = 0.0;
  p.rampWidth = 1e-3;
  EXPECT_NEAR(covariance_q({1, 0}, {1, 0}, p).real(), 0.25, 1e-3);
  EXPECT_NEAR(covariance_q({1, 0}, {1, 1}, p).real(), 0.0625, 1e-3);
  EXPECT_EQ(covariance_q({-0.5, 0}, {1, 0}, p).real(), 0.0);
  EXPECT_EQ(covariance_q({-0.5, 0}, {1, 0}, p).error, 0.0);
}

TEST(Kernels, MasslessExactMatchesQuadrature) {
  ModelParams p;
  p.m = 0.0;
  p.T = -1.2;
  const MasslessQ mq(p);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int i = 0; i < 50; ++i) {
    const SpacetimePoint z{U(rng), U(rng)}, zp{U(rng), U(rng)};
    const QuadResult r = covariance_q(z, zp, p, 24);
    EXPECT_NEAR(mq(z, zp), r.real(), 1e-11);
  }
}

TEST(Kernels, MassiveCovarianceAgainstReference) {
  const ModelParams p = massive_params();
  const std::vector<std::pair<SpacetimePoint, SpacetimePoint>> pairs = {
      {{0.3, 0.1}, {0.3, 0.1}}, {{0.5, -0.2}, {0.1, 0.4}}, {{-0.2, 0.0}, {0.6, 0.1}}, {{0.8, 0.0}, {0.8, 0.9}}};
  for (auto [z, zp] : pairs) {
    const QuadResult r = covariance_q(z, zp, p, 16);
    const double ref = q_reference(z, zp, p);
    EXPECT_NEAR(r.real(), ref, 1e-5 * (1.0 + ref)) << z.t << "," << z.x << " " << zp.t << "," << zp.x;
    EXPECT_LE(r.error, 1e-6);
    EXPECT_NEAR(r.real(), covariance_q(zp, z, p, 16).real(), 2 * r.error + 1e-14);
  }
  EXPECT_EQ(covariance_q({-1.5, 0}, {0.5, 0}, p).real(), 0.0);
}

TEST(Kernels, QTableNodesSymmetryAndProbes) {
  const ModelParams p = massive_params();
  const QTable tab = build_q_table(p, 24, 40, 8);
  for (int i : {0, 5, 23})
    for (int j : {1, 12, 20})
      for (int k : {0, 17, 39}) {
        const SpacetimePoint z{tab.timeGrid[i], 0.0}, zp{tab.timeGrid[j], -tab.spaceOffsetGrid[k]};
        EXPECT_NEAR(q_interp(tab, z, zp), tab.values[tab.index(i, j, k)], 1e-12);
        EXPECT_EQ(tab.values[tab.index(i, j, k)], tab.values[tab.index(j, i, tab.nX - 1 - k)]);
      }
  for (int i = 0; i < tab.nT; ++i) EXPECT_GE(tab.values[tab.index(i, i, (tab.nX - 1) / 2)], 0.0);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1, 1);
  const double mx = tab.max_value();
  double worst = 0.0;
  int probes = 0;
  while (probes < 60) {
    const SpacetimePoint z{U(rng), U(rng)}, zp{U(rng), U(rng)};
    if (std::abs(z.t) + std::abs(z.x) > 1 || std::abs(zp.t) + std::abs(zp.x) > 1) continue;
    ++probes;
    const double qi = q_interp(tab, z, zp);
    EXPECT_EQ(qi, q_interp(tab, zp, z));
    worst = std::max(worst, std::abs(qi - covariance_q(z, zp, p, 16).real()) / mx);
  }
  EXPECT_LT(worst, 1e-3);
  EXPECT_THROW(q_interp(tab, {1.5, 0}, {0, 0}), Error);
}

TEST(Kernels, QTableRoundTrip) {
  ModelParams p = massive_params();
  p.m = 0.0;
  const QTable tab = build_q_table(p, 8, 12, 4, Interpolation::trilinear);
  const auto path = (std::filesystem::temp_directory_path() / "ssg_qtable_test.bin").string();
  save_q_table(tab, path);
  const QTable back = load_q_table(path);
  std::remove(path.c_str());
  EXPECT_EQ(back.values, tab.values);
  EXPECT_EQ(back.nested, tab.nested);
  EXPECT_EQ(back.interpolation, Interpolation::trilinear);
  EXPECT_EQ(back.params.T, p.T);
  EXPECT_EQ(q_interp(back, {0.2, 0.1}, {-0.3, 0.2}), q_interp(tab, {0.2, 0.1}, {-0.3, 0.2}));
}

TEST(Kernels, GqWeight) {
  ModelParams p = massive_params();
  QTable tab = build_q_table(p, 6, 6, 4);
  std::fill(tab.values.begin(), tab.values.end(), 2.0);
  std::fill(tab.nested.begin(), tab.nested.end(), 2.0);
  std::fill(tab.crossed.begin(), tab.crossed.end(), 2.0);
  const SmearingFunction g = single_bump(0, 0, 0.5);
  EXPECT_NEAR(gq_weight({0, 0}, p, tab, g), std::exp(-1.0), 1e-14);
  p.a = 0.0;
  EXPECT_EQ(gq_weight({0.1, 0.1}, p, tab, g), g({0.1, 0.1}));

  const ModelParams pm = massive_params();
  const QKernel q = QKernel::massless([] { ModelParams r; r.T = -1; return r; }());
  for (int i = -10; i <= 10; ++i)
    for (int j = -10; j <= 10; ++j) {
      const SpacetimePoint x{0.05 * i, 0.05 * j};
      const double w = gq_weight(x, pm, q, g);
      EXPECT_GE(w, 0.0);
      EXPECT_LE(w, g(x));
    }
}

TEST(Kernels, SmearingBumps) {
  const SmearingFunction f = single_bump(0.1, -0.2, 0.3, 2.0);
  EXPECT_DOUBLE_EQ(f({0.1, -0.2}), 2.0);
  EXPECT_EQ(f({0.1, 0.1}), 0.0);
  const NullBox b = f.null_box();
  EXPECT_NEAR(b.u1 - b.u0, 2 * 0.3 * std::sqrt(2.0), 1e-15);
  EXPECT_TRUE(f.inside_diamond(1.0));
  EXPECT_FALSE(f.inside_diamond(0.5));
}
