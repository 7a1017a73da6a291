#include "ssg/quad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ssg/errors.hpp"
#include "ssg/numerics.hpp"

namespace ssg {

namespace {

// Cools-Kuo-Nuyens embedded lattice, order-2 product weights, 2^20 points
constexpr std::uint32_t kGenerator[] = {1,      182667, 469891, 498753, 110745, 446247, 250185, 118627, 245333, 283199,
                                        408519, 391023, 246327, 126539, 399185, 461527, 235255, 4209,   415179};
constexpr int kGeneratorSize = sizeof(kGenerator) / sizeof(kGenerator[0]);
constexpr std::uint32_t kMaxPoints = 1u << 20;

double unit_double(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

// inverse CDF of the density |w|^-g on [A, B]; returns w and M / (1 - g), so dw/dy = M |w|^g / (1 - g)
std::pair<double, double> power_map(double y, double A, double B, double g) {
  const double e = 1.0 - g;
  auto P = [e](double x) { return std::pow(x, e); };
  auto Pinv = [e](double x) { return std::pow(std::max(x, 0.0), 1.0 / e); };
  double w, M;
  if (A >= 0.0) {
    M = P(B) - P(A);
    w = Pinv(P(A) + y * M);
  } else if (B <= 0.0) {
    M = P(-A) - P(-B);
    w = -Pinv(P(-A) - y * M);
  } else {
    const double left = P(-A);
    M = left + P(B);
    const double s = y * M;
    w = s < left ? -Pinv(left - s) : Pinv(s - left);
  }
  return {w, M / e};
}

double tent(double x) { return 1.0 - std::abs(2.0 * x - 1.0); }

}  // namespace

std::uint32_t lattice_component(int d) {
  if (d < kGeneratorSize) return kGenerator[d];
  // beyond the tabulated vector: deterministic odd extension
  std::uint64_t s = kGenerator[d % kGeneratorSize] + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(d);
  s ^= s >> 29;
  s *= 0xBF58476D1CE4E5B9ull;
  s ^= s >> 32;
  return static_cast<std::uint32_t>(s % kMaxPoints) | 1u;
}

QuadResult integrate(const IntegrandSpec& spec, std::int64_t budget, std::uint64_t seed, const QuadOptions& opt) {
  if (budget < 1024) throw Error(ErrorKind::Config, "quadrature budget must be at least 2^10");
  if (opt.replicates < 2) throw Error(ErrorKind::Config, "need at least two randomized replicates");
  const int P = spec.points();
  const int D = spec.dimension();
  for (const auto& l : spec.links) {
    if (l.exponent < 0.0 || l.exponent >= 1.0)
      throw Error(ErrorKind::InvalidExponent, "singular exponent must lie in [0, 1)");
    if (l.i < 0 || l.j <= l.i || l.j >= P) throw Error(ErrorKind::Config, "singular link must point to a later point");
  }
  // each point is sampled relative to at most one earlier point
  std::vector<int> parent(P, -1);
  std::vector<double> gamma(P, 0.0);
  for (const auto& l : spec.links)
    if (parent[l.j] < 0) {
      parent[l.j] = l.i;
      gamma[l.j] = l.exponent;
    }

  std::int64_t perRep = budget / opt.replicates;
  std::uint32_t N = 1;
  while (N * 2 <= perRep && N * 2 <= kMaxPoints) N *= 2;

  std::vector<std::uint32_t> gen(D);
  for (int d = 0; d < D; ++d) gen[d] = lattice_component(d);
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> shifts(opt.replicates, std::vector<double>(D));
  for (auto& s : shifts)
    for (auto& x : s) x = unit_double(rng);

  std::vector<std::complex<double>> full(opt.replicates), half(opt.replicates);
  const int workers = opt.workers > 0 ? opt.workers : default_workers();
  parallel_for(opt.replicates, workers, [&](std::size_t r) {
    std::vector<SpacetimePoint> pts(P);
    std::vector<double> u(P), v(P);
    std::complex<double> sumAll{0.0, 0.0}, sumEven{0.0, 0.0};
    const double invN = 1.0 / N;
    for (std::uint32_t k = 0; k < N; ++k) {
      double weight = 1.0;
      for (int p = 0; p < P && weight != 0.0; ++p) {
        const NullBox& b = spec.boxes[p];
        for (int c = 0; c < 2; ++c) {
          const int d = 2 * p + c;
          double x = std::fmod(static_cast<double>((static_cast<std::uint64_t>(k) * gen[d]) % N) * invN + shifts[r][d], 1.0);
          x = tent(x);
          const double lo = c == 0 ? b.u0 : b.v0, hi = c == 0 ? b.u1 : b.v1;
          double coord;
          if (parent[p] >= 0 && gamma[p] > 0.0) {
            const double base = c == 0 ? u[parent[p]] : v[parent[p]];
            auto [w, scale] = power_map(x, lo - base, hi - base, gamma[p]);
            // offsets near rounding would reach the integrand as zero; clamp them to a floor and weight by the
            // offset actually realized, which keeps |w|^-g integrands exact
            const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max({std::abs(base), std::abs(lo), std::abs(hi), 1.0});
            if (std::abs(w) < floor) {
              w = w < 0.0 ? -floor : floor;
              if (base + w > hi || base + w < lo) w = -w;
            }
            coord = base + w;
            w = coord - base;
            if (w == 0.0) {
              weight = 0.0;
              break;
            }
            weight *= scale * std::pow(std::abs(w), gamma[p]);
          } else {
            coord = lo + x * (hi - lo);
            weight *= hi - lo;
          }
          (c == 0 ? u[p] : v[p]) = coord;
        }
        weight *= 0.5;
        pts[p] = SpacetimePoint::from_null(u[p], v[p]);
      }
      if (weight == 0.0) continue;
      const std::complex<double> val = weight * spec.integrand(pts.data());
      sumAll += val;
      if (k % 2 == 0) sumEven += val;
    }
    full[r] = sumAll / static_cast<double>(N);
    half[r] = N > 1 ? sumEven / static_cast<double>(N / 2) : full[r];
  });

  auto stats = [&](const std::vector<std::complex<double>>& xs, double& er, double& ei) {
    const double R = static_cast<double>(xs.size());
    std::complex<double> mean{0.0, 0.0};
    for (const auto& x : xs) mean += x;
    mean /= R;
    double vr = 0.0, vi = 0.0;
    for (const auto& x : xs) {
      vr += (x.real() - mean.real()) * (x.real() - mean.real());
      vi += (x.imag() - mean.imag()) * (x.imag() - mean.imag());
    }
    er = std::sqrt(vr / (R - 1.0) / R);
    ei = std::sqrt(vi / (R - 1.0) / R);
    return mean;
  };
  QuadResult res;
  res.value = stats(full, res.error_re, res.error_im);
  res.error = std::hypot(res.error_re, res.error_im);
  res.samples = static_cast<std::int64_t>(N) * opt.replicates;
  res.seed = seed;
  if (opt.checkStabilization && N >= 4) {
    double hr, hi;
    stats(half, hr, hi);
    const double eh = std::hypot(hr, hi);
    const double scale = std::max(std::abs(res.value), 1e-300);
    if (res.error > opt.stabilizationRatio * eh && res.error > 1e-12 * scale)
      throw Error(ErrorKind::SingularityBudgetExceeded,
                  "replicate error grew from " + std::to_string(eh) + " to " + std::to_string(res.error) + " under doubling");
  }
  return res;
}

QuadResult smeared_pairing(const KernelEvaluator& K, const SmearingFunction& f, const SmearingFunction& fp,
                           std::int64_t budget, std::uint64_t seed, double singularExponent, const QuadOptions& opt) {
  IntegrandSpec spec;
  spec.boxes = {f.null_box(), fp.null_box()};
  if (singularExponent > 0.0) spec.links.push_back({0, 1, singularExponent});
  spec.integrand = [&](const SpacetimePoint* z) -> std::complex<double> {
    const double w = f(z[0]) * fp(z[1]);
    if (w == 0.0) return 0.0;
    return w * K(z[0], z[1]);
  };
  return integrate(spec, budget, seed, opt);
}

}  // namespace ssg
