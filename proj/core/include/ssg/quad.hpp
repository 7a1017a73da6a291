#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "ssg/kernels.hpp"
#include "ssg/quad_result.hpp"

namespace ssg {

// |u_i - u_j|^-e |v_i - v_j|^-e type singularity between two integration points.
// The later point is sampled relative to the earlier one with a matching power-law density.
struct SingularLink {
  int i = 0;
  int j = 1;
  double exponent = 0.0;
};

struct IntegrandSpec {
  std::vector<NullBox> boxes;  // integration domain of each point, null coordinates
  std::vector<SingularLink> links;
  // value at the points; the measure dmu = dt dx is applied by the integrator
  std::function<std::complex<double>(const SpacetimePoint* pts)> integrand;

  int points() const { return static_cast<int>(boxes.size()); }
  int dimension() const { return 2 * points(); }
};

struct QuadOptions {
  int replicates = 8;
  int workers = 0;  // 0: default_workers()
  bool checkStabilization = true;
  double stabilizationRatio = 4.0;
};

// randomized rank-1 lattice rule; error = standard error over the shifted replicates
QuadResult integrate(const IntegrandSpec& spec, std::int64_t budget, std::uint64_t seed, const QuadOptions& opt = {});

using KernelEvaluator = std::function<std::complex<double>(SpacetimePoint, SpacetimePoint)>;

// int int K(z, z') f(z) f'(z') dmu dmu'
QuadResult smeared_pairing(const KernelEvaluator& K, const SmearingFunction& f, const SmearingFunction& fp,
                           std::int64_t budget, std::uint64_t seed, double singularExponent = 0.0,
                           const QuadOptions& opt = {});

// generating vector of the embedded lattice (odd entries, valid for every power-of-two size up to 2^20)
std::uint32_t lattice_component(int d);

}  // namespace ssg
