#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ssg/kernels.hpp"

namespace ssg {

// Philox4x32-10 counter-based generator (Salmon et al. 2011)
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

enum class Boundary { periodic, absorbingPad };

struct LatticeGrid {
  double dt = 0.01;
  double dx = 0.01;
  int nT = 0;
  int nX = 0;
  SpacetimePoint origin;  // (t0, x0) of node (0, 0)
  Boundary boundary = Boundary::absorbingPad;

  std::size_t size() const { return static_cast<std::size_t>(nT) * nX; }
  std::size_t index(int n, int j) const { return static_cast<std::size_t>(n) * nX + j; }
  SpacetimePoint node(int n, int j) const { return {origin.t + n * dt, origin.x + j * dx}; }

  // dt = dx = h grid starting at T, long enough for every probe and padded so the
  // boundary stays outside the past cone of all of them
  static LatticeGrid covering(const std::vector<SmearingFunction>& probes, double T, double h);
  // true when no point of the probes' supports sees the spatial boundary
  bool isolates(const std::vector<SmearingFunction>& probes) const;
};

struct LatticeField {
  LatticeGrid grid;
  std::vector<double> values;

  double at(int n, int j) const { return values[grid.index(n, j)]; }
};

// i.i.d. N(0, 1/(dt dx)) per node times chi(t); reproducible from (seed, realization)
LatticeField sample_noise(const LatticeGrid& grid, const ModelParams& p, std::uint64_t seed, std::uint64_t realization);

// leapfrog for psi_tt = psi_xx - m^2 psi + source, zero initial data; the source enters through the
// diamond stencil 1/2 centre + 1/8 neighbours
LatticeField solve_linear(const LatticeField& source, double m);

struct Hierarchy {
  LatticeField psi1;
  LatticeField psi2;  // empty values when maxOrder == 1
};

// lambda^1 and lambda^2 coefficients of the interacting solution around psi0
Hierarchy solve_hierarchy(const LatticeField& psi0, const ModelParams& p, const SmearingFunction& g, int maxOrder);

// sum of f psi dt dx over the nodes
double smear(const LatticeField& field, const SmearingFunction& f);

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::int64_t nSamples = 0;
  std::uint64_t seed = 0;
};

// lambda^order coefficient of prod_k psi(f_k): sum over i_1 + ... + i_m = order of prod psi_{i_k}(f_k)
struct McObservable {
  std::string id;
  int order = 0;
  std::vector<SmearingFunction> factors;
};

// per-realization values of each observable; flip negates the noise
std::vector<double> realization_values(const std::vector<McObservable>& obs, const LatticeGrid& grid,
                                       const ModelParams& p, const SmearingFunction& g, std::uint64_t seed,
                                       std::uint64_t realization, bool flip = false);

std::vector<McEstimate> estimate_correlators(const std::vector<McObservable>& obs, const LatticeGrid& grid,
                                             const ModelParams& p, const SmearingFunction& g, std::int64_t nSamples,
                                             std::uint64_t seed, int workers = 0);
McEstimate estimate_correlator(const McObservable& obs, const LatticeGrid& grid, const ModelParams& p,
                               const SmearingFunction& g, std::int64_t nSamples, std::uint64_t seed,
                               int workers = 0);

std::string mc_csv_header();
std::string mc_csv_row(const McObservable& obs, const McEstimate& e, const LatticeGrid& grid);

}  // namespace ssg
