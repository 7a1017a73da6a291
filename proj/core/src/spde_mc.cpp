#include "ssg/spde_mc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ssg/errors.hpp"
#include "ssg/numerics.hpp"

namespace ssg {

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
  constexpr std::uint64_t M0 = 0xD2511F53, M1 = 0xCD9E8D57;
  constexpr std::uint32_t W0 = 0x9E3779B9, W1 = 0xBB67AE85;
  for (int r = 0; r < 10; ++r) {
    const std::uint64_t p0 = M0 * c[0], p1 = M1 * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    k[0] += W0;
    k[1] += W1;
  }
  return c;
}

LatticeGrid LatticeGrid::covering(const std::vector<SmearingFunction>& probes, double T, double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::Config, "lattice spacing must be positive");
  double tMax = T, xMin = INFINITY, xMax = -INFINITY;
  for (const auto& f : probes)
    for (const auto& b : f.bumps) {
      tMax = std::max(tMax, b.center.t + b.radius);
      xMin = std::min(xMin, b.center.x - b.radius);
      xMax = std::max(xMax, b.center.x + b.radius);
    }
  if (!std::isfinite(xMin)) xMin = xMax = 0.0;
  LatticeGrid g;
  g.dt = g.dx = h;
  g.nT = static_cast<int>(std::ceil((tMax - T) / h)) + 3;
  const double pad = g.nT * h + 2.0 * h;
  g.origin = {T, xMin - pad};
  g.nX = static_cast<int>(std::ceil((xMax - xMin + 2.0 * pad) / h)) + 1;
  g.boundary = Boundary::absorbingPad;
  return g;
}

bool LatticeGrid::isolates(const std::vector<SmearingFunction>& probes) const {
  const double xLo = origin.x, xHi = origin.x + (nX - 1) * dx, tHi = origin.t + (nT - 1) * dt;
  for (const auto& f : probes)
    for (const auto& b : f.bumps) {
      if (b.center.t + b.radius > tHi) return false;
      if (boundary == Boundary::periodic) continue;
      // past cone of the support, back to the first time level
      const double reach = b.center.t + b.radius - origin.t;
      if (b.center.x - b.radius - reach <= xLo || b.center.x + b.radius + reach >= xHi) return false;
    }
  return true;
}

LatticeField sample_noise(const LatticeGrid& grid, const ModelParams& p, std::uint64_t seed,
                          std::uint64_t realization) {
  LatticeField f{grid, std::vector<double>(grid.size(), 0.0)};
  const double sd = 1.0 / std::sqrt(grid.dt * grid.dx);
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (int n = 0; n < grid.nT; ++n) {
    const double chi = chi_cutoff(grid.node(n, 0).t, p.T, p.rampWidth);
    if (chi == 0.0) continue;
    for (int j = 0; j < grid.nX; j += 2) {
      // one Philox block per pair of nodes, Box-Muller on two 53-bit uniforms
      const std::uint64_t cell = grid.index(n, j);
      const auto r = philox4x32({static_cast<std::uint32_t>(cell), static_cast<std::uint32_t>(cell >> 32),
                                 static_cast<std::uint32_t>(realization), static_cast<std::uint32_t>(realization >> 32)},
                                key);
      const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
      const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
      const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
      const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
      const double rad = std::sqrt(-2.0 * std::log(u1)) * sd * chi;
      f.values[cell] = rad * std::cos(2.0 * std::numbers::pi * u2);
      if (j + 1 < grid.nX) f.values[cell + 1] = rad * std::sin(2.0 * std::numbers::pi * u2);
    }
  }
  return f;
}

LatticeField solve_linear(const LatticeField& source, double m) {
  const LatticeGrid& g = source.grid;
  if (g.dt > g.dx * (1.0 + 1e-12)) throw Error(ErrorKind::CflViolation, "leapfrog needs dt <= dx");
  if (g.nT < 2 || g.nX < 3) throw Error(ErrorKind::Config, "lattice too small");
  const int nX = g.nX;
  const bool periodic = g.boundary == Boundary::periodic;
  auto wrap = [&](int j) { return periodic ? (j + nX) % nX : j; };
  auto S = [&](int n, int j) -> double {
    if (n < 0 || n >= g.nT) return 0.0;
    j = wrap(j);
    if (j < 0 || j >= nX) return 0.0;
    return source.values[g.index(n, j)];
  };
  const double r2 = (g.dt / g.dx) * (g.dt / g.dx), dt2 = g.dt * g.dt, m2 = m * m;
  LatticeField psi{g, std::vector<double>(g.size(), 0.0)};
  std::vector<double> row(nX);
  for (int n = 1; n + 1 < g.nT; ++n) {
    const double* cur = &psi.values[g.index(n, 0)];
    const double* prev = &psi.values[g.index(n - 1, 0)];
    double* next = &psi.values[g.index(n + 1, 0)];
    for (int j = 0; j < nX; ++j) {
      const int jl = wrap(j - 1), jr = wrap(j + 1);
      const double left = jl >= 0 && jl < nX ? cur[jl] : 0.0;
      const double right = jr >= 0 && jr < nX ? cur[jr] : 0.0;
      const double src = 0.5 * S(n, j) + 0.125 * (S(n - 1, j) + S(n + 1, j) + S(n, j - 1) + S(n, j + 1));
      next[j] = 2.0 * cur[j] - prev[j] + r2 * (left - 2.0 * cur[j] + right) + dt2 * (src - m2 * cur[j]);
    }
    if (!periodic) {
      next[0] = 0.0;
      next[nX - 1] = 0.0;
    }
  }
  return psi;
}

Hierarchy solve_hierarchy(const LatticeField& psi0, const ModelParams& p, const SmearingFunction& g, int maxOrder) {
  if (maxOrder < 1 || maxOrder > 2) throw Error(ErrorKind::Config, "hierarchy order must be 1 or 2");
  const LatticeGrid& grid = psi0.grid;
  // the lattice uses the positive Green function, so the physical source -a g sin(a psi) is
  // the convention's source sign times its retarded sign
  const double s = hierarchy_sign(p.signConvention) * retarded_sign(p.signConvention);
  std::vector<double> gw(grid.size(), 0.0);
  bool any = false;
  if (p.a != 0.0 && !g.empty()) {
    for (int n = 0; n < grid.nT; ++n)
      for (int j = 0; j < grid.nX; ++j) {
        const double w = g(grid.node(n, j));
        gw[grid.index(n, j)] = w;
        any = any || w != 0.0;
      }
  }
  Hierarchy h;
  if (!any) {
    h.psi1 = {grid, std::vector<double>(grid.size(), 0.0)};
    if (maxOrder == 2) h.psi2 = h.psi1;
    return h;
  }
  LatticeField src{grid, std::vector<double>(grid.size(), 0.0)};
  for (std::size_t i = 0; i < gw.size(); ++i)
    if (gw[i] != 0.0) src.values[i] = s * p.a * gw[i] * std::sin(p.a * psi0.values[i]);
  h.psi1 = solve_linear(src, p.m);
  if (maxOrder == 2) {
    for (std::size_t i = 0; i < gw.size(); ++i)
      src.values[i] = gw[i] != 0.0 ? s * p.a * p.a * gw[i] * std::cos(p.a * psi0.values[i]) * h.psi1.values[i] : 0.0;
    h.psi2 = solve_linear(src, p.m);
  }
  return h;
}

namespace {

struct SparseWeights {
  std::vector<std::size_t> idx;
  std::vector<double> w;

  double apply(const std::vector<double>& v) const {
    double s = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) s += w[k] * v[idx[k]];
    return s;
  }
};

SparseWeights weights_for(const LatticeGrid& grid, const SmearingFunction& f) {
  SparseWeights sw;
  const double cell = grid.dt * grid.dx;
  for (int n = 0; n < grid.nT; ++n)
    for (int j = 0; j < grid.nX; ++j) {
      const double w = f(grid.node(n, j));
      if (w != 0.0) {
        sw.idx.push_back(grid.index(n, j));
        sw.w.push_back(w * cell);
      }
    }
  return sw;
}

// all compositions of `order` into `parts` nonnegative entries
void compositions(int order, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == parts - 1) {
    cur.push_back(order);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int i = 0; i <= order; ++i) {
    cur.push_back(i);
    compositions(order - i, parts, cur, out);
    cur.pop_back();
  }
}

struct Plan {
  int maxOrder = 0;
  std::vector<SparseWeights> weights;               // per observable factor, flattened
  std::vector<std::vector<std::vector<int>>> comps;  // per observable
  std::vector<std::size_t> offset;                  // first factor of each observable
};

Plan make_plan(const std::vector<McObservable>& obs, const LatticeGrid& grid) {
  Plan plan;
  for (const auto& o : obs) {
    if (o.order < 0 || o.order > 2) throw Error(ErrorKind::Config, "observable order must be 0, 1 or 2");
    if (o.factors.empty()) throw Error(ErrorKind::Config, "observable needs at least one factor");
    if (!grid.isolates(o.factors))
      throw Error(ErrorKind::OutOfDomain, "lattice does not cover the past cone of observable " + o.id);
    plan.maxOrder = std::max(plan.maxOrder, o.order);
    plan.offset.push_back(plan.weights.size());
    for (const auto& f : o.factors) plan.weights.push_back(weights_for(grid, f));
    std::vector<int> cur;
    std::vector<std::vector<int>> out;
    compositions(o.order, static_cast<int>(o.factors.size()), cur, out);
    plan.comps.push_back(std::move(out));
  }
  return plan;
}

std::vector<double> evaluate_plan(const Plan& plan, const std::vector<McObservable>& obs, const LatticeGrid& grid,
                                  const ModelParams& p, const SmearingFunction& g, std::uint64_t seed,
                                  std::uint64_t realization, bool flip) {
  LatticeField xi = sample_noise(grid, p, seed, realization);
  if (flip)
    for (double& v : xi.values) v = -v;
  std::vector<const std::vector<double>*> psi(3, nullptr);
  const LatticeField psi0 = solve_linear(xi, p.m);
  psi[0] = &psi0.values;
  Hierarchy h;
  if (plan.maxOrder > 0) {
    h = solve_hierarchy(psi0, p, g, plan.maxOrder);
    psi[1] = &h.psi1.values;
    if (plan.maxOrder > 1) psi[2] = &h.psi2.values;
  }
  std::vector<double> out(obs.size(), 0.0);
  for (std::size_t o = 0; o < obs.size(); ++o) {
    const std::size_t nf = obs[o].factors.size();
    // smeared psi_i(f_k) for every order that appears
    std::vector<std::array<double, 3>> sm(nf);
    for (std::size_t k = 0; k < nf; ++k)
      for (int i = 0; i <= obs[o].order; ++i) sm[k][i] = plan.weights[plan.offset[o] + k].apply(*psi[i]);
    double total = 0.0;
    for (const auto& c : plan.comps[o]) {
      double prod = 1.0;
      for (std::size_t k = 0; k < nf; ++k) prod *= sm[k][c[k]];
      total += prod;
    }
    out[o] = total;
  }
  return out;
}

}  // namespace

std::vector<double> realization_values(const std::vector<McObservable>& obs, const LatticeGrid& grid,
                                       const ModelParams& p, const SmearingFunction& g, std::uint64_t seed,
                                       std::uint64_t realization, bool flip) {
  return evaluate_plan(make_plan(obs, grid), obs, grid, p, g, seed, realization, flip);
}

std::vector<McEstimate> estimate_correlators(const std::vector<McObservable>& obs, const LatticeGrid& grid,
                                             const ModelParams& p, const SmearingFunction& g, std::int64_t nSamples,
                                             std::uint64_t seed, int workers) {
  if (nSamples < 100) throw Error(ErrorKind::Config, "need at least 100 realizations");
  const Plan plan = make_plan(obs, grid);
  std::vector<std::vector<double>> vals(static_cast<std::size_t>(nSamples));
  parallel_for(vals.size(), workers > 0 ? workers : default_workers(),
               [&](std::size_t r) { vals[r] = evaluate_plan(plan, obs, grid, p, g, seed, r, false); });
  // fixed reduction order keeps the estimates bit-identical across worker counts
  std::vector<McEstimate> res(obs.size());
  const double N = static_cast<double>(nSamples);
  for (std::size_t o = 0; o < obs.size(); ++o) {
    double mean = 0.0;
    for (const auto& v : vals) mean += v[o];
    mean /= N;
    double ss = 0.0;
    for (const auto& v : vals) ss += (v[o] - mean) * (v[o] - mean);
    res[o].mean = mean;
    res[o].stderr_ = std::sqrt(ss / (N - 1.0) / N);
    res[o].nSamples = nSamples;
    res[o].seed = seed;
  }
  return res;
}

McEstimate estimate_correlator(const McObservable& obs, const LatticeGrid& grid, const ModelParams& p,
                               const SmearingFunction& g, std::int64_t nSamples, std::uint64_t seed, int workers) {
  return estimate_correlators({obs}, grid, p, g, nSamples, seed, workers).front();
}

std::string mc_csv_header() { return "observable,order,mean,stderr,samples,seed,dt,dx,nT,nX"; }

std::string mc_csv_row(const McObservable& obs, const McEstimate& e, const LatticeGrid& grid) {
  std::ostringstream os;
  os.precision(17);
  os << '"' << obs.id << "\"," << obs.order << "," << e.mean << "," << e.stderr_ << "," << e.nSamples << ","
     << e.seed << "," << grid.dt << "," << grid.dx << "," << grid.nT << "," << grid.nX;
  return os.str();
}

}  // namespace ssg
