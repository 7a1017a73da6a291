// Acceptance run: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "ssg/algebra.hpp"
#include "ssg/bounds.hpp"
#include "ssg/quad.hpp"
#include "ssg/series.hpp"
#include "ssg/spde_mc.hpp"

using namespace ssg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double z_score(double a, double ea, double b, double eb) {
  const double e = std::hypot(ea, eb);
  return e > 0.0 ? std::abs(a - b) / e : (a == b ? 0.0 : INFINITY);
}

// shared model for the oracle triangles
ModelParams triangle_params() {
  ModelParams p;
  p.m = 0.0;
  p.a = 1.5;
  p.T = -1.0;
  p.mu = 1.0;
  return p;
}
const SmearingFunction kG = single_bump(0.0, 0.0, 0.4, 3.0);
const SmearingFunction kF1 = single_bump(0.5, 0.1, 0.2);
const SmearingFunction kF2 = single_bump(0.4, -0.15, 0.2);

SeriesContext triangle_context() {
  SeriesContext ctx;
  ctx.params = triangle_params();
  ctx.g = kG;
  ctx.q = std::make_shared<QKernel>(QKernel::massless(ctx.params));
  ctx.budget = 1 << 16;
  ctx.seed = 17;
  return ctx;
}

// one Monte Carlo run feeds criteria 11-13
struct McRun {
  std::vector<McEstimate> est;  // c0, c1, e0, e1, e2
};
const McRun& mc_run() {
  static const McRun run = [] {
    const ModelParams p = triangle_params();
    const LatticeGrid grid = LatticeGrid::covering({kF1, kF2, kG}, p.T, 0.02);
    const std::vector<McObservable> obs = {{"c0", 0, {kF1, kF2}},
                                           {"c1", 1, {kF1, kF2}},
                                           {"e0", 0, {kF1}},
                                           {"e1", 1, {kF1}},
                                           {"e2", 2, {kF1}}};
    return McRun{estimate_correlators(obs, grid, p, kG, 10000, 2024)};
  }();
  return run;
}

Outcome kernel_identities() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  const std::complex<double> I(0.0, 1.0);
  double worst = 0.0;
  int n = 0;
  while (n < 1000) {
    const SpacetimePoint z{U(rng), U(rng)};
    if (std::abs(lorentzian_square(z)) < 1e-6) continue;
    ++n;
    for (auto c : {SignConvention::paper, SignConvention::green}) {
      const double m = 0.8;
      const auto w = wightman(z, m, c), f = feynman(z, m, c), af = antifeynman(z, m, c);
      const double H = hadamard_massive(z, m);
      const double scale = std::max({std::abs(w), std::abs(f), std::abs(af), 1e-300});
      worst = std::max({worst, std::abs(f - w - I * advanced(z, m, c)) / scale,
                        std::abs(af - w + I * retarded_massive(z, m, c)) / scale, std::abs(f.real() - H) / scale,
                        std::abs(af.real() - H) / scale});
    }
  }
  return {worst < 1e-12, fmt("max relative residual %.2e over %d points, both conventions", worst, n)};
}

Outcome massless_closed_form() {
  ModelParams p;
  p.m = 0.0;
  p.T = -1.2;
  p.rampWidth = 1e-4;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto z = SpacetimePoint::from_null(U(rng), U(rng)), zp = SpacetimePoint::from_null(U(rng), U(rng));
    const double q = covariance_q(z, zp, p, 24).real();
    const double ref = covariance_q0_sharp(z, zp, p.T);
    worst = std::max(worst, std::abs(q - ref) / std::abs(ref));
  }
  return {worst < 0.01, fmt("max relative error %.2e over 50 pairs in D_1", worst)};
}

Outcome q_positivity() {
  ModelParams p;
  p.m = 0.0;
  p.T = -1.0;
  const QKernel q = QKernel::massless(p);
  const KernelEvaluator K = [&](SpacetimePoint z, SpacetimePoint zp) { return std::complex<double>(q(z, zp)); };
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> C(-0.5, 0.5), R(0.1, 0.3), A(0.5, 2.0);
  int neg = 0, asym = 0;
  double worstZ = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto f = single_bump(C(rng), C(rng), R(rng), A(rng));
    auto fp = single_bump(C(rng), C(rng), R(rng), A(rng));
    if (i % 3 == 0) f.bumps.push_back({{C(rng), C(rng)}, R(rng), -A(rng)});
    const QuadResult ff = smeared_pairing(K, f, f, 1 << 12, i);
    if (ff.real() < -ff.error) ++neg;
    const QuadResult a = smeared_pairing(K, f, fp, 1 << 12, 1000 + i);
    const QuadResult b = smeared_pairing(K, fp, f, 1 << 12, 2000 + i);
    const double z = std::abs(a.real() - b.real()) / std::hypot(a.error, b.error);
    worstZ = std::max(worstZ, z);
    if (std::abs(a.real() - b.real()) > 2.0 * std::hypot(a.error, b.error)) ++asym;
  }
  // at 2 sigma about 5 of 100 honest pairs are expected outside; more than 12 would be a real asymmetry
  return {neg == 0 && asym <= 12,
          fmt("%d negative Q(f,f); %d of 100 pairs beyond 2x combined error (max %.2f)", neg, asym, worstZ)};
}

Outcome gamma_q_dressing() {
  const KernelExpr kQ = KernelExpr::basis(Kernel::Q);
  bool symbolic = true;
  for (int c : {1, -1}) {
    const Functional r = gamma_deform(Functional{vertex_generator(c, "g")}, kQ);
    symbolic = symbolic && term_multiset(r) == term_multiset(Functional{dressed_vertex(c, "g", kQ)});
  }
  ModelParams p;
  p.T = -1.0;
  p.a = 1.3;
  const QKernel q = QKernel::massless(p);
  const SmearingFunction g = single_bump(0.0, 0.0, 0.6, 1.5);
  int bad = 0, points = 0;
  for (int i = -30; i <= 30; ++i)
    for (int j = -30; j <= 30; ++j) {
      const SpacetimePoint x{0.02 * i, 0.02 * j};
      const double w = gq_weight(x, p, q, g);
      ++points;
      if (w > g(x) || w < 0.0) ++bad;
    }
  return {symbolic && bad == 0,
          fmt("generator identity %s for both charges; g_Q <= g at %d/%d grid points", symbolic ? "exact" : "BROKEN",
              points - bad, points)};
}

Outcome wick_counts() {
  std::string d;
  bool ok = true;
  long long df = 1;
  for (int k = 1; k <= 4; ++k) {
    df *= 2 * k - 1;
    const auto n = static_cast<long long>(drop_free_legs(wick_expand(2 * k)).size());
    ok = ok && n == df;
    d += fmt("%s2k=%d: %lld", k > 1 ? ", " : "", 2 * k, n);
  }
  return {ok, d};
}

Outcome telescopic() {
  bool ok = true;
  std::size_t checked = 0;
  for (int n = 1; n <= 3; ++n)
    for (int m = 1; m <= 2; ++m) {
      const Certificate c = uncontracted_cancellation(n, m);
      ok = ok && c.ok;
      checked += c.termsChecked;
    }
  return {ok, fmt("n <= 3, m in {1,2}: %zu terms checked, residue %s", checked, ok ? "exactly zero" : "NONZERO")};
}

Outcome hbar_grading() {
  bool ok = true;
  std::string d;
  for (int n = 1; n <= 3; ++n) {
    const int f = hbar_floor(n, 1);
    ok = ok && f == 0;
    d += fmt("floor(%d,1)=%d ", n, f);
  }
  // the floor is the least grade among surviving terms, so a nonnegative floor rules out negative grades
  for (auto [n, m] : {std::pair{1, 2}, std::pair{2, 2}}) {
    const int f = hbar_floor(n, m);
    ok = ok && f >= 0;
    d += fmt("floor(%d,%d)=%d ", n, m, f);
  }
  return {ok, d};
}

Outcome classical_rate() {
  SeriesContext ctx;
  ctx.params.m = 0.0;
  ctx.params.a = 1.0;
  ctx.params.T = -1.0;
  ctx.g = single_bump(0.0, 0.0, 0.4);
  ctx.q = std::make_shared<QKernel>(QKernel::massless(ctx.params));
  ctx.budget = 1 << 15;
  ctx.seed = 17;
  ctx.smearings["f"] = kF1;
  // the single field: the charge sum kills every term, quantum and classical alike
  const Observable single = Observable::field("f");
  const auto s0 = quantum_coefficient(1, 0.0, single, ctx);
  const double d1 = std::abs(quantum_coefficient(1, 0.1, single, ctx).value.value - s0.value.value);
  const double d2 = std::abs(quantum_coefficient(1, 0.05, single, ctx).value.value - s0.value.value);
  // the product phi(f) phi(f) is the lowest observable with a nonzero first-order deviation
  const Observable prod = Observable::product({"f", "f"});
  const auto cl = correlation_coefficient(1, kF1, kF1, ctx);
  const double e1 = std::abs(quantum_coefficient(1, 0.1, prod, ctx).value.value - cl.value.value);
  const double e2 = std::abs(quantum_coefficient(1, 0.05, prod, ctx).value.value - cl.value.value);
  const double ratio = e1 / e2;
  return {ratio >= 1.4 && ratio <= 2.6,
          fmt("phi(f): deviations %.1e, %.1e (identically zero, ratio undefined); phi(f)phi(f): ratio %.4f", d1, d2,
              ratio)};
}

Outcome cauchy() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double worst = 0.0;
  int done = 0;
  for (int n = 1; n <= 4; ++n) {
    int k = 0;
    while (k < 100) {
      std::vector<SpacetimePoint> X, Y;
      for (int i = 0; i < n; ++i) {
        X.push_back({U(rng), U(rng)});
        Y.push_back({U(rng), U(rng)});
      }
      try {
        worst = std::max(worst, cauchy_det_check(X, Y));
      } catch (const Error&) {
        continue;
      }
      ++k;
      ++done;
    }
  }
  return {worst < 1e-8, fmt("max residual %.2e over %d configurations, n = 1..4", worst, done)};
}

Outcome bound_satisfaction() {
  ModelParams p;
  p.m = 0.0;
  p.hbar = 1.0;
  p.a = std::sqrt(2.0 * std::numbers::pi);  // alpha = 1/2
  p.mu = 1.0;
  p.T = -1.0;
  SeriesContext ctx;
  ctx.params = p;
  ctx.g = single_bump(0.0, 0.0, 0.3);
  ctx.q = std::make_shared<QKernel>(QKernel::massless(p));
  ctx.budget = 1 << 15;
  BoundInputs in;
  in.params = p;
  in.g = ctx.g;
  in.cQ = c_q_constant(*ctx.q, p.a, p.mu);
  in.K = 0.0;
  bool ok = true;
  std::string d;
  for (int n = 1; n <= 2; ++n) {
    const QuadResult v = evaluate_terms(qs_term(n), ctx, p.hbar);
    const BoundReport r = qs_term_bound(n, 1.5, in, std::abs(v.value) + 3.0 * v.error);
    ok = ok && r.satisfied;
    d += fmt("n=%d |S_n| %.3g <= %.3g; ", n, std::abs(v.value), r.boundValue);
  }
  const double tail = tail_bound(2, 1.5, in);
  // where the terms turn around: C_Q^{n^2} against (n!)^{1/3}
  int turn = -1;
  for (int n = 1; n < 200 && turn < 0; ++n)
    if (qs_term_log_bound(n + 1, 1.5, in) > qs_term_log_bound(n, 1.5, in) && n > 2) turn = n;
  const bool summable = std::isfinite(tail);
  d += fmt("C_Q = %.3f; tail after n=2 %s", in.cQ, summable ? fmt("%.3g", tail).c_str() : "diverges");
  if (!summable)
    d += fmt(" (C_Q^{n^2} outgrows (n!)^{1/3}; bound terms increase for all n >= %d)", turn);
  return {ok && summable, d};
}

Outcome triangle_order0() {
  const SeriesContext ctx = triangle_context();
  const auto s = correlation_coefficient(0, kF1, kF2, ctx);
  const QuadResult q = smeared_pairing(
      [&](SpacetimePoint z, SpacetimePoint zp) { return std::complex<double>(ctx.q_kernel()(z, zp)); }, kF1, kF2,
      1 << 16, 5);
  const McEstimate& m = mc_run().est[0];
  const double z1 = z_score(s.value.real(), s.value.error, q.real(), q.error);
  const double z2 = z_score(s.value.real(), s.value.error, m.mean, m.stderr_);
  const double z3 = z_score(q.real(), q.error, m.mean, m.stderr_);
  return {z1 < 3 && z2 < 3 && z3 < 3,
          fmt("series %.6g, pairing %.6g, mc %.6g +- %.2g; z = %.2f, %.2f, %.2f", s.value.real(), q.real(), m.mean,
              m.stderr_, z1, z2, z3)};
}

Outcome triangle_order1() {
  const SeriesContext ctx = triangle_context();
  const auto s = correlation_coefficient(1, kF1, kF2, ctx);
  const QuadResult o = order1_correction_oracle(kF1, kF2, ctx);
  const McEstimate& m = mc_run().est[1];
  const double z1 = z_score(s.value.real(), s.value.error, o.real(), o.error);
  const double z2 = z_score(s.value.real(), s.value.error, m.mean, m.stderr_);
  const double z3 = z_score(o.real(), o.error, m.mean, m.stderr_);
  return {z1 < 3 && z2 < 3 && z3 < 3,
          fmt("series %.6g, oracle %.6g, mc %.6g +- %.2g; z = %.2f, %.2f, %.2f", s.value.real(), o.real(), m.mean,
              m.stderr_, z1, z2, z3)};
}

Outcome vanishing_expectation() {
  const SeriesContext ctx = triangle_context();
  bool ok = true;
  std::string d = "series:";
  for (int n = 0; n <= 2; ++n) {
    const auto e = expectation_coefficient(n, kF1, ctx);
    ok = ok && std::abs(e.value.value) <= 3.0 * e.value.error;
    d += fmt(" %.2g+-%.2g", std::abs(e.value.value), e.value.error);
  }
  d += "; mc:";
  for (int n = 0; n <= 2; ++n) {
    const McEstimate& m = mc_run().est[2 + n];
    ok = ok && std::abs(m.mean) <= 3.0 * m.stderr_;
    d += fmt(" %.2g+-%.2g", m.mean, m.stderr_);
  }
  return {ok, d};
}

Outcome solver_order() {
  const double m = 1.0;
  auto err = [&](int nX) {
    LatticeGrid g;
    g.dx = g.dt = 2.0 * std::numbers::pi / nX;
    g.nX = nX;
    g.nT = nX / 4 + 1;  // final time pi / 2 on both grids
    g.boundary = Boundary::periodic;
    LatticeField src{g, std::vector<double>(g.size())};
    for (int n = 0; n < g.nT; ++n)
      for (int j = 0; j < nX; ++j) {
        const auto z = g.node(n, j);
        src.values[g.index(n, j)] = (6.0 * z.t + (1.0 + m * m) * std::pow(z.t, 3)) * std::sin(z.x);
      }
    const LatticeField psi = solve_linear(src, m);
    double e = 0.0;
    for (int j = 0; j < nX; ++j) {
      const auto z = g.node(g.nT - 1, j);
      e += std::pow(psi.at(g.nT - 1, j) - std::pow(z.t, 3) * std::sin(z.x), 2) * g.dx;
    }
    return std::sqrt(e);
  };
  const double e1 = err(128), e2 = err(256);
  return {e1 / e2 >= 3.5, fmt("L2 error %.3g -> %.3g, ratio %.2f", e1, e2, e1 / e2)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / fmt("ssg_acceptance_%d", static_cast<int>(std::random_device{}() % 1000000));
  const std::string cfg = std::string(SSG_SOURCE_DIR) + "/configs/example.json";
  for (const char* run : {"a", "b"}) {
    const std::string cmd =
        std::string("\"") + SSG_EXE + "\" --config \"" + cfg + "\" --out \"" + (base / run).string() + "\" 2>/dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "cli run failed: " + cmd};
  }
  int files = 0, same = 0;
  for (const auto& e : fs::directory_iterator(base / "a")) {
    if (e.path().extension() != ".csv") continue;
    ++files;
    if (slurp(e.path()) == slurp(base / "b" / e.path().filename())) ++same;
  }
  fs::remove_all(base);
  return {files > 0 && same == files, fmt("%d/%d CSV files byte-identical across two runs", same, files)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"kernel identities", kernel_identities},
      {"massless Q closed form", massless_closed_form},
      {"Q positivity and symmetry", q_positivity},
      {"Gamma_Q dressing", gamma_q_dressing},
      {"Wick counts", wick_counts},
      {"telescopic cancellation", telescopic},
      {"hbar grading", hbar_grading},
      {"classical limit rate", classical_rate},
      {"Cauchy determinant", cauchy},
      {"bound satisfaction and summability", bound_satisfaction},
      {"oracle triangle, order 0", triangle_order0},
      {"oracle triangle, order 1", triangle_order1},
      {"vanishing expectation", vanishing_expectation},
      {"lattice solver order", solver_order},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %2zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), s);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
