#include "ssg/bounds.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "ssg/errors.hpp"
#include "ssg/quad.hpp"

namespace ssg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// smooth 0 -> 1 transition on [0, 1]
double smooth_step(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / x), b = std::exp(-1.0 / (1.0 - x));
  return a / (a + b);
}

template <class Q>
double scan_max_q(const Q& q, double mu, int grid) {
  std::vector<SpacetimePoint> pts;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      const double u = -mu + 2.0 * mu * i / (grid - 1), v = -mu + 2.0 * mu * j / (grid - 1);
      pts.push_back(SpacetimePoint::from_null(u, v));
    }
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i; j < pts.size(); ++j) best = std::max(best, q(pts[i], pts[j]));
  return best;
}

double conjugate_exponent(double p) { return p == 1.0 ? kInf : p / (p - 1.0); }

void check_exponent(double alpha, double p) {
  if (!(p >= 1.0) || alpha * p >= 1.0)
    throw Error(ErrorKind::InvalidExponent, "need p in [1, 1/alpha)");
}

double log_factorial(int n) { return std::lgamma(n + 1.0); }

// log of the common factor (2 mu)^{n alpha} C_Q^{n^2} (2 lambda e^{a^2 K / 2} / hbar)^n C~^{n/p} / (n!)^{1-1/p}
double log_core(int n, double p, const BoundInputs& in, double alpha, double ct) {
  const ModelParams& m = in.params;
  return n * alpha * std::log(2.0 * m.mu) + static_cast<double>(n) * n * std::log(in.cQ) +
         n * (std::log(2.0 * m.lambda / m.hbar) + 0.5 * m.a * m.a * in.K) + n / p * std::log(ct) -
         (1.0 - 1.0 / p) * log_factorial(n);
}

BoundReport base_report(int n, double p, const BoundInputs& in) {
  BoundReport r;
  r.n = n;
  r.alpha = in.params.alpha();
  check_exponent(r.alpha, p);
  r.p = p;
  r.q = conjugate_exponent(p);
  r.C_Q_mu = in.cQ;
  r.K_conditioning = in.K;
  r.C_tilde = c_tilde(r.alpha, p, in.params.mu);
  r.gNorm = lq_norm(in.g, r.q);
  return r;
}

void finish(BoundReport& r, std::optional<double> measured) {
  r.computedMagnitude = measured;
  r.satisfied = !measured || *measured <= r.boundValue;
}

}  // namespace

double c_q_constant(const QTable& table, double a, double mu, int grid) {
  if (table.params.mu < mu * (1.0 - 1e-12)) throw Error(ErrorKind::OutOfDomain, "Q table does not cover D_mu");
  const double mx = scan_max_q([&](SpacetimePoint z, SpacetimePoint zp) { return q_interp(table, z, zp); }, mu, grid);
  return std::exp(0.5 * a * a * mx);
}

double c_q_constant(const QKernel& q, double a, double mu, int grid) {
  const double mx = scan_max_q([&](SpacetimePoint z, SpacetimePoint zp) { return q(z, zp); }, mu, grid);
  return std::exp(0.5 * a * a * mx);
}

double conditioning_cutoff(SpacetimePoint z, double mu) {
  const double r = std::abs(z.t) + std::abs(z.x);
  return 1.0 - smooth_step((r - 2.0 * mu) / mu);
}

ConditioningConstants conditioning_constants(const ModelParams& p, int gridN) {
  if (gridN < 256 || (gridN & (gridN - 1)) != 0)
    throw Error(ErrorKind::Config, "conditioning grid must be a power of two >= 256");
  auto at = [&](int N) {
    ConditioningConstants c;
    c.gridN = N;
    if (p.m <= 0.0) return c;  // H coincides with H0
    const double L = 6.0 * p.mu, h = L / N;
    double* in = fftw_alloc_real(static_cast<std::size_t>(N) * N);
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(N) * (N / 2 + 1));
    fftw_plan plan = fftw_plan_dft_r2c_2d(N, N, in, out, FFTW_ESTIMATE);
    // origin at index 0, so the transform of the even function is real
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        const SpacetimePoint z{(i < N / 2 ? i : i - N) * h, (j < N / 2 ? j : j - N) * h};
        const double om = conditioning_cutoff(z, p.mu);
        in[static_cast<std::size_t>(i) * N + j] =
            om == 0.0 ? 0.0 : om * (hadamard_regularized(z, p, true) - hadamard_regularized(z, p, false));
      }
    fftw_execute(plan);
    double K = 0.0, Nn = 0.0;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j <= N / 2; ++j) {
        const double w = (j == 0 || j == N / 2) ? 1.0 : 2.0;
        const double v = out[static_cast<std::size_t>(i) * (N / 2 + 1) + j][0] * h * h;
        K += w * std::abs(v);
        Nn += w * std::max(-v, 0.0);
      }
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
    // dmu_k = dk / (2 pi)^2 with dk = (2 pi / L)^2
    c.K = K / (L * L);
    c.NhatL1 = Nn / (L * L);
    return c;
  };
  const ConditioningConstants coarse = at(gridN);
  ConditioningConstants fine = at(2 * gridN);
  fine.change = coarse.K > 0.0 ? std::abs(fine.K - coarse.K) / coarse.K : std::abs(fine.K);
  if (fine.change > 0.05)
    throw Error(ErrorKind::GridTooCoarse, "conditioning constant moved by " + std::to_string(100 * fine.change) +
                                              "% under grid doubling");
  return fine;
}

double c_tilde(double alpha, double p, double mu) {
  const double b = alpha * p;
  if (b >= 1.0) throw Error(ErrorKind::InvalidExponent, "alpha p must be below 1");
  // int int_{[-mu, mu]^2} |u - u'|^-b du du'
  const double I1 = 2.0 * std::pow(2.0 * mu, 2.0 - b) / ((1.0 - b) * (2.0 - b));
  // one x-y pair: (1/2 du dv)^2 measure, factorized over u and v
  return 0.5 * I1;
}

double lq_norm(const std::function<double(SpacetimePoint)>& f, const NullBox& box, double q, int grid) {
  const double du = (box.u1 - box.u0) / grid, dv = (box.v1 - box.v0) / grid;
  double acc = 0.0;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      const double val = std::abs(f(SpacetimePoint::from_null(box.u0 + (i + 0.5) * du, box.v0 + (j + 0.5) * dv)));
      if (std::isinf(q))
        acc = std::max(acc, val);
      else
        acc += std::pow(val, q);
    }
  if (std::isinf(q)) return acc;
  return std::pow(acc * 0.5 * du * dv, 1.0 / q);
}

double lq_norm(const SmearingFunction& f, double q, int grid) {
  if (f.empty()) return 0.0;
  return lq_norm([&](SpacetimePoint z) { return f(z); }, f.null_box(), q, grid);
}

double qs_term_log_bound(int n, double p, const BoundInputs& in) {
  const BoundReport r = base_report(n, p, in);
  if (n == 0) return std::log(2.0);
  return std::log(2.0) + log_core(n, p, in, r.alpha, r.C_tilde) + n * std::log(r.gNorm);
}

BoundReport qs_term_bound(int n, double p, const BoundInputs& in, std::optional<double> measured) {
  BoundReport r = base_report(n, p, in);
  if (n == 0) {
    r.boundValue = 2.0;
  } else {
    r.boundValue = 2.0 * std::exp(log_core(n, p, in, r.alpha, r.C_tilde) + n * std::log(r.gNorm));
  }
  finish(r, measured);
  return r;
}

BoundReport field_term_bound(int n, FieldTerm which, double p, const BoundInputs& in, std::optional<double> measured) {
  (void)which;  // both theorems share the formula; only the modified test function differs
  BoundReport r = base_report(n, p, in);
  if (n == 0) {
    r.boundValue = 0.0;
  } else {
    if (in.gTildeNorm < 0.0) throw Error(ErrorKind::Config, "field-term bound needs the modified test function norm");
    const double logv = std::log(n) + n * std::log(2.0) - std::log(2.0) + log_core(n, p, in, r.alpha, r.C_tilde) +
                        (n - 1) * std::log(r.gNorm) + std::log(in.gTildeNorm);
    r.boundValue = in.gTildeNorm == 0.0 ? 0.0 : std::exp(logv);
  }
  finish(r, measured);
  return r;
}

double tail_bound(int N, double p, const BoundInputs& in) {
  const double alpha = in.params.alpha();
  check_exponent(alpha, p);
  // n^2 log C_Q outgrows (1 - 1/p) log n! for any C_Q > 1
  if (in.cQ > 1.0) return kInf;
  const double ct = c_tilde(alpha, p, in.params.mu);
  const double lg = std::log(lq_norm(in.g, conjugate_exponent(p)));
  auto logTerm = [&](int n) { return std::log(2.0) + log_core(n, p, in, alpha, ct) + n * lg; };
  double sum = 0.0;
  for (int n = N + 1; n < N + 100000; ++n) {
    const double lt = logTerm(n);
    if (lt > 700.0) return kInf;
    const double t = std::exp(lt);
    sum += t;
    if (t < 1e-16 * sum && logTerm(n + 1) < lt) return sum;
  }
  return kInf;
}

double modified_test_function_norm(FieldTerm which, const SmearingFunction& f, const BoundInputs& in, const QKernel& q,
                                   double qExp, int grid, std::int64_t budget) {
  const ModelParams& p = in.params;
  auto w = [&](SpacetimePoint y, SpacetimePoint x) -> std::complex<double> {
    const double H = hadamard_regularized(y - x, p, false);
    const double r = retarded_massive(y - x, p.m, p.signConvention), a = retarded_massive(x - y, p.m, p.signConvention);
    return which == FieldTerm::J ? std::complex<double>(H, 0.5 * (r - a)) : std::complex<double>(H, 0.5 * (r + a));
  };
  const SmearingFunction& g = in.g;
  auto gt = [&](SpacetimePoint y) -> double {
    const double gy = g(y);
    if (gy == 0.0) return 0.0;
    const double gq = gy * std::exp(-0.5 * p.a * p.a * q(y, y));
    IntegrandSpec spec;
    spec.boxes = {f.null_box()};
    spec.integrand = [&](const SpacetimePoint* x) -> std::complex<double> {
      const double fx = f(x[0]);
      if (fx == 0.0) return 0.0;
      return fx * (q(y, x[0]) + p.hbar * w(y, x[0]));
    };
    QuadOptions opt;
    opt.workers = 1;
    return std::abs(gq * integrate(spec, budget, 12345, opt).value);
  };
  return lq_norm(gt, g.null_box(), qExp, grid);
}

double cauchy_det_check(const std::vector<SpacetimePoint>& X, const std::vector<SpacetimePoint>& Y) {
  const std::size_t n = X.size();
  if (Y.size() != n || n == 0) throw Error(ErrorKind::Config, "need two nonempty point sets of equal size");
  auto check = [](double d) {
    if (std::abs(d) < 1e-10) throw Error(ErrorKind::DegenerateConfiguration, "coincident null coordinates");
  };
  double logLhs = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      for (const auto* P : {&X, &Y}) {
        const double du = (*P)[i].u() - (*P)[j].u(), dv = (*P)[i].v() - (*P)[j].v();
        check(du);
        check(dv);
        logLhs += std::log(std::abs(du)) + std::log(std::abs(dv));
      }
    }
  Eigen::MatrixXd Du(n, n), Dv(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double du = X[i].u() - Y[j].u(), dv = X[i].v() - Y[j].v();
      check(du);
      check(dv);
      logLhs -= std::log(std::abs(du)) + std::log(std::abs(dv));
      Du(i, j) = 1.0 / du;
      Dv(i, j) = 1.0 / dv;
    }
  const double rhs = std::abs(Du.partialPivLu().determinant()) * std::abs(Dv.partialPivLu().determinant());
  const double lhs = std::exp(logLhs);
  return std::abs(lhs - rhs) / std::max(std::abs(lhs), std::numeric_limits<double>::min());
}

nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j{{"n", r.n},         {"alpha", r.alpha},   {"p", r.p},
                   {"q", std::isinf(r.q) ? nlohmann::json("inf") : nlohmann::json(r.q)},
                   {"C_Q_mu", r.C_Q_mu}, {"K_conditioning", r.K_conditioning},
                   {"C_tilde", r.C_tilde}, {"g_norm", r.gNorm}, {"bound", r.boundValue},
                   {"satisfied", r.satisfied}};
  j["measured"] = r.computedMagnitude ? nlohmann::json(*r.computedMagnitude) : nlohmann::json(nullptr);
  return j;
}

std::string bound_csv_header() { return "n,alpha,p,q,C_Q,K,C_tilde,g_norm,bound,measured,satisfied"; }

std::string bound_csv_row(const BoundReport& r) {
  std::ostringstream os;
  os << std::setprecision(17) << r.n << "," << r.alpha << "," << r.p << ",";
  if (std::isinf(r.q))
    os << "inf";
  else
    os << r.q;
  os << "," << r.C_Q_mu << "," << r.K_conditioning << "," << r.C_tilde << "," << r.gNorm << "," << r.boundValue << ",";
  if (r.computedMagnitude) os << *r.computedMagnitude;
  os << "," << (r.satisfied ? "true" : "false");
  return os.str();
}

}  // namespace ssg
