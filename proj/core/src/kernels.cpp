#include "ssg/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numbers>

#include "ssg/numerics.hpp"

namespace ssg {

const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::EvalOnLightcone: return "EvalOnLightcone";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::SingularCoincidence: return "SingularCoincidence";
    case ErrorKind::CancellationFailure: return "CancellationFailure";
    case ErrorKind::NegativeGrade: return "NegativeGrade";
    case ErrorKind::SingularityBudgetExceeded: return "SingularityBudgetExceeded";
    case ErrorKind::InvalidExponent: return "InvalidExponent";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::CflViolation: return "CflViolation";
    case ErrorKind::Config: return "ConfigError";
  }
  return "Error";
}

SignConvention parse_sign_convention(const std::string& s) {
  if (s == "paper") return SignConvention::paper;
  if (s == "green") return SignConvention::green;
  throw Error(ErrorKind::Config, "unknown sign convention '" + s + "'");
}

std::string to_string(SignConvention c) { return c == SignConvention::paper ? "paper" : "green"; }

double ModelParams::alpha() const { return a * a * hbar / (4.0 * std::numbers::pi); }

double retarded_sign(SignConvention c) { return c == SignConvention::green ? 1.0 : -1.0; }
double hierarchy_sign(SignConvention c) { return c == SignConvention::green ? -1.0 : 1.0; }

double chi_cutoff(double t, double T, double width) {
  const double s = (t - T) / width;
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double e0 = std::exp(-1.0 / s);
  const double e1 = std::exp(-1.0 / (1.0 - s));
  return e0 / (e0 + e1);
}

double retarded_massless(SpacetimePoint z, SignConvention c) {
  return in_future_cone(z) ? 0.5 * retarded_sign(c) : 0.0;
}

double retarded_massive(SpacetimePoint z, double m, SignConvention c) {
  if (!in_future_cone(z)) return 0.0;
  if (m == 0.0) return 0.5 * retarded_sign(c);
  const double s2 = -lorentzian_square(z);
  return 0.5 * retarded_sign(c) * std::cyl_bessel_j(0.0, m * std::sqrt(std::max(s2, 0.0)));
}

double advanced(SpacetimePoint z, double m, SignConvention c) { return retarded_massive(-z, m, c); }

double pauli_jordan(SpacetimePoint z, double m, SignConvention c) {
  return retarded_massive(z, m, c) - advanced(z, m, c);
}

double hadamard_massive(SpacetimePoint z, double m, double floor) {
  if (m <= 0.0) throw Error(ErrorKind::Config, "massive Hadamard kernel needs m > 0");
  const double z2 = lorentzian_square(z);
  if (std::abs(z2) < floor) throw Error(ErrorKind::EvalOnLightcone, "Hadamard kernel on the light cone");
  if (z2 > 0.0) return std::cyl_bessel_k(0.0, m * std::sqrt(z2)) / (2.0 * std::numbers::pi);
  return -0.25 * std::cyl_neumann(0.0, m * std::sqrt(-z2));
}

double hadamard_massless(SpacetimePoint z, double muRef, double floor) {
  const double z2 = lorentzian_square(z);
  if (std::abs(z2) < floor) throw Error(ErrorKind::EvalOnLightcone, "Hadamard kernel on the light cone");
  return -std::log(std::abs(z2 / (4.0 * muRef * muRef))) / (4.0 * std::numbers::pi);
}

double hadamard_regularized(SpacetimePoint z, const ModelParams& p, bool massless) {
  double z2 = lorentzian_square(z);
  if (std::abs(z2) < p.lightconeFloor) z2 = z2 < 0.0 ? -p.lightconeFloor : p.lightconeFloor;
  if (massless || p.m <= 0.0) return -std::log(std::abs(z2 / (4.0 * p.muRef * p.muRef))) / (4.0 * std::numbers::pi);
  if (z2 > 0.0) return std::cyl_bessel_k(0.0, p.m * std::sqrt(z2)) / (2.0 * std::numbers::pi);
  return -0.25 * std::cyl_neumann(0.0, p.m * std::sqrt(-z2));
}

std::complex<double> wightman(SpacetimePoint z, double m, SignConvention c, double floor) {
  return {hadamard_massive(z, m, floor), 0.5 * pauli_jordan(z, m, c)};
}

std::complex<double> feynman(SpacetimePoint z, double m, SignConvention c, double floor) {
  return wightman(z, m, c, floor) + std::complex<double>(0.0, advanced(z, m, c));
}

std::complex<double> antifeynman(SpacetimePoint z, double m, SignConvention c, double floor) {
  return wightman(z, m, c, floor) - std::complex<double>(0.0, retarded_massive(z, m, c));
}

double bessel_j0_of_square(double y) {
  if (y == 0.0) return 1.0;
  if (y > 0.0) return std::cyl_bessel_j(0.0, std::sqrt(y));
  return std::cyl_bessel_i(0.0, std::sqrt(-y));
}

double q_branch(double ua, double va, SpacetimePoint z, SpacetimePoint zp, const ModelParams& p, int nodes) {
  const double ta = 0.5 * (ua + va);
  const double W = 2.0 * (ta - p.T);
  if (W <= 0.0) return 0.0;
  const double al = z.u() - ua, be = z.v() - va;
  const double al2 = zp.u() - ua, be2 = zp.v() - va;
  const double m2 = p.m * p.m;
  const double wr = std::max(0.0, W - 2.0 * p.rampWidth);

  const GaussRule& gx = gauss_legendre(nodes);
  auto inner = [&](double w) {
    if (m2 == 0.0) return 1.0;
    double s = 0.0;
    for (int k = 0; k < nodes; ++k) {
      const double xi = 0.5 * (1.0 + gx.nodes[k]);
      const double su = w * xi, sv = w * (1.0 - xi);
      s += gx.weights[k] * bessel_j0_of_square(m2 * (al + su) * (be + sv)) *
           bessel_j0_of_square(m2 * (al2 + su) * (be2 + sv));
    }
    return 0.5 * s;
  };
  auto f = [&](double w) {
    const double c = chi_cutoff(ta - 0.5 * w, p.T, p.rampWidth);
    return 0.125 * c * c * w * inner(w);
  };
  double total = 0.0;
  if (wr > 0.0) total += gauss_integrate(f, 0.0, wr, nodes);
  total += gauss_integrate(f, wr, W, 2 * nodes);
  return total;
}

QuadResult covariance_q(SpacetimePoint z, SpacetimePoint zp, const ModelParams& p, int budget) {
  QuadResult r;
  const double ua = std::min(z.u(), zp.u()), va = std::min(z.v(), zp.v());
  if (0.5 * (ua + va) <= p.T) return r;
  const int n = std::max(budget, 1);
  const double coarse = q_branch(ua, va, z, zp, p, n);
  const double fine = q_branch(ua, va, z, zp, p, 2 * n);
  r.value = fine;
  r.error_re = std::abs(fine - coarse);
  r.error = r.error_re;
  r.samples = n;
  return r;
}

double covariance_q0_sharp(SpacetimePoint z, SpacetimePoint zp, double T) {
  const double ta = 0.5 * (std::min(z.u(), zp.u()) + std::min(z.v(), zp.v()));
  if (ta <= T) return 0.0;
  return 0.25 * (ta - T) * (ta - T);
}

// ---------------------------------------------------------------------------

MasslessQ::MasslessQ(const ModelParams& p, int resolution)
    : T_(p.T), w_(p.rampWidth), h_(p.rampWidth / resolution) {
  c0_.assign(resolution + 1, 0.0);
  c1_.assign(resolution + 1, 0.0);
  for (int i = 0; i < resolution; ++i) {
    const double a = T_ + i * h_;
    const double d0 = gauss_integrate([&](double s) { const double c = chi_cutoff(s, T_, w_); return c * c; }, a, a + h_, 8);
    const double d1 = gauss_integrate([&](double s) { const double c = chi_cutoff(s, T_, w_); return s * c * c; }, a, a + h_, 8);
    c0_[i + 1] = c0_[i] + d0;
    c1_[i + 1] = c1_[i] + d1;
  }
  c0End_ = c0_.back();
  c1End_ = c1_.back();
}

double MasslessQ::of_apex_time(double ta) const {
  if (ta <= T_) return 0.0;
  const double te = T_ + w_;
  if (ta >= te) {
    const double r = ta - te;
    return 0.5 * (ta * c0End_ - c1End_ + 0.5 * r * r);
  }
  // cubic Hermite on the cumulative moments, derivatives chi^2 and s chi^2
  const double s = (ta - T_) / h_;
  const int n = static_cast<int>(c0_.size()) - 1;
  int i = std::min(static_cast<int>(s), n - 1);
  const double x = s - i;
  const double a = T_ + i * h_, b = a + h_;
  const double ca = chi_cutoff(a, T_, w_), cb = chi_cutoff(b, T_, w_);
  const double h00 = (1 + 2 * x) * (1 - x) * (1 - x), h10 = x * (1 - x) * (1 - x);
  const double h01 = x * x * (3 - 2 * x), h11 = x * x * (x - 1);
  const double C0 = h00 * c0_[i] + h10 * h_ * ca * ca + h01 * c0_[i + 1] + h11 * h_ * cb * cb;
  const double C1 = h00 * c1_[i] + h10 * h_ * a * ca * ca + h01 * c1_[i + 1] + h11 * h_ * b * cb * cb;
  return 0.5 * (ta * C0 - C1);
}

double MasslessQ::operator()(SpacetimePoint z, SpacetimePoint zp) const {
  return of_apex_time(0.5 * (std::min(z.u(), zp.u()) + std::min(z.v(), zp.v())));
}

// ---------------------------------------------------------------------------

double QTable::max_value() const {
  double mx = 0.0;
  for (double v : values) mx = std::max(mx, v);
  return mx;
}

QTable build_q_table(const ModelParams& p, int nT, int nX, int budget, Interpolation interp, int workers) {
  if (nT < 4 || nX < 4) throw Error(ErrorKind::Config, "QTable needs at least 4 nodes per axis");
  QTable tab;
  tab.params = p;
  tab.nT = nT;
  tab.nX = nX;
  tab.budget = budget;
  tab.interpolation = interp;
  tab.timeGrid.resize(nT);
  tab.spaceOffsetGrid.resize(nX);
  for (int i = 0; i < nT; ++i) tab.timeGrid[i] = -p.mu + 2.0 * p.mu * i / (nT - 1);
  for (int k = 0; k < nX; ++k) tab.spaceOffsetGrid[k] = -2.0 * p.mu + 4.0 * p.mu * k / (nX - 1);
  const std::size_t total = static_cast<std::size_t>(nT) * nT * nX;
  tab.values.assign(total, 0.0);
  tab.nested.assign(total, 0.0);
  tab.crossed.assign(total, 0.0);

  std::unique_ptr<MasslessQ> mq;
  if (p.m == 0.0) mq = std::make_unique<MasslessQ>(p);

  parallel_for(static_cast<std::size_t>(nT), workers, [&](std::size_t ii) {
    const int i = static_cast<int>(ii);
    for (int j = 0; j < nT; ++j) {
      for (int k = 0; k < nX; ++k) {
        const SpacetimePoint z{tab.timeGrid[i], 0.0};
        const SpacetimePoint zp{tab.timeGrid[j], -tab.spaceOffsetGrid[k]};
        const std::size_t idx = tab.index(i, j, k);
        if (mq) {
          tab.nested[idx] = mq->of_apex_time(0.5 * (z.u() + z.v()));
          tab.crossed[idx] = mq->of_apex_time(0.5 * (z.u() + zp.v()));
        } else {
          tab.nested[idx] = q_branch(z.u(), z.v(), z, zp, p, budget);
          tab.crossed[idx] = q_branch(z.u(), zp.v(), z, zp, p, budget);
        }
      }
    }
  });
  // node values: pick the branch whose apex is the cone meet
  for (int i = 0; i < nT; ++i)
    for (int j = 0; j < nT; ++j)
      for (int k = 0; k < nX; ++k) {
        const double dt = tab.timeGrid[i] - tab.timeGrid[j], d = tab.spaceOffsetGrid[k];
        const double du = dt - d, dv = dt + d;
        double v;
        if (du <= 0 && dv <= 0) v = tab.nested[tab.index(i, j, k)];
        else if (du >= 0 && dv >= 0) v = tab.nested[tab.index(j, i, nX - 1 - k)];
        else if (du <= 0) v = tab.crossed[tab.index(i, j, k)];
        else v = tab.crossed[tab.index(j, i, nX - 1 - k)];
        tab.values[tab.index(i, j, k)] = v;
      }
  return tab;
}

namespace {

void stencil(double s, int n, bool cubic, int& i0, double w[4], int& count) {
  if (cubic) {
    i0 = std::clamp(static_cast<int>(std::floor(s)) - 1, 0, n - 4);
    count = 4;
    for (int a = 0; a < 4; ++a) {
      double num = 1.0, den = 1.0;
      for (int b = 0; b < 4; ++b) {
        if (a == b) continue;
        num *= s - (i0 + b);
        den *= static_cast<double>(a - b);
      }
      w[a] = num / den;
    }
  } else {
    i0 = std::clamp(static_cast<int>(std::floor(s)), 0, n - 2);
    count = 2;
    w[1] = s - i0;
    w[0] = 1.0 - w[1];
  }
}

double interp3(const QTable& tab, const std::vector<double>& arr, double t, double tp, double d) {
  const double mu = tab.params.mu;
  const bool cubic = tab.interpolation == Interpolation::tricubic;
  const double si = (t + mu) / (2.0 * mu) * (tab.nT - 1);
  const double sj = (tp + mu) / (2.0 * mu) * (tab.nT - 1);
  const double sk = (d + 2.0 * mu) / (4.0 * mu) * (tab.nX - 1);
  int i0, j0, k0, ci, cj, ck;
  double wi[4], wj[4], wk[4];
  stencil(si, tab.nT, cubic, i0, wi, ci);
  stencil(sj, tab.nT, cubic, j0, wj, cj);
  stencil(sk, tab.nX, cubic, k0, wk, ck);
  double acc = 0.0;
  for (int a = 0; a < ci; ++a) {
    double accj = 0.0;
    for (int b = 0; b < cj; ++b) {
      const double* row = &arr[tab.index(i0 + a, j0 + b, k0)];
      double acck = 0.0;
      for (int c = 0; c < ck; ++c) acck += wk[c] * row[c];
      accj += wj[b] * acck;
    }
    acc += wi[a] * accj;
  }
  return acc;
}

}  // namespace

double q_interp(const QTable& tab, SpacetimePoint z, SpacetimePoint zp) {
  if (zp.t < z.t || (zp.t == z.t && zp.x < z.x)) std::swap(z, zp);
  const double mu = tab.params.mu;
  const double tol = 1e-12 * mu;
  const double d = z.x - zp.x;
  if (std::abs(z.t) > mu + tol || std::abs(zp.t) > mu + tol || std::abs(d) > 2.0 * mu + tol)
    throw Error(ErrorKind::OutOfDomain, "Q table query outside the tabulated box");
  const double dt = z.t - zp.t;
  const double du = dt - d, dv = dt + d;
  if (du <= 0 && dv <= 0) return interp3(tab, tab.nested, z.t, zp.t, d);
  if (du >= 0 && dv >= 0) return interp3(tab, tab.nested, zp.t, z.t, -d);
  if (du <= 0) return interp3(tab, tab.crossed, z.t, zp.t, d);
  return interp3(tab, tab.crossed, zp.t, z.t, -d);
}

namespace {
constexpr char kMagic[4] = {'Q', 'T', 'B', 'L'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error(ErrorKind::Config, "truncated Q table file");
  return v;
}
}  // namespace

void save_q_table(const QTable& tab, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Config, "cannot write " + path);
  os.write(kMagic, 4);
  put(os, kVersion);
  put(os, static_cast<std::uint32_t>(tab.nT));
  put(os, static_cast<std::uint32_t>(tab.nX));
  put(os, static_cast<std::uint32_t>(tab.budget));
  put(os, static_cast<std::uint32_t>(tab.interpolation == Interpolation::tricubic ? 3 : 1));
  const ModelParams& p = tab.params;
  for (double v : {p.m, p.a, p.hbar, p.lambda, p.mu, p.muRef, p.T,
                   p.signConvention == SignConvention::green ? 1.0 : -1.0, p.rampWidth, p.lightconeFloor})
    put(os, v);
  for (const auto* arr : {&tab.values, &tab.nested, &tab.crossed})
    os.write(reinterpret_cast<const char*>(arr->data()), static_cast<std::streamsize>(arr->size() * sizeof(double)));
}

QTable load_q_table(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Config, "cannot read " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorKind::Config, "not a Q table file");
  if (get<std::uint32_t>(is) != kVersion) throw Error(ErrorKind::Config, "unsupported Q table version");
  QTable tab;
  tab.nT = static_cast<int>(get<std::uint32_t>(is));
  tab.nX = static_cast<int>(get<std::uint32_t>(is));
  tab.budget = static_cast<int>(get<std::uint32_t>(is));
  tab.interpolation = get<std::uint32_t>(is) == 3 ? Interpolation::tricubic : Interpolation::trilinear;
  ModelParams& p = tab.params;
  p.m = get<double>(is);
  p.a = get<double>(is);
  p.hbar = get<double>(is);
  p.lambda = get<double>(is);
  p.mu = get<double>(is);
  p.muRef = get<double>(is);
  p.T = get<double>(is);
  p.signConvention = get<double>(is) > 0 ? SignConvention::green : SignConvention::paper;
  p.rampWidth = get<double>(is);
  p.lightconeFloor = get<double>(is);
  tab.timeGrid.resize(tab.nT);
  tab.spaceOffsetGrid.resize(tab.nX);
  for (int i = 0; i < tab.nT; ++i) tab.timeGrid[i] = -p.mu + 2.0 * p.mu * i / (tab.nT - 1);
  for (int k = 0; k < tab.nX; ++k) tab.spaceOffsetGrid[k] = -2.0 * p.mu + 4.0 * p.mu * k / (tab.nX - 1);
  const std::size_t total = static_cast<std::size_t>(tab.nT) * tab.nT * tab.nX;
  for (auto* arr : {&tab.values, &tab.nested, &tab.crossed}) {
    arr->resize(total);
    is.read(reinterpret_cast<char*>(arr->data()), static_cast<std::streamsize>(total * sizeof(double)));
    if (!is) throw Error(ErrorKind::Config, "truncated Q table file");
  }
  return tab;
}

// ---------------------------------------------------------------------------

QKernel QKernel::massless(const ModelParams& p) {
  QKernel k;
  k.mode_ = Mode::massless;
  k.params_ = p;
  k.massless_ = std::make_shared<MasslessQ>(p);
  return k;
}

QKernel QKernel::tabulated(std::shared_ptr<const QTable> table) {
  QKernel k;
  k.mode_ = Mode::table;
  k.params_ = table->params;
  k.table_ = std::move(table);
  return k;
}

QKernel QKernel::direct(const ModelParams& p, int budget) {
  QKernel k;
  k.mode_ = Mode::direct;
  k.params_ = p;
  k.budget_ = budget;
  return k;
}

QKernel QKernel::automatic(const ModelParams& p, int nT, int nX, int workers) {
  if (p.m == 0.0) return massless(p);
  return tabulated(std::make_shared<const QTable>(build_q_table(p, nT, nX, 8, Interpolation::tricubic, workers)));
}

double QKernel::operator()(SpacetimePoint z, SpacetimePoint zp) const {
  switch (mode_) {
    case Mode::massless: return (*massless_)(z, zp);
    case Mode::table: return q_interp(*table_, z, zp);
    case Mode::direct: return covariance_q(z, zp, params_, budget_).real();
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

double SmearingFunction::operator()(SpacetimePoint z) const {
  double s = 0.0;
  for (const Bump& b : bumps) {
    const double dt = z.t - b.center.t, dx = z.x - b.center.x;
    const double r2 = (dt * dt + dx * dx) / (b.radius * b.radius);
    if (r2 < 1.0) s += b.amplitude * std::exp(1.0 - 1.0 / (1.0 - r2));
  }
  return s;
}

NullBox SmearingFunction::null_box() const {
  NullBox box{0, 0, 0, 0};
  bool first = true;
  for (const Bump& b : bumps) {
    const double r = b.radius * std::numbers::sqrt2;
    const double u = b.center.u(), v = b.center.v();
    if (first) {
      box = {u - r, u + r, v - r, v + r};
      first = false;
    } else {
      box.u0 = std::min(box.u0, u - r);
      box.u1 = std::max(box.u1, u + r);
      box.v0 = std::min(box.v0, v - r);
      box.v1 = std::max(box.v1, v + r);
    }
  }
  return box;
}

bool SmearingFunction::inside_diamond(double mu) const {
  for (const Bump& b : bumps)
    if (std::abs(b.center.t) + std::abs(b.center.x) + b.radius * std::numbers::sqrt2 > mu) return false;
  return true;
}

bool SmearingFunction::nonnegative() const {
  return std::all_of(bumps.begin(), bumps.end(), [](const Bump& b) { return b.amplitude >= 0.0; });
}

SmearingFunction single_bump(double t, double x, double radius, double amplitude) {
  return SmearingFunction{{Bump{{t, x}, radius, amplitude}}};
}

double gq_weight(SpacetimePoint x, const ModelParams& p, const QTable& table, const SmearingFunction& g) {
  const double gx = g(x);
  const double q = q_interp(table, x, x);
  return gx * std::exp(-0.5 * p.a * p.a * q);
}

double gq_weight(SpacetimePoint x, const ModelParams& p, const QKernel& q, const SmearingFunction& g) {
  const double gx = g(x);
  if (gx == 0.0) return 0.0;
  return gx * std::exp(-0.5 * p.a * p.a * q(x, x));
}

}  // namespace ssg
