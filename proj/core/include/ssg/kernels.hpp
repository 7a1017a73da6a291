#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ssg/errors.hpp"
#include "ssg/quad_result.hpp"

namespace ssg {

struct SpacetimePoint {
  double t = 0.0;
  double x = 0.0;

  double u() const { return t - x; }
  double v() const { return t + x; }
  static SpacetimePoint from_null(double u, double v) { return {0.5 * (u + v), 0.5 * (v - u)}; }
};

inline SpacetimePoint operator-(SpacetimePoint a, SpacetimePoint b) { return {a.t - b.t, a.x - b.x}; }
inline SpacetimePoint operator+(SpacetimePoint a, SpacetimePoint b) { return {a.t + b.t, a.x + b.x}; }
inline SpacetimePoint operator-(SpacetimePoint a) { return {-a.t, -a.x}; }
inline bool operator==(SpacetimePoint a, SpacetimePoint b) { return a.t == b.t && a.x == b.x; }

// -t^2 + x^2, factored so that near-null points keep their relative accuracy
inline double lorentzian_square(SpacetimePoint z) { return (z.x - z.t) * (z.x + z.t); }
inline bool in_future_cone(SpacetimePoint z) { return z.t >= std::abs(z.x); }
inline bool in_past_cone(SpacetimePoint z) { return -z.t >= std::abs(z.x); }

enum class SignConvention { paper, green };

SignConvention parse_sign_convention(const std::string& s);
std::string to_string(SignConvention c);

struct ModelParams {
  double m = 0.0;
  double a = 1.0;
  double hbar = 1.0;
  double lambda = 1.0;
  double mu = 1.0;
  double muRef = 1.0;
  double T = -1.0;
  SignConvention signConvention = SignConvention::green;
  double rampWidth = 1.0;
  double lightconeFloor = 1e-12;

  double alpha() const;
};

// +1 when the retarded kernel is the positive Green function of the wave operator
double retarded_sign(SignConvention c);
// sign in front of the vertex source of the perturbative hierarchy, chosen so the
// physical source is always -a g sin(a psi)
double hierarchy_sign(SignConvention c);

double chi_cutoff(double t, double T, double width = 1.0);

double retarded_massless(SpacetimePoint z, SignConvention c);
double retarded_massive(SpacetimePoint z, double m, SignConvention c);
double advanced(SpacetimePoint z, double m, SignConvention c);
double pauli_jordan(SpacetimePoint z, double m, SignConvention c);
double hadamard_massive(SpacetimePoint z, double m, double floor = 1e-12);
double hadamard_massless(SpacetimePoint z, double muRef, double floor = 1e-12);
// H (or the massless H0) with |z^2| clamped to p.lightconeFloor instead of throwing
double hadamard_regularized(SpacetimePoint z, const ModelParams& p, bool massless);
std::complex<double> wightman(SpacetimePoint z, double m, SignConvention c, double floor = 1e-12);
std::complex<double> feynman(SpacetimePoint z, double m, SignConvention c, double floor = 1e-12);
std::complex<double> antifeynman(SpacetimePoint z, double m, SignConvention c, double floor = 1e-12);

// J0(sqrt(y)) continued to y < 0 as I0(sqrt(-y))
double bessel_j0_of_square(double y);

// Q by quadrature over the truncated cone meet; budget is the Gauss order per panel
QuadResult covariance_q(SpacetimePoint z, SpacetimePoint zp, const ModelParams& p, int budget = 16);
double covariance_q0_sharp(SpacetimePoint z, SpacetimePoint zp, double T);

// Q restricted to a fixed apex choice: the integrand is continued analytically so the
// result is smooth in z, z' even where the apex stops being the cone meet
double q_branch(double ua, double va, SpacetimePoint z, SpacetimePoint zp, const ModelParams& p, int nodes);

// Exact massless Q: depends only on the cone-meet apex time
class MasslessQ {
 public:
  explicit MasslessQ(const ModelParams& p, int resolution = 4096);
  double operator()(SpacetimePoint z, SpacetimePoint zp) const;
  double of_apex_time(double ta) const;

 private:
  double T_, w_, h_;
  std::vector<double> c0_, c1_;  // cumulative moments of chi^2 on the ramp
  double c0End_, c1End_;
};

enum class Interpolation { trilinear, tricubic };

struct QTable {
  ModelParams params;
  int nT = 0;
  int nX = 0;
  int budget = 0;
  Interpolation interpolation = Interpolation::tricubic;
  std::vector<double> timeGrid;
  std::vector<double> spaceOffsetGrid;
  // Q at the nodes, index (i, j, k) <-> (t_i, t'_j, d_k), row-major
  std::vector<double> values;
  // smooth branches with the apex pinned to z (nested) or to (u, v') (crossed)
  std::vector<double> nested;
  std::vector<double> crossed;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * nT + j) * nX + k;
  }
  double max_value() const;
};

QTable build_q_table(const ModelParams& p, int nT, int nX, int budget = 8,
                     Interpolation interp = Interpolation::tricubic, int workers = 1);
double q_interp(const QTable& table, SpacetimePoint z, SpacetimePoint zp);
void save_q_table(const QTable& table, const std::string& path);
QTable load_q_table(const std::string& path);

// Uniform access to Q for integrands: exact massless formula, a table, or direct quadrature
class QKernel {
 public:
  static QKernel massless(const ModelParams& p);
  static QKernel tabulated(std::shared_ptr<const QTable> table);
  static QKernel direct(const ModelParams& p, int budget);
  // massless closed form when m == 0, otherwise builds a table of the given size
  static QKernel automatic(const ModelParams& p, int nT = 32, int nX = 64, int workers = 1);

  double operator()(SpacetimePoint z, SpacetimePoint zp) const;
  const ModelParams& params() const { return params_; }
  const QTable* table() const { return table_.get(); }

 private:
  enum class Mode { massless, table, direct } mode_ = Mode::massless;
  ModelParams params_;
  std::shared_ptr<const MasslessQ> massless_;
  std::shared_ptr<const QTable> table_;
  int budget_ = 16;
};

struct Bump {
  SpacetimePoint center;
  double radius = 1.0;
  double amplitude = 1.0;
};

struct NullBox {
  double u0, u1, v0, v1;
};

struct SmearingFunction {
  std::vector<Bump> bumps;

  double operator()(SpacetimePoint z) const;
  bool empty() const { return bumps.empty(); }
  NullBox null_box() const;
  bool inside_diamond(double mu) const;
  bool nonnegative() const;
};

SmearingFunction single_bump(double t, double x, double radius, double amplitude = 1.0);

double gq_weight(SpacetimePoint x, const ModelParams& p, const QTable& table, const SmearingFunction& g);
double gq_weight(SpacetimePoint x, const ModelParams& p, const QKernel& q, const SmearingFunction& g);

}  // namespace ssg
