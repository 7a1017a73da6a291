#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssg/kernels.hpp"

namespace ssg {

struct BoundInputs {
  ModelParams params;  // a, hbar, lambda, mu
  double cQ = 1.0;     // C_Q(mu)
  double K = 0.0;      // conditioning constant
  SmearingFunction g;
  double gTildeNorm = -1.0;  // L^q norm of the modified test function (J/M bounds); < 0: unset
};

struct BoundReport {
  int n = 0;
  double alpha = 0.0;
  double p = 1.0;
  double q = 0.0;  // infinity encoded as +inf
  double C_Q_mu = 1.0;
  double K_conditioning = 0.0;
  double C_tilde = 0.0;
  double gNorm = 0.0;
  double boundValue = 0.0;
  std::optional<double> computedMagnitude;
  bool satisfied = true;
};

// sqrt(max e^{a^2 Q}) over pairs of grid points of D_mu
double c_q_constant(const QTable& table, double a, double mu, int grid = 17);
double c_q_constant(const QKernel& q, double a, double mu, int grid = 17);

struct ConditioningConstants {
  double K = 0.0;       // discrete L1 norm of the Fourier transform of (H0 - H) Omega
  double NhatL1 = 0.0;  // L1 norm of its negative part
  int gridN = 0;        // resolution the values were taken at
  double change = 0.0;  // relative change of K under the last doubling
};

// Omega: 1 on D_{2mu}, 0 outside D_{3mu}, smooth in |t| + |x| in between
double conditioning_cutoff(SpacetimePoint z, double mu);
// evaluates at gridN and 2 gridN; GridTooCoarse when K moves by more than 5%
ConditioningConstants conditioning_constants(const ModelParams& p, int gridN);

// closed-form admissible constant: the pair integral of |du|^-b |dv|^-b over D_mu^2, b = alpha p
double c_tilde(double alpha, double p, double mu);
// L^q norm over the support (q = +inf gives the sup norm)
double lq_norm(const std::function<double(SpacetimePoint)>& f, const NullBox& box, double q, int grid = 256);
double lq_norm(const SmearingFunction& f, double q, int grid = 256);

BoundReport qs_term_bound(int n, double p, const BoundInputs& in, std::optional<double> measured = {});
// natural log of the same bound; stays finite where the bound itself overflows
double qs_term_log_bound(int n, double p, const BoundInputs& in);

enum class FieldTerm { J, M };
BoundReport field_term_bound(int n, FieldTerm which, double p, const BoundInputs& in,
                             std::optional<double> measured = {});
// sum of qs_term_bound(n) for n > N, stopped once terms drop below 1e-16 of the partial sum
double tail_bound(int N, double p, const BoundInputs& in);

// |g_Q [(Q + hbar w) f]| on a grid of the support of g; w = Omega for J, DeltaF for M
double modified_test_function_norm(FieldTerm which, const SmearingFunction& f, const BoundInputs& in,
                                   const QKernel& q, double qExp, int grid = 32, std::int64_t budget = 1 << 12);

// relative discrepancy between the Cauchy product formula and |det D^u| |det D^v|
double cauchy_det_check(const std::vector<SpacetimePoint>& X, const std::vector<SpacetimePoint>& Y);

nlohmann::json to_json(const BoundReport& r);
std::string bound_csv_header();
std::string bound_csv_row(const BoundReport& r);

}  // namespace ssg
