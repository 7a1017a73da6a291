#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "ssg/algebra.hpp"
#include "ssg/kernels.hpp"
#include "ssg/quad.hpp"

namespace ssg {

struct SeriesContext {
  ModelParams params;
  SmearingFunction g;                                 // interaction cutoff
  std::map<std::string, SmearingFunction> smearings;  // leg smearings (and extra vertex smearings) by id
  std::shared_ptr<const QKernel> q;                   // built from params when empty
  std::int64_t budget = 1 << 16;
  std::uint64_t seed = 1;
  int maxOrder = 3;
  QuadOptions quad;

  const QKernel& q_kernel() const;
};

struct SeriesCoefficient {
  int n = 0;
  std::string observable;
  QuadResult value;
  std::size_t termCount = 0;
  double hbar = 0.0;  // 0 for classical
};

// Numeric value of a sum of term graphs at phi = 0, kernels bound in the context's sign convention.
// Terms on the same domain share one point set so cancellations happen pointwise.
QuadResult evaluate_terms(const Expansion& terms, const SeriesContext& ctx, double hbar);

// raw -> physical value of an order-n coefficient (the green binding conjugates and flips retarded edges)
QuadResult physical_value(const QuadResult& raw, int n, SignConvention c);

SeriesCoefficient expectation_coefficient(int n, const SmearingFunction& f, const SeriesContext& ctx);
SeriesCoefficient correlation_coefficient(int n, const SmearingFunction& f1, const SmearingFunction& f2,
                                          const SeriesContext& ctx);
// independent Gaussian integration-by-parts value of correlation_coefficient(1)
QuadResult order1_correction_oracle(const SmearingFunction& f1, const SmearingFunction& f2, const SeriesContext& ctx);
// all hbar strata at the given hbar; obs legs are looked up in ctx.smearings
SeriesCoefficient quantum_coefficient(int n, double hbar, const Observable& obs, const SeriesContext& ctx);

std::string csv_header();
std::string csv_row(const SeriesCoefficient& c);

}  // namespace ssg
