#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace ssg {

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Gauss-Legendre rule of order n, cached per n
const GaussRule& gauss_legendre(int n);

// Integrate f over [a, b] with an n-point Gauss-Legendre rule
double gauss_integrate(const std::function<double(double)>& f, double a, double b, int n);

// Worker count from the WORKERS environment variable, else hardware concurrency
int default_workers();

// Runs fn(i) for i in [0, n) on up to `workers` threads; each index runs exactly once
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace ssg
