#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace ssg {

struct QuadResult {
  std::complex<double> value{0.0, 0.0};
  double error = 0.0;     // hypot of the component errors
  double error_re = 0.0;
  double error_im = 0.0;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;

  double real() const { return value.real(); }
  double imag() const { return value.imag(); }
};

inline QuadResult scaled(QuadResult r, std::complex<double> c) {
  // error of c*X from the component errors, treating them as independent
  const double cr = std::abs(c.real()), ci = std::abs(c.imag());
  const double er = std::hypot(cr * r.error_re, ci * r.error_im);
  const double ei = std::hypot(ci * r.error_re, cr * r.error_im);
  r.value *= c;
  r.error_re = er;
  r.error_im = ei;
  r.error = std::hypot(er, ei);
  return r;
}

}  // namespace ssg
