#pragma once

// Independent reference values for tests. Nothing here calls into the
// library's quadrature or kernel code.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

namespace quantband::oracle {

// K(x) = pi^-1 int_0^1 (1 - t^2)^3 cos(t x) dt in extended precision.
inline long double base_kernel(long double x) {
  const auto f = [x](long double t) {
    const long double u = 1.0L - t * t;
    return u * u * u * std::cos(t * x);
  };
  const long double integral =
      boost::math::quadrature::gauss_kronrod<long double, 61>::integrate(f, 0.0L, 1.0L, 12, 1e-17L);
  return integral / std::numbers::pi_v<long double>;
}

// Central second difference of base_kernel with step 1e-4.
inline long double base_kernel_second_difference(long double x) {
  const long double step = 1e-4L;
  return (base_kernel(x + step) - 2.0L * base_kernel(x) + base_kernel(x - step)) / (step * step);
}

// (1/h)[K(x/h) - (b/h)^2 K''(x/h)]
inline double laplace_kernel(double x, double h, double b) {
  const long double u = static_cast<long double>(x) / h;
  const long double r = static_cast<long double>(b) / h;
  return static_cast<double>((base_kernel(u) - r * r * base_kernel_second_difference(u)) / h);
}

}  // namespace quantband::oracle
