#pragma once

// Reference values computed independently of the library.

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace oracle {

// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt
inline double bessel_k_quadrature(double nu, double x) {
  boost::math::quadrature::exp_sinh<double> integrator;
  auto f = [&](double t) {
    const double a = -x * std::cosh(t) + nu * t;
    const double b = -x * std::cosh(t) - nu * t;
    return 0.5 * (std::exp(a) + std::exp(b));
  };
  return integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity());
}

inline double bessel_k_half_integer(int twice_nu, double x) {
  const double base = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x);
  switch (twice_nu) {
    case 1: return base;
    case 3: return base * (1.0 + 1.0 / x);
    case 5: return base * (1.0 + 3.0 / x + 3.0 / (x * x));
    default: return NAN;
  }
}

// Unit Matern in extended precision.
inline long double matern_unit_ld(long double nu, long double t) {
  if (t == 0.0L) return 1.0L;
  return std::pow(t, nu) * boost::math::cyl_bessel_k(nu, t) / (boost::math::tgamma(nu) * std::pow(2.0L, nu - 1.0L));
}

inline double binom_coeff(int m, int i) { return boost::math::binomial_coefficient<double>(m, i); }

inline std::vector<long double> stencil_ld(int m) {
  std::vector<long double> d(m + 1);
  for (int i = 0; i <= m; ++i) d[i] = ((m + i) % 2 ? -1.0L : 1.0L) * binom_coeff(m, i);
  return d;
}

// n^exponent sum_{i,j} d_i d_j cov(|i - j| / n), in long double.
template <class Cov>
long double stencil_quadratic_form(int m, long double n, long double exponent, Cov&& cov) {
  const auto d = stencil_ld(m);
  long double s = 0.0L;
  for (int i = 0; i <= m; ++i)
    for (int j = 0; j <= m; ++j) s += d[i] * d[j] * cov(std::abs(i - j) / n);
  return std::pow(n, exponent) * s;
}

// E Q for the unit exponential covariance in 1-D at order 1: n 2 (1 - e^(-1/n)).
inline double ou_expected_q1(double n) { return -2.0 * n * std::expm1(-1.0 / n); }

// sum_{i,j} d_i d_j |i - j|^delta
inline double power_sum(int p, double delta) {
  double s = 0.0;
  for (int i = 0; i <= p; ++i)
    for (int j = 0; j <= p; ++j) {
      if (i == j) continue;
      s += (((i + j) % 2) ? -1.0 : 1.0) * binom_coeff(p, i) * binom_coeff(p, j) * std::pow(std::abs(i - j), delta);
    }
  return s;
}

}  // namespace oracle
