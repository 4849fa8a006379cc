#pragma once

// Scalar special functions used by the Matern family.

namespace qvest::specfun {

// Tolerance for treating a smoothness as an integer.
inline constexpr double kIntegerTol = 1e-9;
// Outside kIntegerTol but inside this band the non-integer formulas are
// too ill-conditioned to be trusted; evaluation is refused.
inline constexpr double kNearIntegerBand = 1e-6;

// Matern smoothness nu > 0 together with its integer classification.
class SmoothnessOrder {
 public:
  explicit SmoothnessOrder(double nu);

  double value() const { return nu_; }
  bool is_integer() const { return is_integer_; }
  // Nearest integer to nu.
  int nearest_integer() const { return nearest_; }
  // True when nu sits in the ill-conditioned band around an integer.
  bool near_integer() const;

 private:
  double nu_;
  int nearest_;
  bool is_integer_;
};

// log Gamma(x) for x > 0 (Lanczos, g = 7).
double log_gamma(double x);

// Gamma(x) for any x not a nonpositive integer. Uses reflection for x < 0.5.
double gamma(double x);

// 1 / Gamma(x), defined everywhere (zero at nonpositive integers).
double reciprocal_gamma(double x);

// Digamma at a positive integer k: psi(k) = -euler_gamma + sum_{j<k} 1/j.
double digamma_integer(int k);

// Modified Bessel function of the second kind K_nu(x), nu > 0, x > 0.
//
// Temme's series for x <= 2 and Steed's continued fraction for x > 2 give
// K_mu and K_{mu+1} with |mu| <= 1/2; forward recurrence reaches nu. The
// Temme series is uniform in mu so integer orders need no special case.
double bessel_k(double nu, double x);

// Same as bessel_k but accepts nu = 0; used by the recurrence tests.
double bessel_k_nonneg(double nu, double x);

// Principal irregular term G_nu(t) of the unit Matern covariance.
//   integer nu:  (-1)^(nu+1) / (2^(2nu-1) Gamma(nu) Gamma(nu+1)) t^(2nu) log t
//   otherwise:   -pi / (2^(2nu) sin(nu pi) Gamma(nu) Gamma(nu+1)) t^(2nu)
// G_nu(0) = 0. Throws DomainError for nu <= 0, t < 0, or nu in the
// near-integer band.
double g_nu(double nu, double t);

// Coefficient multiplying t^(2nu) (and log t on the integer branch) in g_nu.
double g_nu_coefficient(const SmoothnessOrder& nu);

}  // namespace qvest::specfun
