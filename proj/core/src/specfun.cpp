#include "qvest/specfun.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qvest/errors.hpp"

namespace qvest::specfun {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEulerGamma = 0.57721566490153286061;
constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;

// Lanczos approximation, g = 7, n = 9.
constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

// Taylor coefficients of 1/Gamma(z) = sum_{k>=1} c_k z^k; entry j holds c_{j+1}.
constexpr std::array<double, 26> kRecipGammaSeries = {
    1.0000000000000000,  0.5772156649015329,  -0.6558780715202538,
    -0.0420026350340952, 0.1665386113822915,  -0.0421977345555443,
    -0.0096219715278770, 0.0072189432466630,  -0.0011651675918591,
    -0.0002152416741149, 0.0001280502823882,  -0.0000201348547807,
    -0.0000012504934821, 0.0000011330272320,  -0.0000002056338417,
    0.0000000061160950,  0.0000000050020075,  -0.0000000011812746,
    0.0000000001043427,  0.0000000000077823,  -0.0000000000036968,
    0.0000000000005100,  -0.0000000000000206, -0.0000000000000054,
    0.0000000000000014,  0.0000000000000001};

struct TemmeGammas {
  double gam1;   // (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)
  double gam2;   // (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
  double gampl;  // 1/Gamma(1+mu)
  double gammi;  // 1/Gamma(1-mu)
};

// Valid for |mu| <= 1/2; no cancellation at mu = 0.
TemmeGammas temme_gammas(double mu) {
  double gam1 = 0.0;
  double gam2 = 0.0;
  const double mu2 = mu * mu;
  double pow_even = 1.0;  // mu^(2i)
  for (std::size_t j = 0; j < kRecipGammaSeries.size(); j += 2) {
    gam2 += kRecipGammaSeries[j] * pow_even;
    if (j + 1 < kRecipGammaSeries.size()) gam1 -= kRecipGammaSeries[j + 1] * pow_even;
    pow_even *= mu2;
  }
  return {gam1, gam2, gam2 - mu * gam1, gam2 + mu * gam1};
}

// K_mu(x) and K_{mu+1}(x) for |mu| <= 1/2.
std::pair<double, double> bessel_k_base(double mu, double x) {
  const double mu2 = mu * mu;
  const double xi = 1.0 / x;
  if (x <= 2.0) {
    const double x2 = 0.5 * x;
    const double pimu = kPi * mu;
    const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(x2);
    double e = mu * d;
    const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
    const TemmeGammas g = temme_gammas(mu);
    double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / g.gampl;
    double q = 0.5 / (e * g.gammi);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    for (int i = 1; i <= kMaxIter; ++i) {
      const double di = i;
      ff = (di * ff + p + q) / (di * di - mu2);
      c *= d / di;
      p /= di - mu;
      q /= di + mu;
      const double del = c * ff;
      sum += del;
      sum1 += c * (p - di * ff);
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    return {sum, sum1 * 2.0 * xi};
  }
  // Steed's algorithm for the continued fraction of K_{mu+1}/K_mu.
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25 - mu2;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 2; i <= kMaxIter; ++i) {
    a -= 2.0 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps) break;
  }
  h *= a1;
  const double kmu = std::sqrt(kPi / (2.0 * x)) * std::exp(-x) / s;
  return {kmu, kmu * (mu + x + 0.5 - h) * xi};
}

}  // namespace

SmoothnessOrder::SmoothnessOrder(double nu) : nu_(nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) {
    throw DomainError("smoothness nu must be positive and finite, got " + std::to_string(nu));
  }
  nearest_ = static_cast<int>(std::lround(nu));
  is_integer_ = std::abs(nu - nearest_) < kIntegerTol;
}

bool SmoothnessOrder::near_integer() const {
  const double dist = std::abs(nu_ - nearest_);
  return !is_integer_ && dist < kNearIntegerBand;
}

double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma requires x > 0");
  if (x < 0.5) {
    // Reflection keeps the Lanczos sum in its accurate range.
    return std::log(kPi / std::sin(kPi * x)) - log_gamma(1.0 - x);
  }
  const double z = x - 1.0;
  double acc = kLanczos[0];
  for (std::size_t i = 1; i < kLanczos.size(); ++i) acc += kLanczos[i] / (z + static_cast<double>(i));
  const double t = z + kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * kPi) + (z + 0.5) * std::log(t) - t + std::log(acc);
}

double gamma(double x) {
  if (x > 0.0) {
    if (x == std::floor(x) && x <= 21.0) {
      double f = 1.0;
      for (int k = 2; k < static_cast<int>(x); ++k) f *= k;
      return f;
    }
    return std::exp(log_gamma(x));
  }
  if (x == std::floor(x)) throw DomainError("gamma undefined at nonpositive integers");
  return kPi / (std::sin(kPi * x) * gamma(1.0 - x));
}

double reciprocal_gamma(double x) {
  if (x <= 0.0 && x == std::floor(x)) return 0.0;
  return 1.0 / gamma(x);
}

double digamma_integer(int k) {
  if (k < 1) throw DomainError("digamma_integer requires k >= 1");
  double psi = -kEulerGamma;
  for (int j = 1; j < k; ++j) psi += 1.0 / j;
  return psi;
}

double bessel_k_nonneg(double nu, double x) {
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw DomainError("bessel_k: order must be >= 0");
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("bessel_k: argument must be > 0");
  if (x > 745.0) return 0.0;
  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;
  auto [kmu, k1] = bessel_k_base(mu, x);
  const double two_over_x = 2.0 / x;
  for (int i = 1; i <= nl; ++i) {
    const double next = (mu + i) * two_over_x * k1 + kmu;
    kmu = k1;
    k1 = next;
  }
  return kmu;
}

double bessel_k(double nu, double x) {
  if (!(nu > 0.0)) throw DomainError("bessel_k: order must be > 0");
  return bessel_k_nonneg(nu, x);
}

double g_nu_coefficient(const SmoothnessOrder& order) {
  const double nu = order.value();
  if (order.near_integer()) {
    throw DomainError("G_nu is not evaluated for nu within 1e-6 of an integer (nu = " +
                      std::to_string(nu) + ")");
  }
  if (order.is_integer()) {
    const int k = order.nearest_integer();
    const double sign = (k % 2 == 1) ? 1.0 : -1.0;  // (-1)^(k+1)
    return sign / (std::ldexp(1.0, 2 * k - 1) * gamma(k) * gamma(k + 1.0));
  }
  return -kPi / (std::pow(2.0, 2.0 * nu) * std::sin(nu * kPi) * gamma(nu) * gamma(nu + 1.0));
}

double g_nu(double nu, double t) {
  const SmoothnessOrder order(nu);
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("g_nu requires t >= 0");
  const double coef = g_nu_coefficient(order);
  if (t == 0.0) return 0.0;
  if (order.is_integer()) {
    const int k = order.nearest_integer();
    return coef * std::pow(t, 2 * k) * std::log(t);
  }
  return coef * std::pow(t, 2.0 * nu);
}

}  // namespace qvest::specfun
