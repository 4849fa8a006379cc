#include "qvest/covariance.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "qvest/errors.hpp"
#include "qvest/specfun.hpp"

namespace qvest {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSeriesTol = 1e-18;
constexpr int kMaxSeriesTerms = 400;

double mapped_norm(double alpha, const Eigen::MatrixXd& M, std::span<const double> lag) {
  if (static_cast<Eigen::Index>(lag.size()) != M.cols()) {
    throw DomainError("lag dimension " + std::to_string(lag.size()) +
                      " does not match anisotropy dimension " + std::to_string(M.cols()));
  }
  const Eigen::Map<const Eigen::VectorXd> v(lag.data(), static_cast<Eigen::Index>(lag.size()));
  return alpha * (M * v).norm();
}

double euclidean_norm(std::span<const double> lag) {
  double s = 0.0;
  for (double x : lag) s += x * x;
  return std::sqrt(s);
}

bool is_even_integer(double x, double tol) {
  const double half = 0.5 * x;
  return std::abs(half - std::round(half)) < 0.5 * tol;
}

double gen_profile(const GenCovParams& p, double r) {
  double acc = 0.0;
  const double r2 = r * r;
  double rk = 1.0;
  for (double a : p.poly) {
    acc += a * rk;
    rk *= r2;
  }
  if (r > 0.0) acc += p.c1 * std::pow(r, p.delta1) + p.c2 * std::pow(r, p.delta2);
  return acc;
}

// Non-integer nu: even series plus r^(2nu) times an even series, from
// K_nu = pi / (2 sin(nu pi)) (I_{-nu} - I_nu).
std::vector<PowerTerm> matern_series_fractional(const MaternParams& p, double r_max) {
  const double nu = p.nu;
  const double s2 = p.sigma * p.sigma;
  const double pref = s2 * kPi / (std::pow(2.0, nu) * std::sin(nu * kPi) * specfun::gamma(nu));
  // k-th terms: even  pref 2^nu  / (4^k k! Gamma(k - nu + 1)) r^(2k)
  //             odd  -pref 2^-nu / (4^k k! Gamma(k + nu + 1)) r^(2nu + 2k)
  double even = pref * std::pow(2.0, nu) * specfun::reciprocal_gamma(1.0 - nu);
  double odd = -pref * std::pow(2.0, -nu) / specfun::gamma(nu + 1.0);
  std::vector<PowerTerm> terms;
  for (int k = 0; k < kMaxSeriesTerms; ++k) {
    if (k > 0) {
      even /= 4.0 * k * (k - nu);
      odd /= 4.0 * k * (k + nu);
    }
    terms.push_back({even, 2.0 * k, false});
    terms.push_back({odd, 2.0 * nu + 2.0 * k, false});
    const double mag = std::abs(even) * std::pow(r_max, 2.0 * k) +
                       std::abs(odd) * std::pow(r_max, 2.0 * nu + 2.0 * k);
    if (k > 2 && mag < kSeriesTol * s2) break;
  }
  return terms;
}

// Integer nu = n, from the logarithmic expansion of K_n.
std::vector<PowerTerm> matern_series_integer(const MaternParams& p, int n, double r_max) {
  const double s2 = p.sigma * p.sigma;
  // K_unit(r) = r^n K_n(r) / (2^(n-1) (n-1)!)
  const double pref = s2 / (std::ldexp(1.0, n - 1) * specfun::gamma(n));
  std::vector<PowerTerm> terms;
  // Finite even part: 2^(n-1) (-1)^k (n-k-1)! / (k! 4^k) r^(2k), k < n.
  for (int k = 0; k < n; ++k) {
    const double c = std::ldexp(1.0, n - 1) * ((k % 2) ? -1.0 : 1.0) * specfun::gamma(n - k) /
                     (specfun::gamma(k + 1.0) * std::pow(4.0, k));
    terms.push_back({pref * c, 2.0 * k, false});
  }
  const double sign_log = (n % 2 == 1) ? 1.0 : -1.0;  // (-1)^(n+1)
  const double ln2 = std::numbers::ln2;
  for (int k = 0; k < kMaxSeriesTerms; ++k) {
    // 1 / (2^(n+2k) k! (n+k)!)
    const double base =
        1.0 / (std::ldexp(1.0, n + 2 * k) * specfun::gamma(k + 1.0) * specfun::gamma(n + k + 1.0));
    const double log_coef = pref * sign_log * base;
    const double psi_sum = specfun::digamma_integer(k + 1) + specfun::digamma_integer(n + k + 1);
    const double plain_coef = pref * (sign_log * (-ln2) * base - sign_log * 0.5 * psi_sum * base);
    const double power = 2.0 * n + 2.0 * k;
    terms.push_back({log_coef, power, true});
    terms.push_back({plain_coef, power, false});
    const double rp = std::pow(r_max, power);
    const double mag = (std::abs(log_coef) * (1.0 + std::abs(std::log(r_max))) + std::abs(plain_coef)) * rp;
    if (k > 2 && mag < kSeriesTol * s2) break;
  }
  return terms;
}

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

}  // namespace

void validate_unimodular_upper(const Eigen::MatrixXd& M, const char* what) {
  if (M.rows() != M.cols() || M.rows() < 1) {
    throw DomainError(std::string(what) + ": anisotropy matrix must be square and nonempty");
  }
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    if (!(M(i, i) > 0.0)) throw DomainError(std::string(what) + ": diagonal of M must be positive");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (M(i, j) != 0.0) throw DomainError(std::string(what) + ": M must be upper triangular");
    }
  }
  const double det = M.diagonal().prod();
  if (std::abs(det - 1.0) >= 1e-9) {
    throw DomainError(std::string(what) + ": det(M) must be 1, got " + std::to_string(det));
  }
}

void MaternParams::validate() const {
  if (!(sigma > 0.0) || !(alpha > 0.0)) throw DomainError("Matern: sigma and alpha must be positive");
  specfun::SmoothnessOrder order(nu);
  validate_unimodular_upper(M, "Matern");
}

void GenCovParams::validate() const {
  if (!(delta1 > 0.0) || !(delta2 > delta1)) {
    throw DomainError("generalized covariance requires 0 < delta1 < delta2");
  }
  if (is_even_integer(delta1, 1e-9) || is_even_integer(delta2, 1e-9)) {
    throw DomainError("generalized covariance exponents must not be even integers");
  }
}

void PowExpParams::validate() const {
  if (!(sigma > 0.0) || !(alpha > 0.0)) {
    throw DomainError("powered exponential: sigma and alpha must be positive");
  }
  if (!(delta > 0.0 && delta < 2.0)) throw DomainError("powered exponential: delta must lie in (0, 2)");
  validate_unimodular_upper(M, "powered exponential");
}

void PowExpParams::validate_for_separation() const {
  validate();
  if (std::abs(delta - 1.0) <= 1e-9) {
    throw DomainError("powered exponential: sigma/alpha separation requires delta != 1");
  }
}

double matern_unit_profile(double nu, double r) {
  if (r == 0.0) return 1.0;
  if (r < 0.0) throw DomainError("Matern profile: negative radius");
  const double log_norm = specfun::log_gamma(nu) + (nu - 1.0) * std::numbers::ln2;
  return std::exp(nu * std::log(r) - log_norm) * specfun::bessel_k(nu, r);
}

double matern_cov(const MaternParams& params, std::span<const double> lag) {
  const double r = mapped_norm(params.alpha, params.M, lag);
  return params.sigma * params.sigma * matern_unit_profile(params.nu, r);
}

double gen_cov(const GenCovParams& params, std::span<const double> lag) {
  return gen_profile(params, euclidean_norm(lag));
}

double powexp_cov(const PowExpParams& params, std::span<const double> lag) {
  const double r = mapped_norm(params.alpha, params.M, lag);
  return params.sigma * params.sigma * std::exp(-std::pow(r, params.delta));
}

void validate(const CovarianceModel& model) {
  std::visit([](const auto& p) { p.validate(); }, model);
}

double evaluate(const CovarianceModel& model, std::span<const double> lag) {
  return std::visit(Overloaded{[&](const MaternParams& p) { return matern_cov(p, lag); },
                               [&](const GenCovParams& p) { return gen_cov(p, lag); },
                               [&](const PowExpParams& p) { return powexp_cov(p, lag); }},
                    model);
}

std::optional<int> model_dimension(const CovarianceModel& model) {
  return std::visit(Overloaded{[](const MaternParams& p) -> std::optional<int> { return p.dim(); },
                               [](const GenCovParams&) -> std::optional<int> { return std::nullopt; },
                               [](const PowExpParams& p) -> std::optional<int> { return p.dim(); }},
                    model);
}

double effective_radius(const CovarianceModel& model, std::span<const double> lag) {
  return std::visit(
      Overloaded{[&](const MaternParams& p) { return mapped_norm(p.alpha, p.M, lag); },
                 [&](const GenCovParams&) { return euclidean_norm(lag); },
                 [&](const PowExpParams& p) { return mapped_norm(p.alpha, p.M, lag); }},
      model);
}

double radial_profile(const CovarianceModel& model, double r) {
  return std::visit(
      Overloaded{[&](const MaternParams& p) { return p.sigma * p.sigma * matern_unit_profile(p.nu, r); },
                 [&](const GenCovParams& p) { return gen_profile(p, r); },
                 [&](const PowExpParams& p) { return p.sigma * p.sigma * std::exp(-std::pow(r, p.delta)); }},
      model);
}

std::optional<std::vector<PowerTerm>> radial_series(const CovarianceModel& model, double r_max) {
  if (!(r_max >= 0.0)) throw DomainError("radial_series: r_max must be nonnegative");
  r_max = std::max(r_max, 1e-300);
  return std::visit(
      Overloaded{
          [&](const MaternParams& p) -> std::optional<std::vector<PowerTerm>> {
            const specfun::SmoothnessOrder order(p.nu);
            if (order.near_integer() || r_max > 8.0) return std::nullopt;
            if (order.is_integer()) return matern_series_integer(p, order.nearest_integer(), r_max);
            return matern_series_fractional(p, r_max);
          },
          [&](const GenCovParams& p) -> std::optional<std::vector<PowerTerm>> {
            std::vector<PowerTerm> terms;
            for (std::size_t k = 0; k < p.poly.size(); ++k) {
              terms.push_back({p.poly[k], 2.0 * static_cast<double>(k), false});
            }
            terms.push_back({p.c1, p.delta1, false});
            terms.push_back({p.c2, p.delta2, false});
            return terms;
          },
          [&](const PowExpParams& p) -> std::optional<std::vector<PowerTerm>> {
            const double x = std::pow(r_max, p.delta);
            if (x > 2.0) return std::nullopt;
            const double s2 = p.sigma * p.sigma;
            std::vector<PowerTerm> terms;
            double coef = s2;
            for (int k = 0; k < kMaxSeriesTerms; ++k) {
              if (k > 0) coef *= -1.0 / k;
              terms.push_back({coef, k * p.delta, false});
              if (k > 2 && std::abs(coef) * std::pow(x, k) < kSeriesTol * s2) break;
            }
            return terms;
          }},
      model);
}

double evaluate_series(std::span<const PowerTerm> terms, double r) {
  double acc = 0.0;
  const double logr = r > 0.0 ? std::log(r) : 0.0;
  for (const PowerTerm& t : terms) {
    if (t.power == 0.0) {
      acc += t.coef;
      continue;
    }
    if (r == 0.0) continue;
    const double v = t.coef * std::pow(r, t.power);
    acc += t.with_log ? v * logr : v;
  }
  return acc;
}

}  // namespace qvest
