#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace qvest {

// Geometric-anisotropic Matern: K(|M lag|) with
//   K(r) = sigma^2 (alpha r)^nu K_nu(alpha r) / (Gamma(nu) 2^(nu-1)),  K(0) = sigma^2.
struct MaternParams {
  double sigma = 1.0;
  double alpha = 1.0;
  double nu = 0.5;
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(1, 1);

  int dim() const { return static_cast<int>(M.rows()); }
  // Throws DomainError unless sigma, alpha, nu > 0 and M is upper triangular
  // with positive diagonal and unit determinant.
  void validate() const;
};

// Generalized covariance poly(|t|) + c1 |t|^delta1 + c2 |t|^delta2, where
// poly[k] multiplies |t|^(2k). Positive definiteness is not checked.
struct GenCovParams {
  double c1 = -1.0;
  double delta1 = 0.2;
  double c2 = 0.0;
  double delta2 = 0.4;
  std::vector<double> poly;

  void validate() const;
};

// Powered exponential sigma^2 exp(-|alpha M lag|^delta), delta in (0, 2).
struct PowExpParams {
  double sigma = 1.0;
  double alpha = 1.0;
  double delta = 1.0;
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(1, 1);

  int dim() const { return static_cast<int>(M.rows()); }
  void validate() const;
  // Additional requirement for separating sigma from alpha: delta != 1.
  void validate_for_separation() const;
};

using CovarianceModel = std::variant<MaternParams, GenCovParams, PowExpParams>;

void validate_unimodular_upper(const Eigen::MatrixXd& M, const char* what);

double matern_cov(const MaternParams& params, std::span<const double> lag);
double gen_cov(const GenCovParams& params, std::span<const double> lag);
double powexp_cov(const PowExpParams& params, std::span<const double> lag);

// Unit (sigma = alpha = 1) Matern profile as a function of the scaled radius.
double matern_unit_profile(double nu, double r);

void validate(const CovarianceModel& model);
double evaluate(const CovarianceModel& model, std::span<const double> lag);

// Dimension the model is tied to; nullopt when it accepts any dimension.
std::optional<int> model_dimension(const CovarianceModel& model);

// Every family is a radial profile of a linearly mapped lag. These two
// functions expose that split: cov(lag) = radial_profile(effective_radius(lag)).
double effective_radius(const CovarianceModel& model, std::span<const double> lag);
double radial_profile(const CovarianceModel& model, double r);

// One term coef * r^power * (log r)^(with_log ? 1 : 0) of a radial expansion.
struct PowerTerm {
  double coef;
  double power;
  bool with_log = false;
};

// Convergent expansion of radial_profile valid for 0 <= r <= r_max, truncated
// once the remaining terms fall below 1e-18 relative to the leading value.
// Returns nullopt where the series is not a reliable evaluation route (large
// r_max for the powered exponential, near-integer Matern smoothness).
std::optional<std::vector<PowerTerm>> radial_series(const CovarianceModel& model, double r_max);

double evaluate_series(std::span<const PowerTerm> terms, double r);

}  // namespace qvest
