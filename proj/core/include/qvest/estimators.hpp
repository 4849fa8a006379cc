#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qvest/covariance.hpp"
#include "qvest/increments.hpp"

namespace qvest {

// The d(d+1)/2 lattice directions needed to rebuild an upper-triangular
// matrix from |M h|^2: e_1..e_d first, then e_{k+1} - e_i for 1 <= i <= k < d
// ordered by k, then i.
class DirectionSet {
 public:
  static DirectionSet canonical(int d);

  int dim() const { return d_; }
  std::size_t size() const { return vectors_.size(); }
  const LatticeVector& operator[](std::size_t i) const { return vectors_[i]; }
  const std::vector<LatticeVector>& vectors() const { return vectors_; }

  // Position of e_k (0-based axis k).
  std::size_t axis_index(int k) const;
  // Position of e_k - e_i for 0 <= i < k < d (0-based).
  std::size_t difference_index(int k, int i) const;

  // Largest |h_a| over all vectors and axes.
  int max_abs_component() const;

 private:
  int d_ = 0;
  std::vector<LatticeVector> vectors_;
};

// Where quadratic variations come from: a sampled field or an exact
// covariance. Estimators only see this interface, so both routes share all
// downstream code.
class QSource {
 public:
  using Fn = std::function<double(const Stencil&, double exponent)>;

  QSource(Fn fn, std::int64_t n, int d) : fn_(std::move(fn)), n_(n), d_(d) {}

  // The field must outlive the source.
  static QSource from_field(const GridField& field, int workers = 1);
  static QSource exact(CovarianceModel model, GridSpec grid);

  double operator()(const Stencil& st, double exponent) const { return fn_(st, exponent); }
  std::int64_t n() const { return n_; }
  int dim() const { return d_; }

 private:
  Fn fn_;
  std::int64_t n_;
  int d_;
};

inline constexpr double kDiagonalClamp = 1e-12;

struct Diagnostics {
  int clamped_diagonals = 0;
  bool clamped_alpha = false;
  std::vector<std::string> warnings;

  bool any() const { return clamped_diagonals > 0 || clamped_alpha || !warnings.empty(); }
};

struct MTildeRecovery {
  Eigen::MatrixXd mtilde;
  int clamped_diagonals = 0;
};

// Rebuilds the upper-triangular matrix with positive diagonal from
// norms_sq[i] = |Mtilde dirs[i]|^2 (values aligned with DirectionSet::canonical).
// Off-diagonal columns come from polarization and a forward solve with the
// transposed leading block; a diagonal square root whose argument drops below
// kDiagonalClamp is clamped and counted.
MTildeRecovery recover_mtilde(std::span<const double> norms_sq, int d);

struct SplitResult {
  Eigen::MatrixXd M;
  double sigma2_alpha2nu;
};

// M = det(Mtilde)^(-1/d) Mtilde and sigma^2 alpha^(2 nu) = det(Mtilde)^(2 nu / d).
SplitResult split_m(const Eigen::MatrixXd& mtilde, double nu, int d);

struct EstimateReport {
  double sigma2_alpha2nu = 0.0;
  Eigen::MatrixXd M_hat;
  Eigen::MatrixXd mtilde;
  std::optional<double> alpha_hat;
  std::optional<double> sigma_hat;
  DirectionSet dirs;
  std::vector<double> per_direction_Q;
  int m = 0;
  std::optional<IndexPair> pq_used;
  Diagnostics diagnostics;
};

// sigma^2 alpha^(2 nu) and M from order-m quadratic variations (exponent 2 nu)
// along every direction in dirs, via |Mtilde h|^2 = (Q / A(nu, m))^(1/nu).
EstimateReport estimate_matern_any_d(const QSource& source, double nu, int m, const DirectionSet& dirs);

struct AlphaOptions {
  // Bypasses select_pq (and its d > 4 requirement); p, q > nu + 1 still apply.
  std::optional<IndexPair> pq;
};

struct AlphaSigmaEstimate {
  double alpha_hat = 0.0;
  double sigma_hat = 0.0;
  IndexPair pq{0, 0};
  // alpha^2 |M h|^2 / |M_hat h|^2 per direction before averaging.
  std::vector<double> per_direction_alpha2;
  Diagnostics diagnostics;
};

// Second-order separation of alpha and sigma from
//   n^2 [Q^p - (A_p / A_q) Q^q] -> sigma^2 alpha^(2nu+2) |M h|^(2nu+2) (B_p - (A_p / A_q) B_q).
// report supplies sigma^2 alpha^(2 nu) and M_hat.
AlphaSigmaEstimate estimate_alpha_highd(const QSource& source, double nu, const EstimateReport& report,
                                        const DirectionSet& dirs, const AlphaOptions& options = {});

struct C1C2Estimate {
  double c1_hat = 0.0;
  double c2_hat = 0.0;
  double c1_corrected = 0.0;
  double q_p = 0.0;
  double q_q = 0.0;
};

// Coefficients of c1 |t|^delta1 + c2 |t|^delta2 from one lattice direction.
// c1_corrected removes the c2 (C_{p,delta2} / C_{p,delta1}) n^(delta1 - delta2)
// bias of c1_hat.
C1C2Estimate estimate_c1_c2(const QSource& source, double delta1, double delta2, int p, int q,
                            const LatticeVector& h);

struct PowExpOptions {
  bool separate = false;
  // Partner order for the second stage; searched if absent.
  std::optional<int> q;
};

struct PowExpEstimate {
  double sigma2_alpha_delta = 0.0;
  Eigen::MatrixXd M_hat;
  Eigen::MatrixXd mtilde;
  // -Q^p / D(p, delta) per direction: sigma^2 alpha^delta |M h|^delta.
  std::vector<double> first_stage;
  std::optional<double> sigma_hat;
  std::optional<double> alpha_hat;
  std::optional<IndexPair> pq_used;
  Diagnostics diagnostics;
};

PowExpEstimate estimate_powexp(const QSource& source, double delta, int p, const DirectionSet& dirs,
                               const PowExpOptions& options = {});

}  // namespace qvest
