#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qvest/covariance.hpp"

namespace qvest {

using LatticeVector = std::vector<int>;

// Regular lattice with spacing 1/n. Axis 0 varies slowest in the row-major
// value layout.
struct GridSpec {
  int d = 1;
  std::int64_t n = 1;
  std::vector<std::int64_t> counts;
  std::vector<double> origin;

  static GridSpec cube(int d, std::int64_t n, std::int64_t points_per_axis);

  double spacing() const { return 1.0 / static_cast<double>(n); }
  std::size_t size() const;
  std::vector<std::size_t> strides() const;
  void validate() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct GridField {
  GridSpec spec;
  std::vector<double> values;

  void validate() const;
  double at(std::span<const std::int64_t> index) const;
};

// Iterated difference along a lattice direction: coefficient i multiplies
// the sample at j + i h and equals (-1)^(m+i) binom(m, i).
class Stencil {
 public:
  Stencil(int m, LatticeVector h);

  int order() const { return m_; }
  const LatticeVector& direction() const { return h_; }
  std::span<const double> coeffs() const { return coeffs_; }
  double direction_norm() const;

 private:
  int m_;
  LatticeVector h_;
  std::vector<double> coeffs_;
};

Stencil stencil(int m, LatticeVector h);

// Grid of sites where the whole stencil fits, expressed in the input
// lattice (origin shifted for negative direction components).
GridSpec increment_sites(const GridSpec& grid, const Stencil& st);

GridField apply_increment(const GridField& field, const Stencil& st);

// (1/#sites) sum_j n^exponent (Delta^m field(j))^2 over every site where the
// stencil fits. Rows are reduced with a fixed pairwise tree, so the result
// does not depend on the worker count.
double quadratic_variation(const GridField& field, const Stencil& st, double exponent,
                           int workers = 1);

// sum_{i,j} d_i d_j |i-j|^power; exact zero for even integer powers below 2m.
double stencil_power_sum(int m, double power);
// sum_{i,j} d_i d_j |i-j|^power log|i-j|
double stencil_log_power_sum(int m, double power);

// Normalized Matern constants: A = sum d_i d_j G_nu(|i-j|) for m > nu and
// B = sum d_i d_j (-nu) G_{nu+1}(|i-j|) for m > nu + 1.
double coeff_A(double nu, int m);
double coeff_B(double nu, int m);

// Generalized-covariance constants. coeff_C carries the |h|^delta factor.
double coeff_C(int p, double delta, double h_norm);
double coeff_D(int p, double delta);

// E Q for a stationary model, evaluated exactly as
//   n^exponent sum_{i,j} d_i d_j cov((i-j) h / n).
// The double sum cancels catastrophically at large n, so the radial series
// of the model is summed term by term against the stencil instead; models
// without a usable series fall back to expected_qv_direct.
double expected_qv(const CovarianceModel& model, const GridSpec& grid, const Stencil& st,
                   double exponent);

// The plain double sum over covariance evaluations.
double expected_qv_direct(const CovarianceModel& model, const GridSpec& grid, const Stencil& st,
                          double exponent);

struct IndexPair {
  int p;
  int q;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

inline constexpr int kPairSearchSpan = 10;
inline constexpr double kPairNonvanishingTol = 1e-8;

// Smallest q in (p, p + kPairSearchSpan] with
//   |lead(p) - ratio(p, q) * tail(q)| > kPairNonvanishingTol |lead(p)|
// where combination(p, q) returns lead(p) - ratio(p, q) * tail(q).
// Returns nullopt when the bounded search finds nothing.
std::optional<IndexPair> find_partner(int p, double lead_p, const auto& combination) {
  for (int q = p + 1; q <= p + kPairSearchSpan; ++q) {
    const double c = combination(p, q);
    if (std::abs(c) > kPairNonvanishingTol * std::abs(lead_p)) return IndexPair{p, q};
  }
  return std::nullopt;
}

// Matern pair for the alpha separation: p is the smallest integer with
// p > nu + 1 and 2p - 2nu > 4; q > p is the first partner whose B-combination
// does not vanish. Requires d > 4.
IndexPair select_pq(double nu, int d);

// Same q search for a caller-chosen p > nu + 1 (no dimension requirement).
IndexPair select_pq_from(double nu, int p);

// B(nu, p) - (A(nu, p) / A(nu, q)) B(nu, q)
double b_combination(double nu, IndexPair pq);

}  // namespace qvest
