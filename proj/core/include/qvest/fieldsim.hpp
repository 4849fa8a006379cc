#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qvest/covariance.hpp"
#include "qvest/increments.hpp"

namespace qvest {

enum class SimMethod { kDense, kCirculant, kScaleMixture };

inline constexpr std::size_t kDenseLimit = 20000;
inline constexpr double kMaxDenseJitter = 1e-10;

struct SimConfig {
  GridSpec grid;
  SimMethod method = SimMethod::kCirculant;
  // Torus side per axis is max(2, padding_factor) * (counts - 1).
  double padding_factor = 2.0;
  // Spectral values below -eig_clip_tol * max are counted as negative.
  double eig_clip_tol = 1e-10;
  double max_clipped_fraction = 1e-4;
  std::uint64_t master_seed = 0;
  std::uint64_t replicate_index = 0;

  void validate() const;
};

struct SimDiagnostics {
  // Sum of |negative spectral values| over sum of |spectral values|.
  double clipped_mass_fraction = 0.0;
  std::size_t negative_count = 0;
  double padding_used = 0.0;
  std::vector<std::int64_t> torus;
  // Diagonal jitter used by the dense factorization, relative to the variance.
  double jitter = 0.0;
};

// Cholesky factor of the full covariance matrix; reusable across replicates.
class DenseSampler {
 public:
  DenseSampler(const CovarianceModel& model, const GridSpec& grid);

  GridField sample(std::uint64_t master_seed, std::uint64_t replicate_index) const;
  const SimDiagnostics& diagnostics() const { return diag_; }
  const GridSpec& grid() const { return grid_; }

 private:
  GridSpec grid_;
  Eigen::MatrixXd lower_;
  SimDiagnostics diag_;
};

// Spectrum of the torus embedding; reusable across replicates and threads.
class CirculantSampler {
 public:
  CirculantSampler(const CovarianceModel& model, const GridSpec& grid, double padding_factor = 2.0,
                   double eig_clip_tol = 1e-10, double max_clipped_fraction = 1e-4);
  ~CirculantSampler();
  CirculantSampler(CirculantSampler&&) noexcept;
  CirculantSampler& operator=(CirculantSampler&&) noexcept;

  // Real and imaginary parts of one complex draw: two independent fields.
  std::pair<GridField, GridField> sample_pair(std::uint64_t master_seed, std::uint64_t replicate_index) const;
  GridField sample(std::uint64_t master_seed, std::uint64_t replicate_index) const;

  const SimDiagnostics& diagnostics() const { return diag_; }
  const GridSpec& grid() const { return grid_; }

 private:
  struct Plan;
  GridSpec grid_;
  std::vector<double> amplitude_;  // sqrt(lambda / #torus)
  SimDiagnostics diag_;
  std::unique_ptr<Plan> plan_;
};

// Matern fields with diagonal M as a Gaussian scale mixture:
//   K_unit(x) = (1 / Gamma(nu)) int exp(nu v - e^v) exp(-x^2 e^(-v) / 4) dv,
// discretized by the trapezoid rule in v. Every node is a separable Gaussian
// covariance sampled through per-axis factors; the mass below the first node
// only reaches lag 0 and is added as white noise. Covariance error at lattice
// lags is below 1e-12 relative.
class ScaleMixtureSampler {
 public:
  ScaleMixtureSampler(const MaternParams& params, const GridSpec& grid, double step = 0.25);

  GridField sample(std::uint64_t master_seed, std::uint64_t replicate_index) const;
  const GridSpec& grid() const { return grid_; }
  std::size_t node_count() const { return nodes_.size(); }
  // Implied covariance at an index lag; for testing against the target.
  double covariance(std::span<const std::int64_t> index_lag) const;

 private:
  struct Node {
    double weight;
    double scale;  // e^(-v) / 4
    std::vector<Eigen::MatrixXd> factors;  // per axis, counts x rank
  };
  GridSpec grid_;
  double variance_ = 1.0;
  std::vector<double> axis_scale_;  // alpha * M_kk / n
  std::vector<Node> nodes_;
  double white_ = 0.0;
};

GridField sample_dense(const CovarianceModel& model, const SimConfig& cfg, SimDiagnostics* diag = nullptr);
GridField sample_circulant(const CovarianceModel& model, const SimConfig& cfg, SimDiagnostics* diag = nullptr);
GridField sample_scale_mixture(const CovarianceModel& model, const SimConfig& cfg);
GridField sample(const CovarianceModel& model, const SimConfig& cfg, SimDiagnostics* diag = nullptr);

}  // namespace qvest
