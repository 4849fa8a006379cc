#include "qvest/fieldsim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <string>

#include <fftw3.h>

#include "qvest/errors.hpp"
#include "qvest/rng.hpp"
#include "qvest/specfun.hpp"

namespace qvest {

namespace {

// FFTW planning is not thread-safe; execution with new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : data(fftw_alloc_complex(n)) {
    if (!data) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* data;
};

fftw_plan make_plan(const std::vector<std::int64_t>& dims, fftw_complex* buf) {
  std::vector<int> n(dims.begin(), dims.end());
  std::lock_guard lock(planner_mutex());
  fftw_plan p = fftw_plan_dft(static_cast<int>(n.size()), n.data(), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  if (!p) throw EmbeddingFailureError("FFTW could not create a plan for the torus");
  return p;
}

std::size_t product(const std::vector<std::int64_t>& v) {
  std::size_t p = 1;
  for (auto x : v) p *= static_cast<std::size_t>(x);
  return p;
}

// Advances a row-major multi-index; returns false after the last one.
bool advance(std::vector<std::int64_t>& idx, const std::vector<std::int64_t>& dims) {
  for (std::size_t k = dims.size(); k-- > 0;) {
    if (++idx[k] < dims[k]) return true;
    idx[k] = 0;
  }
  return false;
}

std::vector<std::int64_t> torus_dims(const GridSpec& grid, double padding) {
  std::vector<std::int64_t> dims;
  const double f = std::max(2.0, padding);
  for (auto c : grid.counts) {
    const auto ext = c - 1;
    dims.push_back(ext == 0 ? 1 : static_cast<std::int64_t>(std::ceil(f * static_cast<double>(ext) - 1e-9)));
  }
  return dims;
}

// Torus base vector. Components at exactly half the torus are ambiguous in
// sign, so both choices are averaged.
void fill_base(const CovarianceModel& model, const GridSpec& grid, const std::vector<std::int64_t>& dims,
               fftw_complex* out) {
  const std::size_t d = dims.size();
  const double h = grid.spacing();
  std::vector<std::int64_t> idx(d, 0);
  std::vector<double> lag(d);
  std::vector<std::size_t> ambiguous;
  std::size_t lin = 0;
  do {
    ambiguous.clear();
    for (std::size_t k = 0; k < d; ++k) {
      const auto L = dims[k];
      const auto j = idx[k];
      if (2 * j == L) ambiguous.push_back(k);
      lag[k] = static_cast<double>(2 * j <= L ? j : j - L) * h;
    }
    double v = 0.0;
    if (ambiguous.empty()) {
      v = evaluate(model, lag);
    } else {
      const std::size_t combos = std::size_t{1} << ambiguous.size();
      for (std::size_t mask = 0; mask < combos; ++mask) {
        for (std::size_t a = 0; a < ambiguous.size(); ++a) {
          const auto k = ambiguous[a];
          const double mag = static_cast<double>(dims[k] / 2) * h;
          lag[k] = (mask >> a) & 1U ? -mag : mag;
        }
        v += evaluate(model, lag);
      }
      v /= static_cast<double>(combos);
    }
    out[lin][0] = v;
    out[lin][1] = 0.0;
    ++lin;
  } while (advance(idx, dims));
}

struct Spectrum {
  std::vector<double> amplitude;
  SimDiagnostics diag;
};

Spectrum embed(const CovarianceModel& model, const GridSpec& grid, double padding, double tol) {
  Spectrum s;
  s.diag.torus = torus_dims(grid, padding);
  s.diag.padding_used = std::max(2.0, padding);
  const std::size_t total = product(s.diag.torus);
  FftwBuffer buf(total);
  fill_base(model, grid, s.diag.torus, buf.data);
  fftw_plan plan = make_plan(s.diag.torus, buf.data);
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  double max_lambda = 0.0;
  for (std::size_t i = 0; i < total; ++i) max_lambda = std::max(max_lambda, buf.data[i][0]);
  if (!(max_lambda > 0.0)) throw EmbeddingFailureError("torus embedding has no positive spectral value");
  double abs_mass = 0.0;
  double neg_mass = 0.0;
  s.amplitude.resize(total);
  const double inv_total = 1.0 / static_cast<double>(total);
  for (std::size_t i = 0; i < total; ++i) {
    const double lam = buf.data[i][0];
    abs_mass += std::abs(lam);
    if (lam < 0.0) {
      neg_mass += -lam;
      if (lam < -tol * max_lambda) ++s.diag.negative_count;
      s.amplitude[i] = 0.0;
    } else {
      s.amplitude[i] = std::sqrt(lam * inv_total);
    }
  }
  s.diag.clipped_mass_fraction = neg_mass / abs_mass;
  return s;
}

}  // namespace

void SimConfig::validate() const {
  grid.validate();
  if (!(padding_factor >= 1.0)) throw DomainError("padding_factor must be >= 1");
  if (!(eig_clip_tol >= 0.0)) throw DomainError("eig_clip_tol must be nonnegative");
  if (!(max_clipped_fraction >= 0.0)) throw DomainError("max_clipped_fraction must be nonnegative");
  if (method == SimMethod::kDense && grid.size() > kDenseLimit) {
    throw DomainError("dense simulation is limited to " + std::to_string(kDenseLimit) + " points, grid has " +
                      std::to_string(grid.size()));
  }
}

DenseSampler::DenseSampler(const CovarianceModel& model, const GridSpec& grid) : grid_(grid) {
  grid_.validate();
  validate(model);
  const std::size_t N = grid_.size();
  if (N > kDenseLimit) {
    throw DomainError("dense simulation is limited to " + std::to_string(kDenseLimit) + " points, grid has " +
                      std::to_string(N));
  }
  const std::size_t d = static_cast<std::size_t>(grid_.d);
  const double h = grid_.spacing();
  // Covariance depends only on the index difference: tabulate it once.
  std::vector<std::int64_t> diff_dims(d);
  for (std::size_t k = 0; k < d; ++k) diff_dims[k] = 2 * grid_.counts[k] - 1;
  std::vector<double> table(product(diff_dims));
  {
    std::vector<std::int64_t> idx(d, 0);
    std::vector<double> lag(d);
    std::size_t lin = 0;
    do {
      for (std::size_t k = 0; k < d; ++k) lag[k] = static_cast<double>(idx[k] - (grid_.counts[k] - 1)) * h;
      table[lin++] = evaluate(model, lag);
    } while (advance(idx, diff_dims));
  }
  std::vector<std::size_t> diff_strides(d, 1);
  for (std::size_t k = d - 1; k-- > 0;) diff_strides[k] = diff_strides[k + 1] * static_cast<std::size_t>(diff_dims[k + 1]);

  std::vector<std::vector<std::int64_t>> sites;
  sites.reserve(N);
  {
    std::vector<std::int64_t> idx(d, 0);
    do sites.push_back(idx);
    while (advance(idx, grid_.counts));
  }
  const auto n_idx = static_cast<Eigen::Index>(N);
  Eigen::MatrixXd C(n_idx, n_idx);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      std::size_t lin = 0;
      for (std::size_t k = 0; k < d; ++k) {
        lin += static_cast<std::size_t>(sites[i][k] - sites[j][k] + (grid_.counts[k] - 1)) * diff_strides[k];
      }
      C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table[lin];
    }
  }
  const double var = C.diagonal().maxCoeff();
  if (!(var > 0.0)) throw IndefiniteCovarianceError("covariance has no positive variance on the grid");
  for (double rel : {0.0, 1e-14, 1e-12, kMaxDenseJitter}) {
    Eigen::MatrixXd A = C;
    A.diagonal().array() += rel * var;
    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(A);
    if (llt.info() == Eigen::Success) {
      lower_ = llt.matrixL();
      diag_.jitter = rel;
      return;
    }
  }
  throw IndefiniteCovarianceError("covariance matrix is not positive definite even with jitter " +
                                  std::to_string(kMaxDenseJitter) + " times the variance");
}

GridField DenseSampler::sample(std::uint64_t master_seed, std::uint64_t replicate_index) const {
  NormalStream rng(master_seed, replicate_index);
  Eigen::VectorXd z(lower_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng();
  const Eigen::VectorXd x = lower_.triangularView<Eigen::Lower>() * z;
  return GridField{grid_, std::vector<double>(x.data(), x.data() + x.size())};
}

struct CirculantSampler::Plan {
  fftw_plan plan = nullptr;
  std::size_t total = 0;
  ~Plan() {
    if (plan) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan);
    }
  }
};

CirculantSampler::CirculantSampler(const CovarianceModel& model, const GridSpec& grid, double padding_factor,
                                   double eig_clip_tol, double max_clipped_fraction)
    : grid_(grid) {
  grid_.validate();
  validate(model);
  if (!(padding_factor >= 1.0)) throw DomainError("padding_factor must be >= 1");
  Spectrum s = embed(model, grid_, padding_factor, eig_clip_tol);
  if (s.diag.clipped_mass_fraction > max_clipped_fraction) {
    s = embed(model, grid_, 2.0 * std::max(2.0, padding_factor), eig_clip_tol);
    if (s.diag.clipped_mass_fraction > max_clipped_fraction) {
      throw EmbeddingFailureError("clipped spectral mass fraction " + std::to_string(s.diag.clipped_mass_fraction) +
                                  " exceeds " + std::to_string(max_clipped_fraction) + " after doubling the padding");
    }
  }
  amplitude_ = std::move(s.amplitude);
  diag_ = std::move(s.diag);
  plan_ = std::make_unique<Plan>();
  plan_->total = amplitude_.size();
  FftwBuffer probe(plan_->total);
  plan_->plan = make_plan(diag_.torus, probe.data);
}

CirculantSampler::~CirculantSampler() = default;
CirculantSampler::CirculantSampler(CirculantSampler&&) noexcept = default;
CirculantSampler& CirculantSampler::operator=(CirculantSampler&&) noexcept = default;

std::pair<GridField, GridField> CirculantSampler::sample_pair(std::uint64_t master_seed,
                                                              std::uint64_t replicate_index) const {
  NormalStream rng(master_seed, replicate_index);
  FftwBuffer buf(plan_->total);
  for (std::size_t i = 0; i < plan_->total; ++i) {
    const double re = rng();
    const double im = rng();
    buf.data[i][0] = amplitude_[i] * re;
    buf.data[i][1] = amplitude_[i] * im;
  }
  fftw_execute_dft(plan_->plan, buf.data, buf.data);

  const std::size_t d = grid_.counts.size();
  std::vector<std::size_t> tstride(d, 1);
  for (std::size_t k = d - 1; k-- > 0;) tstride[k] = tstride[k + 1] * static_cast<std::size_t>(diag_.torus[k + 1]);
  GridField a{grid_, std::vector<double>(grid_.size())};
  GridField b{grid_, std::vector<double>(grid_.size())};
  std::vector<std::int64_t> idx(d, 0);
  std::size_t out = 0;
  do {
    std::size_t lin = 0;
    for (std::size_t k = 0; k < d; ++k) lin += static_cast<std::size_t>(idx[k]) * tstride[k];
    a.values[out] = buf.data[lin][0];
    b.values[out] = buf.data[lin][1];
    ++out;
  } while (advance(idx, grid_.counts));
  return {std::move(a), std::move(b)};
}

GridField CirculantSampler::sample(std::uint64_t master_seed, std::uint64_t replicate_index) const {
  return sample_pair(master_seed, replicate_index).first;
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kNegligibleCorrelation = 1e-20;
constexpr double kRankTol = 1e-14;

// Applies factor (N x r) along axis k of a row-major tensor whose axis k has
// extent r; dims[k] becomes N.
std::vector<double> mode_product(const std::vector<double>& in, std::vector<std::int64_t>& dims, std::size_t k,
                                 const Eigen::MatrixXd& factor) {
  std::size_t pre = 1;
  std::size_t post = 1;
  for (std::size_t j = 0; j < k; ++j) pre *= static_cast<std::size_t>(dims[j]);
  for (std::size_t j = k + 1; j < dims.size(); ++j) post *= static_cast<std::size_t>(dims[j]);
  const auto r = static_cast<std::size_t>(factor.cols());
  const auto N = static_cast<std::size_t>(factor.rows());
  std::vector<double> out(pre * N * post);
  const auto pi = static_cast<Eigen::Index>(post);
  for (std::size_t p = 0; p < pre; ++p) {
    Eigen::Map<const RowMatrix> src(in.data() + p * r * post, static_cast<Eigen::Index>(r), pi);
    Eigen::Map<RowMatrix> dst(out.data() + p * N * post, static_cast<Eigen::Index>(N), pi);
    dst.noalias() = factor * src;
  }
  dims[k] = static_cast<std::int64_t>(N);
  return out;
}

}  // namespace

ScaleMixtureSampler::ScaleMixtureSampler(const MaternParams& params, const GridSpec& grid, double step)
    : grid_(grid) {
  params.validate();
  grid_.validate();
  if (params.dim() != grid_.d) throw DomainError("Matern dimension does not match the grid");
  if (!(step > 0.0 && step <= 1.0)) throw DomainError("scale-mixture step must lie in (0, 1]");
  for (Eigen::Index i = 0; i < params.M.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < params.M.cols(); ++j) {
      if (params.M(i, j) != 0.0) throw DomainError("scale-mixture sampling needs a diagonal anisotropy matrix");
    }
  }
  variance_ = params.sigma * params.sigma;
  const double nu = params.nu;
  double x_min = std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid_.d; ++k) {
    axis_scale_.push_back(params.alpha * params.M(k, k) / static_cast<double>(grid_.n));
    x_min = std::min(x_min, axis_scale_.back());
  }
  const double log_norm = specfun::log_gamma(nu);
  const double v_max = std::log(60.0 + 4.0 * nu);
  const double v_min = std::log(x_min * x_min / (4.0 * 46.0));
  double mass = 0.0;
  for (double v = v_max; v >= v_min; v -= step) {
    const double w = step * std::exp(nu * v - std::exp(v) - log_norm);
    const double scale = 0.25 * std::exp(-v);
    Node node{w, scale, {}};
    for (int k = 0; k < grid_.d; ++k) {
      const auto N = static_cast<Eigen::Index>(grid_.counts[static_cast<std::size_t>(k)]);
      const double a = axis_scale_[static_cast<std::size_t>(k)];
      Eigen::MatrixXd C(N, N);
      for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < N; ++j) {
          const double t = a * static_cast<double>(i - j);
          C(i, j) = std::exp(-scale * t * t);
        }
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
      const Eigen::VectorXd& lam = es.eigenvalues();
      const double top = lam.maxCoeff();
      std::vector<Eigen::Index> keep;
      for (Eigen::Index i = 0; i < N; ++i) {
        if (lam[i] > kRankTol * top) keep.push_back(i);
      }
      Eigen::MatrixXd F(N, static_cast<Eigen::Index>(keep.size()));
      for (std::size_t c = 0; c < keep.size(); ++c) {
        F.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(keep[c]) * std::sqrt(lam[keep[c]]);
      }
      node.factors.push_back(std::move(F));
    }
    mass += w;
    bool white = true;
    for (double a : axis_scale_) white = white && std::exp(-scale * a * a) < kNegligibleCorrelation;
    if (white) {
      white_ += w;
    } else {
      nodes_.push_back(std::move(node));
    }
  }
  const double tail = 1.0 - mass;
  if (tail < -1e-10) throw NumericalError("scale-mixture weights exceed the variance");
  white_ = variance_ * (white_ + std::max(tail, 0.0));
}

double ScaleMixtureSampler::covariance(std::span<const std::int64_t> index_lag) const {
  double c = 0.0;
  bool zero = true;
  for (const Node& node : nodes_) {
    double prod = node.weight;
    for (std::size_t k = 0; k < node.factors.size(); ++k) {
      const auto lag = static_cast<Eigen::Index>(std::abs(index_lag[k]));
      if (lag >= node.factors[k].rows()) throw DomainError("lag outside the grid");
      prod *= node.factors[k].row(lag).dot(node.factors[k].row(0));
    }
    c += prod;
  }
  for (auto l : index_lag) zero = zero && l == 0;
  return variance_ * c + (zero ? white_ : 0.0);
}

GridField ScaleMixtureSampler::sample(std::uint64_t master_seed, std::uint64_t replicate_index) const {
  NormalStream rng(master_seed, replicate_index);
  GridField out{grid_, std::vector<double>(grid_.size(), 0.0)};
  const std::size_t d = grid_.counts.size();
  for (const Node& node : nodes_) {
    std::vector<std::int64_t> dims(d);
    std::size_t total = 1;
    for (std::size_t k = 0; k < d; ++k) {
      dims[k] = node.factors[k].cols();
      total *= static_cast<std::size_t>(dims[k]);
    }
    std::vector<double> t(total);
    for (double& x : t) x = rng();
    for (std::size_t k = 0; k < d; ++k) t = mode_product(t, dims, k, node.factors[k]);
    const double amp = std::sqrt(variance_ * node.weight);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += amp * t[i];
  }
  const double amp = std::sqrt(white_);
  for (double& x : out.values) x += amp * rng();
  return out;
}

GridField sample_scale_mixture(const CovarianceModel& model, const SimConfig& cfg) {
  cfg.validate();
  const auto* p = std::get_if<MaternParams>(&model);
  if (!p) throw DomainError("scale-mixture sampling supports the Matern family only");
  const ScaleMixtureSampler s(*p, cfg.grid);
  return s.sample(cfg.master_seed, cfg.replicate_index);
}

GridField sample_dense(const CovarianceModel& model, const SimConfig& cfg, SimDiagnostics* diag) {
  SimConfig c = cfg;
  c.method = SimMethod::kDense;
  c.validate();
  const DenseSampler s(model, c.grid);
  if (diag) *diag = s.diagnostics();
  return s.sample(c.master_seed, c.replicate_index);
}

GridField sample_circulant(const CovarianceModel& model, const SimConfig& cfg, SimDiagnostics* diag) {
  cfg.validate();
  const CirculantSampler s(model, cfg.grid, cfg.padding_factor, cfg.eig_clip_tol, cfg.max_clipped_fraction);
  if (diag) *diag = s.diagnostics();
  return s.sample(cfg.master_seed, cfg.replicate_index);
}

GridField sample(const CovarianceModel& model, const SimConfig& cfg, SimDiagnostics* diag) {
  switch (cfg.method) {
    case SimMethod::kDense:
      return sample_dense(model, cfg, diag);
    case SimMethod::kScaleMixture:
      if (diag) *diag = SimDiagnostics{};
      return sample_scale_mixture(model, cfg);
    case SimMethod::kCirculant:
      break;
  }
  return sample_circulant(model, cfg, diag);
}

}  // namespace qvest
