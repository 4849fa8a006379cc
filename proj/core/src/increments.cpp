#include "qvest/increments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

#include "qvest/errors.hpp"
#include "qvest/specfun.hpp"

namespace qvest {

namespace {

std::vector<double> binomial_stencil(int m) {
  std::vector<double> c(static_cast<std::size_t>(m) + 1);
  double binom = 1.0;
  for (int i = 0; i <= m; ++i) {
    if (i > 0) binom = binom * (m - i + 1) / i;
    c[static_cast<std::size_t>(i)] = ((m + i) % 2 == 0 ? 1.0 : -1.0) * binom;
  }
  return c;
}

// w_k = sum_i d_i d_{i+k}, exact integers.
std::vector<long double> stencil_autocorrelation(int m) {
  const std::vector<double> c = binomial_stencil(m);
  std::vector<long double> w(static_cast<std::size_t>(m) + 1, 0.0L);
  for (int k = 0; k <= m; ++k) {
    for (int i = 0; i + k <= m; ++i) {
      w[static_cast<std::size_t>(k)] +=
          static_cast<long double>(c[static_cast<std::size_t>(i)]) * c[static_cast<std::size_t>(i + k)];
    }
  }
  return w;
}

bool is_even_integer_below(double power, int m) {
  const double r = std::round(power);
  return power == r && static_cast<long long>(r) % 2 == 0 && r < 2.0 * m;
}

// Pairwise sum over a fixed array; the tree shape depends only on the size.
double pairwise_sum(std::span<const double> v) {
  if (v.empty()) return 0.0;
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct SiteLayout {
  GridSpec sites;
  std::vector<std::int64_t> shift;  // input index of output index 0, per axis
  std::vector<std::ptrdiff_t> offsets;  // linear offsets of the stencil taps
};

SiteLayout site_layout(const GridSpec& grid, const Stencil& st) {
  if (static_cast<int>(st.direction().size()) != grid.d) {
    throw DomainError("stencil direction dimension does not match the grid");
  }
  SiteLayout layout;
  layout.sites = grid;
  layout.shift.assign(static_cast<std::size_t>(grid.d), 0);
  const auto strides = grid.strides();
  std::ptrdiff_t step = 0;
  for (int k = 0; k < grid.d; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const std::int64_t extent = static_cast<std::int64_t>(st.order()) * std::abs(st.direction()[ku]);
    const std::int64_t out = grid.counts[ku] - extent;
    if (out <= 0) {
      throw GridTooSmallError("grid has " + std::to_string(grid.counts[ku]) + " points on axis " +
                              std::to_string(k) + "; an order-" + std::to_string(st.order()) +
                              " stencil along this direction needs more than " + std::to_string(extent));
    }
    layout.sites.counts[ku] = out;
    if (st.direction()[ku] < 0) layout.shift[ku] = extent;
    layout.sites.origin[ku] = grid.origin[ku] + static_cast<double>(layout.shift[ku]) / grid.n;
    step += static_cast<std::ptrdiff_t>(st.direction()[ku]) * static_cast<std::ptrdiff_t>(strides[ku]);
  }
  for (int i = 0; i <= st.order(); ++i) layout.offsets.push_back(i * step);
  return layout;
}

// Calls fn(row, base_linear_index, row_length) for each row of output sites
// (all axes but the last fixed).
template <class Fn>
void for_each_row(const GridSpec& grid, const SiteLayout& layout, std::size_t row_begin,
                  std::size_t row_end, Fn&& fn) {
  const int d = grid.d;
  const auto strides = grid.strides();
  const std::int64_t row_len = layout.sites.counts.back();
  std::vector<std::int64_t> idx(static_cast<std::size_t>(d), 0);
  for (std::size_t row = row_begin; row < row_end; ++row) {
    std::size_t rem = row;
    for (int k = d - 2; k >= 0; --k) {
      const auto ku = static_cast<std::size_t>(k);
      const auto c = static_cast<std::size_t>(layout.sites.counts[ku]);
      idx[ku] = static_cast<std::int64_t>(rem % c);
      rem /= c;
    }
    std::ptrdiff_t base = 0;
    for (int k = 0; k < d; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const std::int64_t j = (k == d - 1 ? 0 : idx[ku]) + layout.shift[ku];
      base += static_cast<std::ptrdiff_t>(j) * static_cast<std::ptrdiff_t>(strides[ku]);
    }
    fn(row, base, row_len);
  }
}

std::size_t row_count(const GridSpec& sites) {
  std::size_t rows = 1;
  for (std::size_t k = 0; k + 1 < sites.counts.size(); ++k) rows *= static_cast<std::size_t>(sites.counts[k]);
  return rows;
}

}  // namespace

GridSpec GridSpec::cube(int d, std::int64_t n, std::int64_t points_per_axis) {
  GridSpec g;
  g.d = d;
  g.n = n;
  g.counts.assign(static_cast<std::size_t>(d), points_per_axis);
  g.origin.assign(static_cast<std::size_t>(d), 0.0);
  g.validate();
  return g;
}

std::size_t GridSpec::size() const {
  std::size_t s = 1;
  for (auto c : counts) s *= static_cast<std::size_t>(c);
  return s;
}

std::vector<std::size_t> GridSpec::strides() const {
  std::vector<std::size_t> s(static_cast<std::size_t>(d), 1);
  for (int k = d - 2; k >= 0; --k) {
    const auto ku = static_cast<std::size_t>(k);
    s[ku] = s[ku + 1] * static_cast<std::size_t>(counts[ku + 1]);
  }
  return s;
}

void GridSpec::validate() const {
  if (d < 1) throw DomainError("grid dimension must be positive");
  if (n < 1) throw DomainError("grid resolution n must be positive");
  if (counts.size() != static_cast<std::size_t>(d) || origin.size() != static_cast<std::size_t>(d)) {
    throw DomainError("grid counts/origin must have one entry per axis");
  }
  for (auto c : counts) {
    if (c < 1) throw DomainError("grid counts must be positive");
  }
}

void GridField::validate() const {
  spec.validate();
  if (values.size() != spec.size()) {
    throw DomainError("field has " + std::to_string(values.size()) + " values but the grid has " +
                      std::to_string(spec.size()) + " points");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError("field contains non-finite values");
  }
}

double GridField::at(std::span<const std::int64_t> index) const {
  const auto s = spec.strides();
  std::size_t lin = 0;
  for (std::size_t k = 0; k < s.size(); ++k) lin += static_cast<std::size_t>(index[k]) * s[k];
  return values.at(lin);
}

Stencil::Stencil(int m, LatticeVector h) : m_(m), h_(std::move(h)) {
  if (m < 1) throw DomainError("stencil order must be at least 1");
  if (h_.empty() || std::all_of(h_.begin(), h_.end(), [](int x) { return x == 0; })) {
    throw DomainError("stencil direction must be a nonzero lattice vector");
  }
  coeffs_ = binomial_stencil(m);
}

double Stencil::direction_norm() const {
  double s = 0.0;
  for (int x : h_) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

Stencil stencil(int m, LatticeVector h) { return Stencil(m, std::move(h)); }

GridSpec increment_sites(const GridSpec& grid, const Stencil& st) {
  grid.validate();
  return site_layout(grid, st).sites;
}

GridField apply_increment(const GridField& field, const Stencil& st) {
  field.spec.validate();
  const SiteLayout layout = site_layout(field.spec, st);
  GridField out{layout.sites, std::vector<double>(layout.sites.size())};
  const auto coeffs = st.coeffs();
  const double* src = field.values.data();
  for_each_row(field.spec, layout, 0, row_count(layout.sites),
               [&](std::size_t row, std::ptrdiff_t base, std::int64_t len) {
                 double* dst = out.values.data() + row * static_cast<std::size_t>(len);
                 for (std::int64_t t = 0; t < len; ++t) {
                   double acc = 0.0;
                   for (std::size_t i = 0; i < coeffs.size(); ++i) {
                     acc += coeffs[i] * src[base + t + layout.offsets[i]];
                   }
                   dst[t] = acc;
                 }
               });
  return out;
}

double quadratic_variation(const GridField& field, const Stencil& st, double exponent, int workers) {
  if (field.values.size() != field.spec.size()) throw DomainError("field size does not match its grid");
  const SiteLayout layout = site_layout(field.spec, st);
  const std::size_t rows = row_count(layout.sites);
  std::vector<double> row_sums(rows, 0.0);
  const auto coeffs = st.coeffs();
  const double* src = field.values.data();
  auto work = [&](std::size_t begin, std::size_t end) {
    for_each_row(field.spec, layout, begin, end, [&](std::size_t row, std::ptrdiff_t base, std::int64_t len) {
      double s = 0.0;
      for (std::int64_t t = 0; t < len; ++t) {
        double acc = 0.0;
        for (std::size_t i = 0; i < coeffs.size(); ++i) acc += coeffs[i] * src[base + t + layout.offsets[i]];
        s += acc * acc;
      }
      row_sums[row] = s;
    });
  };
  const std::size_t nw = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, rows);
  if (nw == 1) {
    work(0, rows);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (rows + nw - 1) / nw;
    for (std::size_t w = 0; w < nw; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(rows, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  const double total = pairwise_sum(row_sums);
  const double scale = std::pow(static_cast<double>(field.spec.n), exponent);
  return scale * total / static_cast<double>(layout.sites.size());
}

double stencil_power_sum(int m, double power) {
  if (m < 1) throw DomainError("stencil order must be at least 1");
  if (power == 0.0 || is_even_integer_below(power, m)) return 0.0;
  const auto w = stencil_autocorrelation(m);
  long double s = 0.0L;
  for (int k = 1; k <= m; ++k) s += w[static_cast<std::size_t>(k)] * std::pow(static_cast<long double>(k), power);
  return static_cast<double>(2.0L * s);
}

double stencil_log_power_sum(int m, double power) {
  if (m < 1) throw DomainError("stencil order must be at least 1");
  const auto w = stencil_autocorrelation(m);
  long double s = 0.0L;
  for (int k = 2; k <= m; ++k) {
    const long double kk = k;
    s += w[static_cast<std::size_t>(k)] * std::pow(kk, power) * std::log(kk);
  }
  return static_cast<double>(2.0L * s);
}

double coeff_A(double nu, int m) {
  const specfun::SmoothnessOrder order(nu);
  if (!(m > nu)) {
    throw OrderTooSmallError("A(nu, m) needs m > nu (nu = " + std::to_string(nu) +
                             ", m = " + std::to_string(m) + ")");
  }
  const auto d = binomial_stencil(m);
  double s = 0.0;
  for (int i = 0; i <= m; ++i) {
    for (int j = 0; j <= m; ++j) {
      s += d[static_cast<std::size_t>(i)] * d[static_cast<std::size_t>(j)] * specfun::g_nu(nu, std::abs(i - j));
    }
  }
  return s;
}

double coeff_B(double nu, int m) {
  const specfun::SmoothnessOrder order(nu);
  if (!(m > nu + 1.0)) {
    throw OrderTooSmallError("B(nu, m) needs m > nu + 1 (nu = " + std::to_string(nu) +
                             ", m = " + std::to_string(m) + ")");
  }
  const auto d = binomial_stencil(m);
  double s = 0.0;
  for (int i = 0; i <= m; ++i) {
    for (int j = 0; j <= m; ++j) {
      s += d[static_cast<std::size_t>(i)] * d[static_cast<std::size_t>(j)] * (-nu) *
           specfun::g_nu(nu + 1.0, std::abs(i - j));
    }
  }
  return s;
}

double coeff_C(int p, double delta, double h_norm) {
  if (p < 1 || !(delta > 0.0) || !(h_norm > 0.0)) {
    throw DomainError("C(p, delta, |h|) needs p >= 1, delta > 0, |h| > 0");
  }
  return std::pow(h_norm, delta) * stencil_power_sum(p, delta);
}

double coeff_D(int p, double delta) {
  if (p < 1 || !(delta > 0.0)) throw DomainError("D(p, delta) needs p >= 1, delta > 0");
  return stencil_power_sum(p, delta);
}

namespace {

std::vector<double> direction_as_double(const Stencil& st) {
  std::vector<double> h(st.direction().begin(), st.direction().end());
  return h;
}

void check_model_grid(const CovarianceModel& model, const GridSpec& grid, const Stencil& st) {
  grid.validate();
  if (static_cast<int>(st.direction().size()) != grid.d) {
    throw DomainError("stencil direction dimension does not match the grid");
  }
  if (const auto md = model_dimension(model); md && *md != grid.d) {
    throw DomainError("covariance dimension does not match the grid");
  }
}

}  // namespace

double expected_qv_direct(const CovarianceModel& model, const GridSpec& grid, const Stencil& st,
                          double exponent) {
  check_model_grid(model, grid, st);
  const auto h = direction_as_double(st);
  const auto c = st.coeffs();
  const int m = st.order();
  // Stationarity: the sum depends only on k = i - j.
  std::vector<double> lag(h.size());
  double s = 0.0;
  for (int k = -m; k <= m; ++k) {
    double w = 0.0;
    for (int i = 0; i <= m; ++i) {
      const int j = i - k;
      if (j < 0 || j > m) continue;
      w += c[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(j)];
    }
    for (std::size_t a = 0; a < h.size(); ++a) lag[a] = k * h[a] / static_cast<double>(grid.n);
    s += w * evaluate(model, lag);
  }
  return std::pow(static_cast<double>(grid.n), exponent) * s;
}

double expected_qv(const CovarianceModel& model, const GridSpec& grid, const Stencil& st, double exponent) {
  check_model_grid(model, grid, st);
  const auto h = direction_as_double(st);
  const double scale = effective_radius(model, h);
  const double rho = scale / static_cast<double>(grid.n);
  const int m = st.order();
  const auto terms = radial_series(model, m * rho);
  if (!terms) return expected_qv_direct(model, grid, st, exponent);
  const double log_n = std::log(static_cast<double>(grid.n));
  const double log_rho = std::log(rho);
  double total = 0.0;
  for (const PowerTerm& t : *terms) {
    if (t.coef == 0.0 || t.power == 0.0) continue;
    const double plain = stencil_power_sum(m, t.power);
    const double moment = t.with_log ? stencil_log_power_sum(m, t.power) + log_rho * plain : plain;
    if (moment == 0.0) continue;
    total += t.coef * moment * std::exp(exponent * log_n + t.power * log_rho);
  }
  return total;
}

double b_combination(double nu, IndexPair pq) {
  return coeff_B(nu, pq.p) - coeff_A(nu, pq.p) / coeff_A(nu, pq.q) * coeff_B(nu, pq.q);
}

IndexPair select_pq_from(double nu, int p) {
  if (!(p > nu + 1.0)) {
    throw OrderTooSmallError("pair search needs p > nu + 1 (nu = " + std::to_string(nu) +
                             ", p = " + std::to_string(p) + ")");
  }
  const double lead = coeff_B(nu, p);
  const auto pair = find_partner(p, lead, [nu](int pp, int qq) { return b_combination(nu, {pp, qq}); });
  if (!pair) {
    throw NoValidPairError("no q in (" + std::to_string(p) + ", " + std::to_string(p + kPairSearchSpan) +
                           "] gives a nonvanishing B-combination for nu = " + std::to_string(nu));
  }
  return *pair;
}

IndexPair select_pq(double nu, int d) {
  const specfun::SmoothnessOrder order(nu);
  if (d <= 4) {
    throw NoValidPairError("separating alpha from sigma requires dimension d > 4, got d = " +
                           std::to_string(d));
  }
  // p > nu + 1 and 2p - 2nu > 4 reduce to p > nu + 2.
  const int p = static_cast<int>(std::floor(nu + 2.0)) + 1;
  return select_pq_from(nu, p);
}

}  // namespace qvest
