#include "qvest/harness_runner.hpp"

#include <cmath>
#include <numeric>

namespace qvest::harness {

void enforce_failure_policy(std::size_t failures, std::size_t count, double max_fraction) {
  if (count == 0) return;
  const double frac = static_cast<double>(failures) / static_cast<double>(count);
  if (frac > max_fraction) {
    throw NumericalError("run aborted: " + std::to_string(failures) + " of " + std::to_string(count) +
                         " replicates failed (limit " + std::to_string(max_fraction * 100.0) + "%)");
  }
}

RmseCell rmse_cell(std::span<const double> estimates, double truth) {
  RmseCell c;
  c.truth = truth;
  c.count = estimates.size();
  if (estimates.empty()) return c;
  const double R = static_cast<double>(estimates.size());
  double sum = 0.0;
  double mse = 0.0;
  for (double e : estimates) {
    sum += e;
    mse += (e - truth) * (e - truth);
  }
  c.mean = sum / R;
  c.bias = c.mean - truth;
  mse /= R;
  c.rmse = std::sqrt(mse);
  if (estimates.size() > 1 && c.rmse > 0.0) {
    double var = 0.0;
    for (double e : estimates) {
      const double dev = (e - truth) * (e - truth) - mse;
      var += dev * dev;
    }
    var /= R - 1.0;
    c.rmse_se = std::sqrt(var / R) / (2.0 * c.rmse);
  }
  return c;
}

MeanSd mean_sd(std::span<const double> values) {
  MeanSd m;
  if (values.empty()) return m;
  const double R = static_cast<double>(values.size());
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / R;
  if (values.size() > 1) {
    double v = 0.0;
    for (double x : values) v += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(v / (R - 1.0));
    m.se = m.sd / std::sqrt(R);
  }
  return m;
}

SlopeFit ols_slope(std::span<const double> x, std::span<const double> y, std::span<const double> y_se) {
  SlopeFit f;
  const std::size_t n = x.size();
  if (n < 2) return f;
  const double xm = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double ym = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0;
  for (double xi : x) sxx += (xi - xm) * (xi - xm);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (x[i] - xm) / sxx;
    f.slope += w * (y[i] - ym);
    if (i < y_se.size()) var += w * w * y_se[i] * y_se[i];
  }
  f.slope_se = std::sqrt(var);
  f.intercept = ym - f.slope * xm;
  return f;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  KsResult r;
  if (a.empty() || b.empty()) return r;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  r.statistic = d;
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  // Kolmogorov distribution tail.
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-12) break;
  }
  r.p_value = std::clamp(p, 0.0, 1.0);
  if (lambda < 0.2) r.p_value = 1.0;
  return r;
}

}  // namespace qvest::harness
