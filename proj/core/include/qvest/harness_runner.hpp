#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "qvest/errors.hpp"

namespace qvest::harness {

template <class R>
struct ReplicateOutcome {
  // Indexed by replicate; empty where the replicate failed.
  std::vector<std::optional<R>> results;
  std::size_t failures = 0;
  // (index, message) of failed replicates, sorted by index.
  std::vector<std::pair<std::size_t, std::string>> failure_log;
};

// Throws NumericalError when failures exceed max_fraction of count.
void enforce_failure_policy(std::size_t failures, std::size_t count, double max_fraction);

// Calls fn(i) for i in [0, count) on up to `workers` threads. Results land
// in slot i, so the outcome does not depend on scheduling. NumericalError
// from a replicate counts as a failure; any other exception aborts.
template <class R, class Fn>
ReplicateOutcome<R> run_replicates(std::size_t count, int workers, double max_failure_fraction, Fn&& fn) {
  ReplicateOutcome<R> out;
  out.results.resize(count);
  std::vector<std::string> errors(count);
  std::vector<char> failed(count, 0);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto work = [&] {
    for (;;) {
      if (abort.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        out.results[i] = fn(i);
      } catch (const NumericalError& e) {
        failed[i] = 1;
        errors[i] = e.what();
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        abort = true;
      }
    }
  };
  const std::size_t nw = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1,
                                                 std::max<std::size_t>(count, 1));
  if (nw == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < nw; ++w) pool.emplace_back(work);
  }
  if (fatal) std::rethrow_exception(fatal);
  for (std::size_t i = 0; i < count; ++i) {
    if (failed[i]) {
      ++out.failures;
      out.failure_log.emplace_back(i, errors[i]);
    }
  }
  enforce_failure_policy(out.failures, count, max_failure_fraction);
  return out;
}

struct RmseCell {
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  // Delta-method standard error from replicate-level squared errors.
  double rmse_se = 0.0;
  std::size_t count = 0;
};

RmseCell rmse_cell(std::span<const double> estimates, double truth);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
};
MeanSd mean_sd(std::span<const double> values);

struct SlopeFit {
  double slope = 0.0;
  // Propagated from per-point standard errors of y.
  double slope_se = 0.0;
  double intercept = 0.0;
};
// Ordinary least squares of y on x.
SlopeFit ols_slope(std::span<const double> x, std::span<const double> y, std::span<const double> y_se);

// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace qvest::harness
