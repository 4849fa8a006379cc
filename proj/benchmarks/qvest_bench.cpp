#include <benchmark/benchmark.h>

#include "qvest/estimators.hpp"
#include "qvest/fieldsim.hpp"
#include "qvest/increments.hpp"
#include "qvest/specfun.hpp"

using namespace qvest;

namespace {

void BM_BesselK(benchmark::State& state) {
  const double nu = state.range(0) / 4.0;
  double x = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(specfun::bessel_k(nu, x));
    x = x < 40.0 ? x * 1.07 : 0.01;
  }
}
BENCHMARK(BM_BesselK)->Arg(2)->Arg(7)->Arg(16)->Arg(30);

void BM_QuadraticVariation(benchmark::State& state) {
  const auto side = state.range(0);
  const MaternParams m{1.0, 20.0, 0.5, Eigen::MatrixXd::Identity(2, 2)};
  const CirculantSampler sampler(m, GridSpec::cube(2, side, side));
  const GridField f = sampler.sample(1, 0);
  const Stencil st(3, {-1, 1});
  for (auto _ : state) benchmark::DoNotOptimize(quadratic_variation(f, st, 1.0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.values.size()));
}
BENCHMARK(BM_QuadraticVariation)->Arg(64)->Arg(256)->Arg(1024);

void BM_ExpectedQv(benchmark::State& state) {
  const MaternParams m{1.5, 0.8, 1.75, Eigen::MatrixXd::Identity(2, 2)};
  const GridSpec g = GridSpec::cube(2, state.range(0), state.range(0) + 5);
  const Stencil st(4, {-1, 1});
  for (auto _ : state) benchmark::DoNotOptimize(expected_qv(m, g, st, 3.5));
}
BENCHMARK(BM_ExpectedQv)->Arg(55)->Arg(4096);

void BM_CirculantSample(benchmark::State& state) {
  const auto side = state.range(0);
  const GenCovParams a{-1.0, 0.2, 0.0, 0.4, {0.9, 0.1}};
  const CirculantSampler sampler(a, GridSpec::cube(2, 2 * side, side));
  std::uint64_t r = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sample_pair(7, r++));
}
BENCHMARK(BM_CirculantSample)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ScaleMixtureSample(benchmark::State& state) {
  const auto side = state.range(0);
  const MaternParams m{1.0, 1.0, 0.5, Eigen::MatrixXd::Identity(5, 5)};
  const ScaleMixtureSampler sampler(m, GridSpec::cube(5, side, side + 5));
  std::uint64_t r = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sample(7, r++));
}
BENCHMARK(BM_ScaleMixtureSample)->Arg(6)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_EstimateMatern(benchmark::State& state) {
  const MaternParams m{1.5, 0.8, 1.75, Eigen::MatrixXd::Identity(2, 2)};
  const DenseSampler sampler(m, GridSpec::cube(2, 55, 56));
  const GridField f = sampler.sample(1, 0);
  const auto dirs = DirectionSet::canonical(2);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_matern_any_d(QSource::from_field(f), 1.75, 3, dirs));
}
BENCHMARK(BM_EstimateMatern)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
