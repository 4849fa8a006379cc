#pragma once

#include <cstdint>
#include <random>

namespace qvest {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of replicate `index` under `master`. A pure function of the pair, so
// any replicate can be regenerated without touching the others.
constexpr std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index ^ 0x5851f42d4c957f2dULL));
}

// Standard normal stream of one replicate.
class NormalStream {
 public:
  NormalStream(std::uint64_t master, std::uint64_t index) : engine_(replicate_seed(master, index)) {}

  double operator()() { return dist_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace qvest
