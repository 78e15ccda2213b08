#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace atst {

// Deterministic stream-splittable generator. Identical (seed, stream) pairs
// yield identical draws; distinct streams are decorrelated via splitmix64.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), engine_(mix(seed, stream)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  SeededRng substream(std::uint64_t stream) const {
    return SeededRng(seed_, stream);
  }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // H ~ Geom(1 - gamma) on {1, 2, ...}: P(H = h) = gamma^(h-1) (1-gamma)
  int geometric_horizon(double gamma) {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    if (gamma <= 0.0) return 1;
    double h = std::floor(std::log(u) / std::log(gamma));
    if (h < 0.0) h = 0.0;
    if (h > 1e9) h = 1e9;
    return 1 + static_cast<int>(h);
  }

  // index sampled proportionally to nonnegative weights (assumed to sum ~1)
  int discrete(const Eigen::VectorXd& w) {
    double u = uniform() * w.sum();
    double acc = 0.0;
    for (int i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (u < acc) return i;
    }
    return static_cast<int>(w.size()) - 1;
  }

  int uniform_int(int n) {  // in [0, n)
    return static_cast<int>(uniform() * n) % n;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

}  // namespace atst
