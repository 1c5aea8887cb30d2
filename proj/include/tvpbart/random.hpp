// Seeded random streams. Every worker draws from a substream derived from
// (seed, purpose, index, sweep), so results do not depend on scheduling.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace tvpbart {

enum class Stream : std::uint32_t {
  Init = 1,
  Equation = 2,
  Factors = 3,
  FactorVolatility = 4,
  LoadingShrinkage = 5,
  Simulation = 6,
  Test = 7,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

  /// Independent stream keyed by logical indices, not by call order.
  static Rng substream(std::uint64_t seed, Stream purpose, std::uint64_t index, std::uint64_t sweep = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32), static_cast<std::uint32_t>(sweep),
                      static_cast<std::uint32_t>(sweep >> 32)};
    Rng r;
    r.engine_.seed(seq);
    return r;
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  /// Uniform on (0, 1], safe to take logs of.
  double uniform_pos() { return 1.0 - uniform(); }

  int uniform_int(int n) { return std::uniform_int_distribution<int>(0, n - 1)(engine_); }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  /// Gamma with shape/rate parameterisation.
  double gamma(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0)(engine_) / rate;
  }

  /// Inverse gamma with density proportional to x^{-shape-1} exp(-scale/x).
  double inv_gamma(double shape, double scale) {
    return scale / std::gamma_distribution<double>(shape, 1.0)(engine_);
  }

  double beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    return x / (x + y);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tvpbart
