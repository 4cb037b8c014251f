#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace stlf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values (bad mode names, nonpositive concentrations, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Arguments outside an operation's domain (index out of range, dimension
// mismatch, empty dataset, weight-sum violation, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed external files (IDX magic/count mismatches, bad CSV).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Pairwise divergence protocol cannot proceed (empty holdout split, ...).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Training preconditions violated (no labeled samples).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// API misuse (missing reference plan, coupling value without the flag, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// The rounded source/target classification admits no valid link plan.
class DegeneratePlanError : public Error {
 public:
  using Error::Error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic stream RNG. Every random draw in the library flows through an
// explicitly seeded instance, so equal (config, seed) reproduces equal output
// bit for bit. Substreams are derived by hashing (seed, tags), which makes
// per-pair or per-repeat streams independent of evaluation order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0xD1B54A32D192ED03ull)) {}

  static std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (a + 0x100001ull));
    h = splitmix64(h ^ (b + 0x200003ull));
    h = splitmix64(h ^ (c + 0x300005ull));
    return h;
  }

  std::uint64_t raw() {
    state_ = splitmix64(state_);
    return state_;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) { return static_cast<int>(raw() % static_cast<std::uint64_t>(n)); }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Marsaglia-Tsang; shapes below 1 use the Gamma(a+1) * U^(1/a) boost.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = std::max(uniform(), 1e-300);
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  Vec dirichlet(double concentration, int k) {
    Vec g(k);
    for (int i = 0; i < k; ++i) g[i] = std::max(gamma(concentration), 1e-300);
    return g / g.sum();
  }

  // Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(p[i], p[uniform_int(i + 1)]);
    return p;
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace stlf
