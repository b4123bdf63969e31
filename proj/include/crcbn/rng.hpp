#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace crcbn {

/// splitmix64 finalizer; used to derive independent per-unit seeds from a
/// top-level seed so work units can run in any order.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = mix_seed(seed);
  for (auto p : path) s = mix_seed(s ^ mix_seed(p + 0x632be59bd9b4e019ULL));
  return s;
}

/// Seeded random stream. The engine and the distributions used here are
/// fully specified (std::mt19937_64, Boost.Random), so draws are identical
/// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() {
    double u;
    do { u = uniform(); } while (u == 0.0);
    return u;
  }

  std::size_t index(std::size_t n) {
    boost::random::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(engine_);
  }

  double gamma(double shape) {
    boost::random::gamma_distribution<double> d(shape, 1.0);
    return d(engine_);
  }

  /// log of a Gamma(shape, 1) draw; stays finite for very small shapes where
  /// the draw itself underflows.
  double log_gamma(double shape) {
    if (shape >= 1.0) return std::log(gamma(shape));
    // Gamma(a) = Gamma(a + 1) * U^(1/a)
    return std::log(gamma(shape + 1.0)) + std::log(uniform_open()) / shape;
  }

  /// Index drawn from a (not necessarily normalized) weight vector.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (u < weights[i]) return i;
      u -= weights[i];
    }
    // Rounding left u just past the end: take the last state with mass.
    for (std::size_t i = weights.size(); i-- > 0;)
      if (weights[i] > 0.0) return i;
    return weights.size() - 1;
  }

  /// Dirichlet draw written into `out`; computed in log space and normalized.
  void dirichlet(std::span<const double> alpha, std::span<double> out) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      out[i] = log_gamma(alpha[i]);
      mx = std::max(mx, out[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      out[i] = std::exp(out[i] - mx);
      total += out[i];
    }
    for (auto& v : out) v /= total;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace crcbn
