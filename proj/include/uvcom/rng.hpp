// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace uvcom {

/// Deterministic random source with a portable output path.
///
/// std::mt19937_64 has a fully specified bit stream, but the standard
/// distributions do not, so every draw here goes through fixed arithmetic
/// on raw engine output.  Results are therefore identical across compilers
/// and standard libraries for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Independent stream derived from (seed, stream).  Mixing via splitmix64
  /// keeps streams decorrelated even for adjacent ids.
  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix64(seed + 0x9E3779B97F4A7C15ULL * (stream + 1)));
  }

  std::uint64_t bits() { return eng_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], both inclusive.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - lo + 1;
    // Rejection sampling removes modulo bias and keeps the draw portable.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return lo + static_cast<int>(x % span);
  }

  /// Standard normal via Box-Muller (cached second value).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  Eigen::VectorXd normal_vec(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  Eigen::MatrixXd normal_mat(int rows, int cols, double stddev = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = stddev * normal();
    return m;
  }

  /// Fisher-Yates; std::shuffle is implementation-defined so not used.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<size_t>(i)],
                v[static_cast<size_t>(uniform_int(0, i))]);
    }
  }

  /// k distinct values drawn from {0, ..., n-1}.
  std::vector<int> sample_distinct(int n, int k) {
    if (k > n) throw std::invalid_argument("sample_distinct: k > n");
    std::vector<int> pool(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
    shuffle(pool);
    pool.resize(static_cast<size_t>(k));
    return pool;
  }

 private:
  static std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace uvcom
