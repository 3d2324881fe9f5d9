#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sharpopt {

namespace rng_detail {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

}  // namespace rng_detail

/// Counter-based random stream. A stream is identified by (seed, stream);
/// draw number i is mix64(key + (i+1)*gamma) with key = mix64(seed ^
/// mix64(gamma*(stream+1))), so any (seed, stream) pair reproduces the same
/// bits on every platform. Normal variates use Box-Muller on 53-bit uniforms.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(rng_detail::mix64(seed ^ rng_detail::mix64(rng_detail::kGamma * (stream + 1)))) {}

  std::uint64_t next_u64() { return rng_detail::mix64(key_ + (++counter_) * rng_detail::kGamma); }

  /// Uniform on (0, 1].
  double next_uniform() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_uniform();
    double u2 = next_uniform();
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 2.0 * M_PI * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

  /// Uniform integer in [0, bound), rejection sampled.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
    std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Stable seed derivation for independent sub-tasks of one experiment.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t domain) {
  return rng_detail::mix64(seed + rng_detail::kGamma * (domain + 1));
}

inline Eigen::VectorXd normal_vector(CounterRng& rng, Eigen::Index n, double stddev = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = stddev * rng.next_normal();
  return v;
}

/// Column-major fill order.
inline Eigen::MatrixXd normal_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols,
                                     double stddev = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = stddev * rng.next_normal();
  return m;
}

/// k distinct indices from [0, n), in sampling order (partial Fisher-Yates).
inline std::vector<Eigen::Index> sample_without_replacement(CounterRng& rng, Eigen::Index n,
                                                            Eigen::Index k) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  std::vector<Eigen::Index> out(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    std::uint64_t j = i + rng.next_below(static_cast<std::uint64_t>(n - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    out[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace sharpopt
