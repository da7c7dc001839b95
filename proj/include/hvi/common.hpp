#ifndef HVI_COMMON_HPP
#define HVI_COMMON_HPP

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hvi {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Mismatched shapes, invalid configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inputs outside an operation's mathematical domain (e.g. non-positive
/// variances, observations that are not 0/1).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Non-finite state encountered while integrating a flow; carries the
/// 1-based step index at which integration failed.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, int step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Log-determinant factor too close to zero to invert.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Counter-based generator: output i is a mix of key + i*gamma, so streams
// derived from distinct keys never overlap and replicates can be evaluated
// in any order or thread.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type(0); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Derives an independent stream key from a base seed and up to three ids
/// (e.g. cell id, run id, replicate id).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  SplitMix64 mix(base);
  std::uint64_t k = mix();
  k ^= a + 0x9e3779b97f4a7c15ull + (k << 6) + (k >> 2);
  k = SplitMix64(k)();
  k ^= b + 0x9e3779b97f4a7c15ull + (k << 6) + (k >> 2);
  k = SplitMix64(k)();
  k ^= c + 0x9e3779b97f4a7c15ull + (k << 6) + (k >> 2);
  return SplitMix64(k)();
}

inline double uniform01(SplitMix64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal draw (Box-Muller, no state carried between calls).
inline double normal(SplitMix64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline Vec normal_vec(SplitMix64& rng, Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

/// Uniform index in [0, n).
inline std::size_t rng_index(SplitMix64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

inline double log_sigmoid(double x) {
  // -softplus(-x), stable on both tails
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double softplus(double x) {
  return x >= 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

constexpr double kLog2Pi = 1.8378770664093454836;

/// log N(x; mean, diag(var)), all vectors the same length.
inline double diag_gaussian_log_density(const Vec& x, const Vec& mean,
                                        const Vec& var) {
  const auto d = x.size();
  double acc = -0.5 * static_cast<double>(d) * kLog2Pi;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double r = x[j] - mean[j];
    acc -= 0.5 * (std::log(var[j]) + r * r / var[j]);
  }
  return acc;
}

/// log N(x; 0, I)
inline double std_normal_log_density(const Vec& x) {
  return -0.5 * static_cast<double>(x.size()) * kLog2Pi -
         0.5 * x.squaredNorm();
}

}  // namespace hvi

#endif  // HVI_COMMON_HPP
