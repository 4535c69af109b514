#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace gnnbd {

using Real = double;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;
// Row-major compressed storage: outer index = row offsets, inner = sorted column indices.
using SparseMatrix = Eigen::SparseMatrix<Real, Eigen::RowMajor>;

/// Bad or inconsistent configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unreadable or malformed input data (CLI exit code 3).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training or explanation diverged / failed (CLI exit code 4).
struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shape mismatch between operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Combine a base seed with a tag (stage id, node id, ...) into a new seed.
inline uint64_t mix_seed(uint64_t base, uint64_t tag) {
  return splitmix64(base ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

// Deterministic RNG. mt19937_64 output is pinned by the standard and the
// derived draws below avoid the implementation-defined std distributions,
// so identical seeds give identical streams on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  Real uniform() { return static_cast<Real>(next_u64() >> 11) * 0x1.0p-53; }

  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  /// Box-Muller; draws two uniforms per sample.
  Real normal(Real mean, Real stddev) {
    Real u1 = (static_cast<Real>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    Real u2 = uniform();
    Real z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + stddev * z;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace gnnbd
