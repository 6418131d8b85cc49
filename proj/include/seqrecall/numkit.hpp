#pragma once

// Dense matrices, seeded random streams, stable softmax / cross-entropy.
// All arithmetic is 64-bit; storage is row-major.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>

namespace seqrecall {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Thrown when a loss or activation goes non-finite.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown on data / integrity problems (bad files, hash mismatches).
class IntegrityError : public std::runtime_error {
 public:
  explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

// SplitMix64 finalizer; full avalanche on 64 bits.
inline uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

// Counter-based generator keyed by (seed, stream_id). Identical keys give
// identical sequences; distinct stream ids give independent sequences.
// Copies are values: advancing one never affects another.
class RandomStream {
 public:
  RandomStream(uint64_t seed, std::string_view stream_id)
      : state_(mix64(mix64(seed) ^ fnv1a64(stream_id))) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Unbiased uniform integer in [0, bound).
  uint64_t next_below(uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
    const uint64_t threshold = (-bound) % bound;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Child stream keyed off this stream's current state plus a purpose label.
  RandomStream derive(std::string_view label, uint64_t index = 0) const {
    RandomStream child = *this;
    child.state_ = mix64(mix64(state_ ^ fnv1a64(label)) + 0x9e3779b97f4a7c15ull * (index + 1));
    return child;
  }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// FNV over the raw element bytes; used for freezing / integrity checks.
inline uint64_t checksum(const Matrix& m) {
  return fnv1a64(m.data(), sizeof(double) * static_cast<size_t>(m.size()));
}

inline uint64_t checksum(const Vector& v) {
  return fnv1a64(v.data(), sizeof(double) * static_cast<size_t>(v.size()));
}

// log(sum(exp(x))) with max subtraction.
inline double log_sum_exp(const double* x, Eigen::Index n) {
  double mx = x[0];
  for (Eigen::Index i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) s += std::exp(x[i] - mx);
  return mx + std::log(s);
}

inline Vector softmax(const Vector& logits) {
  if (logits.size() == 0) throw std::invalid_argument("softmax: empty logits");
  if (!logits.allFinite()) throw NumericError("softmax: non-finite logits");
  const double mx = logits.maxCoeff();
  Vector out = (logits.array() - mx).exp();
  out /= out.sum();
  return out;
}

// -log softmax(logits)[label], fused via log-sum-exp.
inline double cross_entropy(const Vector& logits, Eigen::Index label) {
  if (logits.size() == 0) throw std::invalid_argument("cross_entropy: empty logits");
  if (label < 0 || label >= logits.size())
    throw std::invalid_argument("cross_entropy: label out of range");
  return log_sum_exp(logits.data(), logits.size()) - logits[label];
}

// Entries i.i.d. uniform on [-scale, +scale]. The stream is taken by value,
// so each call site owns a purpose-labeled stream.
inline Matrix init_uniform(RandomStream rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("init_uniform: non-positive dimensions");
  if (scale <= 0.0) throw std::invalid_argument("init_uniform: scale must be positive");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = rng.next_uniform(-scale, scale);
  return m;
}

// Argmax with ties broken by lowest index.
inline Eigen::Index argmax_lowest(const double* x, Eigen::Index n) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < n; ++i)
    if (x[i] > x[best]) best = i;
  return best;
}

}  // namespace seqrecall
