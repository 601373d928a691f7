#pragma once

#include <cmath>
#include <cstdint>

#include "tfb/types.hpp"

namespace tfb {

/// Address of one reproducible random stream. Distinct (seed, stream_id)
/// pairs give statistically independent sequences; the same pair gives the
/// same sequence on every run and for any worker count.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

namespace detail {

// SplitMix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Derive a child stream. Children with distinct tags are independent of
/// each other and of the parent; derivation is pure, so a trial's stream
/// never depends on scheduling.
inline RngStream substream(RngStream s, std::uint64_t tag) {
  return {s.seed, detail::mix64(s.stream_id ^ (0x9e3779b97f4a7c15ull * (tag + 1)))};
}

inline RngStream substream(RngStream s, std::uint64_t tag_a, std::uint64_t tag_b) {
  return substream(substream(s, tag_a), tag_b);
}

/// Counter-based generator over one stream (SplitMix64 core). State is a
/// single counter, so draws are cheap and the sequence is identical across
/// platforms and worker counts.
class Rng {
 public:
  explicit Rng(RngStream s)
      : key_(detail::mix64(detail::mix64(s.seed) ^
                           (0xbf58476d1ce4e5b9ull * s.stream_id + 0x2545f4914f6cdd1dull))) {}

  std::uint64_t next_u64() {
    ctr_ += 0x9e3779b97f4a7c15ull;
    return detail::mix64(key_ ^ ctr_);
  }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe under log().
  double uniform01_open() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; two uniforms per draw, no cached state.
  double gaussian() {
    const double u1 = uniform01_open();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Symmetric-signed Pareto: P(|X| > x) = (x / x_min)^(-beta) for x >= x_min.
  double pareto_signed(double beta, double x_min) {
    const double mag = x_min * std::pow(uniform01_open(), -1.0 / beta);
    return (next_u64() & 1ull) ? mag : -mag;
  }

  /// Gamma(shape a >= 1, scale 1), Marsaglia-Tsang squeeze.
  double gamma(double a) {
    const double d = a - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      const double x = gaussian();
      const double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      const double v = t * t * t;
      const double u = uniform01_open();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

  /// Student-t with dof degrees of freedom (dof > 2 in all callers here).
  double student_t(double dof) {
    const double z = gaussian();
    const double chi2 = 2.0 * gamma(0.5 * dof);
    return z / std::sqrt(chi2 / dof);
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

}  // namespace tfb
