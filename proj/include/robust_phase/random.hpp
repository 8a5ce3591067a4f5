#pragma once

// Seeded random streams. Gaussian variates use the Box-Muller transform on
// 53-bit uniforms from mt19937_64, so ports in other languages can match the
// distribution (not the bits) by following the same recipe.

#include "robust_phase/core.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace robust_phase {

/// (seed, stream) pair; identical pairs reproduce identical draws on one build.
struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  /// Deterministic sub-stream, e.g. one per oracle call.
  RngSeed child(std::uint64_t tag) const { return {seed, mix(stream ^ mix(tag + 0x9e37U))}; }
  RngSeed child(std::string_view tag) const {
    // FNV-1a; stable across platforms, unlike std::hash.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return child(h);
  }

  friend bool operator==(const RngSeed&, const RngSeed&) = default;

  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

class Rng {
 public:
  explicit Rng(const RngSeed& s) : engine_(make_engine(s)) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Index uniform on [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 == 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phase = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phase);
    has_spare_ = true;
    return r * std::cos(phase);
  }

  Eigen::VectorXd gaussian_vector(std::size_t d) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = gaussian();
    return v;
  }

  /// Uniform on the unit sphere: a normalized Gaussian vector, redrawn on zero.
  SignalVec unit_sphere(std::size_t d) {
    for (;;) {
      Eigen::VectorXd v = gaussian_vector(d);
      const double nrm = v.norm();
      if (nrm > 0.0) return SignalVec(Eigen::VectorXd(v / nrm));
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  static std::mt19937_64 make_engine(const RngSeed& s) {
    std::seed_seq seq{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32),
                      static_cast<std::uint32_t>(s.stream),
                      static_cast<std::uint32_t>(s.stream >> 32)};
    return std::mt19937_64(seq);
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace robust_phase
