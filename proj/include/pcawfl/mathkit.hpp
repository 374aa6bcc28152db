#pragma once

// Deterministic counter-keyed random streams plus the exponential integral
// E1 needed by the channel statistics. Every stream is addressed by
// (root_seed, worker_id, frame), so any draw can be reproduced without
// replaying the rest of the simulation.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace pcawfl::mathkit {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// Finalizer from splitmix64 (Vigna). Full avalanche on 64 bits.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stateless-by-construction stream: output i is splitmix64(base + i*kGolden)
// where base mixes the three key fields through the finalizer. Streams with
// different keys are decorrelated, and a stream can be re-created mid-run.
class RngStream {
 public:
  explicit RngStream(std::uint64_t root_seed, std::uint64_t worker_id = 0,
                     std::uint64_t frame = 0)
      : base_(derive_base(root_seed, worker_id, frame)) {}

  std::uint64_t next_u64() { return splitmix64(base_ + (++counter_) * kGolden); }

  // Uniform on (0, 1]: 53 mantissa bits, never returns 0 so log() is safe.
  double next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  std::uint64_t draws() const { return counter_; }

  static std::uint64_t derive_base(std::uint64_t root_seed,
                                   std::uint64_t worker_id,
                                   std::uint64_t frame) {
    std::uint64_t b = splitmix64(root_seed + kGolden);
    b = splitmix64(b ^ (worker_id + 0xD1B54A32D192ED03ULL));
    b = splitmix64(b ^ (frame + 0x8CB92BA72F3D8DD7ULL));
    return b;
  }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

// N(0, variance) via Box-Muller. Two uniform draws per sample, no caching,
// so the draw count per call is fixed.
inline double sample_real_gaussian(double variance, RngStream& rng) {
  if (variance < 0.0) throw std::domain_error("gaussian variance must be >= 0");
  if (variance == 0.0) return 0.0;
  const double u1 = rng.next_unit();
  const double u2 = rng.next_unit();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return std::sqrt(variance) * r * std::cos(2.0 * std::numbers::pi * u2);
}

// Exp(mean) by inversion. u in (0,1] keeps the result finite and allows an
// exact 0 at u = 1.
inline double sample_exponential(double mean, RngStream& rng) {
  if (mean < 0.0) throw std::domain_error("exponential mean must be >= 0");
  if (mean == 0.0) return 0.0;
  return -mean * std::log(rng.next_unit());
}

// CN(0, variance): |h|^2 is exactly Exp(mean = variance) and the phase is
// uniform. Built from one exponential and one phase draw rather than two
// independent gaussians so the squared magnitude carries no Box-Muller
// rounding asymmetry.
inline std::complex<double> sample_complex_gaussian(double variance,
                                                    RngStream& rng) {
  if (variance < 0.0) throw std::domain_error("gaussian variance must be >= 0");
  if (variance == 0.0) return {0.0, 0.0};
  const double mag_sq = -variance * std::log(rng.next_unit());
  const double phase = 2.0 * std::numbers::pi * rng.next_unit();
  const double mag = std::sqrt(mag_sq);
  return {mag * std::cos(phase), mag * std::sin(phase)};
}

namespace detail {

// Power series around 0: E1(x) = -gamma - ln x + sum_{k>=1} (-1)^{k+1} x^k / (k k!).
inline double e1_series(double x) {
  constexpr double kEulerGamma = 0.5772156649015328606065120900824024;
  double sum = -kEulerGamma - std::log(x);
  double pk = 1.0;  // x^k / k!
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    pk *= x / k;
    const double contrib = sign * pk / k;
    sum += contrib;
    sign = -sign;
    if (std::abs(contrib) < 1e-18 + 1e-16 * std::abs(sum)) break;
  }
  return sum;
}

// Continued fraction (modified Lentz): E1(x) = e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
// with a_j = -j^2, b_j = x + 2j + 1.
inline double e1_continued_fraction(double x) {
  constexpr double kTiny = 1e-300;
  double b = x + 1.0;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int j = 1; j <= 300; ++j) {
    const double a = -static_cast<double>(j) * static_cast<double>(j);
    b += 2.0;
    d = a * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + a / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x) * h;  // underflows cleanly to 0 for very large x
}

}  // namespace detail

// Exponential integral E1(x) = int_x^inf e^{-t}/t dt for x > 0.
// Series below the crossover, continued fraction above it. Absolute error
// stays under 1e-10 across [1e-3, 50] (checked against quadrature in tests).
inline double exp_integral_e1(double x) {
  if (!(x > 0.0)) throw std::domain_error("exp_integral_e1 requires x > 0");
  return x <= 1.0 ? detail::e1_series(x) : detail::e1_continued_fraction(x);
}

}  // namespace pcawfl::mathkit
