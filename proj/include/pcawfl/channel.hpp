#pragma once

// Rayleigh-fading uplink with truncated channel inversion. Per frame each
// worker draws i.i.d. channel gains, schedules the coordinates whose channel
// clears the threshold h0, inverts the channel there under an exact transmit
// power budget p0, and the server undoes the scaling and debiases by the
// inverse scheduling probability. Closed-form estimator constants (c1, c2,
// E[rho^-2]) live here next to the sampling path they describe.
//
// The runtime path works on |h|^2 and the already-reduced received form
//   c * mask(.)y + (||y||/rho) z
// which equals the physical h(.)p(.)y/||y|| + z chain after server scaling;
// the reduction, including the conjugate phase cancellation, is exercised in
// the tests through the complex power_control coefficients kept in the plan.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pcawfl/mathkit.hpp"

namespace pcawfl::channel {

using GradientVector = Eigen::VectorXd;

struct WorkerGeometry {
  double distance = 1.0;            // meters
  double pathloss_exponent = 2.0;   // alpha
};

// Mean channel power delta^-alpha.
inline double mean_gain(const WorkerGeometry& geom) {
  if (!(geom.distance > 0.0) || !(geom.pathloss_exponent > 0.0))
    throw std::domain_error("worker geometry requires positive distance and exponent");
  return std::pow(geom.distance, -geom.pathloss_exponent);
}

struct ChannelFrame {
  std::vector<double> gains;        // |h[i]|^2, exponential with mean delta^-alpha
  std::vector<std::uint8_t> mask;   // 1 iff |h[i]| >= h0
  int worker_id = 0;
  long frame = 0;
};

struct TransmitPlan {
  std::vector<std::complex<double>> power_control;  // p[i], zero where masked
  double alignment_factor = 0.0;                    // rho
  double inv_sched_prob = 1.0;                      // c = 1/Pr[|h| >= h0]
  bool silent = false;
};

struct NoiseModel {
  double variance = 0.0;  // sigma^2 per channel usage
};

struct TheoryConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double variance_bound_slack = 0.0;  // filled by verification runs
};

inline double scheduling_probability(const WorkerGeometry& geom, double h0) {
  if (h0 < 0.0) throw std::domain_error("truncation threshold must be >= 0");
  const double x = std::pow(geom.distance, geom.pathloss_exponent) * h0 * h0;
  (void)mean_gain(geom);  // validates the geometry
  return std::exp(-x);
}

inline ChannelFrame draw_channel_frame(const WorkerGeometry& geom, int d1,
                                       double h0, mathkit::RngStream& stream) {
  if (d1 < 1) throw std::invalid_argument("draw_channel_frame: d1 must be >= 1");
  if (h0 < 0.0) throw std::domain_error("truncation threshold must be >= 0");
  const double mean = mean_gain(geom);
  const double threshold = h0 * h0;
  ChannelFrame out;
  out.gains.resize(static_cast<std::size_t>(d1));
  out.mask.resize(static_cast<std::size_t>(d1));
  for (int i = 0; i < d1; ++i) {
    const double g = mathkit::sample_exponential(mean, stream);
    out.gains[static_cast<std::size_t>(i)] = g;
    out.mask[static_cast<std::size_t>(i)] = g >= threshold ? 1 : 0;
  }
  return out;
}

// Truncated channel inversion under the exact power budget. The worker goes
// silent (transmits nothing, server adds nothing) when no coordinate is
// scheduled, when the gradient is zero, or when every scheduled coordinate of
// the gradient is zero; all three are the rho -> infinity limit in which the
// noise term vanishes too.
inline TransmitPlan make_transmit_plan(const ChannelFrame& frame,
                                       const GradientVector& gradient,
                                       double p0, double h0,
                                       const WorkerGeometry& geom) {
  const std::size_t d1 = frame.gains.size();
  if (static_cast<std::size_t>(gradient.size()) != d1)
    throw std::invalid_argument("make_transmit_plan: gradient/frame size mismatch");
  if (!(p0 > 0.0)) throw std::domain_error("power budget must be positive");
  if (h0 < 0.0) throw std::domain_error("truncation threshold must be >= 0");

  const double x = std::pow(geom.distance, geom.pathloss_exponent) * h0 * h0;
  const double c = std::exp(x);

  TransmitPlan plan;
  plan.inv_sched_prob = c;
  plan.power_control.assign(d1, {0.0, 0.0});

  const double norm_sq = gradient.squaredNorm();
  double weighted = 0.0;  // sum of mask * y^2 / gain
  for (std::size_t i = 0; i < d1; ++i) {
    if (frame.mask[i])
      weighted += gradient(static_cast<Eigen::Index>(i)) *
                  gradient(static_cast<Eigen::Index>(i)) / frame.gains[i];
  }
  if (norm_sq == 0.0 || weighted == 0.0) {
    plan.silent = true;
    return plan;
  }

  const double inv_rho_sq = (c * c / p0) * weighted / norm_sq;
  const double rho = 1.0 / std::sqrt(inv_rho_sq);
  plan.alignment_factor = rho;
  for (std::size_t i = 0; i < d1; ++i) {
    if (!frame.mask[i]) continue;
    // p = rho c h* / |h|^2 with the runtime zero-phase convention h = sqrt(g).
    plan.power_control[i] = {rho * c / std::sqrt(frame.gains[i]), 0.0};
  }
  return plan;
}

// Received-and-rescaled gradient: c * mask(.)y + (||y||/rho) z with z drawn
// i.i.d. N(0, sigma^2) on every coordinate.
inline GradientVector transmit(const GradientVector& gradient,
                               const TransmitPlan& plan,
                               const ChannelFrame& frame,
                               const NoiseModel& noise,
                               mathkit::RngStream& stream) {
  const Eigen::Index d1 = gradient.size();
  if (frame.mask.size() != static_cast<std::size_t>(d1))
    throw std::invalid_argument("transmit: gradient/frame size mismatch");
  if (noise.variance < 0.0) throw std::domain_error("noise variance must be >= 0");

  GradientVector received = GradientVector::Zero(d1);
  if (plan.silent) return received;

  const double c = plan.inv_sched_prob;
  for (Eigen::Index i = 0; i < d1; ++i) {
    if (frame.mask[static_cast<std::size_t>(i)]) received(i) = c * gradient(i);
  }
  if (noise.variance > 0.0) {
    const double scale = gradient.norm() / plan.alignment_factor;
    for (Eigen::Index i = 0; i < d1; ++i)
      received(i) += scale * mathkit::sample_real_gaussian(noise.variance, stream);
  }
  return received;
}

inline GradientVector aggregate(const std::vector<GradientVector>& received) {
  if (received.empty()) throw std::invalid_argument("aggregate: empty input");
  const Eigen::Index d1 = received.front().size();
  GradientVector sum = GradientVector::Zero(d1);
  for (const auto& r : received) {
    if (r.size() != d1) throw std::invalid_argument("aggregate: size mismatch");
    sum += r;
  }
  return sum / static_cast<double>(received.size());
}

// E[rho^-2] = p0^-1 delta^alpha exp(2 delta^alpha h0^2) E1(delta^alpha h0^2).
// Diverges as h0 -> 0 because inverting arbitrarily deep fades costs
// unbounded power.
inline double expected_inv_rho_sq(const WorkerGeometry& geom, double h0,
                                  double p0) {
  if (!(p0 > 0.0)) throw std::domain_error("power budget must be positive");
  if (!(h0 > 0.0))
    throw std::domain_error("expected_inv_rho_sq diverges at h0 = 0");
  const double da = std::pow(geom.distance, geom.pathloss_exponent);
  const double x = da * h0 * h0;
  return da / p0 * std::exp(2.0 * x) * mathkit::exp_integral_e1(x);
}

inline TheoryConstants lemma_constants(const std::vector<WorkerGeometry>& geoms,
                                       double h0, double p0) {
  if (geoms.empty()) throw std::invalid_argument("lemma_constants: no workers");
  if (!(h0 > 0.0))
    throw std::domain_error("lemma_constants diverges at h0 = 0");
  TheoryConstants out;
  for (const auto& g : geoms) {
    const double da = std::pow(g.distance, g.pathloss_exponent);
    const double x = da * h0 * h0;
    out.c1 += std::expm1(x);
    out.c2 += da * std::exp(2.0 * x) * mathkit::exp_integral_e1(x);
  }
  const double n = static_cast<double>(geoms.size());
  out.c1 /= n;
  out.c2 /= n * p0;
  return out;
}

// Per-frame second-moment bound on the aggregated gradient:
// 2 ||grad||^2 + (c1 + c2 d1 sigma^2 + 4G) / (2N).
inline double variance_bound(const TheoryConstants& constants, int d1,
                             double sigma_sq, double big_g,
                             double grad_norm_sq, int n_workers) {
  if (d1 < 0 || sigma_sq < 0.0 || big_g < 0.0 || grad_norm_sq < 0.0 ||
      n_workers < 1)
    throw std::invalid_argument("variance_bound: negative input");
  return 2.0 * grad_norm_sq +
         (constants.c1 + constants.c2 * d1 * sigma_sq + 4.0 * big_g) /
             (2.0 * static_cast<double>(n_workers));
}

}  // namespace pcawfl::channel
