#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rpusim/rng.hpp"

namespace rpusim {

/// Population-level switching statistics for a cross-point device pair.
/// Defaults are the baseline model: linear weight-dependent branch steps with
/// mean step 0.001 at the symmetry point, branch slopes 1.66, 30/25/25%
/// device-to-device spreads and 30% cycle-to-cycle step noise.
struct DevicePopulationConfig {
  double dw_min0_mean = 0.001;   // weight change per coincidence at the symmetry point
  double slope_p_mean = 1.66;    // positive-branch weight dependence [1/weight]
  double slope_n_mean = 1.66;    // negative-branch weight dependence [1/weight]
  double dw_min0_rel_std = 0.30;
  double slope_p_rel_std = 0.25;
  double slope_n_rel_std = 0.25;
  double cycle_noise_rel_std = 0.30; // per-pulse multiplicative step noise
  double symmetry_offset_std = 0.0;  // sigma_ws: spread of per-device symmetry points

  void validate() const {
    if (dw_min0_mean <= 0 || slope_p_mean < 0 || slope_n_mean < 0)
      throw std::invalid_argument("device config: mean values must be positive");
    auto frac_ok = [](double f) { return f >= 0.0 && f < 1.0; };
    if (!frac_ok(dw_min0_rel_std) || !frac_ok(slope_p_rel_std) || !frac_ok(slope_n_rel_std) ||
        !frac_ok(cycle_noise_rel_std))
      throw std::invalid_argument("device config: rel std fractions must be in [0,1)");
    if (symmetry_offset_std < 0)
      throw std::invalid_argument("device config: symmetry_offset_std must be >= 0");
  }

  /// Ideal device: constant equal steps in both directions, no noise.
  static DevicePopulationConfig ideal(double dw_min0 = 0.001) {
    DevicePopulationConfig c;
    c.dw_min0_mean = dw_min0;
    c.slope_p_mean = 0.0;
    c.slope_n_mean = 0.0;
    c.dw_min0_rel_std = 0.0;
    c.slope_p_rel_std = 0.0;
    c.slope_n_rel_std = 0.0;
    c.cycle_noise_rel_std = 0.0;
    return c;
  }
};

enum class PulseDirection { Up, Down };

/// One differential device pair, in effective weight units (the periphery gain
/// and the reference conductance are folded in).
///
/// Branch responses are linear in the distance from the symmetry point w_s:
///   up:   dw_min0 * (1 - slope_p * (w - w_s))
///   down: dw_min0 * (1 + slope_n * (w - w_s))
/// Saturation is implicit: the up step vanishes at w_hi = w_s + 1/slope_p and
/// the down step at w_lo = w_s - 1/slope_n.
struct DeviceParams {
  double dw_min0 = 0.001;
  double slope_p = 1.66;
  double slope_n = 1.66;
  double w_s = 0.0; // symmetry-point offset of the effective weight
  double w = 0.0;   // current effective weight

  double w_hi() const {
    return slope_p > 0 ? w_s + 1.0 / slope_p : std::numeric_limits<double>::infinity();
  }
  double w_lo() const {
    return slope_n > 0 ? w_s - 1.0 / slope_n : -std::numeric_limits<double>::infinity();
  }

  void clamp_to_bounds() { w = std::min(std::max(w, w_lo()), w_hi()); }
};

/// Gaussian draw with mean m and relative std r, redrawn while non-positive.
/// Rejections are >3 sigma events for the baseline spreads, so the population
/// mean is preserved to within sampling error.
inline double sample_positive(double m, double r, Rng &rng) {
  if (r == 0.0)
    return m;
  double v;
  do {
    v = m * (1.0 + r * rng.gaussian());
  } while (v <= 0.0);
  return v;
}

inline DeviceParams sample_device(const DevicePopulationConfig &cfg, Rng &rng,
                                  double initial_w = 0.0) {
  DeviceParams d;
  d.dw_min0 = sample_positive(cfg.dw_min0_mean, cfg.dw_min0_rel_std, rng);
  d.slope_p = cfg.slope_p_mean == 0.0
                  ? 0.0
                  : sample_positive(cfg.slope_p_mean, cfg.slope_p_rel_std, rng);
  d.slope_n = cfg.slope_n_mean == 0.0
                  ? 0.0
                  : sample_positive(cfg.slope_n_mean, cfg.slope_n_rel_std, rng);
  d.w_s = cfg.symmetry_offset_std > 0 ? cfg.symmetry_offset_std * rng.gaussian() : 0.0;
  d.w = initial_w;
  d.clamp_to_bounds();
  return d;
}

/// Expected step magnitude for one coincidence pulse at the current weight.
/// Within the device bounds this is >= 0; it vanishes exactly at the bound the
/// branch saturates against.
inline double expected_step(const DeviceParams &d, PulseDirection dir) {
  const double u = d.w - d.w_s;
  const double s = dir == PulseDirection::Up ? d.dw_min0 * (1.0 - d.slope_p * u)
                                             : d.dw_min0 * (1.0 + d.slope_n * u);
  return std::max(s, 0.0);
}

/// Apply one pulse: step magnitude gets multiplicative Gaussian cycle noise,
/// floored at zero (a noisy step never flips direction), then the weight is
/// clamped to the device bounds.
inline void apply_pulse(DeviceParams &d, PulseDirection dir, double cycle_noise_rel_std,
                        Rng &rng) {
  double step = expected_step(d, dir);
  if (cycle_noise_rel_std > 0.0) {
    step *= 1.0 + cycle_noise_rel_std * rng.gaussian();
    step = std::max(step, 0.0);
  }
  d.w += dir == PulseDirection::Up ? step : -step;
  d.clamp_to_bounds();
}

/// Symmetric / antisymmetric combination of the branch responses at weight w,
/// normalized by the device's own dw_min0:
///   F = (up + down) / (2 dw_min0),  G = (up - down) / (2 dw_min0)
/// so that up = dw_min0 (F + G) and down = dw_min0 (F - G).
/// Derived quantities only; the branch formulas stay the source of truth.
struct FgValue {
  double F;
  double G;
};

inline FgValue fg_decompose(const DeviceParams &d, double w) {
  const double u = w - d.w_s;
  const double up = d.dw_min0 * (1.0 - d.slope_p * u);
  const double down = d.dw_min0 * (1.0 + d.slope_n * u);
  return {(up + down) / (2.0 * d.dw_min0), (up - down) / (2.0 * d.dw_min0)};
}

} // namespace rpusim
