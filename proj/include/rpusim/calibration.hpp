#pragma once

#include <cmath>
#include <cstddef>

#include "rpusim/tile.hpp"

namespace rpusim {

struct CalibrationConfig {
  int n_pairs = 2000;                  // alternating (up, down) pulse pairs
  double programming_error_std = 0.0;  // residual offset after reference transfer
};

struct OffsetStats {
  double mean_abs_dev = 0.0; // mean |w - w_s| over the array
  double offset_mean = 0.0;  // mean symmetry offset
  double offset_std = 0.0;   // std of symmetry offsets
};

/// Drive every device toward its symmetry point with alternating (up, down)
/// pulse pairs applied array-parallel. The weight-dependent branch imbalance
/// contracts |w - w_s| geometrically until pulse-sized fluctuations dominate.
inline void alternating_pulse_drive(AnalogTile &tile, int n_pairs, Rng &rng) {
  const double noise = tile.device_config().cycle_noise_rel_std;
  for (int p = 0; p < n_pairs; ++p) {
    for (std::size_t j = 0; j < tile.rows(); ++j)
      for (std::size_t i = 0; i < tile.cols(); ++i)
        apply_pulse(tile.device(j, i), PulseDirection::Up, noise, rng);
    for (std::size_t j = 0; j < tile.rows(); ++j)
      for (std::size_t i = 0; i < tile.cols(); ++i)
        apply_pulse(tile.device(j, i), PulseDirection::Down, noise, rng);
  }
}

/// Program each reference device to the converged symmetry point. The
/// closed-loop reference write is abstracted to one Gaussian residual: after
/// transfer the device reads w = 0 and its operational symmetry point sits at
/// a residual offset ~ N(0, programming_error_std).
inline void transfer_to_reference(AnalogTile &tile, double programming_error_std, Rng &rng) {
  for (std::size_t j = 0; j < tile.rows(); ++j)
    for (std::size_t i = 0; i < tile.cols(); ++i) {
      DeviceParams &d = tile.device(j, i);
      d.w_s = programming_error_std > 0.0 ? programming_error_std * rng.gaussian() : 0.0;
      d.w = 0.0;
    }
}

inline OffsetStats measure_offsets(const AnalogTile &tile) {
  OffsetStats s;
  const std::size_t n = tile.rows() * tile.cols();
  double sum = 0.0, sum2 = 0.0, sum_abs_dev = 0.0;
  for (std::size_t j = 0; j < tile.rows(); ++j)
    for (std::size_t i = 0; i < tile.cols(); ++i) {
      const DeviceParams &d = tile.device(j, i);
      sum += d.w_s;
      sum2 += d.w_s * d.w_s;
      sum_abs_dev += std::fabs(d.w - d.w_s);
    }
  s.offset_mean = sum / n;
  s.offset_std = std::sqrt(std::max(0.0, sum2 / n - s.offset_mean * s.offset_mean));
  s.mean_abs_dev = sum_abs_dev / n;
  return s;
}

/// Full symmetry-point shifting pass: drive, then reference transfer.
/// Returns the offset statistics measured right after the drive (before the
/// transfer re-zeroes the array).
inline OffsetStats calibrate(AnalogTile &tile, const CalibrationConfig &cfg, Rng &rng) {
  alternating_pulse_drive(tile, cfg.n_pairs, rng);
  OffsetStats converged = measure_offsets(tile);
  transfer_to_reference(tile, cfg.programming_error_std, rng);
  return converged;
}

} // namespace rpusim
