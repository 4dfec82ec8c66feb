#pragma once

#include <algorithm>
#include <cmath>

namespace rpusim {

/// Symmetric mid-tread uniform quantizer: 2^bits - 1 levels spanning
/// [-range, +range] inclusive, so zero and both endpoints are exact levels
/// and the rounding error never exceeds step/2 inside the range.
class Quantizer {
public:
  Quantizer(int bits, double range) : range_(range) {
    half_levels_ = (1 << (bits - 1)) - 1; // levels = 2*half_levels_ + 1
    step_ = range / static_cast<double>(half_levels_);
  }

  double step() const { return step_; }

  double operator()(double v) const {
    v = std::min(std::max(v, -range_), range_);
    return step_ * std::round(v / step_);
  }

private:
  double range_;
  double step_;
  long half_levels_;
};

} // namespace rpusim
