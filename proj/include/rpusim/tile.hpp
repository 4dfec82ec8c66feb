#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpusim/device.hpp"
#include "rpusim/matrix.hpp"
#include "rpusim/quantizer.hpp"
#include "rpusim/rng.hpp"

namespace rpusim {

/// Analog periphery around one crossbar: read noise, ADC/DAC resolution,
/// output rails and the stochastic-update pulse train length.
struct PeripheryConfig {
  double mvm_noise_std = 0.06; // additive output noise sigma
  double output_bound = 12.0;  // alpha: analog output rail
  int input_bits = 7;
  int output_bits = 9;
  bool noise_management = true; // rescale inputs to fill the DAC range
  bool bound_management = true; // halve input scale and retry on rail hits
  int max_bound_retries = 5;
  int bit_length = 10; // BL: Bernoulli trials per update phase
  bool quantization_enabled = true;

  void validate() const {
    if (mvm_noise_std < 0 || output_bound <= 0 || input_bits < 1 || output_bits < 1 ||
        bit_length < 1)
      throw std::invalid_argument("periphery config: invalid value");
  }
};

struct TileStats {
  uint64_t up_pulses = 0;
  uint64_t down_pulses = 0;
  uint64_t prob_clamps = 0;       // pulse-line probabilities clipped at 1
  uint64_t bound_saturations = 0; // outputs still railed after all retries
  uint64_t mvm_count = 0;
  uint64_t update_count = 0;

  uint64_t coincidences() const { return up_pulses + down_pulses; }
};

/// M x N grid of differential device pairs with its periphery.
///
/// Three array operations: forward MVM (y = Wx), transposed backward MVM
/// (z = W^T d) and the stochastic pulse-coincidence outer-product update.
/// expected_update applies the hardware-induced rule in expectation (no
/// pulsing, no cycle noise) and serves as the deterministic oracle mode.
class AnalogTile {
public:
  AnalogTile(std::size_t rows, std::size_t cols, const DevicePopulationConfig &dev_cfg,
             const PeripheryConfig &periph, Rng &construction_rng, uint64_t seed_tag = 0)
      : rows_(rows), cols_(cols), dev_cfg_(dev_cfg), periph_(periph), seed_tag_(seed_tag) {
    dev_cfg_.validate();
    periph_.validate();
    devices_.reserve(rows * cols);
    for (std::size_t i = 0; i < rows * cols; ++i)
      devices_.push_back(sample_device(dev_cfg_, construction_rng));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const PeripheryConfig &periphery() const { return periph_; }
  PeripheryConfig &periphery() { return periph_; }
  const DevicePopulationConfig &device_config() const { return dev_cfg_; }

  DeviceParams &device(std::size_t r, std::size_t c) { return devices_[r * cols_ + c]; }
  const DeviceParams &device(std::size_t r, std::size_t c) const {
    return devices_[r * cols_ + c];
  }

  TileStats &stats() { return stats_; }
  const TileStats &stats() const { return stats_; }
  void reset_stats() { stats_ = TileStats{}; }

  /// y = clip/quantize(W * Q_in(x) + noise), with optional input rescaling
  /// (noise management) and saturation retries (bound management).
  /// noise_std_override >= 0 replaces the configured read noise (transfer
  /// reads at reduced noise use this).
  std::vector<double> forward_mvm(const std::vector<double> &x, Rng &rng,
                                  double noise_std_override = -1.0) {
    if (x.size() != cols_)
      throw std::invalid_argument("forward_mvm: input length != tile cols");
    return mvm(x, rng, /*transposed=*/false, noise_std_override);
  }

  std::vector<double> backward_mvm(const std::vector<double> &d, Rng &rng,
                                   double noise_std_override = -1.0) {
    if (d.size() != rows_)
      throw std::invalid_argument("backward_mvm: input length != tile rows");
    return mvm(d, rng, /*transposed=*/true, noise_std_override);
  }

  /// Stochastic pulse-coincidence update implementing w <- w - eta * (x ⊗ d)
  /// in expectation. Each line fires Bernoulli pulses with probability
  /// |value| * sqrt(eta / (BL * dw_min0_mean)) per trial; a coincidence
  /// applies one device pulse. The update runs as two sub-cycles of single
  /// polarity: the down phase serves cross-points with x_i * d_j > 0, the up
  /// phase those with x_i * d_j < 0.
  void stochastic_update(const std::vector<double> &x, const std::vector<double> &d, double eta,
                         Rng &rng) {
    if (x.size() != cols_ || d.size() != rows_)
      throw std::invalid_argument("stochastic_update: dimension mismatch");
    if (eta <= 0)
      throw std::invalid_argument("stochastic_update: eta must be positive");
    ++stats_.update_count;

    const int BL = periph_.bit_length;
    const double scale = std::sqrt(eta / (BL * dev_cfg_.dw_min0_mean));

    std::vector<double> px(cols_), pd(rows_);
    for (std::size_t i = 0; i < cols_; ++i) {
      px[i] = std::fabs(x[i]) * scale;
      if (px[i] > 1.0) {
        px[i] = 1.0;
        ++stats_.prob_clamps;
      }
    }
    for (std::size_t j = 0; j < rows_; ++j) {
      pd[j] = std::fabs(d[j]) * scale;
      if (pd[j] > 1.0) {
        pd[j] = 1.0;
        ++stats_.prob_clamps;
      }
    }

    std::vector<std::size_t> fired_cols, fired_rows;
    fired_cols.reserve(cols_);
    fired_rows.reserve(rows_);

    for (PulseDirection phase : {PulseDirection::Down, PulseDirection::Up}) {
      // Down phase: positive product x_i * d_j (SGD decrements); up phase:
      // negative product. Each phase draws its own line bit streams.
      const bool want_positive_product = phase == PulseDirection::Down;
      for (int trial = 0; trial < BL; ++trial) {
        fired_cols.clear();
        fired_rows.clear();
        for (std::size_t i = 0; i < cols_; ++i)
          if (px[i] > 0.0 && rng.bernoulli(px[i]))
            fired_cols.push_back(i);
        if (fired_cols.empty())
          continue;
        for (std::size_t j = 0; j < rows_; ++j)
          if (pd[j] > 0.0 && rng.bernoulli(pd[j]))
            fired_rows.push_back(j);
        for (std::size_t j : fired_rows) {
          for (std::size_t i : fired_cols) {
            const double prod = x[i] * d[j];
            if ((prod > 0.0) != want_positive_product || prod == 0.0)
              continue;
            apply_pulse(devices_[j * cols_ + i], phase, dev_cfg_.cycle_noise_rel_std, rng);
            if (phase == PulseDirection::Up)
              ++stats_.up_pulses;
            else
              ++stats_.down_pulses;
          }
        }
      }
    }
  }

  /// Deterministic oracle mode: the expected hardware-induced update,
  /// w <- w - eta*dw*F(w) + eta*|dw|*G(w), which is exactly "engage the down
  /// branch for dw > 0 and the up branch for dw < 0" with the branch step
  /// normalized by the device's own dw_min0. No pulsing, no cycle noise.
  void expected_update(const std::vector<double> &x, const std::vector<double> &d, double eta) {
    if (x.size() != cols_ || d.size() != rows_)
      throw std::invalid_argument("expected_update: dimension mismatch");
    ++stats_.update_count;
    for (std::size_t j = 0; j < rows_; ++j) {
      if (d[j] == 0.0)
        continue;
      for (std::size_t i = 0; i < cols_; ++i) {
        const double dw = x[i] * d[j];
        if (dw == 0.0)
          continue;
        DeviceParams &dev = devices_[j * cols_ + i];
        const FgValue fg = fg_decompose(dev, dev.w);
        dev.w += -eta * dw * fg.F + eta * std::fabs(dw) * fg.G;
        dev.clamp_to_bounds();
      }
    }
  }

  /// Exact stored effective weights (test/checkpoint introspection; not an
  /// array-parallel operation).
  Matrix read_weights() const {
    Matrix m(rows_, cols_);
    for (std::size_t j = 0; j < rows_; ++j)
      for (std::size_t i = 0; i < cols_; ++i)
        m(j, i) = devices_[j * cols_ + i].w;
    return m;
  }

  /// Hard weight write (checkpoint restore); values clamp to device bounds.
  void set_weights(const Matrix &m) {
    if (m.rows != rows_ || m.cols != cols_)
      throw std::invalid_argument("set_weights: dimension mismatch");
    for (std::size_t j = 0; j < rows_; ++j)
      for (std::size_t i = 0; i < cols_; ++i) {
        DeviceParams &dev = devices_[j * cols_ + i];
        dev.w = m(j, i);
        dev.clamp_to_bounds();
      }
  }

  /// Realistic weight programming: iterated expected-value writes toward the
  /// target. Converges to the target (up to bound clamping) because the
  /// expected step is a contraction on both sides of it.
  void program_weights(const Matrix &target, int iterations = 50, double write_rate = 0.3) {
    if (target.rows != rows_ || target.cols != cols_)
      throw std::invalid_argument("program_weights: dimension mismatch");
    for (int it = 0; it < iterations; ++it) {
      for (std::size_t j = 0; j < rows_; ++j)
        for (std::size_t i = 0; i < cols_; ++i) {
          DeviceParams &dev = devices_[j * cols_ + i];
          const double dw = dev.w - target(j, i); // gradient of 1/2 (w - t)^2
          if (dw == 0.0)
            continue;
          const FgValue fg = fg_decompose(dev, dev.w);
          dev.w += -write_rate * dw * fg.F + write_rate * std::fabs(dw) * fg.G;
          dev.clamp_to_bounds();
        }
    }
  }

  /// Weight snapshot: CSV, row-major, header carries dimensions and the
  /// tile's seed tag.
  void save_weights_csv(const std::string &path) const {
    std::ofstream out(path);
    if (!out)
      throw std::runtime_error("save_weights_csv: cannot open " + path);
    out << "rows,cols,seed\n" << rows_ << "," << cols_ << "," << seed_tag_ << "\n";
    out.precision(17);
    for (std::size_t j = 0; j < rows_; ++j) {
      for (std::size_t i = 0; i < cols_; ++i)
        out << (i ? "," : "") << devices_[j * cols_ + i].w;
      out << "\n";
    }
  }

  void load_weights_csv(const std::string &path) {
    std::ifstream in(path);
    if (!in)
      throw std::runtime_error("load_weights_csv: cannot open " + path);
    std::string line;
    std::getline(in, line); // header row
    if (line.rfind("rows,cols,seed", 0) != 0)
      throw std::runtime_error("load_weights_csv: bad header in " + path);
    std::getline(in, line);
    std::size_t r = 0, c = 0;
    uint64_t seed = 0;
    char comma;
    std::istringstream hs(line);
    if (!(hs >> r >> comma >> c >> comma >> seed) || r != rows_ || c != cols_)
      throw std::runtime_error("load_weights_csv: dimension mismatch in " + path);
    Matrix m(rows_, cols_);
    for (std::size_t j = 0; j < rows_; ++j) {
      if (!std::getline(in, line))
        throw std::runtime_error("load_weights_csv: truncated file " + path);
      std::istringstream ls(line);
      std::string cell;
      for (std::size_t i = 0; i < cols_; ++i) {
        if (!std::getline(ls, cell, ','))
          throw std::runtime_error("load_weights_csv: short row in " + path);
        m(j, i) = std::stod(cell);
      }
    }
    set_weights(m);
  }

private:
  std::vector<double> mvm(const std::vector<double> &input, Rng &rng, bool transposed,
                          double noise_std_override) {
    ++stats_.mvm_count;
    const std::size_t out_len = transposed ? cols_ : rows_;
    const double alpha = periph_.output_bound;
    const double noise_std =
        noise_std_override >= 0.0 ? noise_std_override : periph_.mvm_noise_std;

    double scale = 1.0;
    std::vector<double> xin = input;
    if (periph_.noise_management) {
      double m = 0.0;
      for (double v : input)
        m = std::max(m, std::fabs(v));
      if (m > 0.0) {
        scale = m;
        for (double &v : xin)
          v /= scale;
      }
    }

    std::vector<double> y(out_len);
    const Quantizer qin(periph_.input_bits, 1.0);
    const Quantizer qout(periph_.output_bits, alpha);

    int attempt = 0;
    bool saturated = false;
    while (true) {
      std::vector<double> xq = xin;
      if (periph_.quantization_enabled)
        for (double &v : xq)
          v = qin(v);

      analog_matvec(xq, y, transposed);
      if (noise_std > 0.0)
        for (double &v : y)
          v += noise_std * rng.gaussian();

      saturated = false;
      for (double v : y)
        if (std::fabs(v) >= alpha) {
          saturated = true;
          break;
        }
      if (saturated && periph_.bound_management && attempt < periph_.max_bound_retries) {
        ++attempt;
        scale *= 2.0;
        for (double &v : xin)
          v /= 2.0;
        continue;
      }
      break;
    }
    if (saturated)
      ++stats_.bound_saturations;

    for (double &v : y) {
      v = std::min(std::max(v, -alpha), alpha);
      if (periph_.quantization_enabled)
        v = qout(v);
      v *= scale;
    }
    return y;
  }

  void analog_matvec(const std::vector<double> &x, std::vector<double> &y,
                     bool transposed) const {
    if (!transposed) {
      for (std::size_t j = 0; j < rows_; ++j) {
        double acc = 0.0;
        const DeviceParams *row = &devices_[j * cols_];
        for (std::size_t i = 0; i < cols_; ++i)
          acc += row[i].w * x[i];
        y[j] = acc;
      }
    } else {
      std::fill(y.begin(), y.end(), 0.0);
      for (std::size_t j = 0; j < rows_; ++j) {
        const double dj = x[j];
        if (dj == 0.0)
          continue;
        const DeviceParams *row = &devices_[j * cols_];
        for (std::size_t i = 0; i < cols_; ++i)
          y[i] += row[i].w * dj;
      }
    }
  }

  std::size_t rows_, cols_;
  DevicePopulationConfig dev_cfg_;
  PeripheryConfig periph_;
  std::vector<DeviceParams> devices_;
  TileStats stats_;
  uint64_t seed_tag_;
};

} // namespace rpusim
