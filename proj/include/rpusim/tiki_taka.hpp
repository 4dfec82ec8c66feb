#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "rpusim/tile.hpp"

namespace rpusim {

enum class TransferVectorKind { OneHotCyclic, Hadamard2, Hadamard4 };

struct TikiTakaConfig {
  double gamma = 1.0;    // mixing of the fast matrix into the composite weight
  double lambda_c = 0.0; // learning rate of the slow matrix; 0 disables transfers
  int ns = 1;            // samples between transfer events
  TransferVectorKind transfer_vectors = TransferVectorKind::OneHotCyclic;
  double threshold_tv = 0.0;           // transfer-read filter; 0 disables
  double transfer_read_noise_std = -1; // <0: use the periphery's read noise
  bool hadamard_unit_norm = false;     // entries +-1/sqrt(k) instead of +-1/k

  void validate() const {
    if (gamma < 0 || lambda_c < 0 || ns < 1 || threshold_tv < 0)
      throw std::invalid_argument("tiki-taka config: invalid value");
  }
};

/// Pointwise transfer filter: passes v only where |v| exceeds the threshold.
/// Odd and idempotent.
inline double threshold_filter(double v, double tv) { return std::fabs(v) > tv ? v : 0.0; }

/// Cyclic generator of probe vectors u_t for the transfer read.
///
/// OneHotCyclic walks e_1 .. e_N. Hadamard-k emits, per consecutive k-block
/// of coordinates, the k sign patterns of the Hadamard matrix with entries
/// +-1/k in that block (patterns cycle fastest, then the block advances:
/// [1/2 1/2 0 0 ...], [1/2 -1/2 0 0 ...], [0 0 1/2 1/2 ...], ...). A trailing
/// partial block falls back to one-hot vectors.
class TransferVectorGenerator {
public:
  TransferVectorGenerator(std::size_t n, TransferVectorKind kind, bool unit_norm = false)
      : n_(n), kind_(kind) {
    if (n_ < 1)
      throw std::invalid_argument("transfer vectors: N must be >= 1");
    k_ = kind == TransferVectorKind::Hadamard2 ? 2 : kind == TransferVectorKind::Hadamard4 ? 4 : 1;
    full_blocks_ = n_ / k_;
    tail_ = n_ - full_blocks_ * k_;
    amplitude_ = unit_norm ? 1.0 / std::sqrt(static_cast<double>(k_))
                           : 1.0 / static_cast<double>(k_);
  }

  std::size_t cycle_length() const { return full_blocks_ * k_ + tail_; }
  std::size_t index() const { return t_; }

  std::vector<double> next() {
    std::vector<double> u(n_, 0.0);
    const std::size_t pos = t_;
    t_ = (t_ + 1) % cycle_length();
    if (kind_ == TransferVectorKind::OneHotCyclic) {
      u[pos] = 1.0;
      return u;
    }
    if (pos >= full_blocks_ * static_cast<std::size_t>(k_)) {
      u[pos] = 1.0; // one-hot tail for coordinates not covered by a full block
      return u;
    }
    const std::size_t block = pos / k_;
    const std::size_t pattern = pos % k_;
    for (int r = 0; r < k_; ++r)
      u[block * k_ + r] = hadamard_sign(pattern, r) * amplitude_;
    return u;
  }

private:
  // Sylvester-order Hadamard entry: (-1)^popcount(row & col).
  static double hadamard_sign(std::size_t row, std::size_t col) {
    return (__builtin_popcountll(row & col) & 1) ? -1.0 : 1.0;
  }

  std::size_t n_;
  TransferVectorKind kind_;
  int k_;
  std::size_t full_blocks_;
  std::size_t tail_;
  std::size_t t_ = 0;
  double amplitude_;
};

/// One parallel array operation (forward, backward or update pass): the unit
/// of the wall-clock cost model. SGD spends 3 per (shared) sample; the
/// coupled scheme adds 2 per transfer event.
enum class TrainingMode { SGD, TikiTaka };

inline uint64_t cycle_count(TrainingMode mode, int ns, uint64_t samples,
                            uint64_t weight_sharing = 1) {
  if (samples < 1)
    throw std::invalid_argument("cycle_count: samples must be >= 1");
  const uint64_t base = 3ull * weight_sharing * samples;
  if (mode == TrainingMode::SGD)
    return base;
  return base + 2ull * (samples / static_cast<uint64_t>(ns));
}

/// Coupled pair of tiles: gradients accumulate on the calibrated fast matrix
/// A and transfer periodically, one probe vector at a time, into the slow
/// matrix C. The composite weight read is gamma*A + C.
class TikiTakaLayer {
public:
  TikiTakaLayer(std::unique_ptr<AnalogTile> a, std::unique_ptr<AnalogTile> c,
                const TikiTakaConfig &cfg)
      : A_(std::move(a)), C_(std::move(c)), cfg_(cfg),
        gen_(A_->cols(), cfg.transfer_vectors, cfg.hadamard_unit_norm) {
    cfg_.validate();
    if (A_->rows() != C_->rows() || A_->cols() != C_->cols())
      throw std::invalid_argument("tiki-taka layer: A and C dimensions differ");
  }

  AnalogTile &A() { return *A_; }
  AnalogTile &C() { return *C_; }
  const TikiTakaConfig &config() const { return cfg_; }
  uint64_t sample_counter() const { return k_; }
  std::size_t transfer_index() const { return gen_.index(); }

  /// y = gamma * A x + C x, each read with its own noise/quantization.
  /// gamma == 0 skips the A read entirely. The two tiles draw from separate
  /// streams so A's stream stays aligned with a plain-SGD run on A.
  std::vector<double> composite_forward(const std::vector<double> &x, Rng &rng_a, Rng &rng_c) {
    std::vector<double> y = C_->forward_mvm(x, rng_c);
    if (cfg_.gamma != 0.0) {
      const std::vector<double> ya = A_->forward_mvm(x, rng_a);
      for (std::size_t j = 0; j < y.size(); ++j)
        y[j] += cfg_.gamma * ya[j];
    }
    return y;
  }
  std::vector<double> composite_forward(const std::vector<double> &x, Rng &rng) {
    return composite_forward(x, rng, rng);
  }

  std::vector<double> composite_backward(const std::vector<double> &d, Rng &rng_a, Rng &rng_c) {
    std::vector<double> z = C_->backward_mvm(d, rng_c);
    if (cfg_.gamma != 0.0) {
      const std::vector<double> za = A_->backward_mvm(d, rng_a);
      for (std::size_t i = 0; i < z.size(); ++i)
        z[i] += cfg_.gamma * za[i];
    }
    return z;
  }
  std::vector<double> composite_backward(const std::vector<double> &d, Rng &rng) {
    return composite_backward(d, rng, rng);
  }

  /// Gradient update on A (descent convention), stochastic or expected mode.
  void update_A(const std::vector<double> &x, const std::vector<double> &d, double eta, Rng &rng,
                bool expected_mode = false) {
    if (expected_mode)
      A_->expected_update(x, d, eta);
    else
      A_->stochastic_update(x, d, eta, rng);
    ++k_;
  }

  /// Transfer cycle, fired every ns samples: read one probe column of A
  /// (v = A u_t), filter, and add lambda * (u_t ⊗ f(v)) onto C. Returns
  /// whether a transfer happened. lambda == 0 disables transfers entirely.
  bool maybe_transfer(Rng &rng_a, Rng &rng_c, bool expected_mode = false) {
    if (cfg_.lambda_c == 0.0)
      return false;
    if (k_ < static_cast<uint64_t>(cfg_.ns))
      return false;
    k_ = 0;
    const std::vector<double> u = gen_.next();
    std::vector<double> v = A_->forward_mvm(u, rng_a, cfg_.transfer_read_noise_std);
    if (cfg_.threshold_tv > 0.0)
      for (double &vj : v)
        vj = threshold_filter(vj, cfg_.threshold_tv);
    // stochastic_update implements descent (C -= lambda * u ⊗ v), so negate v
    // to realize the ascent C += lambda * (u_t ⊗ f(v)).
    bool any = false;
    for (double &vj : v) {
      vj = -vj;
      if (vj != 0.0)
        any = true;
    }
    if (any) {
      if (expected_mode)
        C_->expected_update(u, v, cfg_.lambda_c);
      else
        C_->stochastic_update(u, v, cfg_.lambda_c, rng_c);
    }
    return true;
  }
  bool maybe_transfer(Rng &rng, bool expected_mode = false) {
    return maybe_transfer(rng, rng, expected_mode);
  }

private:
  std::unique_ptr<AnalogTile> A_;
  std::unique_ptr<AnalogTile> C_;
  TikiTakaConfig cfg_;
  TransferVectorGenerator gen_;
  uint64_t k_ = 0;
};

} // namespace rpusim
