#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "rpusim/calibration.hpp"
#include "rpusim/matrix.hpp"
#include "rpusim/tiki_taka.hpp"
#include "rpusim/tile.hpp"

namespace rpusim {

/// Per-layer tally of parallel array operations (logical cycles). A composite
/// read of the coupled pair counts once: the hardware drives both matrices
/// into the same integration in one cycle.
struct CycleCounters {
  uint64_t forward = 0;
  uint64_t backward = 0;
  uint64_t update = 0;
  uint64_t transfer = 0; // transfer events; each costs 2 cycles (read + write)

  uint64_t total() const { return forward + backward + update + 2 * transfer; }
  uint64_t base() const { return forward + backward + update; }
};

/// The weight-matrix engine behind one network layer: exact float matrix for
/// the reference model, a single tile for analog SGD, or a coupled tile pair.
class LinearOp {
public:
  virtual ~LinearOp() = default;
  virtual std::size_t out_dim() const = 0;
  virtual std::size_t in_dim() const = 0;

  virtual std::vector<double> forward(const std::vector<double> &x) = 0;
  virtual std::vector<double> backward(const std::vector<double> &d) = 0;
  /// Descent update: W <- W - eta * (d ⊗ x) in expectation.
  virtual void update(const std::vector<double> &x, const std::vector<double> &d,
                      double eta) = 0;
  /// Per-sample boundary hook (transfer cycles fire here).
  virtual void end_sample() {}

  virtual Matrix weights() const = 0;
  virtual void set_initial_weights(const Matrix &w) = 0;

  const CycleCounters &cycles() const { return cycles_; }
  virtual uint64_t pulse_prob_clamps() const { return 0; }

protected:
  CycleCounters cycles_;
};

/// Exact floating-point weights; the reference (oracle) path.
class FpLinearOp final : public LinearOp {
public:
  FpLinearOp(std::size_t out, std::size_t in) : w_(out, in) {}

  std::size_t out_dim() const override { return w_.rows; }
  std::size_t in_dim() const override { return w_.cols; }

  std::vector<double> forward(const std::vector<double> &x) override {
    ++cycles_.forward;
    return matvec(w_, x);
  }
  std::vector<double> backward(const std::vector<double> &d) override {
    ++cycles_.backward;
    return matvec_transposed(w_, d);
  }
  void update(const std::vector<double> &x, const std::vector<double> &d, double eta) override {
    ++cycles_.update;
    for (std::size_t j = 0; j < w_.rows; ++j) {
      if (d[j] == 0.0)
        continue;
      const double s = eta * d[j];
      for (std::size_t i = 0; i < w_.cols; ++i)
        w_(j, i) -= s * x[i];
    }
  }

  Matrix weights() const override { return w_; }
  void set_initial_weights(const Matrix &w) override { w_ = w; }
  Matrix &matrix() { return w_; }

private:
  Matrix w_;
};

/// One analog tile trained in place.
class AnalogSgdOp final : public LinearOp {
public:
  AnalogSgdOp(std::unique_ptr<AnalogTile> tile, Rng op_rng, bool expected_mode)
      : tile_(std::move(tile)), rng_(op_rng), expected_mode_(expected_mode) {}

  std::size_t out_dim() const override { return tile_->rows(); }
  std::size_t in_dim() const override { return tile_->cols(); }

  std::vector<double> forward(const std::vector<double> &x) override {
    ++cycles_.forward;
    return tile_->forward_mvm(x, rng_);
  }
  std::vector<double> backward(const std::vector<double> &d) override {
    ++cycles_.backward;
    return tile_->backward_mvm(d, rng_);
  }
  void update(const std::vector<double> &x, const std::vector<double> &d, double eta) override {
    ++cycles_.update;
    if (expected_mode_)
      tile_->expected_update(x, d, eta);
    else
      tile_->stochastic_update(x, d, eta, rng_);
  }

  Matrix weights() const override { return tile_->read_weights(); }
  void set_initial_weights(const Matrix &w) override { tile_->program_weights(w); }
  uint64_t pulse_prob_clamps() const override { return tile_->stats().prob_clamps; }

  AnalogTile &tile() { return *tile_; }
  Rng &rng() { return rng_; }

private:
  std::unique_ptr<AnalogTile> tile_;
  Rng rng_;
  bool expected_mode_;
};

/// Coupled tile pair. Forward/backward read gamma*A + C (one cycle); updates
/// land on A; every ns samples one probe column transfers from A to C.
class TikiTakaOp final : public LinearOp {
public:
  TikiTakaOp(std::unique_ptr<TikiTakaLayer> layer, Rng rng_a, Rng rng_c, bool expected_mode)
      : layer_(std::move(layer)), rng_a_(rng_a), rng_c_(rng_c), expected_mode_(expected_mode) {}

  std::size_t out_dim() const override { return layer_->A().rows(); }
  std::size_t in_dim() const override { return layer_->A().cols(); }

  std::vector<double> forward(const std::vector<double> &x) override {
    ++cycles_.forward;
    return layer_->composite_forward(x, rng_a_, rng_c_);
  }

  std::vector<double> backward(const std::vector<double> &d) override {
    ++cycles_.backward;
    return layer_->composite_backward(d, rng_a_, rng_c_);
  }

  void update(const std::vector<double> &x, const std::vector<double> &d, double eta) override {
    ++cycles_.update;
    layer_->update_A(x, d, eta, rng_a_, expected_mode_);
  }

  void end_sample() override {
    if (layer_->maybe_transfer(rng_a_, rng_c_, expected_mode_))
      ++cycles_.transfer;
  }

  /// Composite effective weight gamma*A + C.
  Matrix weights() const override {
    Matrix a = layer_->A().read_weights();
    const Matrix c = layer_->C().read_weights();
    const double gamma = layer_->config().gamma;
    for (std::size_t k = 0; k < a.data.size(); ++k)
      a.data[k] = gamma * a.data[k] + c.data[k];
    return a;
  }

  /// Initial weights land on C; A starts at zero (post-calibration state).
  void set_initial_weights(const Matrix &w) override { layer_->C().program_weights(w); }

  uint64_t pulse_prob_clamps() const override {
    return layer_->A().stats().prob_clamps + layer_->C().stats().prob_clamps;
  }

  TikiTakaLayer &layer() { return *layer_; }
  Rng &rng_a() { return rng_a_; }

private:
  std::unique_ptr<TikiTakaLayer> layer_;
  Rng rng_a_;
  Rng rng_c_;
  bool expected_mode_;
};

} // namespace rpusim
