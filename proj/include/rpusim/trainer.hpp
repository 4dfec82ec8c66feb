#pragma once

#include <algorithm>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rpusim/calibration.hpp"
#include "rpusim/dataset.hpp"
#include "rpusim/linear_op.hpp"
#include "rpusim/lstm.hpp"
#include "rpusim/network.hpp"
#include "rpusim/tiki_taka.hpp"

namespace rpusim {

enum class TrainerMode { FP, AnalogSGD, AnalogTikiTaka };
enum class UpdateMode { Stochastic, Expected };
enum class CalibrationMode { Shortcut, Full, None };

struct TrainerConfig {
  TrainerMode mode = TrainerMode::FP;
  double eta = 0.01;
  int epochs = 1;
  uint64_t seed = 42;
  int unroll_steps = 100;        // LSTM truncated-BPTT window
  UpdateMode update_mode = UpdateMode::Stochastic;
  bool allow_uncalibrated = false;
};

struct AnalogBuildConfig {
  DevicePopulationConfig device;
  PeripheryConfig periphery;
  TikiTakaConfig tiki;
  CalibrationConfig calibration;
  CalibrationMode calibration_mode = CalibrationMode::Shortcut;
};

// Seed-tag roles. The fast matrix (A) shares the plain-SGD tile's tags so a
// coupled run with transfers disabled replays an SGD run draw for draw.
// Layer tags start at 100 to keep them disjoint from the purpose tags.
namespace seed_tag {
constexpr uint64_t kDeviceSample = 1;
constexpr uint64_t kTileOps = 2;
constexpr uint64_t kInit = 3;
constexpr uint64_t kShuffle = 4;
constexpr uint64_t kCalibration = 5;
constexpr uint64_t kRoleMain = 0; // W for SGD, A for the coupled pair
constexpr uint64_t kRoleSlow = 7; // C
constexpr uint64_t kLayerBase = 100;
} // namespace seed_tag

/// Build the weight engine for one layer. `rows` x `cols` includes the bias
/// column. For the coupled pair, A is calibrated per the configured mode
/// before training; the shortcut mode treats the construction-time symmetry
/// offsets as the post-calibration residuals (the two are equivalent in
/// distribution) and keeps A at zero.
inline std::unique_ptr<LinearOp> make_linear_op(TrainerMode mode, std::size_t rows,
                                                std::size_t cols, const AnalogBuildConfig &cfg,
                                                const TrainerConfig &tc, uint64_t layer_idx) {
  const uint64_t seed = tc.seed;
  const uint64_t layer_tag = seed_tag::kLayerBase + layer_idx;
  if (mode == TrainerMode::FP)
    return std::make_unique<FpLinearOp>(rows, cols);

  const bool expected = tc.update_mode == UpdateMode::Expected;
  auto make_tile = [&](uint64_t role) {
    Rng construction(derive_seed(derive_seed(seed, layer_tag, role), seed_tag::kDeviceSample));
    return std::make_unique<AnalogTile>(rows, cols, cfg.device, cfg.periphery, construction,
                                        derive_seed(seed, layer_tag, role));
  };
  auto ops_rng = [&](uint64_t role) {
    return Rng(derive_seed(derive_seed(seed, layer_tag, role), seed_tag::kTileOps));
  };

  if (mode == TrainerMode::AnalogSGD)
    return std::make_unique<AnalogSgdOp>(make_tile(seed_tag::kRoleMain),
                                         ops_rng(seed_tag::kRoleMain), expected);

  auto a = make_tile(seed_tag::kRoleMain);
  auto c = make_tile(seed_tag::kRoleSlow);
  switch (cfg.calibration_mode) {
  case CalibrationMode::Full: {
    Rng cal_rng(derive_seed(derive_seed(seed, layer_tag, seed_tag::kRoleMain),
                            seed_tag::kCalibration));
    calibrate(*a, cfg.calibration, cal_rng);
    break;
  }
  case CalibrationMode::Shortcut:
    break; // construction offsets stand in for post-calibration residuals
  case CalibrationMode::None:
    if (!tc.allow_uncalibrated)
      throw std::runtime_error(
          "tiki-taka: A tile not calibrated; set calibration mode or allow_uncalibrated");
    break;
  }
  auto layer = std::make_unique<TikiTakaLayer>(std::move(a), std::move(c), cfg.tiki);
  return std::make_unique<TikiTakaOp>(std::move(layer), ops_rng(seed_tag::kRoleMain),
                                      ops_rng(seed_tag::kRoleSlow), expected);
}

inline std::unique_ptr<FeedforwardNetwork> build_feedforward(const NetworkSpec &spec,
                                                             const TrainerConfig &tc,
                                                             const AnalogBuildConfig &acfg) {
  std::vector<std::unique_ptr<LinearOp>> ops;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    std::size_t rows, cols;
    if (const auto *fc = std::get_if<FcSpec>(&spec.layers[l])) {
      rows = fc->out;
      cols = fc->in + 1;
    } else {
      const auto &cs = std::get<ConvSpec>(spec.layers[l]);
      rows = cs.out_ch;
      cols = cs.patch_len();
    }
    auto op = make_linear_op(tc.mode, rows, cols, acfg, tc, l);
    Rng init_rng(derive_seed(tc.seed, seed_tag::kLayerBase + l, seed_tag::kInit));
    op->set_initial_weights(init_weights(rows, cols, init_rng));
    ops.push_back(std::move(op));
  }
  return std::make_unique<FeedforwardNetwork>(spec, std::move(ops));
}

inline std::unique_ptr<LstmNetwork> build_lstm(const LstmNetworkSpec &spec,
                                               const TrainerConfig &tc,
                                               const AnalogBuildConfig &acfg) {
  std::vector<std::unique_ptr<LinearOp>> block_ops;
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const std::size_t rows = spec.blocks[b].matrix_rows();
    const std::size_t cols = spec.blocks[b].matrix_cols();
    auto op = make_linear_op(tc.mode, rows, cols, acfg, tc, b);
    Rng init_rng(derive_seed(tc.seed, seed_tag::kLayerBase + b, seed_tag::kInit));
    op->set_initial_weights(init_weights(rows, cols, init_rng));
    block_ops.push_back(std::move(op));
  }
  const std::size_t out_rows = spec.vocab;
  const std::size_t out_cols = spec.blocks.back().hidden + 1;
  const uint64_t out_idx = spec.blocks.size();
  auto out_op = make_linear_op(tc.mode, out_rows, out_cols, acfg, tc, out_idx);
  Rng init_rng(derive_seed(tc.seed, seed_tag::kLayerBase + out_idx, seed_tag::kInit));
  out_op->set_initial_weights(init_weights(out_rows, out_cols, init_rng));
  return std::make_unique<LstmNetwork>(spec, std::move(block_ops), std::move(out_op));
}

// ---------------------------------------------------------------------------
// Training / evaluation loops

struct EpochResult {
  double train_loss = 0.0;
  uint64_t base_cycles = 0;     // forward + backward + update, summed over layers
  uint64_t transfer_events = 0; // each costs 2 extra cycles
  uint64_t prob_clamps = 0;
};

namespace detail {
struct OpTallies {
  uint64_t base = 0, transfers = 0, clamps = 0;
};
template <typename OpRange> OpTallies sum_tallies(OpRange &&ops) {
  OpTallies t;
  for (LinearOp *op : ops) {
    t.base += op->cycles().base();
    t.transfers += op->cycles().transfer;
    t.clamps += op->pulse_prob_clamps();
  }
  return t;
}
} // namespace detail

/// One pass over the training set, mini-batch of one, deterministic
/// seed-derived shuffle per epoch. Cycle tallies cover this pass only
/// (evaluation reads between epochs are not training cycles).
inline EpochResult train_epoch(FeedforwardNetwork &net, const Dataset &train,
                               const TrainerConfig &tc, int epoch) {
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(derive_seed(derive_seed(tc.seed, seed_tag::kShuffle),
                              static_cast<uint64_t>(epoch)));
  for (std::size_t k = order.size(); k > 1; --k)
    std::swap(order[k - 1], order[shuffle_rng.below(k)]);

  std::vector<LinearOp *> ops;
  for (std::size_t l = 0; l < net.n_layers(); ++l)
    ops.push_back(&net.op(l));
  const detail::OpTallies before = detail::sum_tallies(ops);

  EpochResult res;
  for (std::size_t idx : order)
    res.train_loss += net.train_step(train.inputs[idx], train.labels[idx], tc.eta);
  res.train_loss /= static_cast<double>(train.size());

  const detail::OpTallies after = detail::sum_tallies(ops);
  res.base_cycles = after.base - before.base;
  res.transfer_events = after.transfers - before.transfers;
  res.prob_clamps = after.clamps - before.clamps;
  return res;
}

/// Classification error in percent (argmax).
inline double evaluate_error_pct(FeedforwardNetwork &net, const Dataset &test) {
  if (test.size() == 0)
    throw std::invalid_argument("evaluate: empty test set");
  std::size_t wrong = 0;
  for (std::size_t k = 0; k < test.size(); ++k) {
    const std::vector<double> p = net.predict(test.inputs[k]);
    std::size_t best = 0;
    for (std::size_t j = 1; j < p.size(); ++j)
      if (p[j] > p[best])
        best = j;
    if (static_cast<int>(best) != test.labels[k])
      ++wrong;
  }
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(test.size());
}

inline EpochResult train_epoch_lstm(LstmNetwork &net, const std::vector<int> &train_chars,
                                    const TrainerConfig &tc) {
  const std::size_t U = static_cast<std::size_t>(tc.unroll_steps);
  if (train_chars.size() < U + 1)
    throw std::invalid_argument("lstm: training text shorter than one unroll window");
  std::vector<LinearOp *> ops;
  for (std::size_t b = 0; b < net.spec().blocks.size(); ++b)
    ops.push_back(&net.block_op(b));
  ops.push_back(&net.output_op());
  const detail::OpTallies before = detail::sum_tallies(ops);

  EpochResult res;
  std::size_t windows = 0;
  for (std::size_t pos = 0; pos + U < train_chars.size(); pos += U) {
    std::vector<int> window(train_chars.begin() + pos, train_chars.begin() + pos + U + 1);
    res.train_loss += net.train_window(window, tc.eta);
    ++windows;
  }
  res.train_loss /= static_cast<double>(windows);

  const detail::OpTallies after = detail::sum_tallies(ops);
  res.base_cycles = after.base - before.base;
  res.transfer_events = after.transfers - before.transfers;
  res.prob_clamps = after.clamps - before.clamps;
  return res;
}

} // namespace rpusim
