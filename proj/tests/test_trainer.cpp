#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rpusim/dataset.hpp"
#include "rpusim/trainer.hpp"

using namespace rpusim;

namespace {

AnalogBuildConfig quiet_ideal_build() {
  AnalogBuildConfig a;
  a.device = DevicePopulationConfig::ideal();
  a.periphery.mvm_noise_std = 0.0;
  a.periphery.quantization_enabled = false;
  a.periphery.noise_management = false;
  a.periphery.bound_management = false;
  return a;
}

AnalogBuildConfig quiet_baseline_build() {
  AnalogBuildConfig a;
  a.periphery.mvm_noise_std = 0.0;
  a.periphery.quantization_enabled = false;
  a.periphery.noise_management = false;
  a.periphery.bound_management = false;
  return a;
}

} // namespace

TEST_CASE("analog SGD in expected mode reproduces the float trainer exactly") {
  // Ideal devices, all periphery effects off, expected-value updates: the
  // analog trajectory is the SGD recursion itself. Per-step losses agree to
  // float-accumulation tolerance over 1000 steps.
  const NetworkSpec spec = NetworkSpec::toy();
  TrainerConfig fp_tc;
  fp_tc.mode = TrainerMode::FP;
  fp_tc.eta = 0.05;
  fp_tc.seed = 123;
  TrainerConfig an_tc = fp_tc;
  an_tc.mode = TrainerMode::AnalogSGD;
  an_tc.update_mode = UpdateMode::Expected;

  AnalogBuildConfig acfg = quiet_ideal_build();
  auto fp_net = build_feedforward(spec, fp_tc, acfg);
  auto an_net = build_feedforward(spec, an_tc, acfg);

  const Dataset data = make_toy_dataset(1000, 7);
  for (std::size_t k = 0; k < data.size(); ++k) {
    const double lf = fp_net->train_step(data.inputs[k], data.labels[k], fp_tc.eta);
    const double la = an_net->train_step(data.inputs[k], data.labels[k], an_tc.eta);
    REQUIRE(std::fabs(lf - la) < 1e-4);
  }
}

TEST_CASE("transfers disabled: the coupled optimizer replays plain SGD on A") {
  // lambda = 0, gamma = 1, C at zero, periphery quiet, full stochastic pulsed
  // updates with baseline asymmetric devices: the A tile consumes the same
  // stream as the SGD W tile, so the trajectories are bit-identical.
  const NetworkSpec spec = NetworkSpec::toy();
  TrainerConfig sgd_tc;
  sgd_tc.mode = TrainerMode::AnalogSGD;
  sgd_tc.eta = 0.01;
  sgd_tc.seed = 99;
  TrainerConfig tt_tc = sgd_tc;
  tt_tc.mode = TrainerMode::AnalogTikiTaka;

  AnalogBuildConfig acfg = quiet_baseline_build();
  acfg.tiki.gamma = 1.0;
  acfg.tiki.lambda_c = 0.0;

  auto sgd_net = build_feedforward(spec, sgd_tc, acfg);
  auto tt_net = build_feedforward(spec, tt_tc, acfg);

  // identical device populations for W and A by construction seeding
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    auto &w_tile = dynamic_cast<AnalogSgdOp &>(sgd_net->op(l)).tile();
    auto &a_tile = dynamic_cast<TikiTakaOp &>(tt_net->op(l)).layer().A();
    for (std::size_t j = 0; j < w_tile.rows(); ++j)
      for (std::size_t i = 0; i < w_tile.cols(); ++i) {
        REQUIRE(w_tile.device(j, i).dw_min0 == a_tile.device(j, i).dw_min0);
        REQUIRE(w_tile.device(j, i).slope_p == a_tile.device(j, i).slope_p);
      }
  }

  // the SGD net carries the reference init on W; zero it so both start equal
  // (the coupled pair keeps its init on C, which is zero here by default)
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    std::size_t rows = sgd_net->op(l).out_dim(), cols = sgd_net->op(l).in_dim();
    dynamic_cast<AnalogSgdOp &>(sgd_net->op(l)).tile().set_weights(Matrix(rows, cols));
    dynamic_cast<TikiTakaOp &>(tt_net->op(l)).layer().C().set_weights(Matrix(rows, cols));
    dynamic_cast<TikiTakaOp &>(tt_net->op(l)).layer().A().set_weights(Matrix(rows, cols));
  }

  const Dataset data = make_toy_dataset(300, 17);
  for (std::size_t k = 0; k < data.size(); ++k) {
    const double ls = sgd_net->train_step(data.inputs[k], data.labels[k], sgd_tc.eta);
    const double lt = tt_net->train_step(data.inputs[k], data.labels[k], tt_tc.eta);
    REQUIRE(ls == lt); // bit-identical losses
  }
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const Matrix w = dynamic_cast<AnalogSgdOp &>(sgd_net->op(l)).tile().read_weights();
    const Matrix a = dynamic_cast<TikiTakaOp &>(tt_net->op(l)).layer().A().read_weights();
    const Matrix c = dynamic_cast<TikiTakaOp &>(tt_net->op(l)).layer().C().read_weights();
    REQUIRE(w == a); // identical trajectory
    for (double v : c.data)
      REQUIRE(v == 0.0); // C untouched
  }
}

TEST_CASE("live cycle counters agree with the cost-model formula exactly") {
  const NetworkSpec spec = NetworkSpec::toy();
  const Dataset data = make_toy_dataset(120, 23);

  SECTION("plain SGD: 3 cycles per sample per layer") {
    TrainerConfig tc;
    tc.mode = TrainerMode::AnalogSGD;
    tc.seed = 5;
    AnalogBuildConfig acfg = quiet_baseline_build();
    auto net = build_feedforward(spec, tc, acfg);
    for (std::size_t k = 0; k < data.size(); ++k)
      net->train_step(data.inputs[k], data.labels[k], tc.eta);
    for (std::size_t l = 0; l < net->n_layers(); ++l) {
      REQUIRE(net->op(l).cycles().total() ==
              cycle_count(TrainingMode::SGD, 1, data.size()));
      REQUIRE(net->op(l).cycles().base() == 3 * data.size());
    }
  }

  SECTION("coupled mode: 2 extra cycles every ns samples") {
    for (int ns : {1, 5}) {
      TrainerConfig tc;
      tc.mode = TrainerMode::AnalogTikiTaka;
      tc.seed = 6;
      AnalogBuildConfig acfg = quiet_baseline_build();
      acfg.tiki.lambda_c = 0.02;
      acfg.tiki.ns = ns;
      auto net = build_feedforward(spec, tc, acfg);
      for (std::size_t k = 0; k < data.size(); ++k)
        net->train_step(data.inputs[k], data.labels[k], tc.eta);
      for (std::size_t l = 0; l < net->n_layers(); ++l) {
        REQUIRE(net->op(l).cycles().total() ==
                cycle_count(TrainingMode::TikiTaka, ns, data.size()));
        REQUIRE(net->op(l).cycles().transfer == data.size() / static_cast<std::size_t>(ns));
      }
    }
  }

  SECTION("weight sharing multiplies the per-sample base cycles") {
    NetworkSpec conv_spec;
    conv_spec.layers.push_back(ConvSpec{3, 1, 2, 6, 6, 2, Activation::Tanh});
    conv_spec.layers.push_back(FcSpec{8, 2, Activation::Softmax});
    const std::size_t sharing = std::get<ConvSpec>(conv_spec.layers[0]).positions();
    TrainerConfig tc;
    tc.mode = TrainerMode::AnalogTikiTaka;
    tc.seed = 7;
    AnalogBuildConfig acfg = quiet_baseline_build();
    acfg.tiki.lambda_c = 0.02;
    acfg.tiki.ns = 1;
    auto net = build_feedforward(conv_spec, tc, acfg);
    Dataset small = make_toy_dataset(1, 29);
    // reuse the toy labels but synthesize 6x6 inputs
    Rng rng(31);
    std::vector<double> img(36);
    for (double &v : img)
      v = rng.uniform();
    const int n_samples = 10;
    for (int k = 0; k < n_samples; ++k)
      net->train_step(img, k % 2, tc.eta);
    REQUIRE(net->op(0).cycles().total() ==
            cycle_count(TrainingMode::TikiTaka, 1, n_samples, sharing));
    REQUIRE(net->op(1).cycles().total() ==
            cycle_count(TrainingMode::TikiTaka, 1, n_samples, 1));
  }
}

TEST_CASE("training is deterministic given the seed") {
  const NetworkSpec spec = NetworkSpec::toy();
  TrainerConfig tc;
  tc.mode = TrainerMode::AnalogTikiTaka;
  tc.eta = 0.01;
  tc.seed = 404;
  AnalogBuildConfig acfg; // full noise, quantization, management
  acfg.tiki.lambda_c = 0.02;

  const Dataset train = make_toy_dataset(200, 41);
  auto run = [&] {
    auto net = build_feedforward(spec, tc, acfg);
    for (int e = 0; e < 2; ++e)
      train_epoch(*net, train, tc, e);
    std::vector<Matrix> weights;
    for (std::size_t l = 0; l < net->n_layers(); ++l)
      weights.push_back(net->op(l).weights());
    return weights;
  };
  const auto w1 = run();
  const auto w2 = run();
  REQUIRE(w1.size() == w2.size());
  for (std::size_t l = 0; l < w1.size(); ++l)
    REQUIRE(w1[l] == w2[l]); // bit-identical
}

TEST_CASE("the coupled trainer refuses uncalibrated A tiles unless overridden") {
  TrainerConfig tc;
  tc.mode = TrainerMode::AnalogTikiTaka;
  tc.seed = 1;
  AnalogBuildConfig acfg = quiet_baseline_build();
  acfg.tiki.lambda_c = 0.02;
  acfg.calibration_mode = CalibrationMode::None;
  REQUIRE_THROWS_AS(build_feedforward(NetworkSpec::toy(), tc, acfg), std::runtime_error);
  tc.allow_uncalibrated = true;
  REQUIRE_NOTHROW(build_feedforward(NetworkSpec::toy(), tc, acfg));
}

TEST_CASE("full calibration mode drives and re-zeroes the A tiles") {
  TrainerConfig tc;
  tc.mode = TrainerMode::AnalogTikiTaka;
  tc.seed = 2;
  AnalogBuildConfig acfg = quiet_baseline_build();
  acfg.device.symmetry_offset_std = 0.05; // construction offsets...
  acfg.tiki.lambda_c = 0.02;
  acfg.calibration_mode = CalibrationMode::Full;
  acfg.calibration.n_pairs = 100;
  acfg.calibration.programming_error_std = 0.0; // ...wiped by a perfect transfer
  auto net = build_feedforward(NetworkSpec::toy(), tc, acfg);
  auto &a_tile = dynamic_cast<TikiTakaOp &>(net->op(0)).layer().A();
  for (std::size_t j = 0; j < a_tile.rows(); ++j)
    for (std::size_t i = 0; i < a_tile.cols(); ++i) {
      REQUIRE(a_tile.device(j, i).w_s == 0.0);
      REQUIRE(a_tile.device(j, i).w == 0.0);
    }
  // C keeps its construction-time offsets
  auto &c_tile = dynamic_cast<TikiTakaOp &>(net->op(0)).layer().C();
  double max_offset = 0.0;
  for (std::size_t j = 0; j < c_tile.rows(); ++j)
    for (std::size_t i = 0; i < c_tile.cols(); ++i)
      max_offset = std::max(max_offset, std::fabs(c_tile.device(j, i).w_s));
  REQUIRE(max_offset > 0.0);
}

TEST_CASE("the float trainer separates the toy problem quickly") {
  TrainerConfig tc;
  tc.mode = TrainerMode::FP;
  tc.eta = 0.05;
  tc.epochs = 3;
  tc.seed = 11;
  AnalogBuildConfig acfg;
  auto net = build_feedforward(NetworkSpec::toy(), tc, acfg);
  const Dataset train = make_toy_dataset(600, 51);
  const Dataset test = make_toy_dataset(300, 52);
  for (int e = 0; e < tc.epochs; ++e)
    train_epoch(*net, train, tc, e);
  REQUIRE(evaluate_error_pct(*net, test) < 5.0);
}
