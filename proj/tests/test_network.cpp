#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "rpusim/lstm.hpp"
#include "rpusim/network.hpp"

using namespace rpusim;

namespace {

// |a - b| within rel tolerance of the larger magnitude, with an absolute
// floor for near-zero gradients
void require_close(double a, double b, double rel, double abs_floor) {
  const double scale = std::max(std::fabs(a), std::fabs(b));
  if (scale < abs_floor)
    return;
  REQUIRE(std::fabs(a - b) <= rel * scale);
}

std::vector<std::unique_ptr<LinearOp>> fp_ops_for(const NetworkSpec &spec, uint64_t seed) {
  std::vector<std::unique_ptr<LinearOp>> ops;
  Rng rng(seed);
  for (const auto &layer : spec.layers) {
    std::size_t rows, cols;
    if (const auto *fc = std::get_if<FcSpec>(&layer)) {
      rows = fc->out;
      cols = fc->in + 1;
    } else {
      const auto &cs = std::get<ConvSpec>(layer);
      rows = cs.out_ch;
      cols = cs.patch_len();
    }
    auto op = std::make_unique<FpLinearOp>(rows, cols);
    op->set_initial_weights(init_weights(rows, cols, rng));
    ops.push_back(std::move(op));
  }
  return ops;
}

// analytic gradient of the sample loss wrt one layer's matrix, recovered
// from a single full-rate SGD step (FP updates are exact outer products)
std::vector<Matrix> analytic_gradients(FeedforwardNetwork &net,
                                       const std::vector<double> &x, int label) {
  std::vector<Matrix> before;
  for (std::size_t l = 0; l < net.n_layers(); ++l)
    before.push_back(net.op(l).weights());
  const double eta = 1.0;
  net.train_step(x, label, eta);
  std::vector<Matrix> grads;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    Matrix g = before[l];
    const Matrix after = net.op(l).weights();
    for (std::size_t k = 0; k < g.data.size(); ++k)
      g.data[k] = (before[l].data[k] - after.data[k]) / eta;
    grads.push_back(std::move(g));
    dynamic_cast<FpLinearOp &>(net.op(l)).matrix() = before[l]; // restore
  }
  return grads;
}

void check_gradients_fd(FeedforwardNetwork &net, const std::vector<double> &x, int label) {
  const std::vector<Matrix> grads = analytic_gradients(net, x, label);
  const double h = 1e-5;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    Matrix &w = dynamic_cast<FpLinearOp &>(net.op(l)).matrix();
    for (std::size_t k = 0; k < w.data.size(); ++k) {
      const double orig = w.data[k];
      w.data[k] = orig + h;
      const double lp = net.sample_loss(x, label);
      w.data[k] = orig - h;
      const double lm = net.sample_loss(x, label);
      w.data[k] = orig;
      const double fd = (lp - lm) / (2 * h);
      require_close(grads[l].data[k], fd, 1e-3, 1e-7);
    }
  }
}

} // namespace

TEST_CASE("activation identities") {
  SECTION("softmax sums to one and is shift-invariant") {
    std::vector<double> v = {0.3, -1.2, 2.5, 0.0};
    std::vector<double> shifted = {100.3, 98.8, 102.5, 100.0};
    apply_activation(v, Activation::Softmax);
    apply_activation(shifted, Activation::Softmax);
    double sum = 0.0;
    for (double p : v)
      sum += p;
    REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
    for (std::size_t k = 0; k < v.size(); ++k)
      REQUIRE_THAT(v[k], Catch::Matchers::WithinAbs(shifted[k], 1e-9));
  }
  SECTION("tanh is odd, sigmoid is its rescaling") {
    for (double z : {-2.0, -0.5, 0.0, 0.7, 3.0}) {
      REQUIRE_THAT(std::tanh(-z), Catch::Matchers::WithinAbs(-std::tanh(z), 1e-15));
      REQUIRE_THAT(sigmoid(z), Catch::Matchers::WithinAbs(0.5 * (1 + std::tanh(z / 2)), 1e-12));
    }
  }
  SECTION("output-form derivatives match finite differences") {
    const double h = 1e-6;
    for (double z : {-1.5, -0.2, 0.0, 0.4, 2.0}) {
      const double ds = (sigmoid(z + h) - sigmoid(z - h)) / (2 * h);
      require_close(activation_deriv_from_output(sigmoid(z), Activation::Sigmoid), ds, 1e-3,
                    1e-9);
      const double dt = (std::tanh(z + h) - std::tanh(z - h)) / (2 * h);
      require_close(activation_deriv_from_output(std::tanh(z), Activation::Tanh), dt, 1e-3,
                    1e-9);
    }
  }
}

TEST_CASE("softmax cross-entropy output delta is p minus one-hot") {
  NetworkSpec spec = NetworkSpec::fcn({3, 4});
  FeedforwardNetwork net(spec, fp_ops_for(spec, 3));
  const std::vector<double> x = {0.2, -0.4, 0.9};
  const int label = 2;
  const std::vector<double> p = net.predict(x);
  const std::vector<Matrix> grads = analytic_gradients(net, x, label);
  // output-layer gradient rows are delta_j * [x; 1]
  for (std::size_t j = 0; j < 4; ++j) {
    const double delta = p[j] - (static_cast<int>(j) == label ? 1.0 : 0.0);
    REQUIRE_THAT(grads[0](j, 3), Catch::Matchers::WithinAbs(delta, 1e-12)); // bias column
    for (std::size_t i = 0; i < 3; ++i)
      REQUIRE_THAT(grads[0](j, i), Catch::Matchers::WithinAbs(delta * x[i], 1e-12));
  }
}

TEST_CASE("single linear layer with squared error matches the hand gradient") {
  FpLinearOp op(1, 2); // scalar output, one input plus bias
  Matrix w(1, 2);
  w(0, 0) = 0.7;
  w(0, 1) = -0.1;
  op.set_initial_weights(w);
  const double x = 0.35, target = 1.2;
  const double y = op.forward({x, 1.0})[0];
  const double delta = y - target; // d(1/2 (y-t)^2)/dy
  op.update({x, 1.0}, {delta}, 0.5);
  REQUIRE_THAT(op.weights()(0, 0),
               Catch::Matchers::WithinAbs(0.7 - 0.5 * delta * x, 1e-14));
  REQUIRE_THAT(op.weights()(0, 1), Catch::Matchers::WithinAbs(-0.1 - 0.5 * delta, 1e-14));
}

TEST_CASE("fully connected backprop matches central finite differences") {
  NetworkSpec spec = NetworkSpec::fcn({6, 9, 5, 3}); // <= 1e3 params
  FeedforwardNetwork net(spec, fp_ops_for(spec, 11));
  Rng rng(12);
  std::vector<double> x(6);
  for (double &v : x)
    v = rng.uniform() - 0.5;
  check_gradients_fd(net, x, 1);
}

TEST_CASE("convolution-as-matrix backprop matches central finite differences") {
  NetworkSpec spec;
  spec.layers.push_back(ConvSpec{3, 1, 2, 6, 6, 2, Activation::Tanh});
  spec.layers.push_back(FcSpec{8, 3, Activation::Softmax});
  FeedforwardNetwork net(spec, fp_ops_for(spec, 13));
  Rng rng(14);
  std::vector<double> x(36);
  for (double &v : x)
    v = rng.uniform();
  check_gradients_fd(net, x, 2);
}

TEST_CASE("im2col geometry") {
  SECTION("1x1 kernel: columns are the flattened input plus the bias row") {
    ConvSpec cs{1, 1, 1, 3, 3, 1, Activation::Identity};
    std::vector<double> in = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    const Matrix X = im2col(cs, in);
    REQUIRE(X.rows == 2); // value + bias
    REQUIRE(X.cols == 9);
    for (std::size_t p = 0; p < 9; ++p) {
      REQUIRE(X(0, p) == in[p]);
      REQUIRE(X(1, p) == 1.0);
    }
  }
  SECTION("first conv stage: 28x28 with 5x5 kernel gives 576 positions") {
    ConvSpec cs{5, 1, 16, 28, 28, 2, Activation::Tanh};
    REQUIRE(cs.positions() == 576);
    REQUIRE(cs.patch_len() == 26);
    const Matrix X = im2col(cs, std::vector<double>(28 * 28, 0.5));
    REQUIRE(X.cols == 576);
    REQUIRE(X.rows == 26);
  }
  SECTION("second conv stage: 12x12x16 with 5x5 kernel gives 64 positions") {
    ConvSpec cs{5, 16, 32, 12, 12, 2, Activation::Tanh};
    REQUIRE(cs.positions() == 64);
    REQUIRE(cs.patch_len() == 401);
  }
  SECTION("preset matrix shapes match the mapped dimensions") {
    const NetworkSpec cnn = NetworkSpec::cnn_mnist();
    const auto &c1 = std::get<ConvSpec>(cnn.layers[0]);
    const auto &c2 = std::get<ConvSpec>(cnn.layers[1]);
    const auto &f1 = std::get<FcSpec>(cnn.layers[2]);
    const auto &f2 = std::get<FcSpec>(cnn.layers[3]);
    REQUIRE(c1.out_ch == 16);
    REQUIRE(c1.patch_len() == 26);
    REQUIRE(c2.out_ch == 32);
    REQUIRE(c2.patch_len() == 401);
    REQUIRE(f1.out == 128);
    REQUIRE(f1.in + 1 == 513);
    REQUIRE(f2.out == 10);
    REQUIRE(f2.in + 1 == 129);
  }
}

TEST_CASE("col2im scatters overlapping windows additively") {
  ConvSpec cs{2, 1, 1, 3, 3, 1, Activation::Identity};
  Matrix dX(cs.patch_len(), cs.positions(), 1.0); // every patch cell gets 1
  const std::vector<double> din = col2im(cs, dX);
  // center pixel belongs to all four 2x2 windows, corners to exactly one
  REQUIRE(din[4] == 4.0);
  REQUIRE(din[0] == 1.0);
  REQUIRE(din[8] == 1.0);
}

TEST_CASE("LSTM backprop matches central finite differences at unroll 5") {
  LstmNetworkSpec spec;
  spec.vocab = 7;
  spec.blocks.push_back(LstmSpec{7, 6});
  spec.blocks.push_back(LstmSpec{6, 6});

  std::vector<std::unique_ptr<LinearOp>> block_ops;
  Rng rng(21);
  for (const auto &b : spec.blocks) {
    auto op = std::make_unique<FpLinearOp>(b.matrix_rows(), b.matrix_cols());
    op->set_initial_weights(init_weights(b.matrix_rows(), b.matrix_cols(), rng));
    block_ops.push_back(std::move(op));
  }
  auto out_op = std::make_unique<FpLinearOp>(spec.vocab, spec.blocks.back().hidden + 1);
  out_op->set_initial_weights(init_weights(spec.vocab, spec.blocks.back().hidden + 1, rng));
  FpLinearOp *out_ptr = out_op.get();
  LstmNetwork net(spec, std::move(block_ops), std::move(out_op));

  const std::vector<int> window = {1, 4, 2, 0, 6, 3}; // unroll 5
  const LstmNetwork::WindowGradients grads = net.window_gradients(window);

  const double h = 1e-5;
  auto fd_check = [&](FpLinearOp &op, const Matrix &g) {
    Matrix &w = op.matrix();
    for (std::size_t k = 0; k < w.data.size(); ++k) {
      const double orig = w.data[k];
      w.data[k] = orig + h;
      const double lp = net.window_loss(window);
      w.data[k] = orig - h;
      const double lm = net.window_loss(window);
      w.data[k] = orig;
      require_close(g.data[k], (lp - lm) / (2 * h), 1e-3, 1e-7);
    }
  };
  for (std::size_t b = 0; b < spec.blocks.size(); ++b)
    fd_check(dynamic_cast<FpLinearOp &>(net.block_op(b)), grads.blocks[b]);
  fd_check(*out_ptr, grads.output);
}

TEST_CASE("a zero network predicts at chance level on a balanced set") {
  NetworkSpec spec = NetworkSpec::fcn({4, 10});
  std::vector<std::unique_ptr<LinearOp>> ops;
  ops.push_back(std::make_unique<FpLinearOp>(10, 5)); // all-zero weights
  FeedforwardNetwork net(spec, std::move(ops));
  // ties resolve to class 0; balanced labels make that wrong 90% of the time
  int wrong = 0;
  const int n = 1000;
  Rng rng(31);
  for (int k = 0; k < n; ++k) {
    std::vector<double> x = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    const auto p = net.predict(x);
    std::size_t best = 0;
    for (std::size_t j = 1; j < p.size(); ++j)
      if (p[j] > p[best])
        best = j;
    if (static_cast<int>(best) != k % 10)
      ++wrong;
  }
  REQUIRE_THAT(100.0 * wrong / n, Catch::Matchers::WithinAbs(90.0, 0.5));
}

TEST_CASE("shape mismatches are rejected") {
  NetworkSpec spec = NetworkSpec::toy();
  FeedforwardNetwork net(spec, fp_ops_for(spec, 41));
  REQUIRE_THROWS_AS(net.predict({1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("reference initialization spans the fan-in scaled interval") {
  Rng rng(51);
  const Matrix w = init_weights(16, 10, rng); // 9 inputs + bias
  const double bound = 1.0 / 3.0;
  for (std::size_t j = 0; j < w.rows; ++j) {
    REQUIRE(w(j, 9) == 0.0); // bias column starts at zero
    for (std::size_t i = 0; i < 9; ++i) {
      REQUIRE(w(j, i) <= bound);
      REQUIRE(w(j, i) >= -bound);
    }
  }
}
