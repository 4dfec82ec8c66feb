#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rpusim/linear_op.hpp"
#include "rpusim/matrix.hpp"
#include "rpusim/rng.hpp"

namespace rpusim {

enum class Activation { Identity, Sigmoid, Tanh, Softmax };

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline void apply_activation(std::vector<double> &v, Activation act) {
  switch (act) {
  case Activation::Identity:
    break;
  case Activation::Sigmoid:
    for (double &x : v)
      x = sigmoid(x);
    break;
  case Activation::Tanh:
    for (double &x : v)
      x = std::tanh(x);
    break;
  case Activation::Softmax: {
    double m = v[0];
    for (double x : v)
      m = std::max(m, x);
    double sum = 0.0;
    for (double &x : v) {
      x = std::exp(x - m);
      sum += x;
    }
    for (double &x : v)
      x /= sum;
    break;
  }
  }
}

/// d(activation)/d(pre-activation) expressed through the activation output.
inline double activation_deriv_from_output(double a, Activation act) {
  switch (act) {
  case Activation::Identity:
    return 1.0;
  case Activation::Sigmoid:
    return a * (1.0 - a);
  case Activation::Tanh:
    return 1.0 - a * a;
  case Activation::Softmax:
    throw std::logic_error("softmax derivative is handled jointly with the loss");
  }
  return 1.0;
}

inline double cross_entropy(const std::vector<double> &p, int label) {
  const double eps = 1e-12;
  return -std::log(std::max(p[static_cast<std::size_t>(label)], eps));
}

// ---------------------------------------------------------------------------
// Layer specs

struct FcSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation act = Activation::Sigmoid;
};

struct ConvSpec {
  std::size_t kernel = 5;
  std::size_t in_ch = 1;
  std::size_t out_ch = 16;
  std::size_t in_h = 28;
  std::size_t in_w = 28;
  std::size_t pool = 2; // non-overlapping max pool; 1 disables
  Activation act = Activation::Tanh;

  std::size_t out_h() const { return in_h - kernel + 1; }
  std::size_t out_w() const { return in_w - kernel + 1; }
  std::size_t positions() const { return out_h() * out_w(); } // weight-sharing factor
  std::size_t patch_len() const { return kernel * kernel * in_ch + 1; } // + bias row
  std::size_t pooled_h() const { return out_h() / pool; }
  std::size_t pooled_w() const { return out_w() / pool; }
  std::size_t output_len() const { return out_ch * pooled_h() * pooled_w(); }
};

using LayerSpec = std::variant<FcSpec, ConvSpec>;

struct NetworkSpec {
  std::vector<LayerSpec> layers;

  std::size_t input_dim() const {
    if (const auto *fc = std::get_if<FcSpec>(&layers.front()))
      return fc->in;
    const auto &cv = std::get<ConvSpec>(layers.front());
    return cv.in_ch * cv.in_h * cv.in_w;
  }
  std::size_t output_dim() const {
    const auto &fc = std::get<FcSpec>(layers.back());
    return fc.out;
  }

  /// Fully connected stack, sigmoid hidden layers, softmax output.
  static NetworkSpec fcn(const std::vector<std::size_t> &sizes) {
    if (sizes.size() < 2)
      throw std::invalid_argument("fcn: need at least input and output sizes");
    NetworkSpec s;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      const bool last = l + 2 == sizes.size();
      s.layers.push_back(FcSpec{sizes[l], sizes[l + 1],
                                last ? Activation::Softmax : Activation::Sigmoid});
    }
    return s;
  }

  static NetworkSpec fcn_mnist() { return fcn({784, 256, 128, 10}); }

  /// LeNet-style: 5x5 conv(16) + 2x2 pool, 5x5 conv(32) + 2x2 pool,
  /// 128 tanh, 10 softmax. Mapped matrices 16x26, 32x401, 128x513, 10x129.
  static NetworkSpec cnn_mnist() {
    NetworkSpec s;
    s.layers.push_back(ConvSpec{5, 1, 16, 28, 28, 2, Activation::Tanh});
    s.layers.push_back(ConvSpec{5, 16, 32, 12, 12, 2, Activation::Tanh});
    s.layers.push_back(FcSpec{512, 128, Activation::Tanh});
    s.layers.push_back(FcSpec{128, 10, Activation::Softmax});
    return s;
  }

  static NetworkSpec toy() { return fcn({8, 16, 2}); }
};

// ---------------------------------------------------------------------------
// im2col

/// Unroll valid-convolution sliding windows so the conv becomes Y = W * X.
/// Column p holds the flattened receptive field for output position p plus a
/// trailing bias 1; the number of columns is the weight-sharing factor.
inline Matrix im2col(const ConvSpec &cs, const std::vector<double> &input) {
  if (input.size() != cs.in_ch * cs.in_h * cs.in_w)
    throw std::invalid_argument("im2col: input length mismatch");
  Matrix X(cs.patch_len(), cs.positions());
  const std::size_t oh = cs.out_h(), ow = cs.out_w();
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      const std::size_t p = r * ow + c;
      std::size_t k = 0;
      for (std::size_t ch = 0; ch < cs.in_ch; ++ch)
        for (std::size_t kr = 0; kr < cs.kernel; ++kr)
          for (std::size_t kc = 0; kc < cs.kernel; ++kc)
            X(k++, p) = input[(ch * cs.in_h + r + kr) * cs.in_w + c + kc];
      X(k, p) = 1.0; // bias row
    }
  return X;
}

/// Scatter-add column gradients back to the input tensor (windows overlap).
inline std::vector<double> col2im(const ConvSpec &cs, const Matrix &dX) {
  std::vector<double> din(cs.in_ch * cs.in_h * cs.in_w, 0.0);
  const std::size_t oh = cs.out_h(), ow = cs.out_w();
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      const std::size_t p = r * ow + c;
      std::size_t k = 0;
      for (std::size_t ch = 0; ch < cs.in_ch; ++ch)
        for (std::size_t kr = 0; kr < cs.kernel; ++kr)
          for (std::size_t kc = 0; kc < cs.kernel; ++kc)
            din[(ch * cs.in_h + r + kr) * cs.in_w + c + kc] += dX(k++, p);
    }
  return din;
}

// ---------------------------------------------------------------------------
// Feedforward network over LinearOps (exact or analog)

class FeedforwardNetwork {
public:
  FeedforwardNetwork(NetworkSpec spec, std::vector<std::unique_ptr<LinearOp>> ops)
      : spec_(std::move(spec)), ops_(std::move(ops)) {
    if (spec_.layers.size() != ops_.size())
      throw std::invalid_argument("network: spec/ops size mismatch");
    caches_.resize(ops_.size());
  }

  const NetworkSpec &spec() const { return spec_; }
  std::size_t n_layers() const { return ops_.size(); }
  LinearOp &op(std::size_t l) { return *ops_[l]; }

  /// Forward pass only; returns the output distribution (softmax output).
  std::vector<double> predict(const std::vector<double> &input) {
    std::vector<double> a = input;
    for (std::size_t l = 0; l < ops_.size(); ++l)
      a = forward_layer(l, a, /*cache=*/false);
    return a;
  }

  /// One SGD step on one sample: forward, softmax cross-entropy delta,
  /// backward, updates, end-of-sample hooks. Returns the sample loss.
  double train_step(const std::vector<double> &input, int label, double eta) {
    std::vector<double> a = input;
    for (std::size_t l = 0; l < ops_.size(); ++l)
      a = forward_layer(l, a, /*cache=*/true);

    const double loss = cross_entropy(a, label);

    // softmax + cross-entropy output delta: p - onehot
    std::vector<double> delta = a;
    delta[static_cast<std::size_t>(label)] -= 1.0;

    for (std::size_t l = ops_.size(); l-- > 0;)
      delta = backward_layer(l, delta, eta);

    for (auto &op : ops_)
      op->end_sample();
    return loss;
  }

  /// Loss without updating (evaluation).
  double sample_loss(const std::vector<double> &input, int label) {
    return cross_entropy(predict(input), label);
  }

private:
  struct LayerCache {
    std::vector<double> x_padded;     // fc: input with bias 1
    std::vector<double> activations;  // layer output (post-activation)
    Matrix X;                         // conv: im2col matrix
    Matrix act_map;                   // conv: out_ch x positions activations
    std::vector<std::size_t> argmax;  // conv: pool routing
  };

  std::vector<double> forward_layer(std::size_t l, const std::vector<double> &in, bool cache) {
    LayerCache &cc = caches_[l];
    if (const auto *fc = std::get_if<FcSpec>(&spec_.layers[l])) {
      if (in.size() != fc->in)
        throw std::invalid_argument("network forward: layer input size mismatch");
      std::vector<double> xb = in;
      xb.push_back(1.0);
      std::vector<double> z = ops_[l]->forward(xb);
      apply_activation(z, fc->act);
      if (cache) {
        cc.x_padded = std::move(xb);
        cc.activations = z;
      }
      return z;
    }
    const auto &cs = std::get<ConvSpec>(spec_.layers[l]);
    Matrix X = im2col(cs, in);
    const std::size_t P = cs.positions();
    Matrix act(cs.out_ch, P);
    std::vector<double> xcol(cs.patch_len());
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t k = 0; k < cs.patch_len(); ++k)
        xcol[k] = X(k, p);
      std::vector<double> y = ops_[l]->forward(xcol);
      apply_activation(y, cs.act);
      for (std::size_t ch = 0; ch < cs.out_ch; ++ch)
        act(ch, p) = y[ch];
    }
    std::vector<std::size_t> argmax;
    std::vector<double> out = max_pool(cs, act, argmax);
    if (cache) {
      cc.X = std::move(X);
      cc.act_map = std::move(act);
      cc.argmax = std::move(argmax);
    }
    return out;
  }

  std::vector<double> backward_layer(std::size_t l, const std::vector<double> &delta,
                                     double eta) {
    LayerCache &cc = caches_[l];
    // Every layer runs all three array cycles per (shared) sample, first
    // layer included, so live cycle counters match the cost model exactly.
    if (const auto *fc = std::get_if<FcSpec>(&spec_.layers[l])) {
      // delta arrives as dL/dz for the softmax output layer, dL/da otherwise.
      std::vector<double> dz = delta;
      if (fc->act != Activation::Softmax)
        for (std::size_t j = 0; j < dz.size(); ++j)
          dz[j] *= activation_deriv_from_output(cc.activations[j], fc->act);
      std::vector<double> din = ops_[l]->backward(dz);
      din.pop_back(); // bias entry carries no upstream gradient
      ops_[l]->update(cc.x_padded, dz, eta);
      return din;
    }
    const auto &cs = std::get<ConvSpec>(spec_.layers[l]);
    const std::size_t P = cs.positions();
    // Route pooled deltas back to the argmax positions, through the
    // activation, then column-by-column through the tile.
    Matrix dz(cs.out_ch, P);
    for (std::size_t k = 0; k < delta.size(); ++k) {
      const std::size_t pos = cc.argmax[k];
      const std::size_t ch = k / (cs.pooled_h() * cs.pooled_w());
      dz(ch, pos) = delta[k] * activation_deriv_from_output(cc.act_map(ch, pos), cs.act);
    }
    Matrix dX(cs.patch_len(), P);
    std::vector<double> dcol(cs.out_ch), xcol(cs.patch_len());
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t ch = 0; ch < cs.out_ch; ++ch)
        dcol[ch] = dz(ch, p);
      for (std::size_t k = 0; k < cs.patch_len(); ++k)
        xcol[k] = cc.X(k, p);
      std::vector<double> dxcol = ops_[l]->backward(dcol);
      for (std::size_t k = 0; k + 1 < cs.patch_len(); ++k)
        dX(k, p) = dxcol[k];
      ops_[l]->update(xcol, dcol, eta);
    }
    return col2im(cs, dX);
  }

  static std::vector<double> max_pool(const ConvSpec &cs, const Matrix &act,
                                      std::vector<std::size_t> &argmax) {
    const std::size_t oh = cs.out_h(), ow = cs.out_w();
    if (cs.pool == 1) {
      argmax.resize(cs.out_ch * oh * ow);
      std::vector<double> out(cs.out_ch * oh * ow);
      for (std::size_t ch = 0; ch < cs.out_ch; ++ch)
        for (std::size_t p = 0; p < oh * ow; ++p) {
          out[ch * oh * ow + p] = act(ch, p);
          argmax[ch * oh * ow + p] = p;
        }
      return out;
    }
    const std::size_t ph = cs.pooled_h(), pw = cs.pooled_w();
    std::vector<double> out(cs.out_ch * ph * pw);
    argmax.resize(out.size());
    for (std::size_t ch = 0; ch < cs.out_ch; ++ch)
      for (std::size_t r = 0; r < ph; ++r)
        for (std::size_t c = 0; c < pw; ++c) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_pos = 0;
          for (std::size_t dr = 0; dr < cs.pool; ++dr)
            for (std::size_t dc = 0; dc < cs.pool; ++dc) {
              const std::size_t pos = (r * cs.pool + dr) * ow + (c * cs.pool + dc);
              if (act(ch, pos) > best) {
                best = act(ch, pos);
                best_pos = pos;
              }
            }
          const std::size_t k = (ch * ph + r) * pw + c;
          out[k] = best;
          argmax[k] = best_pos;
        }
    return out;
  }

  NetworkSpec spec_;
  std::vector<std::unique_ptr<LinearOp>> ops_;
  std::vector<LayerCache> caches_;
};

/// Reference initialization: uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)],
/// bias column zero.
inline Matrix init_weights(std::size_t out, std::size_t in_with_bias, Rng &rng) {
  Matrix w(out, in_with_bias);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_with_bias - 1));
  for (std::size_t j = 0; j < out; ++j) {
    for (std::size_t i = 0; i + 1 < in_with_bias; ++i)
      w(j, i) = bound * (2.0 * rng.uniform() - 1.0);
    w(j, in_with_bias - 1) = 0.0;
  }
  return w;
}

} // namespace rpusim
