#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>

#include "rpusim/linear_op.hpp"
#include "rpusim/network.hpp"

namespace rpusim {

struct LstmSpec {
  std::size_t input = 87;  // vocabulary size for the first block
  std::size_t hidden = 64;

  // Concatenated-gate layout: one 4H-row matrix over [x, h_prev, 1] columns,
  // gate order [input, forget, cell-candidate, output].
  std::size_t matrix_rows() const { return 4 * hidden; }
  std::size_t matrix_cols() const { return input + hidden + 1; }
};

struct LstmNetworkSpec {
  std::vector<LstmSpec> blocks;
  std::size_t vocab = 87;

  /// Two stacked blocks of hidden size 64 over an 87-char vocabulary:
  /// matrices 256x152, 256x129 and 87x65.
  static LstmNetworkSpec war_and_peace(std::size_t vocab_size = 87,
                                       std::size_t hidden = 64) {
    LstmNetworkSpec s;
    s.vocab = vocab_size;
    s.blocks.push_back(LstmSpec{vocab_size, hidden});
    s.blocks.push_back(LstmSpec{hidden, hidden});
    return s;
  }
};

/// Character-level next-symbol model: stacked LSTM blocks plus a softmax
/// output layer, trained by truncated BPTT over fixed unroll windows with the
/// hidden state carried across windows.
class LstmNetwork {
public:
  LstmNetwork(LstmNetworkSpec spec, std::vector<std::unique_ptr<LinearOp>> block_ops,
              std::unique_ptr<LinearOp> out_op)
      : spec_(std::move(spec)), blocks_(std::move(block_ops)), out_(std::move(out_op)) {
    if (blocks_.size() != spec_.blocks.size())
      throw std::invalid_argument("lstm: block op count mismatch");
    reset_state();
  }

  const LstmNetworkSpec &spec() const { return spec_; }
  LinearOp &block_op(std::size_t b) { return *blocks_[b]; }
  LinearOp &output_op() { return *out_; }

  void reset_state() {
    h_.assign(spec_.blocks.size(), {});
    c_.assign(spec_.blocks.size(), {});
    for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
      h_[b].assign(spec_.blocks[b].hidden, 0.0);
      c_[b].assign(spec_.blocks[b].hidden, 0.0);
    }
  }

  /// Train on one window: inputs are chars[0..U-1], targets chars[1..U].
  /// Updates are applied per timestep (the weight matrices are shared over
  /// the unrolled steps). Returns mean per-character cross-entropy.
  double train_window(const std::vector<int> &chars, double eta) {
    if (chars.size() < 2)
      throw std::invalid_argument("lstm train_window: need at least 2 characters");
    const std::size_t U = chars.size() - 1;
    Caches cache;
    const double loss = forward_window(chars, &cache);
    backward_window(chars, cache, eta, /*apply_updates=*/true, nullptr);
    for (auto &op : blocks_)
      op->end_sample();
    out_->end_sample();
    // carry state across windows
    h_ = cache.h_final;
    c_ = cache.c_final;
    (void)U;
    return loss;
  }

  /// Mean per-character cross-entropy over a text span, stateful, no updates.
  double evaluate(const std::vector<int> &chars) {
    if (chars.size() < 2)
      throw std::invalid_argument("lstm evaluate: need at least 2 characters");
    double total = 0.0;
    std::vector<std::vector<double>> h = h_, c = c_;
    for (std::size_t t = 0; t + 1 < chars.size(); ++t) {
      std::vector<double> x = one_hot(chars[t]);
      for (std::size_t b = 0; b < blocks_.size(); ++b)
        x = step_block(b, x, h[b], c[b], nullptr, 0);
      x.push_back(1.0);
      std::vector<double> p = out_->forward(x);
      apply_activation(p, Activation::Softmax);
      total += cross_entropy(p, chars[t + 1]);
    }
    return total / static_cast<double>(chars.size() - 1);
  }

  /// Analytic gradients for one window from the current state, without
  /// applying updates (finite-difference checks). Returns per-block matrices
  /// plus the output-layer gradient, all in dL/dW convention for the TOTAL
  /// window loss (sum over steps of per-step CE).
  struct WindowGradients {
    std::vector<Matrix> blocks;
    Matrix output;
  };
  WindowGradients window_gradients(const std::vector<int> &chars) {
    Caches cache;
    forward_window(chars, &cache);
    WindowGradients g;
    g.blocks.reserve(blocks_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b)
      g.blocks.emplace_back(spec_.blocks[b].matrix_rows(), spec_.blocks[b].matrix_cols());
    g.output = Matrix(spec_.vocab, spec_.blocks.back().hidden + 1);
    backward_window(chars, cache, 0.0, /*apply_updates=*/false, &g);
    return g;
  }

  /// Window loss from the current carried state (sum over steps).
  double window_loss(const std::vector<int> &chars) {
    return forward_window(chars, nullptr) * static_cast<double>(chars.size() - 1);
  }

private:
  struct Caches {
    // [t][block]: concatenated input [x; h_prev; 1] and gate activations
    std::vector<std::vector<std::vector<double>>> zcat, i, f, g, o, c, tanh_c, c_prev;
    std::vector<std::vector<double>> out_in;  // [h_top; 1] per t
    std::vector<std::vector<double>> probs;   // softmax outputs per t
    std::vector<std::vector<double>> h_final, c_final;
  };

  std::vector<double> one_hot(int ch) const {
    std::vector<double> v(spec_.vocab, 0.0);
    v[static_cast<std::size_t>(ch)] = 1.0;
    return v;
  }

  /// One forward step of block b; writes gate caches when collecting.
  std::vector<double> step_block(std::size_t b, const std::vector<double> &x,
                                 std::vector<double> &h, std::vector<double> &c, Caches *cache,
                                 std::size_t t) {
    const std::size_t H = spec_.blocks[b].hidden;
    std::vector<double> zcat = x;
    zcat.insert(zcat.end(), h.begin(), h.end());
    zcat.push_back(1.0);
    const std::vector<double> z = blocks_[b]->forward(zcat);
    std::vector<double> gi(H), gf(H), gg(H), go(H), cn(H), th(H), hn(H);
    for (std::size_t k = 0; k < H; ++k) {
      gi[k] = sigmoid(z[k]);
      gf[k] = sigmoid(z[H + k]);
      gg[k] = std::tanh(z[2 * H + k]);
      go[k] = sigmoid(z[3 * H + k]);
      cn[k] = gf[k] * c[k] + gi[k] * gg[k];
      th[k] = std::tanh(cn[k]);
      hn[k] = go[k] * th[k];
    }
    if (cache) {
      cache->zcat[t][b] = std::move(zcat);
      cache->i[t][b] = gi;
      cache->f[t][b] = gf;
      cache->g[t][b] = gg;
      cache->o[t][b] = go;
      cache->c_prev[t][b] = c;
      cache->c[t][b] = cn;
      cache->tanh_c[t][b] = th;
    }
    c = cn;
    h = hn;
    return hn;
  }

  double forward_window(const std::vector<int> &chars, Caches *cache) {
    const std::size_t U = chars.size() - 1;
    const std::size_t B = blocks_.size();
    if (cache) {
      auto sized = [&](auto &v) { v.assign(U, std::vector<std::vector<double>>(B)); };
      sized(cache->zcat);
      sized(cache->i);
      sized(cache->f);
      sized(cache->g);
      sized(cache->o);
      sized(cache->c);
      sized(cache->tanh_c);
      sized(cache->c_prev);
      cache->out_in.assign(U, {});
      cache->probs.assign(U, {});
    }
    std::vector<std::vector<double>> h = h_, c = c_;
    double total = 0.0;
    for (std::size_t t = 0; t < U; ++t) {
      std::vector<double> x = one_hot(chars[t]);
      for (std::size_t b = 0; b < B; ++b)
        x = step_block(b, x, h[b], c[b], cache, t);
      x.push_back(1.0);
      std::vector<double> p = out_->forward(x);
      apply_activation(p, Activation::Softmax);
      total += cross_entropy(p, chars[t + 1]);
      if (cache) {
        cache->out_in[t] = std::move(x);
        cache->probs[t] = std::move(p);
      }
    }
    if (cache) {
      cache->h_final = h;
      cache->c_final = c;
    }
    return total / static_cast<double>(U);
  }

  void backward_window(const std::vector<int> &chars, const Caches &cache, double eta,
                       bool apply_updates, WindowGradients *grads) {
    const std::size_t U = chars.size() - 1;
    const std::size_t B = blocks_.size();

    std::vector<std::vector<double>> dh(B), dc(B);
    for (std::size_t b = 0; b < B; ++b) {
      dh[b].assign(spec_.blocks[b].hidden, 0.0);
      dc[b].assign(spec_.blocks[b].hidden, 0.0);
    }

    for (std::size_t t = U; t-- > 0;) {
      // output layer: softmax + CE delta; backward reads the weights before
      // the update lands on them
      std::vector<double> dout = cache.probs[t];
      dout[static_cast<std::size_t>(chars[t + 1])] -= 1.0;
      std::vector<double> dtop = out_->backward(dout);
      dtop.pop_back(); // bias entry
      if (apply_updates)
        out_->update(cache.out_in[t], dout, eta);
      if (grads)
        accumulate_outer(grads->output, dout, cache.out_in[t]);
      for (std::size_t k = 0; k < dtop.size(); ++k)
        dh[B - 1][k] += dtop[k];

      for (std::size_t b = B; b-- > 0;) {
        const std::size_t H = spec_.blocks[b].hidden;
        const auto &gi = cache.i[t][b];
        const auto &gf = cache.f[t][b];
        const auto &gg = cache.g[t][b];
        const auto &go = cache.o[t][b];
        const auto &th = cache.tanh_c[t][b];
        const auto &cp = cache.c_prev[t][b];

        std::vector<double> dz(4 * H);
        for (std::size_t k = 0; k < H; ++k) {
          const double dho = dh[b][k];
          const double dco = dc[b][k] + dho * go[k] * (1.0 - th[k] * th[k]);
          const double ddi = dco * gg[k];
          const double ddf = dco * cp[k];
          const double ddg = dco * gi[k];
          const double ddo = dho * th[k];
          dz[k] = ddi * gi[k] * (1.0 - gi[k]);
          dz[H + k] = ddf * gf[k] * (1.0 - gf[k]);
          dz[2 * H + k] = ddg * (1.0 - gg[k] * gg[k]);
          dz[3 * H + k] = ddo * go[k] * (1.0 - go[k]);
          dc[b][k] = dco * gf[k]; // flows to t-1
        }

        const std::vector<double> dzcat = blocks_[b]->backward(dz);
        if (apply_updates)
          blocks_[b]->update(cache.zcat[t][b], dz, eta);
        if (grads)
          accumulate_outer(grads->blocks[b], dz, cache.zcat[t][b]);
        const std::size_t D = spec_.blocks[b].input;
        // split: dx flows down the stack at the same t, dh_prev to t-1
        for (std::size_t k = 0; k < H; ++k)
          dh[b][k] = dzcat[D + k];
        if (b > 0)
          for (std::size_t k = 0; k < spec_.blocks[b - 1].hidden; ++k)
            dh[b - 1][k] += dzcat[k];
      }
    }
  }

  static void accumulate_outer(Matrix &g, const std::vector<double> &d,
                               const std::vector<double> &x) {
    for (std::size_t j = 0; j < g.rows; ++j) {
      if (d[j] == 0.0)
        continue;
      for (std::size_t i = 0; i < g.cols; ++i)
        g(j, i) += d[j] * x[i];
    }
  }

  LstmNetworkSpec spec_;
  std::vector<std::unique_ptr<LinearOp>> blocks_;
  std::unique_ptr<LinearOp> out_;
  std::vector<std::vector<double>> h_, c_;
};

} // namespace rpusim
