#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpusim/rng.hpp"

namespace rpusim {

struct Dataset {
  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;
  std::size_t input_dim = 0;
  int n_classes = 0;

  std::size_t size() const { return inputs.size(); }

  void truncate(std::size_t n) {
    if (n > 0 && n < inputs.size()) {
      inputs.resize(n);
      labels.resize(n);
    }
  }
};

// ---------------------------------------------------------------------------
// IDX (MNIST) format: big-endian magic, dimension counts, raw bytes.

namespace detail {
inline uint32_t read_be32(std::istream &in, const std::string &path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char *>(b), 4))
    throw std::runtime_error("idx: truncated header in " + path);
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}
} // namespace detail

/// Load an IDX image/label pair. Images scale to [0, 1]; labels are 0-9.
inline Dataset load_mnist_idx(const std::string &images_path, const std::string &labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img)
    throw std::runtime_error("idx: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab)
    throw std::runtime_error("idx: cannot open " + labels_path);

  const uint32_t img_magic = detail::read_be32(img, images_path);
  if (img_magic != 0x00000803u)
    throw std::runtime_error("idx: bad image magic in " + images_path);
  const uint32_t n_images = detail::read_be32(img, images_path);
  const uint32_t rows = detail::read_be32(img, images_path);
  const uint32_t cols = detail::read_be32(img, images_path);

  const uint32_t lab_magic = detail::read_be32(lab, labels_path);
  if (lab_magic != 0x00000801u)
    throw std::runtime_error("idx: bad label magic in " + labels_path);
  const uint32_t n_labels = detail::read_be32(lab, labels_path);
  if (n_images != n_labels)
    throw std::runtime_error("idx: image/label count mismatch (" + images_path + ")");

  Dataset ds;
  ds.input_dim = rows * cols;
  ds.n_classes = 10;
  ds.inputs.reserve(n_images);
  ds.labels.reserve(n_images);
  std::vector<unsigned char> buf(ds.input_dim);
  for (uint32_t k = 0; k < n_images; ++k) {
    if (!img.read(reinterpret_cast<char *>(buf.data()), buf.size()))
      throw std::runtime_error("idx: truncated image data in " + images_path);
    std::vector<double> v(ds.input_dim);
    for (std::size_t i = 0; i < buf.size(); ++i)
      v[i] = buf[i] / 255.0;
    ds.inputs.push_back(std::move(v));
    char lc;
    if (!lab.read(&lc, 1))
      throw std::runtime_error("idx: truncated label data in " + labels_path);
    ds.labels.push_back(static_cast<unsigned char>(lc));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Character corpus

struct CharCorpus {
  std::vector<int> train_chars;
  std::vector<int> test_chars;
  std::vector<char> vocab; // sorted, duplicate-free

  std::size_t vocab_size() const { return vocab.size(); }
};

/// Deterministic head/tail split; vocabulary is the sorted set of distinct
/// characters of the whole file. train_size == 0 uses a 90/10 split.
inline CharCorpus load_char_corpus(const std::string &path, std::size_t train_size = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("corpus: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.empty())
    throw std::runtime_error("corpus: empty file " + path);

  std::set<char> chars(text.begin(), text.end());
  CharCorpus c;
  c.vocab.assign(chars.begin(), chars.end());

  std::vector<int> lookup(256, -1);
  for (std::size_t i = 0; i < c.vocab.size(); ++i)
    lookup[static_cast<unsigned char>(c.vocab[i])] = static_cast<int>(i);

  if (train_size == 0 || train_size >= text.size())
    train_size = text.size() * 9 / 10;
  c.train_chars.reserve(train_size);
  c.test_chars.reserve(text.size() - train_size);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const int id = lookup[static_cast<unsigned char>(text[i])];
    (i < train_size ? c.train_chars : c.test_chars).push_back(id);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Two separable Gaussian blobs in 8 dimensions; backs the fast property
/// tests and the toy preset.
inline Dataset make_toy_dataset(std::size_t n, uint64_t seed) {
  Dataset ds;
  ds.input_dim = 8;
  ds.n_classes = 2;
  Rng rng(derive_seed(seed, 0x70595u));
  for (std::size_t k = 0; k < n; ++k) {
    const int label = static_cast<int>(k % 2);
    std::vector<double> v(ds.input_dim);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double mean = (i % 2 == 0 ? 0.4 : -0.4) * (label == 0 ? 1.0 : -1.0);
      v[i] = std::clamp(mean + 0.35 * rng.gaussian(), -1.0, 1.0);
    }
    ds.inputs.push_back(std::move(v));
    ds.labels.push_back(label);
  }
  return ds;
}

/// Deterministic 10-class 28x28 "digit" stand-in: smooth random class
/// templates plus per-sample pixel noise and small shifts. Used where the
/// real handwritten-digit files are not available. The templates are fixed
/// (one dataset identity); `seed` only drives the per-sample noise stream,
/// so disjoint seeds give disjoint train/test splits of the same problem.
inline Dataset make_synthetic_digits(std::size_t n, uint64_t seed, std::size_t side = 28) {
  Dataset ds;
  ds.input_dim = side * side;
  ds.n_classes = 10;
  Rng template_rng(derive_seed(0x7e3a11ce5ull, 0xd161u));

  // class templates: sums of a few random soft blobs
  std::vector<std::vector<double>> templates(10, std::vector<double>(ds.input_dim, 0.0));
  for (auto &tpl : templates) {
    for (int blob = 0; blob < 6; ++blob) {
      const double cx = 4 + template_rng.uniform() * (side - 8);
      const double cy = 4 + template_rng.uniform() * (side - 8);
      const double s2 = 4.0 + 8.0 * template_rng.uniform();
      for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) {
          const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
          tpl[r * side + c] += std::exp(-d2 / s2);
        }
    }
    double mx = 0.0;
    for (double v : tpl)
      mx = std::max(mx, v);
    for (double &v : tpl)
      v /= mx;
  }

  Rng rng(derive_seed(seed, 0x5a3fu));
  for (std::size_t k = 0; k < n; ++k) {
    const int label = static_cast<int>(k % 10);
    const auto &tpl = templates[label];
    const int dr = static_cast<int>(rng.below(5)) - 2;
    const int dc = static_cast<int>(rng.below(5)) - 2;
    std::vector<double> v(ds.input_dim, 0.0);
    for (std::size_t r = 0; r < side; ++r)
      for (std::size_t c = 0; c < side; ++c) {
        const int sr = static_cast<int>(r) + dr, sc = static_cast<int>(c) + dc;
        double val = 0.0;
        if (sr >= 0 && sr < static_cast<int>(side) && sc >= 0 && sc < static_cast<int>(side))
          val = tpl[sr * side + sc];
        val += 0.15 * rng.gaussian();
        v[r * side + c] = std::clamp(val, 0.0, 1.0);
      }
    ds.inputs.push_back(std::move(v));
    ds.labels.push_back(label);
  }
  return ds;
}

} // namespace rpusim
