#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpusim/config.hpp"
#include "rpusim/dataset.hpp"
#include "rpusim/trainer.hpp"

namespace rpusim {

/// Per-epoch metrics row. Cycle counts are cumulative over the run:
/// sgd_cycles is the forward+backward+update tally, tt_cycles adds the two
/// extra cycles per transfer event (equal to sgd_cycles for non-coupled
/// runs). wall_seconds is reported separately from the deterministic CSV.
struct RunRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double test_metric = 0.0; // error % for classifiers, cross-entropy for LSTM
  uint64_t sgd_cycles = 0;
  uint64_t tt_cycles = 0;
  uint64_t pulse_prob_clamps = 0;
  double wall_seconds = 0.0;
};

inline std::string format_metric(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

inline void write_metrics_csv(const std::string &path, const std::vector<RunRecord> &records) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("metrics: cannot open " + path);
  out << "epoch,train_loss,test_metric,sgd_cycles,tt_cycles,pulse_prob_clamps\n";
  for (const RunRecord &r : records)
    out << r.epoch << "," << format_metric(r.train_loss) << "," << format_metric(r.test_metric)
        << "," << r.sgd_cycles << "," << r.tt_cycles << "," << r.pulse_prob_clamps << "\n";
}

inline void write_timing_csv(const std::string &path, const std::vector<RunRecord> &records) {
  std::ofstream out(path);
  out << "epoch,wall_seconds\n";
  for (const RunRecord &r : records)
    out << r.epoch << "," << r.wall_seconds << "\n";
}

/// Minimal SVG learning curve (test metric vs epoch). CSV stays the
/// canonical artifact; the plot is a convenience.
inline void write_svg_plot(const std::string &path, const std::vector<RunRecord> &records,
                           const std::string &title) {
  if (records.empty())
    return;
  const double W = 640, H = 400, m = 50;
  double ymax = 0;
  for (const RunRecord &r : records)
    ymax = std::max(ymax, r.test_metric);
  if (ymax <= 0)
    ymax = 1;
  const double xmax = static_cast<double>(records.back().epoch);
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("plot: cannot open " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
      << "</text>\n";
  out << "<line x1='" << m << "' y1='" << H - m << "' x2='" << W - m << "' y2='" << H - m
      << "' stroke='black'/>\n";
  out << "<line x1='" << m << "' y1='" << m << "' x2='" << m << "' y2='" << H - m
      << "' stroke='black'/>\n";
  out << "<polyline fill='none' stroke='steelblue' stroke-width='2' points='";
  for (const RunRecord &r : records) {
    const double x = m + (W - 2 * m) * (r.epoch / std::max(xmax, 1.0));
    const double y = H - m - (H - 2 * m) * (r.test_metric / ymax);
    out << x << "," << y << " ";
  }
  out << "'/>\n";
  out << "<text x='" << W / 2 << "' y='" << H - 12
      << "' text-anchor='middle' font-size='12'>epoch</text>\n";
  out << "<text x='15' y='" << H / 2 << "' font-size='12' transform='rotate(-90 15 " << H / 2
      << ")'>test metric</text>\n";
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------

struct LoadedData {
  Dataset train;
  Dataset test;
  CharCorpus corpus; // LSTM preset only
};

inline LoadedData load_experiment_data(const ExperimentConfig &cfg) {
  LoadedData d;
  switch (cfg.preset) {
  case Preset::Toy: {
    const std::size_t n_train =
        cfg.data.train_subset_size ? cfg.data.train_subset_size : 600;
    const std::size_t n_test = cfg.data.test_subset_size ? cfg.data.test_subset_size : 300;
    d.train = make_toy_dataset(n_train, derive_seed(cfg.seed, 0xda7a0u));
    d.test = make_toy_dataset(n_test, derive_seed(cfg.seed, 0xda7a1u));
    break;
  }
  case Preset::FcnMnist:
  case Preset::CnnMnist: {
    if (cfg.data.synthetic) {
      const std::size_t n_train =
          cfg.data.train_subset_size ? cfg.data.train_subset_size : 4000;
      const std::size_t n_test = cfg.data.test_subset_size ? cfg.data.test_subset_size : 2000;
      // Templates shared between splits; sample noise streams differ.
      d.train = make_synthetic_digits(n_train, derive_seed(0x51u, 0));
      d.test = make_synthetic_digits(n_test, derive_seed(0x51u, 1));
      break;
    }
    const std::string dir = resolve_data_path(cfg.data.mnist_dir);
    if (dir.empty())
      throw std::runtime_error("data.mnist_dir not set (or use data.synthetic = true)");
    auto pick = [&](const std::string &a, const std::string &b) {
      return std::filesystem::exists(dir + "/" + a) ? dir + "/" + a : dir + "/" + b;
    };
    d.train = load_mnist_idx(pick("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
                             pick("train-labels-idx1-ubyte", "train-labels.idx1-ubyte"));
    d.test = load_mnist_idx(pick("t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
                            pick("t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"));
    d.train.truncate(cfg.data.train_subset_size);
    d.test.truncate(cfg.data.test_subset_size);
    break;
  }
  case Preset::LstmWp: {
    const std::string path = resolve_data_path(cfg.data.corpus_path);
    if (path.empty())
      throw std::runtime_error("data.corpus_path not set for the lstm_wp preset");
    d.corpus = load_char_corpus(path, cfg.data.corpus_train_chars);
    if (cfg.data.test_subset_size && d.corpus.test_chars.size() > cfg.data.test_subset_size)
      d.corpus.test_chars.resize(cfg.data.test_subset_size);
    if (cfg.data.train_subset_size && d.corpus.train_chars.size() > cfg.data.train_subset_size)
      d.corpus.train_chars.resize(cfg.data.train_subset_size);
    break;
  }
  }
  return d;
}

inline NetworkSpec network_spec_for(const ExperimentConfig &cfg) {
  switch (cfg.preset) {
  case Preset::Toy:
    return NetworkSpec::toy();
  case Preset::FcnMnist:
    return cfg.fc_sizes.empty() ? NetworkSpec::fcn_mnist() : NetworkSpec::fcn(cfg.fc_sizes);
  case Preset::CnnMnist:
    return NetworkSpec::cnn_mnist();
  case Preset::LstmWp:
    throw std::logic_error("lstm preset handled separately");
  }
  return NetworkSpec::toy();
}

inline AnalogBuildConfig analog_build_config(const ExperimentConfig &cfg) {
  AnalogBuildConfig a;
  a.device = cfg.device;
  a.periphery = cfg.periphery;
  a.tiki = cfg.tiki;
  a.calibration = cfg.calibration;
  a.calibration_mode = cfg.calibration_mode;
  return a;
}

/// Build, train and evaluate one experiment; append one RunRecord per epoch
/// to the metrics CSV. Fully deterministic given the config (wall time is
/// kept out of the deterministic columns). The resolved config is written
/// next to the metrics file for provenance.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig &cfg,
                                             std::ostream *log = nullptr) {
  cfg.device.validate();
  cfg.periphery.validate();
  cfg.tiki.validate();

  TrainerConfig tc = cfg.trainer;
  tc.seed = cfg.seed;

  const std::filesystem::path metrics_path(cfg.output.metrics_path);
  if (metrics_path.has_parent_path())
    std::filesystem::create_directories(metrics_path.parent_path());
  {
    std::ofstream rc(metrics_path.parent_path() / "resolved_config.cfg");
    rc << serialize_config(cfg);
  }

  const LoadedData data = load_experiment_data(cfg);
  const AnalogBuildConfig acfg = analog_build_config(cfg);
  std::vector<RunRecord> records;
  const auto t0 = std::chrono::steady_clock::now();

  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  uint64_t total_base = 0, total_transfers = 0, total_clamps = 0;
  auto fill_record = [&](int epoch, const EpochResult &res, double metric) {
    total_base += res.base_cycles;
    total_transfers += res.transfer_events;
    total_clamps += res.prob_clamps;
    RunRecord r;
    r.epoch = epoch;
    r.train_loss = res.train_loss;
    r.test_metric = metric;
    r.sgd_cycles = total_base;
    r.tt_cycles = total_base + 2 * total_transfers;
    r.pulse_prob_clamps = total_clamps;
    r.wall_seconds = elapsed();
    return r;
  };

  if (cfg.preset == Preset::LstmWp) {
    LstmNetworkSpec spec = LstmNetworkSpec::war_and_peace(data.corpus.vocab_size());
    auto net = build_lstm(spec, tc, acfg);
    for (int e = 1; e <= tc.epochs; ++e) {
      const EpochResult res = train_epoch_lstm(*net, data.corpus.train_chars, tc);
      records.push_back(fill_record(e, res, net->evaluate(data.corpus.test_chars)));
      if (log)
        *log << "epoch " << e << " train_loss " << res.train_loss << " test_ce "
             << records.back().test_metric << "\n";
    }
  } else {
    const NetworkSpec spec = network_spec_for(cfg);
    if (data.train.input_dim != spec.input_dim())
      throw std::runtime_error("experiment: dataset input dim does not match the network");
    auto net = build_feedforward(spec, tc, acfg);
    for (int e = 1; e <= tc.epochs; ++e) {
      const EpochResult res = train_epoch(*net, data.train, tc, e);
      records.push_back(fill_record(e, res, evaluate_error_pct(*net, data.test)));
      if (log)
        *log << "epoch " << e << " train_loss " << res.train_loss << " test_error% "
             << records.back().test_metric << "\n";
    }
  }

  write_metrics_csv(cfg.output.metrics_path, records);
  write_timing_csv(cfg.output.metrics_path + ".timing.csv", records);
  if (!cfg.output.plot_path.empty())
    write_svg_plot(cfg.output.plot_path, records,
                   to_string(cfg.preset) + " / " + to_string(cfg.trainer.mode));
  return records;
}

// ---------------------------------------------------------------------------
// Sweeps

inline std::string sweep_axis_key(const std::string &axis) {
  if (axis == "gamma")
    return "tiki.gamma";
  if (axis == "lambda_c")
    return "tiki.lambda_c";
  if (axis == "ns")
    return "tiki.ns";
  if (axis == "transfer_vectors")
    return "tiki.transfer_vectors";
  if (axis == "symmetry_offset_std")
    return "device.symmetry_offset_std";
  if (axis == "mvm_noise_std")
    return "periphery.mvm_noise_std";
  if (axis == "threshold_Tv" || axis == "threshold_tv")
    return "tiki.threshold_tv";
  throw std::invalid_argument("sweep: unknown axis '" + axis + "'");
}

struct SweepResult {
  std::string value;
  std::vector<RunRecord> records;
};

/// One run per value; per-value outputs live in "<axis>=<value>/"
/// subdirectories next to the base metrics path, plus one combined CSV of
/// final-epoch metrics.
inline std::vector<SweepResult> run_sweep(const ExperimentConfig &base, const std::string &axis,
                                          const std::vector<std::string> &values,
                                          std::ostream *log = nullptr) {
  const std::string key = sweep_axis_key(axis);
  const std::filesystem::path base_dir =
      std::filesystem::path(base.output.metrics_path).has_parent_path()
          ? std::filesystem::path(base.output.metrics_path).parent_path()
          : std::filesystem::path(".");
  std::vector<SweepResult> results;
  for (const std::string &v : values) {
    ExperimentConfig cfg = base;
    apply_config_value(cfg, key, v);
    const std::filesystem::path run_dir = base_dir / (axis + "=" + v);
    cfg.output.metrics_path = (run_dir / "metrics.csv").string();
    if (!base.output.plot_path.empty())
      cfg.output.plot_path = (run_dir / "curve.svg").string();
    if (log)
      *log << "sweep " << axis << " = " << v << "\n";
    results.push_back({v, run_experiment(cfg, log)});
  }
  std::ofstream combined(base_dir / ("sweep_" + axis + ".csv"));
  combined << axis << ",final_train_loss,final_test_metric\n";
  for (const SweepResult &r : results)
    combined << r.value << "," << format_metric(r.records.back().train_loss) << ","
             << format_metric(r.records.back().test_metric) << "\n";
  return results;
}

} // namespace rpusim
