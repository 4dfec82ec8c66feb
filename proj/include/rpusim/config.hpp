#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpusim/calibration.hpp"
#include "rpusim/device.hpp"
#include "rpusim/tiki_taka.hpp"
#include "rpusim/tile.hpp"
#include "rpusim/trainer.hpp"

namespace rpusim {

enum class Preset { FcnMnist, CnnMnist, LstmWp, Toy };

struct DataConfig {
  std::string mnist_dir;    // expects the four standard IDX files
  std::string corpus_path;  // plain-text character corpus
  std::size_t train_subset_size = 0; // 0 = all
  std::size_t test_subset_size = 0;  // 0 = all
  std::size_t corpus_train_chars = 0; // 0 = 90/10 split
  bool synthetic = false;   // procedural digits instead of IDX files

  bool operator==(const DataConfig &) const = default;
};

struct OutputConfig {
  std::string metrics_path = "metrics.csv";
  std::string plot_path; // empty = no plot

  bool operator==(const OutputConfig &) const = default;
};

/// Full description of one run. Serializes to a flat key=value file with
/// dotted section prefixes; CLI flags override file values key by key.
struct ExperimentConfig {
  Preset preset = Preset::Toy;
  uint64_t seed = 42;
  TrainerConfig trainer;
  std::vector<std::size_t> fc_sizes; // optional FCN override, e.g. 784,64,32,10
  DevicePopulationConfig device;
  PeripheryConfig periphery;
  TikiTakaConfig tiki;
  CalibrationConfig calibration;
  CalibrationMode calibration_mode = CalibrationMode::Shortcut;
  DataConfig data;
  OutputConfig output;

  bool operator==(const ExperimentConfig &o) const {
    return serialize_config(*this) == serialize_config(o);
  }

  friend std::string serialize_config(const ExperimentConfig &c);
};

// ---------------------------------------------------------------------------
// enum <-> string

inline std::string to_string(Preset p) {
  switch (p) {
  case Preset::FcnMnist:
    return "fcn_mnist";
  case Preset::CnnMnist:
    return "cnn_mnist";
  case Preset::LstmWp:
    return "lstm_wp";
  case Preset::Toy:
    return "toy";
  }
  return "toy";
}

inline std::string to_string(TrainerMode m) {
  switch (m) {
  case TrainerMode::FP:
    return "fp";
  case TrainerMode::AnalogSGD:
    return "analog_sgd";
  case TrainerMode::AnalogTikiTaka:
    return "analog_tiki_taka";
  }
  return "fp";
}

inline std::string to_string(UpdateMode m) {
  return m == UpdateMode::Stochastic ? "stochastic" : "expected";
}

inline std::string to_string(CalibrationMode m) {
  switch (m) {
  case CalibrationMode::Shortcut:
    return "shortcut";
  case CalibrationMode::Full:
    return "full";
  case CalibrationMode::None:
    return "none";
  }
  return "shortcut";
}

inline std::string to_string(TransferVectorKind k) {
  switch (k) {
  case TransferVectorKind::OneHotCyclic:
    return "one_hot";
  case TransferVectorKind::Hadamard2:
    return "hadamard2";
  case TransferVectorKind::Hadamard4:
    return "hadamard4";
  }
  return "one_hot";
}

namespace detail {

template <typename T> T parse_enum(const std::string &v, const std::string &key);

template <> inline Preset parse_enum<Preset>(const std::string &v, const std::string &key) {
  if (v == "fcn_mnist")
    return Preset::FcnMnist;
  if (v == "cnn_mnist")
    return Preset::CnnMnist;
  if (v == "lstm_wp")
    return Preset::LstmWp;
  if (v == "toy")
    return Preset::Toy;
  throw std::invalid_argument("config: unknown value '" + v + "' for " + key);
}

template <>
inline TrainerMode parse_enum<TrainerMode>(const std::string &v, const std::string &key) {
  if (v == "fp")
    return TrainerMode::FP;
  if (v == "analog_sgd")
    return TrainerMode::AnalogSGD;
  if (v == "analog_tiki_taka")
    return TrainerMode::AnalogTikiTaka;
  throw std::invalid_argument("config: unknown value '" + v + "' for " + key);
}

template <>
inline UpdateMode parse_enum<UpdateMode>(const std::string &v, const std::string &key) {
  if (v == "stochastic")
    return UpdateMode::Stochastic;
  if (v == "expected")
    return UpdateMode::Expected;
  throw std::invalid_argument("config: unknown value '" + v + "' for " + key);
}

template <>
inline CalibrationMode parse_enum<CalibrationMode>(const std::string &v, const std::string &key) {
  if (v == "shortcut")
    return CalibrationMode::Shortcut;
  if (v == "full")
    return CalibrationMode::Full;
  if (v == "none")
    return CalibrationMode::None;
  throw std::invalid_argument("config: unknown value '" + v + "' for " + key);
}

template <>
inline TransferVectorKind parse_enum<TransferVectorKind>(const std::string &v,
                                                         const std::string &key) {
  if (v == "one_hot")
    return TransferVectorKind::OneHotCyclic;
  if (v == "hadamard2")
    return TransferVectorKind::Hadamard2;
  if (v == "hadamard4")
    return TransferVectorKind::Hadamard4;
  throw std::invalid_argument("config: unknown value '" + v + "' for " + key);
}

inline bool parse_bool(const std::string &v, const std::string &key) {
  if (v == "true" || v == "1" || v == "on")
    return true;
  if (v == "false" || v == "0" || v == "off")
    return false;
  throw std::invalid_argument("config: bad boolean '" + v + "' for " + key);
}

inline std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

} // namespace detail

/// Apply one key=value override.
inline void apply_config_value(ExperimentConfig &c, const std::string &key,
                               const std::string &value) {
  using detail::parse_bool;
  using detail::parse_enum;
  auto num = [&] { return std::stod(value); };
  auto integer = [&] { return std::stoll(value); };

  if (key == "preset")
    c.preset = parse_enum<Preset>(value, key);
  else if (key == "seed")
    c.seed = static_cast<uint64_t>(std::stoull(value));
  else if (key == "network.fc_sizes") {
    c.fc_sizes.clear();
    std::istringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty())
        c.fc_sizes.push_back(static_cast<std::size_t>(std::stoull(tok)));
  } else if (key == "trainer.mode")
    c.trainer.mode = parse_enum<TrainerMode>(value, key);
  else if (key == "trainer.eta")
    c.trainer.eta = num();
  else if (key == "trainer.epochs")
    c.trainer.epochs = static_cast<int>(integer());
  else if (key == "trainer.unroll_steps")
    c.trainer.unroll_steps = static_cast<int>(integer());
  else if (key == "trainer.update_mode")
    c.trainer.update_mode = parse_enum<UpdateMode>(value, key);
  else if (key == "trainer.allow_uncalibrated")
    c.trainer.allow_uncalibrated = parse_bool(value, key);
  else if (key == "device.dw_min0_mean")
    c.device.dw_min0_mean = num();
  else if (key == "device.slope_p_mean")
    c.device.slope_p_mean = num();
  else if (key == "device.slope_n_mean")
    c.device.slope_n_mean = num();
  else if (key == "device.dw_min0_rel_std")
    c.device.dw_min0_rel_std = num();
  else if (key == "device.slope_p_rel_std")
    c.device.slope_p_rel_std = num();
  else if (key == "device.slope_n_rel_std")
    c.device.slope_n_rel_std = num();
  else if (key == "device.cycle_noise_rel_std")
    c.device.cycle_noise_rel_std = num();
  else if (key == "device.symmetry_offset_std")
    c.device.symmetry_offset_std = num();
  else if (key == "periphery.mvm_noise_std")
    c.periphery.mvm_noise_std = num();
  else if (key == "periphery.output_bound")
    c.periphery.output_bound = num();
  else if (key == "periphery.input_bits")
    c.periphery.input_bits = static_cast<int>(integer());
  else if (key == "periphery.output_bits")
    c.periphery.output_bits = static_cast<int>(integer());
  else if (key == "periphery.noise_management")
    c.periphery.noise_management = parse_bool(value, key);
  else if (key == "periphery.bound_management")
    c.periphery.bound_management = parse_bool(value, key);
  else if (key == "periphery.bit_length")
    c.periphery.bit_length = static_cast<int>(integer());
  else if (key == "periphery.quantization_enabled")
    c.periphery.quantization_enabled = parse_bool(value, key);
  else if (key == "tiki.gamma")
    c.tiki.gamma = num();
  else if (key == "tiki.lambda_c")
    c.tiki.lambda_c = num();
  else if (key == "tiki.ns")
    c.tiki.ns = static_cast<int>(integer());
  else if (key == "tiki.transfer_vectors")
    c.tiki.transfer_vectors = parse_enum<TransferVectorKind>(value, key);
  else if (key == "tiki.threshold_tv")
    c.tiki.threshold_tv = num();
  else if (key == "tiki.transfer_read_noise_std")
    c.tiki.transfer_read_noise_std = num();
  else if (key == "tiki.hadamard_unit_norm")
    c.tiki.hadamard_unit_norm = parse_bool(value, key);
  else if (key == "calibration.n_pairs")
    c.calibration.n_pairs = static_cast<int>(integer());
  else if (key == "calibration.programming_error_std")
    c.calibration.programming_error_std = num();
  else if (key == "calibration.mode")
    c.calibration_mode = parse_enum<CalibrationMode>(value, key);
  else if (key == "data.mnist_dir")
    c.data.mnist_dir = value;
  else if (key == "data.corpus_path")
    c.data.corpus_path = value;
  else if (key == "data.train_subset_size")
    c.data.train_subset_size = static_cast<std::size_t>(std::stoull(value));
  else if (key == "data.test_subset_size")
    c.data.test_subset_size = static_cast<std::size_t>(std::stoull(value));
  else if (key == "data.corpus_train_chars")
    c.data.corpus_train_chars = static_cast<std::size_t>(std::stoull(value));
  else if (key == "data.synthetic")
    c.data.synthetic = parse_bool(value, key);
  else if (key == "output.metrics_path")
    c.output.metrics_path = value;
  else if (key == "output.plot_path")
    c.output.plot_path = value;
  else
    throw std::invalid_argument("config: unknown key '" + key + "'");
}

inline std::string serialize_config(const ExperimentConfig &c) {
  using detail::fmt;
  std::ostringstream o;
  o << "preset = " << to_string(c.preset) << "\n";
  o << "seed = " << c.seed << "\n";
  if (!c.fc_sizes.empty()) {
    o << "network.fc_sizes = ";
    for (std::size_t i = 0; i < c.fc_sizes.size(); ++i)
      o << (i ? "," : "") << c.fc_sizes[i];
    o << "\n";
  }
  o << "trainer.mode = " << to_string(c.trainer.mode) << "\n";
  o << "trainer.eta = " << fmt(c.trainer.eta) << "\n";
  o << "trainer.epochs = " << c.trainer.epochs << "\n";
  o << "trainer.unroll_steps = " << c.trainer.unroll_steps << "\n";
  o << "trainer.update_mode = " << to_string(c.trainer.update_mode) << "\n";
  o << "trainer.allow_uncalibrated = " << (c.trainer.allow_uncalibrated ? "true" : "false")
    << "\n";
  o << "device.dw_min0_mean = " << fmt(c.device.dw_min0_mean) << "\n";
  o << "device.slope_p_mean = " << fmt(c.device.slope_p_mean) << "\n";
  o << "device.slope_n_mean = " << fmt(c.device.slope_n_mean) << "\n";
  o << "device.dw_min0_rel_std = " << fmt(c.device.dw_min0_rel_std) << "\n";
  o << "device.slope_p_rel_std = " << fmt(c.device.slope_p_rel_std) << "\n";
  o << "device.slope_n_rel_std = " << fmt(c.device.slope_n_rel_std) << "\n";
  o << "device.cycle_noise_rel_std = " << fmt(c.device.cycle_noise_rel_std) << "\n";
  o << "device.symmetry_offset_std = " << fmt(c.device.symmetry_offset_std) << "\n";
  o << "periphery.mvm_noise_std = " << fmt(c.periphery.mvm_noise_std) << "\n";
  o << "periphery.output_bound = " << fmt(c.periphery.output_bound) << "\n";
  o << "periphery.input_bits = " << c.periphery.input_bits << "\n";
  o << "periphery.output_bits = " << c.periphery.output_bits << "\n";
  o << "periphery.noise_management = " << (c.periphery.noise_management ? "true" : "false")
    << "\n";
  o << "periphery.bound_management = " << (c.periphery.bound_management ? "true" : "false")
    << "\n";
  o << "periphery.bit_length = " << c.periphery.bit_length << "\n";
  o << "periphery.quantization_enabled = "
    << (c.periphery.quantization_enabled ? "true" : "false") << "\n";
  o << "tiki.gamma = " << fmt(c.tiki.gamma) << "\n";
  o << "tiki.lambda_c = " << fmt(c.tiki.lambda_c) << "\n";
  o << "tiki.ns = " << c.tiki.ns << "\n";
  o << "tiki.transfer_vectors = " << to_string(c.tiki.transfer_vectors) << "\n";
  o << "tiki.threshold_tv = " << fmt(c.tiki.threshold_tv) << "\n";
  o << "tiki.transfer_read_noise_std = " << fmt(c.tiki.transfer_read_noise_std) << "\n";
  o << "tiki.hadamard_unit_norm = " << (c.tiki.hadamard_unit_norm ? "true" : "false") << "\n";
  o << "calibration.n_pairs = " << c.calibration.n_pairs << "\n";
  o << "calibration.programming_error_std = " << fmt(c.calibration.programming_error_std)
    << "\n";
  o << "calibration.mode = " << to_string(c.calibration_mode) << "\n";
  o << "data.mnist_dir = " << c.data.mnist_dir << "\n";
  o << "data.corpus_path = " << c.data.corpus_path << "\n";
  o << "data.train_subset_size = " << c.data.train_subset_size << "\n";
  o << "data.test_subset_size = " << c.data.test_subset_size << "\n";
  o << "data.corpus_train_chars = " << c.data.corpus_train_chars << "\n";
  o << "data.synthetic = " << (c.data.synthetic ? "true" : "false") << "\n";
  o << "output.metrics_path = " << c.output.metrics_path << "\n";
  o << "output.plot_path = " << c.output.plot_path << "\n";
  return o.str();
}

/// Parse key = value lines; '#' starts a comment, blank lines ignored.
inline ExperimentConfig parse_config_text(const std::string &text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos)
      line.resize(hash);
    auto trim = [](std::string s) {
      const char *ws = " \t\r\n";
      const std::size_t b = s.find_first_not_of(ws);
      if (b == std::string::npos)
        return std::string();
      const std::size_t e = s.find_last_not_of(ws);
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty())
      continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: missing '=' at line " + std::to_string(lineno));
    apply_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

inline ExperimentConfig load_config_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

/// Resolve a data path against RPUSIM_DATA_ROOT when it is relative.
inline std::string resolve_data_path(const std::string &path) {
  if (path.empty() || path.front() == '/')
    return path;
  if (const char *root = std::getenv("RPUSIM_DATA_ROOT"))
    return std::string(root) + "/" + path;
  return path;
}

} // namespace rpusim
