// Experiment runner for the analog crossbar training simulator.
//
//   rpusim train <config> [--set key=value ...]
//   rpusim calibrate <config> [--set ...]
//   rpusim sweep <config> --axis <name> --values v1,v2,... [--set ...]
//   rpusim device-curves <config> [--out file.csv] [--set ...]
//
// Config files are flat key = value text; --set overrides individual keys.
// Relative data paths resolve against $RPUSIM_DATA_ROOT.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "rpusim/rpusim.hpp"

namespace {

rpusim::ExperimentConfig load_with_overrides(const std::string &path,
                                             const std::vector<std::string> &sets) {
  rpusim::ExperimentConfig cfg = rpusim::load_config_file(path);
  for (const std::string &kv : sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    rpusim::apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

int cmd_train(const std::string &config_path, const std::vector<std::string> &sets) {
  const rpusim::ExperimentConfig cfg = load_with_overrides(config_path, sets);
  const auto records = rpusim::run_experiment(cfg, &std::cout);
  std::cout << "metrics written to " << cfg.output.metrics_path << "\n";
  if (!records.empty())
    std::cout << "final test metric: " << records.back().test_metric << "\n";
  return 0;
}

int cmd_calibrate(const std::string &config_path, const std::vector<std::string> &sets) {
  using namespace rpusim;
  const ExperimentConfig cfg = load_with_overrides(config_path, sets);
  cfg.device.validate();
  cfg.periphery.validate();

  // One representative array is enough to report convergence statistics.
  Rng construction(derive_seed(cfg.seed, 0xca1u));
  AnalogTile tile(64, 64, cfg.device, cfg.periphery, construction);
  Rng init_rng(derive_seed(cfg.seed, 0xca2u));
  Matrix w0(64, 64);
  for (double &v : w0.data)
    v = 1.2 * (init_rng.uniform() - 0.5); // spread across the nominal range
  tile.set_weights(w0);

  const OffsetStats before = measure_offsets(tile);
  Rng cal_rng(derive_seed(cfg.seed, 0xca3u));
  const OffsetStats converged = calibrate(tile, cfg.calibration, cal_rng);
  const OffsetStats after = measure_offsets(tile);

  std::cout << "devices: " << tile.rows() * tile.cols() << "\n"
            << "pulse pairs: " << cfg.calibration.n_pairs << "\n"
            << "mean |w - w_s| before drive: " << before.mean_abs_dev << "\n"
            << "mean |w - w_s| after drive:  " << converged.mean_abs_dev << "\n"
            << "offset std after transfer:   " << after.offset_std << " (programming error "
            << cfg.calibration.programming_error_std << ")\n";
  return 0;
}

int cmd_sweep(const std::string &config_path, const std::string &axis,
              const std::string &values_csv, const std::vector<std::string> &sets) {
  const rpusim::ExperimentConfig cfg = load_with_overrides(config_path, sets);
  std::vector<std::string> values;
  std::istringstream ss(values_csv);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty())
      values.push_back(tok);
  if (values.empty())
    throw std::invalid_argument("sweep: --values is empty");
  rpusim::run_sweep(cfg, axis, values, &std::cout);
  return 0;
}

// Pulse-response curves: up/down staircases of the nominal device and
// alternating-pair trajectories from several starting weights.
int cmd_device_curves(const std::string &config_path, const std::string &out_path,
                      const std::vector<std::string> &sets) {
  using namespace rpusim;
  const ExperimentConfig cfg = load_with_overrides(config_path, sets);
  cfg.device.validate();

  std::ofstream out(out_path);
  if (!out)
    throw std::runtime_error("device-curves: cannot open " + out_path);
  out << "curve,step,w\n";

  Rng rng(derive_seed(cfg.seed, 0xdc1u));
  const int n_pulses = 1200;

  DeviceParams nominal;
  nominal.dw_min0 = cfg.device.dw_min0_mean;
  nominal.slope_p = cfg.device.slope_p_mean;
  nominal.slope_n = cfg.device.slope_n_mean;

  DeviceParams d = nominal;
  out << "up_staircase,0," << d.w << "\n";
  for (int k = 1; k <= n_pulses; ++k) {
    apply_pulse(d, PulseDirection::Up, cfg.device.cycle_noise_rel_std, rng);
    out << "up_staircase," << k << "," << d.w << "\n";
  }
  for (int k = 1; k <= n_pulses; ++k) {
    apply_pulse(d, PulseDirection::Down, cfg.device.cycle_noise_rel_std, rng);
    out << "down_staircase," << k << "," << d.w << "\n";
  }

  for (double w0 : {0.45, -0.35}) {
    DeviceParams alt = nominal;
    alt.w = w0;
    alt.clamp_to_bounds();
    const std::string name = "alternating_from_" + std::to_string(w0);
    out << name << ",0," << alt.w << "\n";
    for (int k = 1; k <= n_pulses; ++k) {
      apply_pulse(alt, PulseDirection::Up, cfg.device.cycle_noise_rel_std, rng);
      apply_pulse(alt, PulseDirection::Down, cfg.device.cycle_noise_rel_std, rng);
      out << name << "," << k << "," << alt.w << "\n";
    }
  }
  std::cout << "device curves written to " << out_path << "\n";
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Analog resistive-crossbar neural network training simulator"};
  app.require_subcommand(1);

  std::string config_path, axis, values_csv, curves_out = "device_curves.csv";
  std::vector<std::string> sets;

  CLI::App *train = app.add_subcommand("train", "Run one training experiment");
  train->add_option("config", config_path, "experiment config file")->required();
  train->add_option("--set", sets, "override config keys (key=value)");

  CLI::App *cal = app.add_subcommand("calibrate", "Run symmetry-point calibration and report");
  cal->add_option("config", config_path, "experiment config file")->required();
  cal->add_option("--set", sets, "override config keys (key=value)");

  CLI::App *sweep = app.add_subcommand("sweep", "Run one experiment per axis value");
  sweep->add_option("config", config_path, "experiment config file")->required();
  sweep->add_option("--axis", axis, "config axis to sweep")->required();
  sweep->add_option("--values", values_csv, "comma-separated values")->required();
  sweep->add_option("--set", sets, "override config keys (key=value)");

  CLI::App *curves = app.add_subcommand("device-curves", "Emit pulse-response CSV");
  curves->add_option("config", config_path, "experiment config file")->required();
  curves->add_option("--out", curves_out, "output CSV path");
  curves->add_option("--set", sets, "override config keys (key=value)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed())
      return cmd_train(config_path, sets);
    if (cal->parsed())
      return cmd_calibrate(config_path, sets);
    if (sweep->parsed())
      return cmd_sweep(config_path, axis, values_csv, sets);
    if (curves->parsed())
      return cmd_device_curves(config_path, curves_out, sets);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
