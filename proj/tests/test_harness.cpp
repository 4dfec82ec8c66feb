#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rpusim/config.hpp"
#include "rpusim/experiment.hpp"

using namespace rpusim;

namespace {

std::string slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_dir(const std::string &name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace

TEST_CASE("config parse -> serialize -> parse round-trips") {
  const std::string text = R"(
# experiment
preset = toy
seed = 1234
trainer.mode = analog_tiki_taka
trainer.eta = 0.013
trainer.epochs = 7
tiki.gamma = 0.5
tiki.lambda_c = 0.02
tiki.ns = 3
tiki.transfer_vectors = hadamard2
periphery.mvm_noise_std = 0.05
periphery.bit_length = 12
device.symmetry_offset_std = 0.01
calibration.mode = full
network.fc_sizes = 784,64,32,10
data.synthetic = true
output.metrics_path = runs/x/metrics.csv
)";
  const ExperimentConfig c1 = parse_config_text(text);
  REQUIRE(c1.preset == Preset::Toy);
  REQUIRE(c1.seed == 1234);
  REQUIRE(c1.trainer.mode == TrainerMode::AnalogTikiTaka);
  REQUIRE(c1.trainer.eta == 0.013);
  REQUIRE(c1.tiki.ns == 3);
  REQUIRE(c1.tiki.transfer_vectors == TransferVectorKind::Hadamard2);
  REQUIRE(c1.periphery.bit_length == 12);
  REQUIRE(c1.fc_sizes == std::vector<std::size_t>{784, 64, 32, 10});

  const ExperimentConfig c2 = parse_config_text(serialize_config(c1));
  REQUIRE(c1 == c2);
  REQUIRE(serialize_config(c1) == serialize_config(c2));
}

TEST_CASE("config errors are explicit") {
  REQUIRE_THROWS_WITH(parse_config_text("bogus.key = 1\n"),
                      Catch::Matchers::ContainsSubstring("unknown key"));
  REQUIRE_THROWS_WITH(parse_config_text("preset = nonsense\n"),
                      Catch::Matchers::ContainsSubstring("unknown value"));
  REQUIRE_THROWS_WITH(parse_config_text("preset toy\n"),
                      Catch::Matchers::ContainsSubstring("missing '='"));
}

TEST_CASE("data paths resolve against the environment root") {
  setenv("RPUSIM_DATA_ROOT", "/data/root", 1);
  REQUIRE(resolve_data_path("mnist") == "/data/root/mnist");
  REQUIRE(resolve_data_path("/abs/path") == "/abs/path");
  unsetenv("RPUSIM_DATA_ROOT");
  REQUIRE(resolve_data_path("mnist") == "mnist");
}

TEST_CASE("a one-epoch toy run writes one data row plus the header") {
  const auto dir = fresh_dir("rpusim_run_one");
  ExperimentConfig cfg;
  cfg.preset = Preset::Toy;
  cfg.trainer.epochs = 1;
  cfg.data.train_subset_size = 100;
  cfg.data.test_subset_size = 50;
  cfg.output.metrics_path = (dir / "metrics.csv").string();
  run_experiment(cfg);

  const std::string csv = slurp(cfg.output.metrics_path);
  int lines = 0;
  for (char ch : csv)
    if (ch == '\n')
      ++lines;
  REQUIRE(lines == 2);
  REQUIRE(csv.rfind("epoch,train_loss,test_metric,sgd_cycles,tt_cycles,pulse_prob_clamps",
                    0) == 0);

  SECTION("the run directory records the resolved config") {
    const ExperimentConfig resolved = load_config_file((dir / "resolved_config.cfg").string());
    REQUIRE(resolved == cfg);
  }
}

TEST_CASE("identical config and seed produce byte-identical metrics") {
  const auto dir = fresh_dir("rpusim_run_det");
  ExperimentConfig cfg;
  cfg.preset = Preset::Toy;
  cfg.trainer.mode = TrainerMode::AnalogTikiTaka;
  cfg.trainer.epochs = 2;
  cfg.tiki.lambda_c = 0.02;
  cfg.data.train_subset_size = 150;
  cfg.data.test_subset_size = 60;
  cfg.seed = 777;

  cfg.output.metrics_path = (dir / "a" / "metrics.csv").string();
  run_experiment(cfg);
  const std::string first = slurp(cfg.output.metrics_path);

  cfg.output.metrics_path = (dir / "b" / "metrics.csv").string();
  run_experiment(cfg);
  const std::string second = slurp(cfg.output.metrics_path);

  REQUIRE(first == second);
}

TEST_CASE("plots are optional SVG artifacts") {
  const auto dir = fresh_dir("rpusim_run_plot");
  ExperimentConfig cfg;
  cfg.preset = Preset::Toy;
  cfg.trainer.epochs = 1;
  cfg.data.train_subset_size = 60;
  cfg.data.test_subset_size = 40;
  cfg.output.metrics_path = (dir / "metrics.csv").string();
  cfg.output.plot_path = (dir / "curve.svg").string();
  run_experiment(cfg);
  const std::string svg = slurp(cfg.output.plot_path);
  REQUIRE(svg.find("<svg") != std::string::npos);
  REQUIRE(svg.find("polyline") != std::string::npos);
}

TEST_CASE("sweeps reject unknown axes") {
  ExperimentConfig cfg;
  REQUIRE_THROWS_WITH(run_sweep(cfg, "not_an_axis", {"1"}),
                      Catch::Matchers::ContainsSubstring("unknown axis"));
}

TEST_CASE("gamma sweep: both mixing choices improve on the analog SGD baseline") {
  const auto dir = fresh_dir("rpusim_sweep_gamma");

  ExperimentConfig base;
  base.preset = Preset::Toy;
  base.seed = 42;
  base.trainer.eta = 0.01;
  base.trainer.epochs = 4;
  base.data.train_subset_size = 400;
  base.data.test_subset_size = 100;

  // analog SGD baseline with the asymmetric devices
  ExperimentConfig sgd = base;
  sgd.trainer.mode = TrainerMode::AnalogSGD;
  sgd.output.metrics_path = (dir / "sgd" / "metrics.csv").string();
  const double sgd_loss = run_experiment(sgd).back().train_loss;

  ExperimentConfig tt = base;
  tt.trainer.mode = TrainerMode::AnalogTikiTaka;
  tt.tiki.lambda_c = 0.02;
  tt.tiki.ns = 1;
  tt.output.metrics_path = (dir / "tt" / "metrics.csv").string();
  const auto results = run_sweep(tt, "gamma", {"0", "1"});
  REQUIRE(results.size() == 2);
  for (const auto &r : results)
    REQUIRE(r.records.back().train_loss < sgd_loss);

  SECTION("per-value directories and the combined CSV exist") {
    REQUIRE(std::filesystem::exists(dir / "tt" / "gamma=0" / "metrics.csv"));
    REQUIRE(std::filesystem::exists(dir / "tt" / "gamma=1" / "metrics.csv"));
    const std::string combined = slurp((dir / "tt" / "sweep_gamma.csv").string());
    REQUIRE(combined.rfind("gamma,", 0) == 0);
    int lines = 0;
    for (char ch : combined)
      if (ch == '\n')
        ++lines;
    REQUIRE(lines == 3);
  }
}

TEST_CASE("lstm preset trains end to end on a small corpus") {
  const auto dir = fresh_dir("rpusim_lstm_run");
  const auto corpus = dir / "corpus.txt";
  {
    std::ofstream out(corpus);
    for (int k = 0; k < 60; ++k)
      out << "the quick brown fox jumps over the lazy dog. ";
  }
  ExperimentConfig cfg;
  cfg.preset = Preset::LstmWp;
  cfg.seed = 3;
  cfg.trainer.mode = TrainerMode::FP;
  cfg.trainer.eta = 0.01;
  cfg.trainer.epochs = 25;
  cfg.trainer.unroll_steps = 20;
  cfg.data.corpus_path = corpus.string();
  cfg.data.test_subset_size = 200;
  cfg.output.metrics_path = (dir / "metrics.csv").string();
  const auto records = run_experiment(cfg);
  REQUIRE(records.size() == 25);
  // a highly repetitive corpus gets memorized: per-char cross-entropy falls
  // from ln(vocab) ~ 3.3 to well under 0.5
  REQUIRE(records.back().test_metric < 0.5);
}
