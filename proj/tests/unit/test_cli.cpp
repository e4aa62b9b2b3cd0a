#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "quditcal/cli.hpp"
#include "quditcal/config.hpp"
#include "quditcal/io.hpp"

using namespace quditcal;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("quditcal_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j) {
  const auto path = dir / "config.json";
  std::ofstream(path) << j.dump();
  return path;
}

std::string slurp(const fs::path& p) { return io::read_text(p); }

std::size_t line_count(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// Small enough to run in seconds.
nlohmann::json quick_config() {
  return {{"grape", {{"n_slices", 40}, {"total_time", 1600.0}, {"max_iterations", 2000}}},
          {"env", {{"modes", 4}}},
          {"agents", {{"td3", {{"hidden", {16, 16}}, {"batch_size", 16}, {"warmup_steps", 20}}}}},
          {"train", {{"checkpoint_every", 30}}},
          {"eval", {{"M", 4}, {"sweep_levels", {0.0, 0.5}}}},
          {"sample_noise", {{"count", 500}, {"bins", 10}}}};
}

}  // namespace

TEST_CASE("run config parsing") {
  const RunConfig d = run_config_from_json(nlohmann::json::object());
  CHECK(d.grape.n_slices == 160);
  CHECK(d.grape.total_time == 1600.0);
  CHECK(d.noise.sigma_omega == 1e-3);
  CHECK(d.modes == 20);
  CHECK(d.alpha == 0.03);
  CHECK(d.eval_m == 100);
  CHECK(d.agents.size() == 4);
  CHECK(d.agents.at("td3").lr == 3e-4);

  const RunConfig r = run_config_from_json(run_config_to_json(d));
  CHECK(run_config_to_json(r) == run_config_to_json(d));

  CHECK_THROWS_AS(run_config_from_json({{"grape", {{"slices", 3}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"agents", {{"a2c", nlohmann::json::object()}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"env", {{"modes", 500}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"gate", "cnot"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"device", {{"g", -1.0}}}}), ConfigError);

  const RunConfig s = run_config_from_json({{"seed", 7}});
  CHECK(s.grape.seed == 7);
  CHECK(s.agents.at("sac").seed == 7);
}

TEST_CASE("grape subcommand contract") {
  const auto dir = temp_dir("grape");
  auto j = quick_config();
  j["grape"]["max_iterations"] = 3;
  const auto cfg = write_config(dir, j);
  CHECK(run_cli({"grape", "--config", cfg.string(), "--out", (dir / "a").string()}) == kExitUnconverged);
  CHECK(run_cli({"grape", "--config", cfg.string(), "--out", (dir / "b").string(), "--allow-unconverged"}) ==
        kExitOk);
  nlohmann::json meta;
  io::read_pulse_json(dir / "b" / "oct_pulse.json", &meta);
  CHECK(line_count(dir / "b" / "grape_history.csv") == meta.at("iterations_used").get<std::size_t>() + 1);
  CHECK(run_cli({"grape", "--config", (dir / "missing.json").string()}) == kExitConfig);
  CHECK(run_cli({"frobnicate"}) == kExitConfig);
}

TEST_CASE("pipeline smoke run and manifest reruns") {
  const auto dir = temp_dir("pipeline");
  const auto cfg = write_config(dir, quick_config());
  const std::string c = cfg.string();
  REQUIRE(run_cli({"grape", "--config", c, "--out", (dir / "grape").string(), "--allow-unconverged"}) == kExitOk);
  const std::string pulse = (dir / "grape" / "oct_pulse.json").string();
  REQUIRE(run_cli({"sample-noise", "--config", c, "--out", (dir / "noise").string()}) == kExitOk);
  CHECK(line_count(dir / "noise" / "noise_samples.csv") == 501);
  CHECK(line_count(dir / "noise" / "noise_hist.csv") == 31);

  REQUIRE(run_cli({"train", "--config", c, "--out", (dir / "train").string(), "--algorithm", "td3", "--steps",
                   "60", "--pulse", pulse}) == kExitOk);
  CHECK(line_count(dir / "train" / "learning_curve.csv") == 61);
  CHECK(line_count(dir / "train" / "episodes.csv") == 61);
  CHECK(slurp(dir / "train" / "learning_curve.csv").rfind("episode,f_rl,running_best\n", 0) == 0);

  // Resuming from the step-30 checkpoint continues the episode index and the trajectory.
  REQUIRE(run_cli({"train", "--config", c, "--out", (dir / "resumed").string(), "--algorithm", "td3", "--steps",
                   "60", "--pulse", pulse, "--resume", (dir / "train" / "checkpoints" / "step_30").string()}) ==
          kExitOk);
  const std::string full = slurp(dir / "train" / "learning_curve.csv");
  const std::string tail = slurp(dir / "resumed" / "learning_curve.csv");
  CHECK(tail.rfind("episode,f_rl,running_best\n30,", 0) == 0);
  CHECK(full.find(tail.substr(tail.find('\n') + 1)) != std::string::npos);

  const std::string ckpt = (dir / "train" / "checkpoint").string();
  REQUIRE(run_cli({"eval", "--config", c, "--out", (dir / "eval").string(), "--checkpoint", ckpt, "--pulse",
                   pulse}) == kExitOk);
  const std::string stats = slurp(dir / "eval" / "ensemble_stats.csv");
  CHECK(stats.rfind("method,M,seed,mean,std\noct,4,", 0) == 0);
  CHECK(stats.find("\ntd3,4,") != std::string::npos);
  CHECK(line_count(dir / "eval" / "ensemble_devices.csv") == 9);
  CHECK(line_count(dir / "eval" / "pulse_overlay.csv") == 41);

  REQUIRE(run_cli({"sweep", "--config", c, "--out", (dir / "sweep").string(), "--checkpoint", ckpt, "--pulse",
                   pulse}) == kExitOk);
  CHECK(line_count(dir / "sweep" / "sweep.csv") == 5);
  CHECK(run_cli({"sweep", "--config", c, "--out", (dir / "bad").string(), "--checkpoint", ckpt, "--axis", "chi"}) ==
        kExitConfig);
  CHECK(run_cli({"sweep", "--config", c, "--out", (dir / "bad").string(), "--checkpoint", ckpt, "--levels",
                 "0.5,0.1"}) == kExitConfig);

  for (const std::string stage : {"grape", "noise", "train", "eval", "sweep"}) {
    CAPTURE(stage);
    const auto src = dir / stage;
    const auto manifest = nlohmann::json::parse(slurp(src / "manifest.json"));
    const std::string command = manifest.at("command");
    const auto rerun = dir / (stage + "_rerun");
    REQUIRE(run_cli({command, "--config", (src / "manifest.json").string(), "--out", rerun.string()}) == kExitOk);
    for (const auto& f : manifest.at("files")) {
      const std::string name = f;
      if (name.ends_with(".csv")) CHECK(slurp(src / name) == slurp(rerun / name));
    }
  }
  CHECK(run_cli({"eval", "--config", (dir / "grape" / "manifest.json").string()}) == kExitConfig);
}

TEST_CASE("seed override from the environment") {
  const auto dir = temp_dir("seed");
  const auto cfg = write_config(dir, quick_config());
  setenv("QUDITCAL_SEED", "12", 1);
  REQUIRE(run_cli({"sample-noise", "--config", cfg.string(), "--out", (dir / "a").string()}) == kExitOk);
  setenv("QUDITCAL_SEED", "abc", 1);
  CHECK(run_cli({"sample-noise", "--config", cfg.string(), "--out", (dir / "b").string()}) == kExitConfig);
  unsetenv("QUDITCAL_SEED");
  REQUIRE(run_cli({"sample-noise", "--config", cfg.string(), "--out", (dir / "c").string()}) == kExitOk);
  CHECK(nlohmann::json::parse(slurp(dir / "a" / "manifest.json")).at("seed") == 12);
  CHECK(slurp(dir / "a" / "noise_samples.csv") != slurp(dir / "c" / "noise_samples.csv"));
}
