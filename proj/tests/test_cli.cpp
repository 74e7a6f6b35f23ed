/*
 *  Copyright 2026 The trexsuper Authors. All Rights Reserved.
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "trex/config.hpp"
#include "trex/pipeline.hpp"

using namespace trex;
namespace fs = std::filesystem;

namespace {

const fs::path kScratch = fs::temp_directory_path() / ("trex_cli_" + std::to_string(::getpid()));

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI inside the scratch directory, capturing stdout and stderr.
Result cli(const std::string& args, const std::string& env = "") {
  fs::create_directories(kScratch);
  const fs::path log = kScratch / "cli_output.txt";
  const std::string cmd = "cd '" + kScratch.string() + "' && " + env + " '" TREX_CLI_PATH "' " + args + " > '" +
                          log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

const std::string kConfigPath = (kScratch / "toy.json").string();

void write_toy_config(int iterations = 20) {
  fs::create_directories(kScratch);
  auto j = nlohmann::json::parse(slurp(TREX_SOURCE_DIR "/configs/toy.json"));
  j["train"]["iterations"] = iterations;
  j["train"]["checkpoint_every"] = 10;
  j["train"]["log_every"] = 1;
  std::ofstream(kConfigPath) << j.dump(2);
}

std::vector<std::string> log_rows_without_clock(const fs::path& p) {
  std::vector<std::string> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) rows.push_back(line.substr(0, line.rfind('\t')));
  return rows;
}

}  // namespace

TEST_CASE("config: defaults round-trip and unknown keys are named") {
  const config::RunConfig d;
  const auto j = config::to_json(d);
  CHECK(config::to_json(config::from_json(nlohmann::json::parse(j.dump()))) == j);
  CHECK(j["tracker"]["max_concurrent"] == 196);
  CHECK(j["model"]["bifurcation_query_count"] == 26);
  try {
    config::from_json(nlohmann::json::parse(R"({"train": {"weights": {"klass": 1}}})"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.weights.klass") != std::string::npos);
  }
  CHECK_THROWS_AS(config::from_json(nlohmann::json::parse(R"({"seed": "x"})")), ConfigError);
  config::RunConfig c;
  config::apply_ablation(c, "stt=off,fca=off");
  CHECK_FALSE(c.model.fca);
  CHECK_FALSE(c.tracker.carry_queries);
  CHECK(c.train.ablate.ta);
  CHECK_THROWS_AS(config::apply_ablation(c, "xyz=on"), ConfigError);
  c.run_index = 3;
  CHECK(c.train_seed() != config::RunConfig{}.train_seed());
}

TEST_CASE("cli: usage errors exit 2") {
  write_toy_config();
  CHECK(cli("").code == 2);
  CHECK(cli("frobnicate").code == 2);
  std::ofstream(kScratch / "bad.json") << R"({"growth": {"bogus_key": 1}})";
  const auto r = cli("--config bad.json generate");
  CHECK(r.code == 2);
  CHECK(r.out.find("growth.bogus_key") != std::string::npos);
  CHECK(cli("--config toy.json --ablate stt=maybe generate").code == 2);
}

TEST_CASE("cli: generate, train, resume, track, eval, report") {
  write_toy_config(20);
  fs::remove_all(kScratch / "data");
  fs::remove_all(kScratch / "runs");

  // generate: 6 samples, reproducible manifest
  REQUIRE(cli("--config toy.json generate").code == 0);
  const auto manifest = synth::read_manifest((kScratch / "data/toy").string());
  CHECK(manifest.entries.size() == 6);
  REQUIRE(cli("--config toy.json generate --out data/again").code == 0);
  CHECK(slurp(kScratch / "data/toy/manifest.txt") == slurp(kScratch / "data/again/manifest.txt"));

  // train: layout, frozen config, finite loss
  const auto tr = cli("--config toy.json train");
  REQUIRE(tr.code == 0);
  const fs::path run = kScratch / "runs/toy-r0";
  for (const char* sub : {"config", "checkpoints", "logs", "predictions", "reports"}) CHECK(fs::is_directory(run / sub));
  CHECK(fs::exists(run / "checkpoints/iter_000010.ckpt"));
  CHECK(fs::exists(run / "checkpoints/last.ckpt"));
  const auto frozen = nlohmann::json::parse(slurp(run / "config/resolved.json"));
  CHECK(frozen["train"]["ablate"]["stt"] == true);
  const auto full_log = log_rows_without_clock(run / "logs/train.tsv");
  REQUIRE(full_log.size() == 21);
  const double final_loss = std::stod(full_log.back().substr(full_log.back().find('\t') + 1));
  CHECK(std::isfinite(final_loss));

  // a second train into the same run is refused; resume from iteration 10
  // regenerates the same trace
  CHECK(cli("--config toy.json train").code == 2);
  fs::copy_file(run / "checkpoints/iter_000010.ckpt", run / "checkpoints/last.ckpt",
                fs::copy_options::overwrite_existing);
  REQUIRE(cli("--config toy.json train --resume").code == 0);
  CHECK(log_rows_without_clock(run / "logs/train.tsv") == full_log);
  CHECK(cli("--config toy.json --seed 99 train --resume").code == 2);

  // ablation flag reaches the trainer and the checkpoint
  REQUIRE(cli("--config toy.json --ablate stt=off --run-index 1 train --iterations 2").code == 0);
  const auto info = train::read_checkpoint_info((kScratch / "runs/toy-r1/checkpoints/last.ckpt").string());
  CHECK_FALSE(info.ablate.stt);
  CHECK(info.ablate.fca);

  // track: usage error without a root, single mode, batch mode
  const std::string vol = "data/toy/" + manifest.split("test")[0].volume_path;
  CHECK(cli("--config toy.json track --volume " + vol + " --out one.trex").code == 2);
  REQUIRE(cli("--config toy.json track --volume " + vol + " --root 20,30,30 --out one.trex").code == 0);
  CHECK(tree::validate_tree(tree::read_tree_file((kScratch / "one.trex").string())).ok());
  REQUIRE(cli("--config toy.json track --dataset data/toy --trace trace.jsonl").code == 0);
  CHECK(fs::exists(run / "predictions/test_0000.trex"));
  CHECK(std::distance(fs::directory_iterator(run / "predictions"), fs::directory_iterator{}) == 1);
  const auto trace = slurp(kScratch / "trace.jsonl");
  CHECK(trace.find("\"call\":0") != std::string::npos);

  // eval: ground truth against itself is perfect, model predictions score
  REQUIRE(cli("--config toy.json eval --pred data/toy/graphs --split train --out self").code == 0);
  const auto self = nlohmann::json::parse(slurp(kScratch / "self/metrics.json"));
  CHECK(self["summary"]["point_f1"] == 1.0);
  CHECK(self["summary"]["branch_f1"] == 1.0);
  CHECK(self["summary"]["betti0_mae"] == 0.0);
  CHECK(fs::exists(kScratch / "self/plots/train_0003.svg"));
  CHECK(fs::exists(kScratch / "self/metrics.txt"));
  CHECK(fs::exists(kScratch / "self/per_sample.csv"));
  REQUIRE(cli("--config toy.json eval").code == 0);
  CHECK(fs::exists(run / "reports/metrics.json"));

  // a missing prediction counts as empty with a warning
  fs::create_directories(kScratch / "nopred");
  const auto miss = cli("--config toy.json eval --pred nopred --out nopred_report");
  REQUIRE(miss.code == 0);
  CHECK(miss.out.find("warning: missing prediction for 'test_0000'") != std::string::npos);
  const auto empty = nlohmann::json::parse(slurp(kScratch / "nopred_report/metrics.json"));
  CHECK(empty["summary"]["point_precision"] == 0.0);
  CHECK(empty["summary"]["point_recall"] == 0.0);

  // report: five synthetic run files with known point F1
  std::vector<double> f1{0.70, 0.72, 0.74, 0.76, 0.78};
  std::string args;
  for (std::size_t k = 0; k < f1.size(); ++k) {
    const fs::path p = kScratch / ("run" + std::to_string(k) + ".json");
    std::ofstream(p) << nlohmann::json{{"summary", {{"point_f1", f1[k]}, {"betti0_mae", 0.0}}}}.dump();
    args += " " + p.filename().string();
  }
  const auto rep = cli("--config toy.json report" + args + " --out agg.json");
  REQUIRE(rep.code == 0);
  const auto agg = nlohmann::json::parse(slurp(kScratch / "agg.json"));
  CHECK(agg["point_f1"]["mean"].get<double>() == doctest::Approx(0.74));
  CHECK(agg["point_f1"]["std"].get<double>() == doctest::Approx(std::sqrt(0.001)));
  CHECK(rep.out.find("74.00 ± 3.16") != std::string::npos);

  // the run root can be moved with the environment variable
  const auto moved = cli("--config toy.json report", "TREXSUPER_RUNS_DIR=elsewhere");
  CHECK(moved.code == 2);
  fs::create_directories(kScratch / "elsewhere/toy-r0");
  fs::copy(run / "reports", kScratch / "elsewhere/toy-r0/reports", fs::copy_options::recursive);
  CHECK(cli("--config toy.json report", "TREXSUPER_RUNS_DIR=elsewhere").code == 0);

  // runtime failures exit 1
  std::ofstream(kScratch / "broken.ckpt") << "not a checkpoint";
  CHECK(cli("--config toy.json track --checkpoint broken.ckpt --dataset data/toy").code == 1);

  fs::remove_all(kScratch);
}
