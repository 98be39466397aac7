#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "eps/cli.hpp"

namespace fs = std::filesystem;

namespace {

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"eps"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return eps::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_mini_config() {
  const fs::path dir = fs::temp_directory_path() / "eps_cli_test";
  fs::create_directories(dir);
  const fs::path path = dir / "mini.json";
  std::ofstream out(path);
  out << R"({
    "schema_version": 1,
    "name": "mini",
    "model": {"uniform": {"layers": 8, "attention_params": 2000000,
                           "mlp_params": 2000000, "activation_bytes": 500000}},
    "cluster": {"nodes": 2, "gpus_per_node": 4},
    "training": {"per_pipeline_batch": 32, "epochs": 4,
                  "iterations_per_epoch": 8, "alpha": 0.4,
                  "lambda_frozen": 0.1},
    "seed": 11
  })";
  return path;
}

}  // namespace

TEST_CASE("run writes the report bundle and exits cleanly") {
  const fs::path cfg = write_mini_config();
  const fs::path out = cfg.parent_path() / "out_run";
  REQUIRE(cli({"run", "--config", cfg.string(), "--out", out.string()}) == 0);
  for (const char* name :
       {"report.csv", "timeline.json", "summary.json", "transitions.jsonl"}) {
    CHECK(fs::exists(out / name));
  }
  const std::string csv = slurp(out / "report.csv");
  // Header plus one row per epoch.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("identical seeds give byte-identical reports") {
  const fs::path cfg = write_mini_config();
  const fs::path out_a = cfg.parent_path() / "out_a";
  const fs::path out_b = cfg.parent_path() / "out_b";
  REQUIRE(cli({"run", "--config", cfg.string(), "--out", out_a.string(),
               "--seed", "99"}) == 0);
  REQUIRE(cli({"run", "--config", cfg.string(), "--out", out_b.string(),
               "--seed", "99"}) == 0);
  CHECK(slurp(out_a / "report.csv") == slurp(out_b / "report.csv"));
  CHECK(slurp(out_a / "timeline.json") == slurp(out_b / "timeline.json"));
}

TEST_CASE("baseline flags reproduce the static run") {
  const fs::path cfg = write_mini_config();
  const fs::path out = cfg.parent_path() / "out_baseline";
  REQUIRE(cli({"run", "--config", cfg.string(), "--out", out.string(),
               "--flags", "baseline"}) == 0);
  const std::string csv = slurp(out / "report.csv");
  // Every epoch keeps the initial K of 4 and zero frozen layers.
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);  // header
  while (std::getline(lines, line)) {
    CHECK(line.find(",0,4,2,") != std::string::npos);
  }
}

TEST_CASE("a missing config file is an IO failure") {
  CHECK(cli({"run", "--config", "/nonexistent/nope.json"}) == 3);
}

TEST_CASE("invalid JSON and bad flags are validation failures") {
  const fs::path dir = fs::temp_directory_path() / "eps_cli_test";
  fs::create_directories(dir);
  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << "{ not json";
  CHECK(cli({"run", "--config", bad.string()}) == 2);

  const fs::path cfg = write_mini_config();
  CHECK(cli({"run", "--config", cfg.string(), "--flags", "warp"}) == 2);
  CHECK(cli({"run"}) == 2);  // missing required --config
}

TEST_CASE("alpha sweeps write one row per value") {
  const fs::path cfg = write_mini_config();
  const fs::path out = cfg.parent_path() / "out_sweep";
  REQUIRE(cli({"sweep", "--config", cfg.string(), "--out", out.string(),
               "--sweep", "alpha", "--values", "0.2,0.4"}) == 0);
  const std::string csv = slurp(out / "sweep_alpha.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.rfind("alpha,speedup,", 0) == 0);
}

TEST_CASE("chunk sweeps tabulate the optimal M per pipeline length") {
  const fs::path cfg = write_mini_config();
  const fs::path out = cfg.parent_path() / "out_chunks";
  REQUIRE(cli({"sweep", "--config", cfg.string(), "--out", out.string(),
               "--sweep", "chunks", "--values", "1,2,4"}) == 0);
  const std::string csv = slurp(out / "sweep_chunks.csv");
  // 6 + 11 + 21 rows plus the header.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 39);
  CHECK(csv.find(",1\n") != std::string::npos);
}

TEST_CASE("an unknown sweep axis fails validation") {
  const fs::path cfg = write_mini_config();
  CHECK(cli({"sweep", "--config", cfg.string(), "--sweep", "turbo",
             "--values", "1"}) == 2);
}
