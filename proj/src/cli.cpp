#include "eps/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eps/chunks.hpp"
#include "eps/log.hpp"
#include "eps/runner.hpp"
#include "eps/scenario.hpp"

namespace eps {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct CommonArgs {
  std::string config_path;
  std::string flags;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

ScenarioConfig load_with_overrides(const CommonArgs& args) {
  ScenarioConfig cfg = load_scenario(args.config_path);
  if (!args.flags.empty()) {
    cfg.features = parse_flags(args.flags);
  }
  if (args.seed_set) cfg.seed = args.seed;
  cfg.validate();
  return cfg;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

int do_run(const CommonArgs& args) {
  const ScenarioConfig cfg = load_with_overrides(args);
  const RunResult result = simulate_run(cfg);
  ensure_out_dir(args.out_dir);
  write_file_atomic(args.out_dir + "/report.csv", report_csv(result));
  write_file_atomic(args.out_dir + "/timeline.json", timeline_to_json(result).dump(2) + "\n");
  write_file_atomic(args.out_dir + "/summary.json",
                    summary_to_json(cfg, result).dump(2) + "\n");
  write_file_atomic(args.out_dir + "/transitions.jsonl", transitions_to_jsonl(result));

  std::printf("scenario: %s\n", cfg.name.c_str());
  std::printf("epoch  l_frozen  K  R   M   iter_s    throughput\n");
  for (const EpochRow& r : result.epochs) {
    std::printf("%5d  %8d  %d  %-2d  %-3d %-8s %s\n", r.epoch, r.l_frozen,
                r.pipeline_length, r.replica_width, r.micro_batches,
                fmt(r.iteration_time).c_str(), fmt(r.throughput).c_str());
  }
  std::printf("total: %s s (baseline %s s), speedup %sx, comm ratio %s\n",
              fmt(result.total_seconds).c_str(),
              fmt(result.baseline_total_seconds).c_str(), fmt(result.speedup).c_str(),
              fmt(result.comm_ratio).c_str());
  std::printf("outputs: %s/report.csv timeline.json summary.json transitions.jsonl\n",
              args.out_dir.c_str());
  return 0;
}

int do_sweep(const CommonArgs& args, const std::string& axis,
             const std::vector<std::string>& values) {
  if (values.empty()) throw ConfigError("sweep: --values must not be empty");
  const ScenarioConfig cfg = load_with_overrides(args);
  ensure_out_dir(args.out_dir);
  std::string csv;

  if (axis == "alpha") {
    csv = "alpha,speedup,total_time_s,comm_ratio,final_k,final_r\n";
    for (const std::string& v : values) {
      ScenarioConfig c = cfg;
      c.training.alpha = std::stod(v);
      c.validate();
      const RunResult r = simulate_run(c);
      const EpochRow& last = r.epochs.back();
      csv += fmt(c.training.alpha) + "," + fmt(r.speedup) + "," +
             fmt(r.total_seconds) + "," + fmt(r.comm_ratio) + "," +
             std::to_string(last.pipeline_length) + "," +
             std::to_string(last.replica_width) + "\n";
      std::printf("alpha=%s speedup=%s\n", v.c_str(), fmt(r.speedup).c_str());
    }
  } else if (axis == "chunks") {
    csv = "k,m,iteration_time_s,is_optimal\n";
    for (const std::string& v : values) {
      const int k = std::stoi(v);
      if (k < 1 || (k & (k - 1)) != 0 || k > cfg.cluster.gpus_per_node)
        throw ConfigError("sweep chunks: K must be a power of two <= gpus_per_node");
      const SublayerSeq seq = m_partition(cfg.model, 0);
      const PartitionPlan plan =
          load_balance(seq, k, cfg.training.lambda_frozen, cfg.balance_criterion);
      const int r = Topology(cfg.cluster, k).replica_width();
      const ChunkProfile profile = optimal_chunks(
          plan, cfg.model, seq, cfg.training.per_pipeline_batch, r, cfg.cluster,
          cfg.cost, false, 0.0);
      for (const auto& [m, t] : profile.modeled_times) {
        csv += std::to_string(k) + "," + std::to_string(m) + "," + fmt(t) + "," +
               (m == profile.chosen ? "1" : "0") + "\n";
      }
      std::printf("K=%d optimal M=%d (%s s)\n", k, profile.chosen,
                  fmt(profile.chosen_time).c_str());
    }
  } else if (axis == "bandwidth") {
    csv = "inter_node_bandwidth,comm_ratio,speedup,total_time_s\n";
    for (const std::string& v : values) {
      ScenarioConfig c = cfg;
      c.cluster.inter_node_bandwidth = std::stod(v);
      c.validate();
      const RunResult r = simulate_run(c);
      csv += fmt(c.cluster.inter_node_bandwidth) + "," + fmt(r.comm_ratio) + "," +
             fmt(r.speedup) + "," + fmt(r.total_seconds) + "\n";
      std::printf("bw=%s comm_ratio=%s\n", v.c_str(), fmt(r.comm_ratio).c_str());
    }
  } else {
    throw ConfigError("sweep: axis must be alpha|chunks|bandwidth");
  }

  const std::string path = args.out_dir + "/sweep_" + axis + ".csv";
  write_file_atomic(path, csv);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"elastic pipeline training simulator"};
  app.require_subcommand(1);

  CommonArgs run_args;
  CLI::App* run_cmd = app.add_subcommand("run", "simulate one scenario");
  run_cmd->add_option("--config", run_args.config_path, "scenario JSON")->required();
  run_cmd->add_option("--flags", run_args.flags,
                      "feature list: baseline|all|freeze,autopipe,autodp,autocache");
  run_cmd->add_option("--out", run_args.out_dir, "output directory");
  run_cmd->add_option("--seed", run_args.seed, "override scenario seed")
      ->each([&](const std::string&) { run_args.seed_set = true; });

  CommonArgs sweep_args;
  std::string axis;
  std::vector<std::string> values;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a scenario sweep");
  sweep_cmd->add_option("--config", sweep_args.config_path, "scenario JSON")->required();
  sweep_cmd->add_option("--flags", sweep_args.flags, "feature list");
  sweep_cmd->add_option("--out", sweep_args.out_dir, "output directory");
  sweep_cmd->add_option("--seed", sweep_args.seed, "override scenario seed")
      ->each([&](const std::string&) { sweep_args.seed_set = true; });
  sweep_cmd->add_option("--sweep", axis, "axis: alpha|chunks|bandwidth")->required();
  sweep_cmd->add_option("--values", values, "comma separated values")
      ->required()
      ->delimiter(',');

  try {
    app.parse(argc, argv);
    if (run_cmd->parsed()) return do_run(run_args);
    return do_sweep(sweep_args, axis, values);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a validation failure
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace eps
