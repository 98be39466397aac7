#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "eps/autodp.hpp"
#include "eps/scenario.hpp"
#include "eps/schedule.hpp"

namespace eps {

struct EpochRow {
  int epoch = 0;
  int l_frozen = 0;
  int pipeline_length = 0;   // K
  int replica_width = 0;     // R
  int micro_batches = 0;     // M
  double iteration_time = 0.0;
  double epoch_time = 0.0;
  double throughput = 0.0;   // global samples/s
  double bubble_time = 0.0;  // summed device idle per iteration
  double comm_time = 0.0;    // AllReduce seconds over the epoch
  double exposed_comm_time = 0.0;
  bool cache_enabled = false;
  double transition_overhead = 0.0;
  double cache_transition_time = 0.0;
  double stall_time = 0.0;
};

struct CacheEventLog {
  int epoch = 0;
  std::string event;  // enable|transition|prefetch|evict|stall
  double bytes = 0.0;
  double duration = 0.0;
};

struct TransitionLog {
  int epoch = 0;
  int old_k = 0;
  int new_k = 0;
  std::vector<int> activated_ranks;
  std::vector<TransitionMessage> messages;
};

struct TimelineEntry {
  int device = 0;
  std::string kind;
  double start = 0.0;
  double end = 0.0;
  std::string tag;
};

struct RunResult {
  std::vector<EpochRow> epochs;
  double total_seconds = 0.0;
  double baseline_total_seconds = 0.0;
  double speedup = 0.0;
  double comm_ratio = 0.0;  // summed comm_time / total
  // Accounting used by the never-twice check: frozen-layer forward seconds
  // charged per sample over the whole run, against one pass over the final
  // frozen prefix.
  double frozen_forward_per_sample = 0.0;
  double final_prefix_forward_per_sample = 0.0;
  std::vector<TransitionLog> transitions;
  std::vector<CacheEventLog> cache_events;
  std::vector<TimelineEntry> timeline;  // first iteration of each epoch
};

RunResult simulate_run(const ScenarioConfig& cfg);

struct BreakdownRow {
  std::string combo;
  double total_seconds = 0.0;
  double avg_throughput = 0.0;  // samples over the run / total seconds
  double speedup_vs_baseline = 0.0;
};

// Feature ladder: baseline, freeze, autopipe, autopipe+autocache,
// autopipe+autodp, all.
std::vector<BreakdownRow> speedup_breakdown(const ScenarioConfig& cfg);

std::string report_csv(const RunResult& result);
nlohmann::json timeline_to_json(const RunResult& result);
nlohmann::json summary_to_json(const ScenarioConfig& cfg, const RunResult& result);
std::string transitions_to_jsonl(const RunResult& result);

// Write-to-temp-then-rename; throws IoError.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace eps
