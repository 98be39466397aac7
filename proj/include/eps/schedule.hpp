#pragma once

#include <cstdint>
#include <vector>

#include "eps/autopipe.hpp"
#include "eps/cost_model.hpp"
#include "eps/model.hpp"

namespace eps {

enum class BlockKind { kForward, kBackward, kUpdate, kTransfer, kAllReduce };

struct TimedBlock {
  int device = 0;  // -1 marks the shared communication track
  BlockKind kind = BlockKind::kForward;
  double start = 0.0;
  double end = 0.0;
  int micro_batch = -1;
  int bucket = -1;
};

// Per-device compute load for one pipeline stage, per sample. Stage 0's
// prefix covers whatever happens before its first active sublayer: frozen
// forward compute or a cache read.
struct StageLoad {
  double fwd_params = 0.0;
  double bwd_params = 0.0;
  double prefix_seconds_per_sample = 0.0;
  double in_bytes_per_sample = 0.0;  // activation crossing the cut into this stage
};

struct ScheduleRequest {
  std::vector<StageLoad> stages;
  int micro_batches = 1;  // M; micro-batch *sizes* stay fluid (batch / M samples)
  double per_pipeline_batch = 1.0;
  bool integer_microbatches = false;  // split the batch into whole samples instead
  int replica_width = 1;          // R
  bool group_spans_nodes = false;  // picks inter- vs intra-node AllReduce link
  double intra_bandwidth = 1.0;
  double inter_bandwidth = 1.0;
  int bytes_per_param = 4;
};

struct IterationSchedule {
  std::vector<TimedBlock> blocks;
  double makespan = 0.0;
  double compute_makespan = 0.0;      // last backward end
  double makespan_without_ar = 0.0;   // same schedule with AllReduce removed
  std::vector<double> bubble_per_device;
  double total_bubble = 0.0;
  double allreduce_seconds = 0.0;     // summed bucket durations
  double transfer_seconds = 0.0;      // summed point-to-point transfer time
  double compute_seconds = 0.0;       // summed F/B busy time
  double exposed_comm = 0.0;          // makespan - makespan_without_ar
};

// Builds the synchronous GPipe iteration: forwards fill in micro-batch
// order, backwards drain in reverse, buckets AllReduce in reverse parameter
// order on a separate track, updates wait for both.
IterationSchedule build_schedule(const ScheduleRequest& req, const CostModel& cm);

// Stage loads for a partition plan: forward covers the stage's active
// params, backward the same set scaled by the backward ratio, and stage 0
// carries the frozen prefix (forward compute, or `cache_read_seconds_per_sample`
// when a cache serves the frozen boundary).
std::vector<StageLoad> stage_loads(const PartitionPlan& plan,
                                   const ModelSpec& model,
                                   const SublayerSeq& seq,
                                   bool cache_enabled,
                                   double cache_read_seconds_per_sample,
                                   const CostModel& cm);

// Spec-level entry point: schedule one iteration of `plan` with M
// micro-batches and R data-parallel replicas.
IterationSchedule schedule_iteration(const PartitionPlan& plan,
                                     const ModelSpec& model,
                                     const SublayerSeq& seq, int micro_batches,
                                     double per_pipeline_batch, int replica_width,
                                     const ClusterSpec& cluster,
                                     const CostModel& cm, bool cache_enabled,
                                     double cache_read_seconds_per_sample);

double exposed_comm(const IterationSchedule& schedule);

}  // namespace eps
