#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eps/autopipe.hpp"
#include "eps/model.hpp"

namespace eps {

struct GpuSpan {
  int first = 0;
  int length = 0;
};

// Cluster-wide rank state under a pipeline length K. Every GPU hosts one
// process (global rank = node_rank * I + local_rank); a rank is active, i.e.
// drives a pipeline, iff its local rank is a multiple of K. The message
// group spans all ranks forever; the training group is exactly the active
// set and is rebuilt on every transition.
class Topology {
 public:
  Topology(const ClusterSpec& cluster, int pipeline_length);

  const ClusterSpec& cluster() const { return cluster_; }
  int pipeline_length() const { return k_; }
  int replica_width() const;  // R = N * I / K
  bool group_spans_nodes() const { return cluster_.node_count >= 2; }

  std::vector<int> active_ranks() const;       // the training group
  std::vector<int> message_group() const;      // all ranks, never changes
  bool is_active(int global_rank) const;
  int node_rank(int global_rank) const;
  int local_rank(int global_rank) const;
  GpuSpan gpu_span(int global_rank) const;     // devices of this rank's pipeline

  void validate() const;  // throws std::logic_error on invariant breakage

 private:
  ClusterSpec cluster_;
  int k_;
};

// State a newly activated replica needs before it may join the training
// group.
struct TransitionMessage {
  int sender = 0;
  int receiver = 0;
  int epoch = 0;
  double lr_schedule_position = 0.0;
  int frozen_layers = 0;
  int new_pipeline_length = 0;
  GpuSpan assigned_span;
  std::string weights_version;
};

struct TrainingProgress {
  int epoch = 0;
  double lr_schedule_position = 0.0;
  int frozen_layers = 0;
  std::string weights_version = "v0";
};

struct TransitionResult {
  Topology topology;
  std::vector<TransitionMessage> messages;
};

// Grows data-parallel width by re-activating ranks under a shorter pipeline.
// Each surviving active rank messages the ranks it activates inside its old
// GPU span. new_k == K is a no-op; new_k > K (shrinking width) is rejected.
TransitionResult transition(const Topology& topology, int new_k,
                            const TrainingProgress& progress);

struct ShardAssignment {
  int epoch = 0;
  std::uint64_t seed = 0;
  std::vector<int> ranks;                            // active ranks, ordered
  std::vector<std::vector<std::int64_t>> shards;     // per active rank
};

// Deterministic per-node redistribution: node n owns {i : i mod N == n}
// forever (cache locality across epochs); the node subset is shuffled by
// (seed, epoch, node) and split contiguously across the node's active ranks,
// sizes differing by at most one.
ShardAssignment redistribute(std::int64_t dataset_size, const Topology& topology,
                             int epoch, std::uint64_t seed);

struct DdpParticipants {
  std::vector<int> sublayer_global_indices;
  std::int64_t param_count = 0;
};

// Parameters that take part in gradient synchronization: exactly the active
// sublayers; the frozen block never enters a bucket.
DdpParticipants ddp_skip_set(const PartitionPlan& plan, const SublayerSeq& seq);

}  // namespace eps
