#include "eps/autodp.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "eps/rng.hpp"

namespace eps {

Topology::Topology(const ClusterSpec& cluster, int pipeline_length)
    : cluster_(cluster), k_(pipeline_length) {
  cluster_.validate();
  if (k_ < 1) throw std::domain_error("topology: pipeline length must be >= 1");
  if (cluster_.gpus_per_node % k_ != 0)
    throw std::domain_error("topology: pipeline length must divide gpus per node");
}

int Topology::replica_width() const {
  return cluster_.node_count * (cluster_.gpus_per_node / k_);
}

std::vector<int> Topology::active_ranks() const {
  std::vector<int> out;
  const int total = cluster_.total_gpus();
  for (int r = 0; r < total; ++r) {
    if (is_active(r)) out.push_back(r);
  }
  return out;
}

std::vector<int> Topology::message_group() const {
  std::vector<int> out(cluster_.total_gpus());
  for (int r = 0; r < cluster_.total_gpus(); ++r) out[r] = r;
  return out;
}

bool Topology::is_active(int global_rank) const {
  return local_rank(global_rank) % k_ == 0;
}

int Topology::node_rank(int global_rank) const {
  if (global_rank < 0 || global_rank >= cluster_.total_gpus())
    throw std::domain_error("topology: rank out of range");
  return global_rank / cluster_.gpus_per_node;
}

int Topology::local_rank(int global_rank) const {
  if (global_rank < 0 || global_rank >= cluster_.total_gpus())
    throw std::domain_error("topology: rank out of range");
  return global_rank % cluster_.gpus_per_node;
}

GpuSpan Topology::gpu_span(int global_rank) const {
  if (!is_active(global_rank))
    throw std::domain_error("topology: inactive rank has no GPU span");
  return {local_rank(global_rank), k_};
}

void Topology::validate() const {
  const std::vector<int> active = active_ranks();
  if (static_cast<int>(active.size()) != replica_width())
    throw std::logic_error("topology: |active| != R");
  // Spans of the active ranks within a node must tile its GPUs exactly.
  for (int n = 0; n < cluster_.node_count; ++n) {
    std::vector<bool> covered(cluster_.gpus_per_node, false);
    for (int r : active) {
      if (node_rank(r) != n) continue;
      const GpuSpan span = gpu_span(r);
      for (int g = span.first; g < span.first + span.length; ++g) {
        if (g >= cluster_.gpus_per_node || covered[g])
          throw std::logic_error("topology: GPU spans overlap or overflow");
        covered[g] = true;
      }
    }
    if (!std::all_of(covered.begin(), covered.end(), [](bool c) { return c; }))
      throw std::logic_error("topology: GPU spans do not tile the node");
  }
}

TransitionResult transition(const Topology& topology, int new_k,
                            const TrainingProgress& progress) {
  const int old_k = topology.pipeline_length();
  if (new_k > old_k)
    throw std::domain_error(
        "transition: shrinking data-parallel width is unsupported");
  if (new_k < 1 || topology.cluster().gpus_per_node % new_k != 0)
    throw std::domain_error("transition: new pipeline length must divide I");

  TransitionResult res{Topology(topology.cluster(), new_k), {}};
  if (new_k == old_k) return res;

  const int fan_out = old_k / new_k;
  for (int sender : topology.active_ranks()) {
    for (int j = 1; j < fan_out; ++j) {
      const int receiver = sender + new_k * j;
      TransitionMessage msg;
      msg.sender = sender;
      msg.receiver = receiver;
      msg.epoch = progress.epoch;
      msg.lr_schedule_position = progress.lr_schedule_position;
      msg.frozen_layers = progress.frozen_layers;
      msg.new_pipeline_length = new_k;
      msg.assigned_span = res.topology.gpu_span(receiver);
      msg.weights_version = progress.weights_version;
      res.messages.push_back(msg);
    }
  }
  res.topology.validate();
  return res;
}

ShardAssignment redistribute(std::int64_t dataset_size, const Topology& topology,
                             int epoch, std::uint64_t seed) {
  const int width = topology.replica_width();
  if (dataset_size < width)
    throw std::domain_error("redistribute: dataset smaller than replica count");

  ShardAssignment out;
  out.epoch = epoch;
  out.seed = seed;
  out.ranks = topology.active_ranks();
  out.shards.resize(out.ranks.size());

  const int nodes = topology.cluster().node_count;
  for (int n = 0; n < nodes; ++n) {
    // The node's subset is fixed for the whole run; only its order changes.
    std::vector<std::int64_t> subset;
    for (std::int64_t i = n; i < dataset_size; i += nodes) subset.push_back(i);
    SplitMix64 rng(hash_combine(hash_combine(seed, static_cast<std::uint64_t>(epoch)),
                                static_cast<std::uint64_t>(n)));
    deterministic_shuffle(subset, rng);

    std::vector<int> node_rank_slots;
    for (std::size_t s = 0; s < out.ranks.size(); ++s) {
      if (topology.node_rank(out.ranks[s]) == n) node_rank_slots.push_back(static_cast<int>(s));
    }
    const std::int64_t per = static_cast<std::int64_t>(subset.size()) /
                             static_cast<std::int64_t>(node_rank_slots.size());
    const std::int64_t extra = static_cast<std::int64_t>(subset.size()) %
                               static_cast<std::int64_t>(node_rank_slots.size());
    std::int64_t cursor = 0;
    for (std::size_t j = 0; j < node_rank_slots.size(); ++j) {
      const std::int64_t len = per + (static_cast<std::int64_t>(j) < extra ? 1 : 0);
      auto& shard = out.shards[node_rank_slots[j]];
      shard.assign(subset.begin() + cursor, subset.begin() + cursor + len);
      cursor += len;
    }
  }
  return out;
}

DdpParticipants ddp_skip_set(const PartitionPlan& plan, const SublayerSeq& seq) {
  plan.validate(seq);
  DdpParticipants out;
  for (const Sublayer& sl : seq.active) {
    out.sublayer_global_indices.push_back(sl.global_index());
    out.param_count += sl.params;
  }
  return out;
}

}  // namespace eps
