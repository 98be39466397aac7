#pragma once

#include <cstdint>
#include <vector>

#include "eps/cost_model.hpp"
#include "eps/model.hpp"

namespace eps {

struct CacheTierParams {
  double host_bandwidth = 3.05e9;   // bytes/s served from the daemon's store
  double disk_bandwidth = 6.0e9;    // bytes/s for block prefetch
  double host_capacity_bytes = 64e9;
  int window_batches = 64;          // max batches resident in the host tier
  int block_batches = 8;            // batches per prefetch
  double read_latency = 0.0;        // s per sample of daemon access latency

  void validate() const;  // throws std::invalid_argument
};

struct CacheState {
  bool enabled = false;
  int boundary_layer = 0;  // activations cached at this frozen boundary
  CacheTierParams tiers;
};

struct CacheDecision {
  bool enable = false;
  double read_seconds_per_microbatch = 0.0;
  double forward_seconds_per_microbatch = 0.0;
};

// Cache read seconds per sample at a frozen boundary.
double cache_read_seconds_per_sample(const ModelSpec& model, int boundary_layer,
                                     const CacheTierParams& tiers);

// Enable iff reading boundary activations beats recomputing the frozen
// prefix. Both sides scale with the micro-batch, so the verdict is size
// independent; the sizes are reported for the profiler's sake.
CacheDecision should_cache(int l_frozen, const ModelSpec& model,
                           const CostModel& cm, const CacheTierParams& tiers,
                           double microbatch_samples);

struct CacheTransitionCost {
  double read_seconds_per_sample = 0.0;    // old boundary activations
  double compute_seconds_per_sample = 0.0; // forward of [old, new)
  double write_seconds_per_sample = 0.0;   // new boundary activations
  double total_per_sample() const {
    return read_seconds_per_sample + compute_seconds_per_sample +
           write_seconds_per_sample;
  }
  // The daemon persists writes off the training loop's critical path.
  double critical_path_per_sample() const {
    return read_seconds_per_sample + compute_seconds_per_sample;
  }
};

// Moves the cached boundary forward without ever running a sample through a
// frozen layer twice: read at the old boundary, forward the delta, store at
// the new boundary. A previously disabled cache (or boundary 0) reads
// nothing.
std::pair<CacheState, CacheTransitionCost> cache_transition(
    const CacheState& state, int old_boundary, int new_boundary,
    const ModelSpec& model, const CostModel& cm);

struct TierAction {
  enum class Kind { kPrefetch, kEvict, kStall };
  Kind kind = Kind::kPrefetch;
  int block = 0;
  double bytes = 0.0;
  double duration = 0.0;
};

struct WindowStep {
  std::vector<TierAction> actions;
  double stall_seconds = 0.0;
};

// Hierarchical sliding-window tier simulation for one epoch of in-order
// batch consumption. The host tier holds at most `window` batches (further
// capped by host_capacity); prefetch moves whole blocks from the disk tier,
// one at a time. The leading window is staged before the epoch starts.
class CacheTierSim {
 public:
  CacheTierSim(const CacheTierParams& tiers, double bytes_per_batch,
               int total_batches);

  // Consume `next_batch_index` at wall-clock `now`; batches must arrive in
  // order. Returns evictions/prefetch issues and any stall waiting for the
  // batch's block.
  WindowStep advance(int next_batch_index, double now);

  bool sliding() const { return sliding_; }
  double total_stall() const { return total_stall_; }
  double resident_bytes() const;
  double max_resident_bytes() const { return max_resident_bytes_; }

 private:
  void issue_prefetches(double now, WindowStep& step);

  CacheTierParams tiers_;
  double bytes_per_batch_;
  int total_batches_;
  int total_blocks_;
  int window_blocks_;
  bool sliding_ = false;
  int next_to_fetch_ = 0;
  int lowest_resident_ = 0;
  double disk_free_ = 0.0;
  double total_stall_ = 0.0;
  double max_resident_bytes_ = 0.0;
  std::vector<double> fetch_complete_;  // per block; -1 = not fetched
  int expected_batch_ = 0;

  int block_of(int batch) const { return batch / tiers_.block_batches; }
  int block_batch_count(int block) const;
};

}  // namespace eps
