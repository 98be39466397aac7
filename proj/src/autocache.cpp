#include "eps/autocache.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <stdexcept>

namespace eps {

void CacheTierParams::validate() const {
  if (host_bandwidth <= 0 || disk_bandwidth <= 0)
    throw std::invalid_argument("cache: tier bandwidths must be positive");
  if (host_capacity_bytes <= 0)
    throw std::invalid_argument("cache: host_capacity_bytes must be positive");
  if (block_batches < 1)
    throw std::invalid_argument("cache: block_batches must be >= 1");
  if (window_batches < block_batches)
    throw std::invalid_argument("cache: window must be >= block size");
  if (read_latency < 0)
    throw std::invalid_argument("cache: read_latency must be >= 0");
}

double cache_read_seconds_per_sample(const ModelSpec& model, int boundary_layer,
                                     const CacheTierParams& tiers) {
  if (boundary_layer <= 0) return 0.0;
  const double bytes =
      static_cast<double>(model.boundary_bytes(2 * boundary_layer));
  return bytes / tiers.host_bandwidth + tiers.read_latency;
}

CacheDecision should_cache(int l_frozen, const ModelSpec& model,
                           const CostModel& cm, const CacheTierParams& tiers,
                           double microbatch_samples) {
  CacheDecision d;
  d.read_seconds_per_microbatch =
      cache_read_seconds_per_sample(model, l_frozen, tiers) * microbatch_samples;
  d.forward_seconds_per_microbatch =
      cm.c_fwd * static_cast<double>(model.prefix_params(l_frozen)) *
      microbatch_samples;
  d.enable = l_frozen > 0 &&
             d.read_seconds_per_microbatch < d.forward_seconds_per_microbatch;
  return d;
}

std::pair<CacheState, CacheTransitionCost> cache_transition(
    const CacheState& state, int old_boundary, int new_boundary,
    const ModelSpec& model, const CostModel& cm) {
  if (new_boundary < old_boundary)
    throw std::domain_error("cache_transition: boundary may only move forward");
  CacheTransitionCost cost;
  if (new_boundary > old_boundary) {
    if (state.enabled && old_boundary > 0) {
      cost.read_seconds_per_sample =
          cache_read_seconds_per_sample(model, old_boundary, state.tiers);
    }
    cost.compute_seconds_per_sample =
        cm.c_fwd * static_cast<double>(model.prefix_params(new_boundary) -
                                       model.prefix_params(old_boundary));
    cost.write_seconds_per_sample =
        static_cast<double>(model.boundary_bytes(2 * new_boundary)) /
        state.tiers.host_bandwidth;
  }
  CacheState next = state;
  next.enabled = true;
  next.boundary_layer = new_boundary;
  return {next, cost};
}

CacheTierSim::CacheTierSim(const CacheTierParams& tiers, double bytes_per_batch,
                           int total_batches)
    : tiers_(tiers), bytes_per_batch_(bytes_per_batch),
      total_batches_(total_batches) {
  tiers_.validate();
  if (bytes_per_batch <= 0)
    throw std::invalid_argument("cache tier: bytes_per_batch must be positive");
  if (total_batches < 1)
    throw std::invalid_argument("cache tier: total_batches must be >= 1");
  total_blocks_ = (total_batches_ + tiers_.block_batches - 1) / tiers_.block_batches;
  const double capacity_batches = tiers_.host_capacity_bytes / bytes_per_batch_;
  const int window_by_capacity =
      capacity_batches >= static_cast<double>(std::numeric_limits<int>::max())
          ? std::numeric_limits<int>::max()
          : static_cast<int>(std::floor(capacity_batches));
  const int window = std::min(tiers_.window_batches, window_by_capacity);
  if (window < tiers_.block_batches)
    throw std::invalid_argument(
        "cache tier: host capacity cannot hold a single prefetch block");
  window_blocks_ = window / tiers_.block_batches;
  sliding_ = total_batches_ > window;
  fetch_complete_.assign(total_blocks_, -1.0);
  // The leading window is staged before the epoch's first batch.
  const int staged = sliding_ ? window_blocks_ : total_blocks_;
  for (int b = 0; b < staged; ++b) fetch_complete_[b] = 0.0;
  next_to_fetch_ = staged;
  max_resident_bytes_ = resident_bytes();
}

int CacheTierSim::block_batch_count(int block) const {
  const int first = block * tiers_.block_batches;
  return std::min(tiers_.block_batches, total_batches_ - first);
}

double CacheTierSim::resident_bytes() const {
  double bytes = 0.0;
  for (int b = lowest_resident_; b < next_to_fetch_; ++b)
    bytes += block_batch_count(b) * bytes_per_batch_;
  return bytes;
}

void CacheTierSim::issue_prefetches(double now, WindowStep& step) {
  while (next_to_fetch_ < total_blocks_ &&
         next_to_fetch_ - lowest_resident_ < window_blocks_) {
    const double bytes = block_batch_count(next_to_fetch_) * bytes_per_batch_;
    const double duration = bytes / tiers_.disk_bandwidth;
    const double start = std::max(disk_free_, now);
    disk_free_ = start + duration;
    fetch_complete_[next_to_fetch_] = disk_free_;
    step.actions.push_back(
        {TierAction::Kind::kPrefetch, next_to_fetch_, bytes, duration});
    ++next_to_fetch_;
    max_resident_bytes_ = std::max(max_resident_bytes_, resident_bytes());
  }
}

WindowStep CacheTierSim::advance(int next_batch_index, double now) {
  if (next_batch_index != expected_batch_)
    throw std::domain_error("cache tier: batches must be consumed in order");
  if (next_batch_index >= total_batches_)
    throw std::domain_error("cache tier: batch index beyond epoch");
  ++expected_batch_;

  WindowStep step;
  if (!sliding_) return step;  // everything resident, the window never moves

  const int block = block_of(next_batch_index);
  while (lowest_resident_ < block) {
    const double bytes = block_batch_count(lowest_resident_) * bytes_per_batch_;
    step.actions.push_back({TierAction::Kind::kEvict, lowest_resident_, bytes, 0.0});
    ++lowest_resident_;
  }
  issue_prefetches(now, step);
  const double stall = std::max(0.0, fetch_complete_[block] - now);
  if (stall > 0.0) {
    step.actions.push_back({TierAction::Kind::kStall, block,
                            block_batch_count(block) * bytes_per_batch_, stall});
    step.stall_seconds = stall;
    total_stall_ += stall;
  }
  return step;
}

}  // namespace eps
