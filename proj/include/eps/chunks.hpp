#pragma once

#include <vector>

#include "eps/schedule.hpp"

namespace eps {

struct ChunkProfile {
  std::vector<std::pair<int, double>> modeled_times;  // (M, iteration seconds)
  int chosen = 1;
  double chosen_time = 0.0;
};

// Profiles the modeled iteration time for every M in {K, ..., 6K} and picks
// the argmin, ties toward the smallest M.
ChunkProfile optimal_chunks(const PartitionPlan& plan, const ModelSpec& model,
                            const SublayerSeq& seq, double per_pipeline_batch,
                            int replica_width, const ClusterSpec& cluster,
                            const CostModel& cm, bool cache_enabled,
                            double cache_read_seconds_per_sample);

}  // namespace eps
