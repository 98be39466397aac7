#include "eps/chunks.hpp"

namespace eps {

ChunkProfile optimal_chunks(const PartitionPlan& plan, const ModelSpec& model,
                            const SublayerSeq& seq, double per_pipeline_batch,
                            int replica_width, const ClusterSpec& cluster,
                            const CostModel& cm, bool cache_enabled,
                            double cache_read_sec_per_sample) {
  const int k = plan.pipeline_length;
  ChunkProfile profile;
  profile.modeled_times.reserve(5 * k + 1);
  for (int m = k; m <= 6 * k; ++m) {
    const IterationSchedule s = schedule_iteration(
        plan, model, seq, m, per_pipeline_batch, replica_width, cluster, cm,
        cache_enabled, cache_read_sec_per_sample);
    profile.modeled_times.emplace_back(m, s.makespan);
    if (profile.modeled_times.size() == 1 || s.makespan < profile.chosen_time) {
      profile.chosen = m;
      profile.chosen_time = s.makespan;
    }
  }
  return profile;
}

}  // namespace eps
