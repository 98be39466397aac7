#include "eps/cost_model.hpp"

#include <stdexcept>

namespace eps {

void CostModel::validate() const {
  if (c_fwd <= 0) throw std::invalid_argument("cost_model: c_fwd must be positive");
  if (backward_ratio <= 0)
    throw std::invalid_argument("cost_model: backward_ratio must be positive");
  if (c_update < 0)
    throw std::invalid_argument("cost_model: c_update must be >= 0");
  if (per_microbatch_overhead < 0)
    throw std::invalid_argument("cost_model: per_microbatch_overhead must be >= 0");
  if (allreduce_bucket_bytes <= 0)
    throw std::invalid_argument("cost_model: allreduce_bucket_bytes must be positive");
  if (comm_latency < 0)
    throw std::invalid_argument("cost_model: comm_latency must be >= 0");
  for (const auto& [key, value] : transition_overheads) {
    if (value < 0)
      throw std::invalid_argument("cost_model: transition overhead '" + key +
                                  "' must be >= 0");
  }
}

double CostModel::transition_overhead(int old_k, int new_k) const {
  const std::string key = std::to_string(old_k) + "->" + std::to_string(new_k);
  auto it = transition_overheads.find(key);
  return it == transition_overheads.end() ? 0.0 : it->second;
}

double CostModel::init_overhead() const {
  auto it = transition_overheads.find("init");
  return it == transition_overheads.end() ? 0.0 : it->second;
}

double transfer_time(double bytes, double bandwidth, double latency) {
  if (bandwidth <= 0) throw std::invalid_argument("transfer_time: bandwidth must be positive");
  return bytes / bandwidth + latency;
}

double ring_allreduce_time(double bytes, int width, double bandwidth,
                           double latency) {
  if (width < 2) return 0.0;
  const double factor = 2.0 * (width - 1) / static_cast<double>(width);
  return factor * bytes / bandwidth + latency;
}

}  // namespace eps
