#pragma once

#include <map>
#include <string>

namespace eps {

// Calibrated rates for the analytic cost model. Defaults reproduce the
// reference arithmetic: a 12M-parameter layer forward takes ~35 ms at batch
// 300, and a 0.63 GB tensor crosses a 15.754 GB/s link in ~40 ms.
struct CostModel {
  double c_fwd = 0.035 / (12.0e6 * 300.0);  // s per (param * sample)
  double backward_ratio = 2.0;              // backward = ratio * forward
  double c_update = 1.0e-11;                // s per updated param
  double per_microbatch_overhead = 2.0e-4;  // s added to every F/B block
  double allreduce_bucket_bytes = 25.0e6;
  double comm_latency = 0.0;                // s per transfer or bucket
  // Seconds charged once per pipeline transformation, keyed "8->4" etc.;
  // "init" is charged at run start.
  std::map<std::string, double> transition_overheads;

  void validate() const;  // throws std::invalid_argument
  double transition_overhead(int old_k, int new_k) const;
  double init_overhead() const;
};

// bytes/bandwidth + latency.
double transfer_time(double bytes, double bandwidth, double latency);

// Ring AllReduce across `width` replicas: 2(R-1)/R * bytes / bandwidth.
double ring_allreduce_time(double bytes, int width, double bandwidth,
                           double latency);

}  // namespace eps
