#include "eps/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace eps {

namespace {

struct Bucket {
  double bytes = 0.0;
  int lowest_stage = 0;  // backward reaches this stage last
  double ready = 0.0;
};

}  // namespace

IterationSchedule build_schedule(const ScheduleRequest& req, const CostModel& cm) {
  const int k = static_cast<int>(req.stages.size());
  const int m = req.micro_batches;
  if (k < 1) throw std::domain_error("schedule: needs at least one stage");
  if (m < 1) throw std::domain_error("schedule: micro-batch count must be >= 1");

  // Micro-batch sizes: fluid (equal, possibly fractional samples) or whole
  // samples with the remainder spread over the leading micro-batches.
  std::vector<double> sizes(m, req.per_pipeline_batch / m);
  if (req.integer_microbatches) {
    const auto batch = static_cast<long long>(std::llround(req.per_pipeline_batch));
    const long long base = batch / m;
    const long long rem = batch % m;
    for (int b = 0; b < m; ++b) sizes[b] = static_cast<double>(base + (b < rem ? 1 : 0));
  }

  IterationSchedule out;
  std::vector<std::vector<double>> f_end(k, std::vector<double>(m, 0.0));
  std::vector<std::vector<double>> b_end(k, std::vector<double>(m, 0.0));
  std::vector<double> busy(k, 0.0);

  auto fwd_dur = [&](int d, int b) {
    const StageLoad& s = req.stages[d];
    const double work =
        (cm.c_fwd * s.fwd_params + s.prefix_seconds_per_sample) * sizes[b];
    const bool has_work = s.fwd_params > 0 || s.prefix_seconds_per_sample > 0;
    return work + (has_work ? cm.per_microbatch_overhead : 0.0);
  };
  auto bwd_dur = [&](int d, int b) {
    const StageLoad& s = req.stages[d];
    if (s.bwd_params <= 0) return 0.0;  // pure relay
    return cm.backward_ratio * cm.c_fwd * s.bwd_params * sizes[b] +
           cm.per_microbatch_overhead;
  };

  // Forward fill.
  std::vector<double> device_free(k, 0.0);
  for (int b = 0; b < m; ++b) {
    for (int d = 0; d < k; ++d) {
      double ready = 0.0;
      if (d > 0) {
        const double xfer = transfer_time(
            req.stages[d].in_bytes_per_sample * sizes[b], req.intra_bandwidth,
            cm.comm_latency);
        ready = f_end[d - 1][b] + xfer;
        if (xfer > 0) {
          out.blocks.push_back({d - 1, BlockKind::kTransfer, f_end[d - 1][b],
                                f_end[d - 1][b] + xfer, b, -1});
          out.transfer_seconds += xfer;
        }
      }
      const double start = std::max(ready, device_free[d]);
      const double dur = fwd_dur(d, b);
      f_end[d][b] = start + dur;
      device_free[d] = f_end[d][b];
      if (dur > 0) {
        out.blocks.push_back({d, BlockKind::kForward, start, f_end[d][b], b, -1});
        busy[d] += dur;
      }
    }
  }

  // Backward drain, reverse micro-batch order, down to the lowest stage that
  // holds trainable parameters.
  int first_bwd = k;
  for (int d = 0; d < k; ++d) {
    if (req.stages[d].bwd_params > 0) {
      first_bwd = d;
      break;
    }
  }
  const bool has_backward = first_bwd < k;
  if (has_backward) {
    for (int d = first_bwd; d < k; ++d) device_free[d] = f_end[d][m - 1];
    for (int b = m - 1; b >= 0; --b) {
      for (int d = k - 1; d >= first_bwd; --d) {
        double ready = 0.0;
        if (d < k - 1) {
          const double xfer = transfer_time(
              req.stages[d + 1].in_bytes_per_sample * sizes[b],
              req.intra_bandwidth, cm.comm_latency);
          ready = b_end[d + 1][b] + xfer;
          if (xfer > 0) {
            out.blocks.push_back({d + 1, BlockKind::kTransfer, b_end[d + 1][b],
                                  b_end[d + 1][b] + xfer, b, -1});
            out.transfer_seconds += xfer;
          }
        }
        const double start = std::max(ready, device_free[d]);
        const double dur = bwd_dur(d, b);
        b_end[d][b] = start + dur;
        device_free[d] = b_end[d][b];
        if (dur > 0) {
          out.blocks.push_back({d, BlockKind::kBackward, start, b_end[d][b], b, -1});
          busy[d] += dur;
        }
      }
    }
  }

  double compute_makespan = 0.0;
  for (int d = 0; d < k; ++d) {
    compute_makespan = std::max(compute_makespan, f_end[d][m - 1]);
    if (has_backward && d >= first_bwd)
      compute_makespan = std::max(compute_makespan, b_end[d][0]);
  }
  out.compute_makespan = compute_makespan;
  out.bubble_per_device.resize(k);
  for (int d = 0; d < k; ++d) {
    out.bubble_per_device[d] = compute_makespan - busy[d];
    out.total_bubble += out.bubble_per_device[d];
    out.compute_seconds += busy[d];
  }

  // Bucketed AllReduce over trainable params, reverse parameter order (from
  // the output stage down), serialized on one communication track. A bucket
  // launches once the last micro-batch backward has finished on every stage
  // it covers.
  std::vector<Bucket> buckets;
  if (req.replica_width >= 2 && has_backward) {
    const double cap = cm.allreduce_bucket_bytes;
    Bucket current;
    bool open = false;
    for (int d = k - 1; d >= first_bwd; --d) {
      double remaining = req.stages[d].bwd_params * req.bytes_per_param;
      while (remaining > 0) {
        if (!open) {
          current = Bucket{0.0, d, b_end[d][0]};
          open = true;
        }
        current.lowest_stage = d;
        current.ready = std::max(current.ready, b_end[d][0]);
        const double room = cap - current.bytes;
        const double take = std::min(room, remaining);
        current.bytes += take;
        remaining -= take;
        if (current.bytes >= cap) {
          buckets.push_back(current);
          open = false;
        }
      }
    }
    if (open && current.bytes > 0) buckets.push_back(current);
  }

  const double link_bw =
      req.group_spans_nodes ? req.inter_bandwidth : req.intra_bandwidth;
  std::vector<double> ar_end_by_stage(k, 0.0);
  double track_free = 0.0;
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    const double dur = ring_allreduce_time(buckets[i].bytes, req.replica_width,
                                           link_bw, cm.comm_latency);
    const double start = std::max(buckets[i].ready, track_free);
    track_free = start + dur;
    out.allreduce_seconds += dur;
    out.blocks.push_back({-1, BlockKind::kAllReduce, start, track_free, -1,
                          static_cast<int>(i)});
    for (int d = buckets[i].lowest_stage; d < k; ++d)
      ar_end_by_stage[d] = std::max(ar_end_by_stage[d], track_free);
  }

  // Optimizer updates wait for the device's own drain and for every bucket
  // that carries its parameters.
  double makespan = compute_makespan;
  double makespan_no_ar = compute_makespan;
  if (has_backward) {
    for (int d = first_bwd; d < k; ++d) {
      const double u_dur = cm.c_update * req.stages[d].bwd_params;
      if (u_dur <= 0) continue;
      const double start = std::max(b_end[d][0], ar_end_by_stage[d]);
      out.blocks.push_back({d, BlockKind::kUpdate, start, start + u_dur, -1, -1});
      makespan = std::max(makespan, start + u_dur);
      makespan_no_ar = std::max(makespan_no_ar, b_end[d][0] + u_dur);
    }
  }
  makespan = std::max(makespan, track_free);
  out.makespan = makespan;
  out.makespan_without_ar = makespan_no_ar;
  out.exposed_comm = makespan - makespan_no_ar;
  return out;
}

std::vector<StageLoad> stage_loads(const PartitionPlan& plan,
                                   const ModelSpec& model,
                                   const SublayerSeq& seq, bool cache_enabled,
                                   double cache_read_seconds_per_sample,
                                   const CostModel& cm) {
  std::vector<StageLoad> stages(plan.pipeline_length);
  for (int d = 0; d < plan.pipeline_length; ++d) {
    StageLoad& s = stages[d];
    s.fwd_params = static_cast<double>(plan.param_sums[d]);
    s.bwd_params = static_cast<double>(plan.param_sums[d]);
    if (d == 0) {
      s.prefix_seconds_per_sample =
          cache_enabled ? cache_read_seconds_per_sample
                        : cm.c_fwd * static_cast<double>(plan.frozen_params);
      s.in_bytes_per_sample = 0.0;
    } else {
      // Tensor crossing the cut: whatever enters this stage's first sublayer.
      // An empty span forwards its predecessor's boundary unchanged.
      int g;
      if (plan.spans[d].count() > 0) {
        g = seq.active[plan.spans[d].begin].global_index();
      } else if (plan.spans[d].begin < static_cast<int>(seq.active.size())) {
        g = seq.active[plan.spans[d].begin].global_index();
      } else {
        g = 2 * model.layer_count();
      }
      s.in_bytes_per_sample = static_cast<double>(model.boundary_bytes(g));
    }
  }
  return stages;
}

IterationSchedule schedule_iteration(const PartitionPlan& plan,
                                     const ModelSpec& model,
                                     const SublayerSeq& seq, int micro_batches,
                                     double per_pipeline_batch, int replica_width,
                                     const ClusterSpec& cluster,
                                     const CostModel& cm, bool cache_enabled,
                                     double cache_read_seconds_per_sample) {
  if (micro_batches < 1)
    throw std::domain_error("schedule_iteration: M must be >= 1");
  ScheduleRequest req;
  req.stages = stage_loads(plan, model, seq, cache_enabled,
                           cache_read_seconds_per_sample, cm);
  req.micro_batches = micro_batches;
  req.per_pipeline_batch = per_pipeline_batch;
  req.replica_width = replica_width;
  req.group_spans_nodes = cluster.node_count >= 2;
  req.intra_bandwidth = cluster.intra_node_bandwidth;
  req.inter_bandwidth = cluster.inter_node_bandwidth;
  req.bytes_per_param = model.bytes_per_param;
  return build_schedule(req, cm);
}

double exposed_comm(const IterationSchedule& schedule) {
  return schedule.exposed_comm;
}

}  // namespace eps
