#pragma once

// Independent reference implementations used only by tests. These stay
// deliberately naive (enumeration / direct recurrences) so they cannot share
// bugs with the library code they check.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "eps/autopipe.hpp"
#include "eps/model.hpp"
#include "eps/schedule.hpp"

namespace oracle {

// Bound recurrence from the freeze rule, kept real-valued.
inline double bound_recurrence(int timestep, int layers, double alpha) {
  double value = 0.0;
  for (int t = 0; t < timestep; ++t) value = alpha * layers + (1.0 - alpha) * value;
  return value;
}

// Minimum over all contiguous splits of the max effective partition size,
// with the frozen share landing on partition 0. Exponential enumeration;
// n <= 14, k <= 4 keeps it trivial.
inline double brute_force_best_max(const std::vector<std::int64_t>& sizes,
                                   int partitions, double frozen_share) {
  const int n = static_cast<int>(sizes.size());
  double best = std::numeric_limits<double>::infinity();
  // Choose k-1 cut points via recursion.
  std::vector<int> cuts;
  auto recurse = [&](auto&& self, int pos, int remaining) -> void {
    if (remaining == 0) {
      double max_eff = 0.0;
      int begin = 0;
      for (int k = 0; k < partitions; ++k) {
        const int end = k + 1 < partitions ? cuts[k] : n;
        double eff = k == 0 ? frozen_share : 0.0;
        for (int i = begin; i < end; ++i) eff += static_cast<double>(sizes[i]);
        max_eff = std::max(max_eff, eff);
        begin = end;
      }
      best = std::min(best, max_eff);
      return;
    }
    for (int cut = pos; cut <= n - remaining; ++cut) {
      cuts.push_back(cut);
      self(self, cut, remaining - 1);
      cuts.pop_back();
    }
  };
  if (partitions == 1) return frozen_share + [&] {
    double s = 0.0;
    for (std::int64_t v : sizes) s += static_cast<double>(v);
    return s;
  }();
  recurse(recurse, 0, partitions - 1);
  return best;
}

// Structural checks over an emitted schedule: per-device compute blocks never
// overlap, forwards respect the upstream dependency, backwards respect the
// downstream dependency and follow the device's forwards, updates follow the
// drain, and the AllReduce track is serialized.
inline bool schedule_is_legal(const eps::IterationSchedule& s, int devices,
                              int micro_batches) {
  using eps::BlockKind;
  const double eps_t = 1e-9;
  std::map<std::pair<int, int>, std::pair<double, double>> fwd, bwd;
  std::map<int, std::vector<std::pair<double, double>>> compute_by_device;
  std::vector<std::pair<double, double>> ar;
  std::map<int, double> last_fwd_end, last_bwd_end;

  for (const eps::TimedBlock& b : s.blocks) {
    if (b.end < b.start - eps_t) return false;
    if (b.kind == BlockKind::kForward || b.kind == BlockKind::kBackward ||
        b.kind == BlockKind::kUpdate) {
      compute_by_device[b.device].push_back({b.start, b.end});
    }
    if (b.kind == BlockKind::kForward) {
      fwd[{b.device, b.micro_batch}] = {b.start, b.end};
      last_fwd_end[b.device] = std::max(last_fwd_end[b.device], b.end);
    }
    if (b.kind == BlockKind::kBackward) {
      bwd[{b.device, b.micro_batch}] = {b.start, b.end};
      last_bwd_end[b.device] = std::max(last_bwd_end[b.device], b.end);
    }
    if (b.kind == BlockKind::kAllReduce) ar.push_back({b.start, b.end});
  }

  for (auto& [device, blocks] : compute_by_device) {
    std::sort(blocks.begin(), blocks.end());
    for (std::size_t i = 1; i < blocks.size(); ++i) {
      if (blocks[i].first < blocks[i - 1].second - eps_t) return false;
    }
  }
  for (const auto& [key, span] : fwd) {
    const auto up = fwd.find({key.first - 1, key.second});
    if (up != fwd.end() && span.first < up->second.second - eps_t) return false;
  }
  for (const auto& [key, span] : bwd) {
    const auto down = bwd.find({key.first + 1, key.second});
    if (down != bwd.end() && span.first < down->second.second - eps_t) return false;
    const auto lf = last_fwd_end.find(key.first);
    if (lf != last_fwd_end.end() && span.first < lf->second - eps_t) return false;
  }
  for (const eps::TimedBlock& b : s.blocks) {
    if (b.kind != BlockKind::kUpdate) continue;
    const auto lb = last_bwd_end.find(b.device);
    if (lb != last_bwd_end.end() && b.start < lb->second - eps_t) return false;
  }
  std::sort(ar.begin(), ar.end());
  for (std::size_t i = 1; i < ar.size(); ++i) {
    if (ar[i].first < ar[i - 1].second - eps_t) return false;
  }
  (void)devices;
  (void)micro_batches;
  return true;
}

}  // namespace oracle
