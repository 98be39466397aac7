#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace eps {

struct GradNormVector {
  std::vector<double> norms;
  int timestep = 0;
};

struct FreezeRecord {
  int timestep = 0;
  int frozen_count = 0;
  double raw_bound = 0.0;
};

// Frozen-boundary trajectory. frozen_count() is the published (integer)
// number of frozen layers; it never decreases.
class FreezeState {
 public:
  explicit FreezeState(double alpha);

  double alpha() const { return alpha_; }
  int frozen_count() const;
  const std::vector<FreezeRecord>& history() const { return history_; }
  void append(FreezeRecord rec) { history_.push_back(rec); }

 private:
  double alpha_;
  std::vector<FreezeRecord> history_;
};

// One freeze decision: min(bound, argmin-of-norms) floored, appended to the
// state. The bound grows from the previously published count; the argmin runs
// over active layers only, ties broken toward the smallest index (freezes
// least). The result is a layer count: layers [0, result) are frozen.
int next_frozen_count(FreezeState& state, const GradNormVector& norms,
                      int layer_count);

// Closed form of the bound sequence: (1-a)^T [ aL/(1-a) + sum_{t=2..T} aL/(1-a)^t ].
double frozen_bound_closed_form(int timestep, int layer_count, double alpha);

enum class SyntheticProfile { kMonotoneConverging, kEarlyRandom };

// Per-epoch layer gradient norms, either played back from a trace or
// generated deterministically from a seed.
class GradNormSource {
 public:
  virtual ~GradNormSource() = default;
  // Norms observed during epoch `epoch` (0-based).
  virtual GradNormVector at_epoch(int epoch) const = 0;
  virtual int layer_count() const = 0;
};

// CSV playback; the file carries `epoch,layer,grad_norm` with a header row.
class TraceNormSource : public GradNormSource {
 public:
  explicit TraceNormSource(const std::string& csv_path);
  GradNormVector at_epoch(int epoch) const override;
  int layer_count() const override { return layers_; }
  int epoch_count() const { return static_cast<int>(rows_.size()); }

 private:
  int layers_ = 0;
  std::vector<std::vector<double>> rows_;  // [epoch][layer]
};

// Deterministic synthetic norms. The monotone-converging profile keeps the
// minimum at the output-most layer so the bound drives freezing; the
// early-random profile scatters norms for epochs below the switchover but
// pins the minimum somewhere in the top quarter, which is exactly the case
// where the bound has to protect against over-freezing.
class SyntheticNormSource : public GradNormSource {
 public:
  SyntheticNormSource(SyntheticProfile profile, std::uint64_t seed, int layers,
                      int switchover_epoch = 2);
  GradNormVector at_epoch(int epoch) const override;
  int layer_count() const override { return layers_; }

 private:
  SyntheticProfile profile_;
  std::uint64_t seed_;
  int layers_;
  int switchover_epoch_;
};

}  // namespace eps
