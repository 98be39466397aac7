#pragma once

#include <cstdint>
#include <vector>

#include "eps/model.hpp"

namespace eps {

// Slack term added to the per-partition target mean while filling.
//   kNormalizedStddev: sqrt(popvar(remaining sizes)) / (K - k)   [default]
//   kPaperVariance:    popvar(remaining sizes) / (K - k), params^2 units
enum class BalanceCriterion { kNormalizedStddev, kPaperVariance };

// Contiguous span over the active sublayer sequence, [begin, end).
struct PartitionSpan {
  int begin = 0;
  int end = 0;
  int count() const { return end - begin; }
};

struct PartitionPlan {
  int pipeline_length = 0;                 // K
  std::vector<PartitionSpan> spans;        // K contiguous spans covering the seq
  std::vector<int> sublayer_counts;        // B_L
  std::vector<std::int64_t> param_sums;    // B_S, raw active params
  std::vector<double> effective_sizes;     // B_S + lambda*S_frozen on partition 0
  std::int64_t frozen_params = 0;
  int frozen_layers = 0;
  double lambda_frozen = 0.0;

  double max_effective_size() const;
  void validate(const SublayerSeq& seq) const;  // throws std::logic_error
};

// Greedy left-to-right fill: partition k targets remaining_total/(K-k) plus
// the balance slack; a sublayer is accepted while the partition's effective
// size stays within the target, and the last partition absorbs the
// remainder. Partition 0's effective size starts at lambda*S_frozen, so a
// heavy frozen block pushes active sublayers to later partitions (possibly
// leaving partition 0 with none). Throws std::invalid_argument when K
// exceeds the active sublayer count.
PartitionPlan load_balance(const SublayerSeq& seq, int partitions,
                           double lambda_frozen,
                           BalanceCriterion criterion = BalanceCriterion::kNormalizedStddev);

struct CompressionResult {
  int pipeline_length = 0;
  PartitionPlan plan;
  // K values whose halving attempt was evaluated, paired with the max
  // effective size the candidate plan had (for audit/tests).
  std::vector<std::pair<int, double>> attempts;
};

// Repeatedly tries K -> K/2, accepting while the candidate plan's max
// effective partition size stays <= the memory proxy recorded at T=0.
// An empty active sequence collapses straight to K=1. K never grows.
CompressionResult try_compress(const SublayerSeq& seq, int current_k,
                               double lambda_frozen, double m_gpu_initial,
                               BalanceCriterion criterion = BalanceCriterion::kNormalizedStddev);

}  // namespace eps
