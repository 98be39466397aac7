#include "eps/autopipe.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace eps {

double PartitionPlan::max_effective_size() const {
  double m = 0.0;
  for (double e : effective_sizes) m = std::max(m, e);
  return m;
}

void PartitionPlan::validate(const SublayerSeq& seq) const {
  const int n = static_cast<int>(seq.active.size());
  if (pipeline_length != static_cast<int>(spans.size()))
    throw std::logic_error("plan: span count != K");
  int cursor = 0;
  std::int64_t total = 0;
  for (int k = 0; k < pipeline_length; ++k) {
    if (spans[k].begin != cursor || spans[k].end < spans[k].begin)
      throw std::logic_error("plan: spans must be contiguous and ordered");
    cursor = spans[k].end;
    std::int64_t s = 0;
    for (int i = spans[k].begin; i < spans[k].end; ++i) s += seq.active[i].params;
    if (s != param_sums[k]) throw std::logic_error("plan: param sum mismatch");
    total += s;
  }
  if (cursor != n) throw std::logic_error("plan: spans must cover the sequence");
  if (total != seq.active_params())
    throw std::logic_error("plan: total active params mismatch");
}

namespace {

double population_variance(const std::vector<Sublayer>& active, int begin) {
  const int n = static_cast<int>(active.size()) - begin;
  if (n <= 0) return 0.0;
  double mean = 0.0;
  for (int i = begin; i < static_cast<int>(active.size()); ++i)
    mean += static_cast<double>(active[i].params);
  mean /= n;
  double var = 0.0;
  for (int i = begin; i < static_cast<int>(active.size()); ++i) {
    const double d = static_cast<double>(active[i].params) - mean;
    var += d * d;
  }
  return var / n;
}

}  // namespace

PartitionPlan load_balance(const SublayerSeq& seq, int partitions,
                           double lambda_frozen, BalanceCriterion criterion) {
  const int n = static_cast<int>(seq.active.size());
  if (partitions < 1)
    throw std::invalid_argument("load_balance: K must be >= 1");
  if (n == 0 && partitions != 1)
    throw std::invalid_argument("load_balance: empty active sequence needs K=1");
  if (n > 0 && partitions > n)
    throw std::invalid_argument(
        "load_balance: K=" + std::to_string(partitions) +
        " exceeds active sublayer count " + std::to_string(n));

  PartitionPlan plan;
  plan.pipeline_length = partitions;
  plan.frozen_params = seq.frozen_params;
  plan.frozen_layers = seq.frozen_layers;
  plan.lambda_frozen = lambda_frozen;
  plan.spans.resize(partitions);
  plan.sublayer_counts.assign(partitions, 0);
  plan.param_sums.assign(partitions, 0);
  plan.effective_sizes.assign(partitions, 0.0);

  const double frozen_share =
      lambda_frozen * static_cast<double>(seq.frozen_params);

  double remaining_total = static_cast<double>(seq.active_params());
  int assigned = 0;
  for (int k = 0; k < partitions; ++k) {
    plan.spans[k].begin = assigned;
    const int left = partitions - k;
    const double mean = remaining_total / left;
    const double popvar = population_variance(seq.active, assigned);
    const double slack = criterion == BalanceCriterion::kPaperVariance
                             ? popvar / left
                             : std::sqrt(popvar) / left;
    const double target = mean + slack;

    const double start_eff = k == 0 ? frozen_share : 0.0;
    double eff = start_eff;
    std::int64_t raw = 0;
    int count = 0;
    while (assigned < n) {
      if (k < partitions - 1) {
        // Later partitions must each still get at least one sublayer.
        if (n - assigned <= left - 1) break;
        const bool fits = eff + static_cast<double>(seq.active[assigned].params) <= target;
        if (!fits) {
          if (count > 0) break;
          // A partition already filled by the frozen share stays empty;
          // otherwise the first sublayer goes in even when oversized.
          if (start_eff > target) break;
        }
      }
      const double candidate = static_cast<double>(seq.active[assigned].params);
      eff += candidate;
      raw += seq.active[assigned].params;
      remaining_total -= candidate;
      ++assigned;
      ++count;
    }
    plan.spans[k].end = assigned;
    plan.sublayer_counts[k] = count;
    plan.param_sums[k] = raw;
    plan.effective_sizes[k] = (k == 0 ? frozen_share : 0.0) + static_cast<double>(raw);
  }
  plan.validate(seq);
  return plan;
}

CompressionResult try_compress(const SublayerSeq& seq, int current_k,
                               double lambda_frozen, double m_gpu_initial,
                               BalanceCriterion criterion) {
  if (current_k < 1)
    throw std::invalid_argument("try_compress: K must be >= 1");
  if ((current_k & (current_k - 1)) != 0)
    throw std::invalid_argument("try_compress: K must be a power of two");

  CompressionResult res;
  if (seq.active.empty()) {
    // Nothing left to pipeline; the frozen stack rides on a single device.
    res.pipeline_length = 1;
    res.plan = load_balance(seq, 1, lambda_frozen, criterion);
    return res;
  }

  int k = current_k;
  PartitionPlan plan = load_balance(seq, k, lambda_frozen, criterion);
  while (k >= 2) {
    const int half = k / 2;
    if (half > static_cast<int>(seq.active.size())) break;
    PartitionPlan candidate = load_balance(seq, half, lambda_frozen, criterion);
    const double max_eff = candidate.max_effective_size();
    res.attempts.emplace_back(k, max_eff);
    if (max_eff <= m_gpu_initial) {
      k = half;
      plan = std::move(candidate);
    } else {
      break;
    }
  }
  res.pipeline_length = k;
  res.plan = std::move(plan);
  return res;
}

}  // namespace eps
