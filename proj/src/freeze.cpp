#include "eps/freeze.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "eps/rng.hpp"

namespace eps {

FreezeState::FreezeState(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("freeze: alpha must be in (0,1)");
}

int FreezeState::frozen_count() const {
  return history_.empty() ? 0 : history_.back().frozen_count;
}

int next_frozen_count(FreezeState& state, const GradNormVector& norms,
                      int layer_count) {
  if (static_cast<int>(norms.norms.size()) != layer_count)
    throw std::domain_error("freeze: gradient norm vector length mismatch");
  for (double g : norms.norms) {
    if (g < 0.0 || !std::isfinite(g))
      throw std::domain_error("freeze: gradient norms must be finite and >= 0");
  }

  const int prev = state.frozen_count();
  const double bound =
      prev + state.alpha() * (layer_count - prev);  // real-valued until min()

  // argmin over active layers only; index L itself carries no gradient.
  int argmin = prev;
  for (int l = prev; l < layer_count; ++l) {
    if (norms.norms[l] < norms.norms[argmin]) argmin = l;
  }

  int result = prev;
  if (prev < layer_count) {
    result = static_cast<int>(
        std::floor(std::min(bound, static_cast<double>(argmin))));
    result = std::clamp(result, prev, layer_count);
  }
  const int t = state.history().empty() ? 1 : state.history().back().timestep + 1;
  state.append({t, result, bound});
  return result;
}

double frozen_bound_closed_form(int timestep, int layer_count, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("freeze: alpha must be in (0,1)");
  if (timestep < 1) throw std::domain_error("freeze: timestep must be >= 1");
  const double al = alpha * layer_count;
  double sum = al / (1.0 - alpha);
  for (int t = 2; t <= timestep; ++t) sum += al / std::pow(1.0 - alpha, t);
  return std::pow(1.0 - alpha, timestep) * sum;
}

TraceNormSource::TraceNormSource(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::domain_error("grad norm trace: cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line))
    throw std::domain_error("grad norm trace: empty file " + csv_path);
  // Header is fixed: epoch,layer,grad_norm
  std::vector<std::vector<double>> rows;
  int max_layer = -1;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string epoch_s, layer_s, norm_s;
    if (!std::getline(ss, epoch_s, ',') || !std::getline(ss, layer_s, ',') ||
        !std::getline(ss, norm_s)) {
      throw std::domain_error("grad norm trace: malformed row at line " +
                              std::to_string(line_no));
    }
    const int epoch = std::stoi(epoch_s);
    const int layer = std::stoi(layer_s);
    const double norm = std::stod(norm_s);
    if (epoch < 0 || layer < 0 || norm < 0.0)
      throw std::domain_error("grad norm trace: negative field at line " +
                              std::to_string(line_no));
    if (epoch >= static_cast<int>(rows.size())) rows.resize(epoch + 1);
    if (layer >= static_cast<int>(rows[epoch].size()))
      rows[epoch].resize(layer + 1, -1.0);
    rows[epoch][layer] = norm;
    max_layer = std::max(max_layer, layer);
  }
  layers_ = max_layer + 1;
  if (layers_ <= 0) throw std::domain_error("grad norm trace: no rows in " + csv_path);
  for (std::size_t e = 0; e < rows.size(); ++e) {
    rows[e].resize(layers_, -1.0);
    for (int l = 0; l < layers_; ++l) {
      if (rows[e][l] < 0.0) {
        throw std::domain_error("grad norm trace: missing row for epoch " +
                                std::to_string(e) + " layer " + std::to_string(l));
      }
    }
  }
  rows_ = std::move(rows);
}

GradNormVector TraceNormSource::at_epoch(int epoch) const {
  if (epoch < 0 || epoch >= static_cast<int>(rows_.size()))
    throw std::domain_error("grad norm trace: epoch " + std::to_string(epoch) +
                            " not covered by trace");
  return {rows_[epoch], epoch + 1};
}

SyntheticNormSource::SyntheticNormSource(SyntheticProfile profile,
                                         std::uint64_t seed, int layers,
                                         int switchover_epoch)
    : profile_(profile), seed_(seed), layers_(layers),
      switchover_epoch_(switchover_epoch) {
  if (layers < 1) throw std::domain_error("synthetic norms: layers must be >= 1");
}

GradNormVector SyntheticNormSource::at_epoch(int epoch) const {
  if (epoch < 0) throw std::domain_error("synthetic norms: negative epoch");
  GradNormVector v;
  v.timestep = epoch + 1;
  v.norms.resize(layers_);
  const double decay = std::pow(0.9, epoch);
  const bool random_phase = profile_ == SyntheticProfile::kEarlyRandom &&
                            epoch < switchover_epoch_;
  for (int l = 0; l < layers_; ++l) {
    SplitMix64 rng(hash_combine(hash_combine(seed_, epoch), l));
    const double jitter = rng.next_unit();
    if (random_phase) {
      v.norms[l] = decay * (0.8 + 0.4 * jitter);
    } else {
      // Strictly decreasing with depth up to ~2% jitter; the per-layer gap
      // is ~1/L so the argmin stays at the last layer.
      const double shape = 1.0 + static_cast<double>(layers_ - 1 - l) / layers_;
      v.norms[l] = decay * shape * (1.0 + 0.02 * jitter);
    }
  }
  if (random_phase) {
    // Pin the minimum near the output side (the paper's observed early
    // pattern): freezing up to the argmin here would be far too aggressive.
    SplitMix64 rng(hash_combine(seed_, 0x5eedull + epoch));
    const int quarter = std::max(1, layers_ / 4);
    const int j = layers_ - 1 - static_cast<int>(rng.next_below(quarter));
    v.norms[j] *= 0.05;
  }
  return v;
}

}  // namespace eps
