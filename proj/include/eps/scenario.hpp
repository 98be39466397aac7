#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "eps/autocache.hpp"
#include "eps/autopipe.hpp"
#include "eps/cost_model.hpp"
#include "eps/freeze.hpp"
#include "eps/model.hpp"

namespace eps {

// Configuration problem: message carries the offending key path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// IO problem distinct from validation (separate exit code).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct FeatureFlags {
  bool freeze = true;
  bool autopipe = true;
  bool autodp = true;
  bool autocache = true;
};

enum class CachePolicy { kAuto, kAlwaysOn, kAlwaysOff };

enum class GradNormKind { kSynthetic, kTrace };

struct GradNormSpec {
  GradNormKind kind = GradNormKind::kSynthetic;
  SyntheticProfile profile = SyntheticProfile::kMonotoneConverging;
  std::string trace_path;
  std::uint64_t seed = 0;  // 0 -> fall back to the scenario seed
  int switchover_epoch = 2;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::string model_preset;  // empty when the model is given explicitly
  ModelSpec model;
  ClusterSpec cluster;
  TrainingConfig training;
  CostModel cost;
  CacheTierParams cache_tiers;
  CachePolicy cache_policy = CachePolicy::kAuto;
  GradNormSpec grad_norms;
  FeatureFlags features;
  double freeze_only_slowdown = 0.0;
  double dp_message_latency = 0.0;
  BalanceCriterion balance_criterion = BalanceCriterion::kNormalizedStddev;
  bool integer_microbatches = false;
  int initial_pipeline_length = 0;  // 0 -> gpus_per_node
  std::uint64_t seed = 1;

  int pipeline_length_at_start() const {
    return initial_pipeline_length > 0 ? initial_pipeline_length
                                       : cluster.gpus_per_node;
  }
  std::uint64_t grad_norm_seed() const {
    return grad_norms.seed != 0 ? grad_norms.seed : seed;
  }
  void validate() const;  // throws ConfigError
};

// Strict parse: unknown keys anywhere are errors; messages carry the key path.
ScenarioConfig parse_scenario(const nlohmann::json& j);
ScenarioConfig load_scenario(const std::string& path);
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);

// Builds the configured gradient-norm source.
std::unique_ptr<GradNormSource> make_grad_norm_source(const ScenarioConfig& cfg);

// Parses a --flags list ("baseline", "all", or comma-joined feature names)
// onto the feature struct. Throws ConfigError for unknown names or
// dependency violations (autodp/autocache need autopipe, autopipe needs
// freeze).
FeatureFlags parse_flags(const std::string& list);
void validate_features(const FeatureFlags& f);

}  // namespace eps
