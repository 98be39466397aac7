#include "eps/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace eps {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

void check_keys(const json& j, const std::string& path,
                const std::set<std::string>& allowed) {
  require_object(j, path);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end())
      throw ConfigError(path + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
T get_or(const json& j, const std::string& path, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

ModelSpec parse_model(const json& j, std::string* preset_out) {
  check_keys(j, "model",
             {"preset", "uniform", "attention_params", "mlp_params",
              "activation_bytes", "bytes_per_param", "name"});
  if (j.contains("preset")) {
    const std::string preset = j.at("preset").get<std::string>();
    *preset_out = preset;
    if (preset == "vit-b16") return vit_b16();
    if (preset == "bert-large") return bert_large();
    throw ConfigError("model.preset: unknown preset '" + preset + "'");
  }
  preset_out->clear();
  if (j.contains("uniform")) {
    const json& u = j.at("uniform");
    check_keys(u, "model.uniform",
               {"layers", "attention_params", "mlp_params", "activation_bytes"});
    return uniform_model(get_or<int>(u, "model.uniform", "layers", 12),
                         get_or<std::int64_t>(u, "model.uniform", "attention_params", 4000000),
                         get_or<std::int64_t>(u, "model.uniform", "mlp_params", 8000000),
                         get_or<std::int64_t>(u, "model.uniform", "activation_bytes", 600000));
  }
  ModelSpec m;
  m.name = get_or<std::string>(j, "model", "name", "custom");
  try {
    m.attention_params = j.at("attention_params").get<std::vector<std::int64_t>>();
    m.mlp_params = j.at("mlp_params").get<std::vector<std::int64_t>>();
    m.activation_bytes = j.at("activation_bytes").get<std::vector<std::int64_t>>();
  } catch (const json::exception&) {
    throw ConfigError("model: explicit models need attention_params, mlp_params and activation_bytes arrays");
  }
  m.bytes_per_param = get_or<int>(j, "model", "bytes_per_param", 4);
  return m;
}

}  // namespace

void ScenarioConfig::validate() const {
  try {
    model.validate();
    cluster.validate();
    training.validate();
    cost.validate();
    cache_tiers.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const int k0 = pipeline_length_at_start();
  if (k0 < 1 || k0 > cluster.gpus_per_node || cluster.gpus_per_node % k0 != 0 ||
      (k0 & (k0 - 1)) != 0)
    throw ConfigError("config: initial pipeline length must be a power of two dividing gpus_per_node");
  if (2 * model.layer_count() < k0)
    throw ConfigError("config: initial pipeline longer than the sublayer count");
  if (freeze_only_slowdown < 0)
    throw ConfigError("config: freeze_only_slowdown must be >= 0");
  if (dp_message_latency < 0)
    throw ConfigError("config: dp_message_latency must be >= 0");
  validate_features(features);
  if (grad_norms.kind == GradNormKind::kTrace) {
    if (grad_norms.trace_path.empty())
      throw ConfigError("grad_norms: trace mode needs a path");
    if (!std::filesystem::exists(grad_norms.trace_path))
      throw ConfigError("grad_norms.path: trace file not found: " + grad_norms.trace_path);
  }
}

ScenarioConfig parse_scenario(const json& j) {
  check_keys(j, "(root)",
             {"schema_version", "name", "model", "cluster", "training",
              "cost_model", "cache", "grad_norms", "features",
              "freeze_only_slowdown", "dp_message_latency", "balance_criterion",
              "integer_microbatches", "initial_pipeline_length", "seed"});
  if (!j.contains("schema_version"))
    throw ConfigError("(root): schema_version is required");
  if (j.at("schema_version").get<int>() != 1)
    throw ConfigError("(root): unsupported schema_version");

  ScenarioConfig cfg;
  cfg.name = get_or<std::string>(j, "(root)", "name", "scenario");
  if (!j.contains("model")) throw ConfigError("(root): model is required");
  cfg.model = parse_model(j.at("model"), &cfg.model_preset);

  if (j.contains("cluster")) {
    const json& c = j.at("cluster");
    check_keys(c, "cluster",
               {"nodes", "gpus_per_node", "gpu_memory_bytes",
                "intra_node_bandwidth", "inter_node_bandwidth"});
    cfg.cluster.node_count = get_or<int>(c, "cluster", "nodes", 1);
    cfg.cluster.gpus_per_node = get_or<int>(c, "cluster", "gpus_per_node", 1);
    cfg.cluster.gpu_memory_bytes = get_or<double>(c, "cluster", "gpu_memory_bytes", 16e9);
    cfg.cluster.intra_node_bandwidth =
        get_or<double>(c, "cluster", "intra_node_bandwidth", 15.754e9);
    cfg.cluster.inter_node_bandwidth =
        get_or<double>(c, "cluster", "inter_node_bandwidth", 5e9);
  }

  if (j.contains("training")) {
    const json& t = j.at("training");
    check_keys(t, "training",
               {"per_pipeline_batch", "epochs", "iterations_per_epoch", "alpha",
                "lambda_frozen", "freeze_check_interval"});
    cfg.training.per_pipeline_batch = get_or<double>(t, "training", "per_pipeline_batch", 400.0);
    cfg.training.epochs = get_or<int>(t, "training", "epochs", 10);
    cfg.training.iterations_per_epoch = get_or<int>(t, "training", "iterations_per_epoch", 100);
    cfg.training.alpha = get_or<double>(t, "training", "alpha", 1.0 / 3.0);
    cfg.training.lambda_frozen = get_or<double>(t, "training", "lambda_frozen", 1.0 / 6.0);
    cfg.training.freeze_check_interval = get_or<int>(t, "training", "freeze_check_interval", 1);
  }

  if (j.contains("cost_model")) {
    const json& c = j.at("cost_model");
    check_keys(c, "cost_model",
               {"c_fwd", "backward_ratio", "c_update", "per_microbatch_overhead",
                "allreduce_bucket_bytes", "comm_latency", "transition_overheads"});
    CostModel defaults;
    cfg.cost.c_fwd = get_or<double>(c, "cost_model", "c_fwd", defaults.c_fwd);
    cfg.cost.backward_ratio = get_or<double>(c, "cost_model", "backward_ratio", defaults.backward_ratio);
    cfg.cost.c_update = get_or<double>(c, "cost_model", "c_update", defaults.c_update);
    cfg.cost.per_microbatch_overhead =
        get_or<double>(c, "cost_model", "per_microbatch_overhead", defaults.per_microbatch_overhead);
    cfg.cost.allreduce_bucket_bytes =
        get_or<double>(c, "cost_model", "allreduce_bucket_bytes", defaults.allreduce_bucket_bytes);
    cfg.cost.comm_latency = get_or<double>(c, "cost_model", "comm_latency", defaults.comm_latency);
    if (c.contains("transition_overheads")) {
      const json& t = c.at("transition_overheads");
      require_object(t, "cost_model.transition_overheads");
      for (auto it = t.begin(); it != t.end(); ++it)
        cfg.cost.transition_overheads[it.key()] = it.value().get<double>();
    }
  }

  if (j.contains("cache")) {
    const json& c = j.at("cache");
    check_keys(c, "cache",
               {"policy", "host_bandwidth", "disk_bandwidth", "host_capacity_bytes",
                "window_batches", "block_batches", "read_latency"});
    const std::string policy = get_or<std::string>(c, "cache", "policy", "auto");
    if (policy == "auto") cfg.cache_policy = CachePolicy::kAuto;
    else if (policy == "always_on") cfg.cache_policy = CachePolicy::kAlwaysOn;
    else if (policy == "always_off") cfg.cache_policy = CachePolicy::kAlwaysOff;
    else throw ConfigError("cache.policy: expected auto|always_on|always_off");
    CacheTierParams d;
    cfg.cache_tiers.host_bandwidth = get_or<double>(c, "cache", "host_bandwidth", d.host_bandwidth);
    cfg.cache_tiers.disk_bandwidth = get_or<double>(c, "cache", "disk_bandwidth", d.disk_bandwidth);
    cfg.cache_tiers.host_capacity_bytes =
        get_or<double>(c, "cache", "host_capacity_bytes", d.host_capacity_bytes);
    cfg.cache_tiers.window_batches = get_or<int>(c, "cache", "window_batches", d.window_batches);
    cfg.cache_tiers.block_batches = get_or<int>(c, "cache", "block_batches", d.block_batches);
    cfg.cache_tiers.read_latency = get_or<double>(c, "cache", "read_latency", d.read_latency);
  }

  if (j.contains("grad_norms")) {
    const json& g = j.at("grad_norms");
    check_keys(g, "grad_norms", {"kind", "profile", "path", "seed", "switchover_epoch"});
    const std::string kind = get_or<std::string>(g, "grad_norms", "kind", "synthetic");
    if (kind == "synthetic") cfg.grad_norms.kind = GradNormKind::kSynthetic;
    else if (kind == "trace") cfg.grad_norms.kind = GradNormKind::kTrace;
    else throw ConfigError("grad_norms.kind: expected synthetic|trace");
    const std::string profile =
        get_or<std::string>(g, "grad_norms", "profile", "monotone-converging");
    if (profile == "monotone-converging")
      cfg.grad_norms.profile = SyntheticProfile::kMonotoneConverging;
    else if (profile == "early-random")
      cfg.grad_norms.profile = SyntheticProfile::kEarlyRandom;
    else throw ConfigError("grad_norms.profile: expected monotone-converging|early-random");
    cfg.grad_norms.trace_path = get_or<std::string>(g, "grad_norms", "path", "");
    cfg.grad_norms.seed = get_or<std::uint64_t>(g, "grad_norms", "seed", 0);
    cfg.grad_norms.switchover_epoch = get_or<int>(g, "grad_norms", "switchover_epoch", 2);
  }

  if (j.contains("features")) {
    const json& f = j.at("features");
    check_keys(f, "features", {"freeze", "autopipe", "autodp", "autocache"});
    cfg.features.freeze = get_or<bool>(f, "features", "freeze", true);
    cfg.features.autopipe = get_or<bool>(f, "features", "autopipe", true);
    cfg.features.autodp = get_or<bool>(f, "features", "autodp", true);
    cfg.features.autocache = get_or<bool>(f, "features", "autocache", true);
  }

  cfg.freeze_only_slowdown = get_or<double>(j, "(root)", "freeze_only_slowdown", 0.0);
  cfg.dp_message_latency = get_or<double>(j, "(root)", "dp_message_latency", 0.0);
  const std::string crit =
      get_or<std::string>(j, "(root)", "balance_criterion", "normalized-stddev");
  if (crit == "normalized-stddev")
    cfg.balance_criterion = BalanceCriterion::kNormalizedStddev;
  else if (crit == "paper-variance")
    cfg.balance_criterion = BalanceCriterion::kPaperVariance;
  else
    throw ConfigError("balance_criterion: expected normalized-stddev|paper-variance");
  cfg.integer_microbatches = get_or<bool>(j, "(root)", "integer_microbatches", false);
  cfg.initial_pipeline_length = get_or<int>(j, "(root)", "initial_pipeline_length", 0);
  cfg.seed = get_or<std::uint64_t>(j, "(root)", "seed", 1);

  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_scenario(j);
}

nlohmann::json scenario_to_json(const ScenarioConfig& cfg) {
  json j;
  j["schema_version"] = 1;
  j["name"] = cfg.name;
  if (!cfg.model_preset.empty()) {
    j["model"] = {{"preset", cfg.model_preset}};
  } else {
    j["model"] = {{"name", cfg.model.name},
                  {"attention_params", cfg.model.attention_params},
                  {"mlp_params", cfg.model.mlp_params},
                  {"activation_bytes", cfg.model.activation_bytes},
                  {"bytes_per_param", cfg.model.bytes_per_param}};
  }
  j["cluster"] = {{"nodes", cfg.cluster.node_count},
                  {"gpus_per_node", cfg.cluster.gpus_per_node},
                  {"gpu_memory_bytes", cfg.cluster.gpu_memory_bytes},
                  {"intra_node_bandwidth", cfg.cluster.intra_node_bandwidth},
                  {"inter_node_bandwidth", cfg.cluster.inter_node_bandwidth}};
  j["training"] = {{"per_pipeline_batch", cfg.training.per_pipeline_batch},
                   {"epochs", cfg.training.epochs},
                   {"iterations_per_epoch", cfg.training.iterations_per_epoch},
                   {"alpha", cfg.training.alpha},
                   {"lambda_frozen", cfg.training.lambda_frozen},
                   {"freeze_check_interval", cfg.training.freeze_check_interval}};
  json overheads = json::object();
  for (const auto& [k, v] : cfg.cost.transition_overheads) overheads[k] = v;
  j["cost_model"] = {{"c_fwd", cfg.cost.c_fwd},
                     {"backward_ratio", cfg.cost.backward_ratio},
                     {"c_update", cfg.cost.c_update},
                     {"per_microbatch_overhead", cfg.cost.per_microbatch_overhead},
                     {"allreduce_bucket_bytes", cfg.cost.allreduce_bucket_bytes},
                     {"comm_latency", cfg.cost.comm_latency},
                     {"transition_overheads", overheads}};
  const char* policy = cfg.cache_policy == CachePolicy::kAuto ? "auto"
                       : cfg.cache_policy == CachePolicy::kAlwaysOn ? "always_on"
                                                                    : "always_off";
  j["cache"] = {{"policy", policy},
                {"host_bandwidth", cfg.cache_tiers.host_bandwidth},
                {"disk_bandwidth", cfg.cache_tiers.disk_bandwidth},
                {"host_capacity_bytes", cfg.cache_tiers.host_capacity_bytes},
                {"window_batches", cfg.cache_tiers.window_batches},
                {"block_batches", cfg.cache_tiers.block_batches},
                {"read_latency", cfg.cache_tiers.read_latency}};
  json norms;
  norms["kind"] = cfg.grad_norms.kind == GradNormKind::kTrace ? "trace" : "synthetic";
  if (cfg.grad_norms.kind == GradNormKind::kTrace) {
    norms["path"] = cfg.grad_norms.trace_path;
  } else {
    norms["profile"] = cfg.grad_norms.profile == SyntheticProfile::kEarlyRandom
                           ? "early-random"
                           : "monotone-converging";
    norms["switchover_epoch"] = cfg.grad_norms.switchover_epoch;
  }
  if (cfg.grad_norms.seed != 0) norms["seed"] = cfg.grad_norms.seed;
  j["grad_norms"] = norms;
  j["features"] = {{"freeze", cfg.features.freeze},
                   {"autopipe", cfg.features.autopipe},
                   {"autodp", cfg.features.autodp},
                   {"autocache", cfg.features.autocache}};
  j["freeze_only_slowdown"] = cfg.freeze_only_slowdown;
  j["dp_message_latency"] = cfg.dp_message_latency;
  j["balance_criterion"] = cfg.balance_criterion == BalanceCriterion::kPaperVariance
                               ? "paper-variance"
                               : "normalized-stddev";
  j["integer_microbatches"] = cfg.integer_microbatches;
  j["initial_pipeline_length"] = cfg.initial_pipeline_length;
  j["seed"] = cfg.seed;
  return j;
}

std::unique_ptr<GradNormSource> make_grad_norm_source(const ScenarioConfig& cfg) {
  if (cfg.grad_norms.kind == GradNormKind::kTrace)
    return std::make_unique<TraceNormSource>(cfg.grad_norms.trace_path);
  return std::make_unique<SyntheticNormSource>(
      cfg.grad_norms.profile, cfg.grad_norm_seed(), cfg.model.layer_count(),
      cfg.grad_norms.switchover_epoch);
}

void validate_features(const FeatureFlags& f) {
  if (f.autopipe && !f.freeze)
    throw ConfigError("features: autopipe requires freeze");
  if (f.autodp && !f.autopipe)
    throw ConfigError("features: autodp requires autopipe");
  if (f.autocache && !f.autopipe)
    throw ConfigError("features: autocache requires autopipe");
}

FeatureFlags parse_flags(const std::string& list) {
  FeatureFlags f{false, false, false, false};
  std::stringstream ss(list);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    if (token == "baseline") {
      f = FeatureFlags{false, false, false, false};
    } else if (token == "all") {
      f = FeatureFlags{true, true, true, true};
    } else if (token == "freeze") {
      f.freeze = true;
    } else if (token == "autopipe") {
      f.freeze = f.autopipe = true;
    } else if (token == "autodp") {
      f.freeze = f.autopipe = f.autodp = true;
    } else if (token == "autocache") {
      f.freeze = f.autopipe = f.autocache = true;
    } else {
      throw ConfigError("--flags: unknown flag '" + token + "'");
    }
  }
  validate_features(f);
  return f;
}

}  // namespace eps
