#include "eps/model.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace eps {

std::int64_t ModelSpec::total_params() const {
  std::int64_t s = 0;
  for (int i = 0; i < layer_count(); ++i) s += attention_params[i] + mlp_params[i];
  return s;
}

std::int64_t ModelSpec::prefix_params(int layer) const {
  if (layer < 0 || layer > layer_count())
    throw std::invalid_argument("prefix_params: layer out of range");
  std::int64_t s = 0;
  for (int i = 0; i < layer; ++i) s += attention_params[i] + mlp_params[i];
  return s;
}

std::int64_t ModelSpec::boundary_bytes(int g) const {
  if (g < 0 || g >= static_cast<int>(activation_bytes.size()))
    throw std::invalid_argument("boundary_bytes: sublayer index out of range");
  return activation_bytes[g];
}

void ModelSpec::validate() const {
  const int l = layer_count();
  if (l < 1) throw std::invalid_argument("model: needs at least one layer");
  if (static_cast<int>(mlp_params.size()) != l)
    throw std::invalid_argument("model: attention/mlp layer counts differ");
  if (static_cast<int>(activation_bytes.size()) != 2 * l + 1)
    throw std::invalid_argument("model: activation_bytes must have 2L+1 entries");
  for (int i = 0; i < l; ++i) {
    if (attention_params[i] <= 0 || mlp_params[i] <= 0)
      throw std::invalid_argument("model: parameter counts must be positive");
  }
  for (std::int64_t b : activation_bytes) {
    if (b <= 0) throw std::invalid_argument("model: activation sizes must be positive");
  }
  if (bytes_per_param <= 0)
    throw std::invalid_argument("model: bytes_per_param must be positive");
}

void ClusterSpec::validate() const {
  if (node_count < 1) throw std::invalid_argument("cluster: node_count must be >= 1");
  if (gpus_per_node < 1)
    throw std::invalid_argument("cluster: gpus_per_node must be >= 1");
  if ((gpus_per_node & (gpus_per_node - 1)) != 0)
    throw std::invalid_argument("cluster: gpus_per_node must be a power of two");
  if (intra_node_bandwidth <= 0 || inter_node_bandwidth <= 0)
    throw std::invalid_argument("cluster: bandwidths must be positive");
  if (gpu_memory_bytes <= 0)
    throw std::invalid_argument("cluster: gpu_memory_bytes must be positive");
}

void TrainingConfig::validate() const {
  if (per_pipeline_batch < 1)
    throw std::invalid_argument("training: per_pipeline_batch must be >= 1");
  if (epochs < 1) throw std::invalid_argument("training: epochs must be >= 1");
  if (iterations_per_epoch < 1)
    throw std::invalid_argument("training: iterations_per_epoch must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("training: alpha must be in (0,1)");
  if (!(lambda_frozen >= 0.0 && lambda_frozen <= 1.0))
    throw std::invalid_argument("training: lambda_frozen must be in [0,1]");
  if (freeze_check_interval < 1)
    throw std::invalid_argument("training: freeze_check_interval must be >= 1");
}

std::int64_t SublayerSeq::active_params() const {
  std::int64_t s = 0;
  for (const Sublayer& sl : active) s += sl.params;
  return s;
}

SublayerSeq m_partition(const ModelSpec& model, int l_frozen) {
  const int l = model.layer_count();
  if (l_frozen < 0 || l_frozen > l)
    throw std::domain_error("m_partition: frozen layer count out of [0, L]");
  SublayerSeq seq;
  seq.frozen_layers = l_frozen;
  seq.frozen_params = model.prefix_params(l_frozen);
  seq.active.reserve(static_cast<std::size_t>(2 * (l - l_frozen)));
  for (int i = l_frozen; i < l; ++i) {
    seq.active.push_back({SublayerKind::kAttention, i, model.attention_params[i]});
    seq.active.push_back({SublayerKind::kMlp, i, model.mlp_params[i]});
  }
  return seq;
}

ModelSpec uniform_model(int layers, std::int64_t attention_params,
                        std::int64_t mlp_params, std::int64_t activation_bytes) {
  ModelSpec m;
  m.name = "uniform-" + std::to_string(layers);
  m.attention_params.assign(layers, attention_params);
  m.mlp_params.assign(layers, mlp_params);
  m.activation_bytes.assign(2 * layers + 1, activation_bytes);
  m.validate();
  return m;
}

namespace {

// One pre-norm transformer block: QKV + output projection + two layernorms
// around attention, and the two-matrix MLP with its layernorm.
std::int64_t attention_block_params(std::int64_t hidden) {
  const std::int64_t qkv = 3 * (hidden * hidden + hidden);
  const std::int64_t proj = hidden * hidden + hidden;
  const std::int64_t norm = 2 * hidden;
  return qkv + proj + norm;
}

std::int64_t mlp_block_params(std::int64_t hidden, std::int64_t mlp_dim) {
  const std::int64_t up = hidden * mlp_dim + mlp_dim;
  const std::int64_t down = mlp_dim * hidden + hidden;
  const std::int64_t norm = 2 * hidden;
  return up + down + norm;
}

}  // namespace

ModelSpec vit_b16() {
  const std::int64_t hidden = 768;
  const std::int64_t mlp_dim = 3072;
  const int layers = 12;
  const std::int64_t tokens = 14 * 14 + 1;  // 224/16 patches per side + [CLS]
  const std::int64_t classes = 1000;

  ModelSpec m;
  m.name = "vit-b16";
  m.attention_params.assign(layers, attention_block_params(hidden));
  m.mlp_params.assign(layers, mlp_block_params(hidden, mlp_dim));

  const std::int64_t patch_embed = hidden * (16 * 16 * 3) + hidden;
  const std::int64_t cls_token = hidden;
  const std::int64_t pos_embed = tokens * hidden;
  m.attention_params[0] += patch_embed + cls_token + pos_embed;
  const std::int64_t head = hidden * classes + classes;
  m.mlp_params[layers - 1] += head;

  const std::int64_t act = tokens * hidden * 4;   // fp32 token grid
  const std::int64_t input = 224 * 224 * 3 * 4;   // raw image
  m.activation_bytes.assign(2 * layers + 1, act);
  m.activation_bytes[0] = input;
  m.validate();
  return m;
}

ModelSpec bert_large() {
  const std::int64_t hidden = 1024;
  const std::int64_t mlp_dim = 4096;
  const int layers = 24;
  const std::int64_t seq_len = 512;
  const std::int64_t vocab = 30522;

  ModelSpec m;
  m.name = "bert-large";
  m.attention_params.assign(layers, attention_block_params(hidden));
  m.mlp_params.assign(layers, mlp_block_params(hidden, mlp_dim));

  const std::int64_t word_embed = vocab * hidden;
  const std::int64_t pos_embed = seq_len * hidden;
  const std::int64_t type_embed = 2 * hidden;
  const std::int64_t embed_norm = 2 * hidden;
  m.attention_params[0] += word_embed + pos_embed + type_embed + embed_norm;
  const std::int64_t pooler = hidden * hidden + hidden;
  const std::int64_t qa_head = hidden * 2 + 2;
  m.mlp_params[layers - 1] += pooler + qa_head;

  const std::int64_t act = seq_len * hidden * 4;
  const std::int64_t input = seq_len * 8;  // token + segment ids
  m.activation_bytes.assign(2 * layers + 1, act);
  m.activation_bytes[0] = input;
  m.validate();
  return m;
}

}  // namespace eps
