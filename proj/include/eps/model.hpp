#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace eps {

// Layer-wise size profile of a transformer stack. Each layer is one
// attention block followed by one MLP block; those are the only units the
// partitioner may separate (cuts inside a block would split a skip
// connection). activation_bytes[g] is the per-sample size of the tensor
// entering sublayer g (global sublayer index, 0..2L-1); entry 2L is the
// model output.
struct ModelSpec {
  std::string name;
  std::vector<std::int64_t> attention_params;
  std::vector<std::int64_t> mlp_params;
  std::vector<std::int64_t> activation_bytes;
  int bytes_per_param = 4;

  int layer_count() const { return static_cast<int>(attention_params.size()); }
  std::int64_t total_params() const;
  // Sum of parameters in layers [0, layer).
  std::int64_t prefix_params(int layer) const;
  std::int64_t boundary_bytes(int sublayer_global_index) const;

  // Throws std::invalid_argument when the profile is malformed.
  void validate() const;
};

struct ClusterSpec {
  int node_count = 1;
  int gpus_per_node = 1;
  double gpu_memory_bytes = 16e9;
  double intra_node_bandwidth = 15.754e9;  // bytes/s
  double inter_node_bandwidth = 5e9;       // bytes/s

  int total_gpus() const { return node_count * gpus_per_node; }
  void validate() const;
};

struct TrainingConfig {
  double per_pipeline_batch = 400.0;
  int epochs = 10;
  int iterations_per_epoch = 100;
  double alpha = 1.0 / 3.0;
  double lambda_frozen = 1.0 / 6.0;
  int freeze_check_interval = 1;

  void validate() const;
};

enum class SublayerKind { kAttention, kMlp };

struct Sublayer {
  SublayerKind kind = SublayerKind::kAttention;
  int layer_index = 0;
  std::int64_t params = 0;

  int global_index() const {
    return 2 * layer_index + (kind == SublayerKind::kMlp ? 1 : 0);
  }
};

// Active sublayer sequence for layers [frozen_layers, L) plus the size of the
// frozen block below it.
struct SublayerSeq {
  std::vector<Sublayer> active;
  std::int64_t frozen_params = 0;
  int frozen_layers = 0;

  std::int64_t active_params() const;
};

// Splits the stack at l_frozen: layers below become the frozen block, layers
// above contribute one attention and one MLP sublayer each, in order.
SublayerSeq m_partition(const ModelSpec& model, int l_frozen);

// Synthetic stack with identical layers, handy for calibration scenarios.
ModelSpec uniform_model(int layers, std::int64_t attention_params,
                        std::int64_t mlp_params, std::int64_t activation_bytes);

// Presets computed from the published architecture dimensions. Patch/token
// embeddings are folded into layer 0's attention block and the classifier
// head into the last layer's MLP block, so the stack covers the whole model.
ModelSpec vit_b16();
ModelSpec bert_large();

}  // namespace eps
