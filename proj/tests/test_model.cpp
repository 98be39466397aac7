#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stdexcept>

#include "eps/model.hpp"

using namespace eps;

TEST_CASE("m_partition with nothing frozen yields one ATT and one MLP per layer") {
  const ModelSpec m = uniform_model(12, 4'000'000, 8'000'000, 600'000);
  const SublayerSeq seq = m_partition(m, 0);
  CHECK(seq.active.size() == 24);
  CHECK(seq.frozen_params == 0);
  CHECK(seq.frozen_layers == 0);
  for (int i = 0; i < 12; ++i) {
    CHECK(seq.active[2 * i].kind == SublayerKind::kAttention);
    CHECK(seq.active[2 * i].layer_index == i);
    CHECK(seq.active[2 * i + 1].kind == SublayerKind::kMlp);
    CHECK(seq.active[2 * i + 1].layer_index == i);
  }
}

TEST_CASE("m_partition splits a half-frozen stack") {
  const ModelSpec m = uniform_model(12, 4'000'000, 8'000'000, 600'000);
  const SublayerSeq seq = m_partition(m, 6);
  // Direct summation: 6 layers of 12M params on each side.
  CHECK(seq.active.size() == 12);
  CHECK(seq.active_params() == 72'000'000);
  CHECK(seq.frozen_params == 72'000'000);
  CHECK(seq.active.front().layer_index == 6);
}

TEST_CASE("m_partition fully frozen") {
  const ModelSpec m = uniform_model(12, 4'000'000, 8'000'000, 600'000);
  const SublayerSeq seq = m_partition(m, 12);
  CHECK(seq.active.empty());
  CHECK(seq.frozen_params == m.total_params());
}

TEST_CASE("m_partition rejects out-of-range boundaries") {
  const ModelSpec m = uniform_model(4, 1000, 1000, 10);
  CHECK_THROWS_AS(m_partition(m, 5), std::domain_error);
  CHECK_THROWS_AS(m_partition(m, -1), std::domain_error);
}

TEST_CASE("frozen block plus active sequence reconstructs the stack exactly") {
  const ModelSpec m = vit_b16();
  for (int lf = 0; lf <= m.layer_count(); ++lf) {
    const SublayerSeq seq = m_partition(m, lf);
    CHECK(seq.frozen_params + seq.active_params() == m.total_params());
    CHECK(static_cast<int>(seq.active.size()) == 2 * (m.layer_count() - lf));
    // Order preserved, no sublayer lost or duplicated.
    int expected_global = 2 * lf;
    for (const Sublayer& sl : seq.active) {
      CHECK(sl.global_index() == expected_global);
      ++expected_global;
    }
  }
}

TEST_CASE("vit-b16 preset matches the published architecture arithmetic") {
  const ModelSpec m = vit_b16();
  REQUIRE(m.layer_count() == 12);
  // Plain encoder block: 2,363,904 (attention) + 4,723,968 (MLP).
  CHECK(m.attention_params[1] == 2'363'904);
  CHECK(m.mlp_params[1] == 4'723'968);
  // Patch embedding + class token + position table folded into layer 0.
  CHECK(m.attention_params[0] == 2'363'904 + 742'656);
  // Classifier head folded into the last MLP block.
  CHECK(m.mlp_params[11] == 4'723'968 + 769'000);
  CHECK(m.total_params() == 86'566'120);
  // 197 tokens x 768 features, fp32.
  CHECK(m.boundary_bytes(2) == 605'184);
  CHECK(static_cast<int>(m.activation_bytes.size()) == 25);
}

TEST_CASE("bert-large preset matches the published architecture arithmetic") {
  const ModelSpec m = bert_large();
  REQUIRE(m.layer_count() == 24);
  CHECK(m.attention_params[1] == 4'200'448);
  CHECK(m.mlp_params[1] == 8'395'776);
  // A plain layer lands at ~12.6M params.
  CHECK(m.attention_params[1] + m.mlp_params[1] == 12'596'224);
  CHECK(m.attention_params[0] == 4'200'448 + 31'782'912);
  CHECK(m.total_params() == 335'143'938);
  // 512 tokens x 1024 features, fp32.
  CHECK(m.boundary_bytes(2) == 2'097'152);
}

TEST_CASE("model validation rejects malformed profiles") {
  ModelSpec m = uniform_model(4, 1000, 1000, 10);
  m.mlp_params.pop_back();
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);

  ModelSpec zero = uniform_model(4, 1000, 1000, 10);
  zero.attention_params[2] = 0;
  CHECK_THROWS_AS(zero.validate(), std::invalid_argument);

  ModelSpec bad_act = uniform_model(4, 1000, 1000, 10);
  bad_act.activation_bytes.pop_back();
  CHECK_THROWS_AS(bad_act.validate(), std::invalid_argument);
}

TEST_CASE("cluster validation enforces power-of-two GPU counts") {
  ClusterSpec c;
  c.node_count = 2;
  c.gpus_per_node = 6;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.gpus_per_node = 8;
  CHECK_NOTHROW(c.validate());
}
