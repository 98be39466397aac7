#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "eps/autocache.hpp"
#include "eps/model.hpp"

using namespace eps;

namespace {

CacheTierParams reference_tiers() {
  CacheTierParams t;
  t.host_bandwidth = 3.05e9;
  t.disk_bandwidth = 6.0e9;
  t.host_capacity_bytes = 64e9;
  t.window_batches = 64;
  t.block_batches = 8;
  return t;
}

int flip_point(const ModelSpec& m, const CacheTierParams& tiers) {
  const CostModel cm;
  for (int lf = 0; lf <= m.layer_count(); ++lf) {
    if (should_cache(lf, m, cm, tiers, 32.0).enable) return lf;
  }
  return m.layer_count() + 1;
}

}  // namespace

TEST_CASE("caching never enables with nothing frozen") {
  const CostModel cm;
  const CacheDecision d = should_cache(0, vit_b16(), cm, reference_tiers(), 50.0);
  CHECK_FALSE(d.enable);
  CHECK(d.forward_seconds_per_microbatch == 0.0);
}

TEST_CASE("reference tiers flip the 12-layer preset at three frozen layers") {
  CHECK(flip_point(vit_b16(), reference_tiers()) == 3);
}

TEST_CASE("reference tiers flip the 24-layer preset within one of five") {
  const int flip = flip_point(bert_large(), reference_tiers());
  CHECK(flip >= 4);
  CHECK(flip <= 6);
}

TEST_CASE("more host bandwidth never raises the enabling threshold") {
  int previous = flip_point(vit_b16(), reference_tiers());
  for (double bw = 3.05e9; bw <= 50e9; bw *= 2.0) {
    CacheTierParams t = reference_tiers();
    t.host_bandwidth = bw;
    const int flip = flip_point(vit_b16(), t);
    CHECK(flip <= previous);
    previous = flip;
  }
}

TEST_CASE("boundary move 3->7 reads, computes four layers and writes") {
  const ModelSpec m = uniform_model(12, 4'000'000, 4'000'000, 600'000);
  const CostModel cm;
  CacheState state;
  state.tiers = reference_tiers();
  state.enabled = true;
  state.boundary_layer = 3;
  auto [next, cost] = cache_transition(state, 3, 7, m, cm);
  CHECK(next.boundary_layer == 7);
  CHECK(cost.read_seconds_per_sample ==
        doctest::Approx(600'000.0 / 3.05e9).epsilon(1e-12));
  CHECK(cost.compute_seconds_per_sample ==
        doctest::Approx(cm.c_fwd * 4 * 8'000'000.0).epsilon(1e-12));
  CHECK(cost.write_seconds_per_sample ==
        doctest::Approx(600'000.0 / 3.05e9).epsilon(1e-12));
  CHECK(cost.critical_path_per_sample() ==
        doctest::Approx(cost.read_seconds_per_sample +
                        cost.compute_seconds_per_sample));
}

TEST_CASE("an unchanged boundary costs nothing") {
  const ModelSpec m = uniform_model(12, 4'000'000, 4'000'000, 600'000);
  CacheState state;
  state.tiers = reference_tiers();
  state.enabled = true;
  state.boundary_layer = 5;
  auto [next, cost] = cache_transition(state, 5, 5, m, CostModel{});
  CHECK(cost.total_per_sample() == 0.0);
  CHECK(next.boundary_layer == 5);
}

TEST_CASE("enabling from scratch forwards and writes but reads nothing") {
  const ModelSpec m = uniform_model(12, 4'000'000, 4'000'000, 600'000);
  const CostModel cm;
  CacheState state;
  state.tiers = reference_tiers();
  auto [next, cost] = cache_transition(state, 0, 3, m, cm);
  CHECK(next.enabled);
  CHECK(cost.read_seconds_per_sample == 0.0);
  CHECK(cost.compute_seconds_per_sample ==
        doctest::Approx(cm.c_fwd * 3 * 8'000'000.0));
  CHECK(cost.write_seconds_per_sample > 0.0);
}

TEST_CASE("a backward boundary move is a domain error") {
  const ModelSpec m = uniform_model(12, 4'000'000, 4'000'000, 600'000);
  CacheState state;
  state.tiers = reference_tiers();
  state.enabled = true;
  state.boundary_layer = 7;
  CHECK_THROWS_AS(cache_transition(state, 7, 3, m, CostModel{}), std::domain_error);
}

TEST_CASE("everything resident: no tier traffic, no stalls") {
  CacheTierParams t = reference_tiers();
  t.window_batches = 100;
  t.host_capacity_bytes = 1e12;
  CacheTierSim sim(t, 1e6, 40);
  CHECK_FALSE(sim.sliding());
  double now = 0.0;
  for (int b = 0; b < 40; ++b) {
    const WindowStep step = sim.advance(b, now);
    CHECK(step.actions.empty());
    CHECK(step.stall_seconds == 0.0);
    now += 0.1;
  }
  CHECK(sim.total_stall() == 0.0);
}

TEST_CASE("a two-block window with a fast disk hides every fetch") {
  CacheTierParams t = reference_tiers();
  t.block_batches = 4;
  t.window_batches = 8;
  t.host_capacity_bytes = 8e6;  // exactly two blocks
  t.disk_bandwidth = 1e9;       // block fetch: 4 ms << consumption time
  CacheTierSim sim(t, 1e6, 64);
  CHECK(sim.sliding());
  double now = 0.0;
  for (int b = 0; b < 64; ++b) {
    const WindowStep step = sim.advance(b, now);
    now += 0.1 + step.stall_seconds;
  }
  CHECK(sim.total_stall() == 0.0);
  CHECK(sim.max_resident_bytes() <= t.host_capacity_bytes);
}

TEST_CASE("a starved disk stalls linearly in the fetched blocks") {
  CacheTierParams t = reference_tiers();
  t.block_batches = 4;
  t.window_batches = 8;
  t.host_capacity_bytes = 8e6;
  t.disk_bandwidth = 1e3;  // 4000 s per block
  const int batches = 64;
  CacheTierSim sim(t, 1e6, batches);
  double now = 0.0;
  for (int b = 0; b < batches; ++b) {
    const WindowStep step = sim.advance(b, now);
    now += step.stall_seconds;  // consumption itself takes no time here
  }
  const double per_block = 4e6 / 1e3;
  const int fetched_blocks = batches / 4 - 2;  // first two staged
  CHECK(sim.total_stall() ==
        doctest::Approx(per_block * fetched_blocks).epsilon(1e-9));
}

TEST_CASE("out-of-order consumption is rejected") {
  CacheTierParams t = reference_tiers();
  CacheTierSim sim(t, 1e6, 10);
  sim.advance(0, 0.0);
  CHECK_THROWS_AS(sim.advance(2, 0.1), std::domain_error);
}

TEST_CASE("tier validation enforces window >= block >= 1") {
  CacheTierParams t = reference_tiers();
  t.window_batches = 4;
  t.block_batches = 8;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}
