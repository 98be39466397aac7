#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "eps/freeze.hpp"
#include "eps/rng.hpp"
#include "oracles.hpp"

using namespace eps;

namespace {

GradNormVector decreasing_norms(int layers, int timestep) {
  GradNormVector v;
  v.timestep = timestep;
  for (int l = 0; l < layers; ++l)
    v.norms.push_back(static_cast<double>(layers - l));
  return v;
}

}  // namespace

TEST_CASE("closed form at T=1 is alpha*L") {
  CHECK(frozen_bound_closed_form(1, 12, 0.5) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(frozen_bound_closed_form(1, 24, 0.1) == doctest::Approx(2.4).epsilon(1e-12));
}

TEST_CASE("closed form matches the hand-evaluated second step") {
  // alpha*L + (1-alpha)*alpha*L = 4 + (2/3)*4 = 6.666...
  CHECK(frozen_bound_closed_form(2, 12, 1.0 / 3.0) ==
        doctest::Approx(20.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("closed form equals the recurrence for the sweep grid") {
  for (int layers : {12, 24}) {
    for (int ai = 1; ai <= 9; ++ai) {
      const double alpha = ai / 10.0;
      for (int t = 1; t <= 30; ++t) {
        const double closed = frozen_bound_closed_form(t, layers, alpha);
        const double rec = oracle::bound_recurrence(t, layers, alpha);
        CHECK(std::abs(closed - rec) <= 1e-9);
      }
    }
  }
}

TEST_CASE("closed form rejects alpha outside (0,1)") {
  CHECK_THROWS_AS(frozen_bound_closed_form(1, 12, 0.0), std::domain_error);
  CHECK_THROWS_AS(frozen_bound_closed_form(1, 12, 1.0), std::domain_error);
}

TEST_CASE("first decision freezes the bound when norms decrease with depth") {
  FreezeState state(1.0 / 3.0);
  const int result = next_frozen_count(state, decreasing_norms(12, 1), 12);
  // bound = 4.0, argmin = layer 11, min floored = 4.
  CHECK(result == 4);
  CHECK(state.history().back().raw_bound == doctest::Approx(4.0));
}

TEST_CASE("equal norms freeze nothing (ties break to the lowest index)") {
  FreezeState state(1.0 / 3.0);
  GradNormVector v;
  v.norms.assign(12, 1.0);
  v.timestep = 1;
  CHECK(next_frozen_count(state, v, 12) == 0);
}

TEST_CASE("argmin caps the bound when a mid-stack layer has the smallest norm") {
  FreezeState state(1.0 / 3.0);
  REQUIRE(next_frozen_count(state, decreasing_norms(12, 1), 12) == 4);
  GradNormVector v;
  v.norms.assign(12, 1.0);
  v.norms[7] = 0.01;
  v.timestep = 2;
  // bound = 4 + (1/3)(8) = 6.667; min(6.667, 7) floored = 6.
  const int result = next_frozen_count(state, v, 12);
  CHECK(result == 6);
  CHECK(state.history().back().raw_bound == doctest::Approx(4.0 + 8.0 / 3.0));
}

TEST_CASE("norm vector length mismatch is a domain error") {
  FreezeState state(0.5);
  GradNormVector v;
  v.norms.assign(10, 1.0);
  CHECK_THROWS_AS(next_frozen_count(state, v, 12), std::domain_error);
}

TEST_CASE("trajectories are monotone and bound-dominated for random norms") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const double alpha = 0.1 + 0.8 * rng.next_unit();
    const int layers = 12;
    FreezeState state(alpha);
    int prev = 0;
    for (int t = 1; t <= 20; ++t) {
      GradNormVector v;
      v.timestep = t;
      for (int l = 0; l < layers; ++l) v.norms.push_back(rng.next_unit());
      const int next = next_frozen_count(state, v, layers);
      CHECK(next >= prev);
      const int cap = static_cast<int>(std::floor(prev + alpha * (layers - prev)));
      CHECK(next <= cap);
      CHECK(next <= layers);
      prev = next;
    }
  }
}

TEST_CASE("a larger alpha freezes at least as fast on the same norm stream") {
  const SyntheticNormSource source(SyntheticProfile::kMonotoneConverging, 7, 12);
  FreezeState slow(0.2), fast(0.45);
  for (int t = 1; t <= 12; ++t) {
    const GradNormVector v = source.at_epoch(t - 1);
    const int a = next_frozen_count(slow, v, 12);
    const int b = next_frozen_count(fast, v, 12);
    CHECK(b >= a);
  }
}

TEST_CASE("synthetic monotone profile is deterministic with its minimum on top") {
  const SyntheticNormSource a(SyntheticProfile::kMonotoneConverging, 42, 24);
  const SyntheticNormSource b(SyntheticProfile::kMonotoneConverging, 42, 24);
  for (int e = 0; e < 6; ++e) {
    const GradNormVector va = a.at_epoch(e);
    const GradNormVector vb = b.at_epoch(e);
    CHECK(va.norms == vb.norms);
    int argmin = 0;
    for (int l = 1; l < 24; ++l)
      if (va.norms[l] < va.norms[argmin]) argmin = l;
    CHECK(argmin == 23);
  }
}

TEST_CASE("early-random profile pins the minimum near the output side") {
  const int layers = 12;
  const SyntheticNormSource source(SyntheticProfile::kEarlyRandom, 5, layers, 3);
  for (int e = 0; e < 3; ++e) {
    const GradNormVector v = source.at_epoch(e);
    int argmin = 0;
    for (int l = 1; l < layers; ++l)
      if (v.norms[l] < v.norms[argmin]) argmin = l;
    CHECK(argmin >= layers - layers / 4 - 1);
  }
  // With the argmin far from the input side, the bound term wins the min.
  FreezeState state(1.0 / 3.0);
  const int result = next_frozen_count(state, source.at_epoch(0), layers);
  CHECK(result == 4);
  CHECK(state.history().back().raw_bound == doctest::Approx(4.0));
}

TEST_CASE("trace source plays back a CSV exactly and flags gaps") {
  const std::string path = (std::filesystem::temp_directory_path() /
                            "eps_trace_test.csv").string();
  {
    std::ofstream out(path);
    out << "epoch,layer,grad_norm\n";
    for (int e = 0; e < 2; ++e)
      for (int l = 0; l < 3; ++l)
        out << e << "," << l << "," << (10.0 * e + l + 0.5) << "\n";
  }
  const TraceNormSource source(path);
  CHECK(source.layer_count() == 3);
  CHECK(source.epoch_count() == 2);
  CHECK(source.at_epoch(1).norms == std::vector<double>{10.5, 11.5, 12.5});
  CHECK_THROWS_AS(source.at_epoch(2), std::domain_error);

  {
    std::ofstream out(path);
    out << "epoch,layer,grad_norm\n";
    out << "0,0,1.0\n0,2,1.0\n";  // layer 1 missing
  }
  CHECK_THROWS_AS(TraceNormSource{path}, std::domain_error);
  std::filesystem::remove(path);
}
