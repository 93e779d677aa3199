// Copyright 2026 The hprwbp Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "oracles/dense_oracles.hpp"
#include "test_helpers.hpp"

using namespace hprwbp;

namespace {

TwoBlockProblem tiny_wbp_problem(std::uint64_t seed, double sigma, WbpInstance** keep = nullptr) {
  static std::vector<std::unique_ptr<WbpInstance>> store;
  std::mt19937_64 g(seed);
  store.push_back(std::make_unique<WbpInstance>(testing_helpers::random_instance(g, 4, {3, 5})));
  if (keep) *keep = store.back().get();
  return make_lp_dual_two_block(make_wbp_operators(*store.back()), sigma);
}

OtProblem tiny_ot(std::uint64_t seed) {
  std::mt19937_64 g(seed);
  OtProblem ot;
  ot.a_u = testing_helpers::simplex_point(g, 5);
  ot.a_v = testing_helpers::simplex_point(g, 4);
  ot.cost = DenseMatrix(5, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : ot.cost.data) v = u(g);
  return ot;
}

}  // namespace

TEST(Halpern, WeightSchedule) {
  EXPECT_DOUBLE_EQ(halpern_weight(0), 0.5);
  EXPECT_DOUBLE_EQ(halpern_weight(8), 0.1);
  HalpernSchedule s{Vector{1.0}, 3};
  EXPECT_DOUBLE_EQ(s.weight(), 0.2);
}

TEST(TwoBlock, AdjointsValidate) {
  TwoBlockProblem P = tiny_wbp_problem(1, 1.0);
  EXPECT_NO_THROW(P.validate());
  P.B1_adjoint = [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 1.0); };
  EXPECT_THROW(P.validate(), InvalidArgument);
  P = tiny_wbp_problem(1, 1.0);
  P.sigma = 0.0;
  EXPECT_THROW(P.validate(), InvalidArgument);
}

TEST(Equivalence, ThreeFormsAgreeOnWbp) {
  for (double sigma : {0.3, 1.0, 4.0}) {
    const TwoBlockProblem P = tiny_wbp_problem(2, sigma);
    const Vector y0(P.dim_y, 0.0), x0(P.dim_x(), 0.0);
    const EquivalenceReport r = verify_equivalence(P, 200, 1e-9, y0, x0);
    EXPECT_TRUE(r.passed) << "sigma=" << sigma << " dev=" << r.max_deviation;
    EXPECT_LE(r.max_deviation, 1e-9);
  }
}

TEST(Equivalence, ThreeFormsAgreeOnOtFromRandomStart) {
  const OtProblem ot = tiny_ot(3);
  const TwoBlockProblem P = make_lp_dual_two_block(make_ot_operators(ot), 0.7);
  std::mt19937_64 g(4);
  const Vector y0 = oracle::random_vector(g, P.dim_y), x0 = oracle::random_vector(g, P.dim_x());
  const EquivalenceReport r = verify_equivalence(P, 200, 1e-9, y0, x0);
  EXPECT_TRUE(r.passed) << r.max_deviation;
}

TEST(Equivalence, MismatchedStartIsReported) {
  const TwoBlockProblem P = tiny_wbp_problem(5, 1.0);
  const Vector y0(P.dim_y, 0.0), x0(P.dim_x(), 0.0);
  Vector eta0(P.dim_x(), 0.25);
  const EquivalenceReport r = verify_equivalence(P, 20, 1e-9, y0, x0, eta0);
  EXPECT_TRUE(r.init_mismatch);
  EXPECT_FALSE(r.passed);
  ASSERT_TRUE(r.first_divergence.has_value());
  EXPECT_EQ(*r.first_divergence, 1u);
}

TEST(Equivalence, ProductionEngineMatchesGenericForm) {
  WbpInstance* inst = nullptr;
  const TwoBlockProblem P = tiny_wbp_problem(6, 1.3, &inst);
  HprIterate it = make_iterate(P, Vector(P.dim_y, 0.0), Vector(P.dim_x(), 0.0));
  DualLpEngine eng(*inst, 1.3);
  for (std::size_t k = 0; k < 300; ++k) {
    hpr_step_optform(P, it, k);
    eng.hpr_step(k);
    ASSERT_LE(max_abs_diff(it.x, eng.x()), 1e-10) << k;
    ASSERT_LE(max_abs_diff(it.y, eng.y()), 1e-10) << k;
    ASSERT_LE(max_abs_diff(it.s, eng.s()), 1e-10) << k;
    ASSERT_LE(max_abs_diff(it.x_hat, eng.x_hat()), 1e-10) << k;
  }
}

TEST(Bounds, KktRateBoundFormula) {
  EXPECT_DOUBLE_EQ(kkt_rate_bound(9, 1.0, 1.0, 2.0, 3.0), 2.0 * 5.0 / 10.0);
  const ObjectiveGapBounds b = objective_gap_bounds(0, 2.0, 1.0, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(b.lower, -(1.0 / 2.0) * 2.0);
  EXPECT_DOUBLE_EQ(b.upper, (4.0 + 2.0) / 2.0);
}

TEST(Bounds, KktRateBoundHoldsOnTinyOt) {
  const OtProblem ot = tiny_ot(7);
  auto ops = make_ot_operators(ot);
  const double sigma = 1.0;
  const TwoBlockProblem P = make_lp_dual_two_block(ops, sigma);
  // Reference solution from a long run, re-anchored every 500 steps.
  HprIterate ref = make_iterate(P, Vector(P.dim_y, 0.0), Vector(P.dim_x(), 0.0));
  for (int phase = 0; phase < 400; ++phase) {
    if (phase > 0) ref = make_iterate(P, ref.y, ref.x);
    for (std::size_t k = 0; k < 500; ++k) hpr_step_optform(P, ref, k);
  }
  ASSERT_LE(lp_residual_norm(*ops, ref.y, ref.s, ref.x), 1e-6);
  Vector By0(P.dim_x()), Bys(P.dim_x());
  HprIterate it = make_iterate(P, Vector(P.dim_y, 0.0), Vector(P.dim_x(), 0.0));
  P.B1(it.y, By0);
  P.B1(ref.y, Bys);
  double dx = 0.0, dB = 0.0;
  for (std::size_t i = 0; i < P.dim_x(); ++i) {
    dx += (it.x[i] - ref.x[i]) * (it.x[i] - ref.x[i]);
    dB += (By0[i] - Bys[i]) * (By0[i] - Bys[i]);
  }
  dx = std::sqrt(dx);
  dB = std::sqrt(dB);
  for (std::size_t k = 0; k <= 2000; ++k) {
    hpr_step_optform(P, it, k);
    const double bound = kkt_rate_bound(k, sigma, 1.0, dx, dB);
    // Slack covers the residual error of the reference point.
    ASSERT_LE(lp_residual_norm(*ops, it.y, it.s, it.x), bound * (1 + 1e-6) + 1e-6) << k;
  }
}
