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

#include <Eigen/Eigenvalues>
#include <filesystem>

#include "oracles/dense_oracles.hpp"
#include "test_helpers.hpp"

using namespace hprwbp;
using testing_helpers::random_dims;

TEST(NormalSolve, TinyExample) {
  const WbpLayout L(2, {1});
  NormalSolveWorkspace ws(L);
  Vector y(3);
  solve_wbp_normal(L, Vector{1.0, 0.0, 0.0}, y, ws);
  EXPECT_NEAR(y[0], 0.75, 1e-15);
  EXPECT_NEAR(y[1], -0.5, 1e-15);
  EXPECT_NEAR(y[2], -0.25, 1e-15);
}

TEST(NormalSolve, ZeroRhsGivesZero) {
  const WbpLayout L(4, {2, 3});
  NormalSolveWorkspace ws(L);
  Vector y(L.M(), 7.0);
  solve_wbp_normal(L, Vector(L.M(), 0.0), y, ws);
  EXPECT_EQ(y, Vector(L.M(), 0.0));
}

TEST(NormalSolve, MatchesDenseNormalMatrix) {
  std::mt19937_64 g(11);
  std::uniform_int_distribution<std::size_t> dm(2, 8), dT(1, 5);
  for (int trial = 0; trial < 300; ++trial) {
    const WbpLayout L(dm(g), random_dims(g, dT(g), 1, 8));
    const auto A = oracle::dense_A(L);
    const Eigen::MatrixXd G = A * A.transpose();
    const Vector R = oracle::random_vector(g, L.M(), -5.0, 5.0);
    NormalSolveWorkspace ws(L);
    Vector y(L.M());
    solve_wbp_normal(L, R, y, ws);
    const double res = (G * oracle::to_eigen(y) - oracle::to_eigen(R)).norm();
    EXPECT_LE(res, 1e-10 * (1.0 + norm2(R)));
    const Eigen::VectorXd ref = G.ldlt().solve(oracle::to_eigen(R));
    EXPECT_LE((ref - oracle::to_eigen(y)).lpNorm<Eigen::Infinity>(), 1e-9 * (1.0 + ref.norm()));
  }
}

TEST(NormalSolve, RejectsMismatchedWorkspace) {
  const WbpLayout L(3, {2}), K(3, {3});
  NormalSolveWorkspace ws(K);
  Vector y(L.M());
  EXPECT_THROW(solve_wbp_normal(L, Vector(L.M(), 1.0), y, ws), InvalidArgument);
  NormalSolveWorkspace ok(L);
  EXPECT_THROW(solve_wbp_normal(L, Vector(L.M() + 1, 1.0), y, ok), InvalidArgument);
}

TEST(NormalSolve, FlopCountWithinBound) {
  std::mt19937_64 g(12);
  for (int trial = 0; trial < 200; ++trial) {
    const WbpLayout L(2 + g() % 60, random_dims(g, 1 + g() % 20, 1, 60));
    NormalSolveWorkspace ws(L);
    Vector y(L.M());
    FlopCounter fc;
    solve_wbp_normal(L, oracle::random_vector(g, L.M()), y, ws, fc);
    std::size_t sum_mt = 0;
    for (auto v : L.mts()) sum_mt += v;
    EXPECT_LE(fc.count, 7 * L.T() * L.m() + 3 * sum_mt + 64 * L.T());
  }
}

TEST(NormalSolve, DensifiedMatrixIsSymmetricPositiveDefinite) {
  const WbpLayout L(4, {3, 2, 5});
  const DenseMatrix G = debug::densify_normal_matrix(L);
  const auto A = oracle::dense_A(L);
  const Eigen::MatrixXd ref = A * A.transpose();
  for (std::size_t i = 0; i < G.rows; ++i)
    for (std::size_t j = 0; j < G.cols; ++j) EXPECT_EQ(G(i, j), ref(i, j));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ref);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  const double cond = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
  EXPECT_NEAR(debug::condition_estimate(L, 2000), cond, 1e-6 * cond);
}

TEST(NormalSolve, WritesCsv) {
  const WbpLayout L(2, {1});
  const auto path = std::filesystem::temp_directory_path() / "hprwbp_normal.csv";
  debug::write_normal_matrix_csv(L, path.string());
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "2,1,0");
  std::filesystem::remove(path);
}

TEST(OtNormalSolve, TinyExample) {
  const auto [y1, y2] = solve_ot_normal(2, 1, Vector{1.0}, Vector{0.0});
  ASSERT_EQ(y1.size(), 1u);
  ASSERT_EQ(y2.size(), 1u);
  EXPECT_NEAR(y1[0], 1.0, 1e-15);
  EXPECT_NEAR(y2[0], -1.0, 1e-15);
}

TEST(OtNormalSolve, MatchesDenseNormalMatrix) {
  std::mt19937_64 g(13);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t mu = 2 + g() % 11, mv = 1 + g() % 12;
    const auto A = oracle::dense_ot_A(mu, mv);
    const Vector R = oracle::random_vector(g, mu + mv - 1, -3.0, 3.0);
    const auto [y1, y2] = solve_ot_normal(mu, mv, std::span(R).first(mv), std::span(R).subspan(mv));
    Vector y(y1);
    y.insert(y.end(), y2.begin(), y2.end());
    const double res = (A * A.transpose() * oracle::to_eigen(y) - oracle::to_eigen(R)).norm();
    EXPECT_LE(res, 1e-10 * (1.0 + norm2(R)));
  }
}

TEST(OtOperators, MatchDenseMatrix) {
  std::mt19937_64 g(14);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t mu = 2 + g() % 6, mv = 1 + g() % 6;
    const auto A = oracle::dense_ot_A(mu, mv);
    const Vector x = oracle::random_vector(g, mu * mv), y = oracle::random_vector(g, mu + mv - 1);
    Vector Ax(mu + mv - 1), Aty(mu * mv);
    apply_ot_A(mu, mv, x, Ax);
    apply_ot_Astar(mu, mv, y, Aty);
    EXPECT_LE((oracle::to_eigen(Ax) - A * oracle::to_eigen(x)).norm(), 1e-12);
    EXPECT_LE((oracle::to_eigen(Aty) - A.transpose() * oracle::to_eigen(y)).norm(), 1e-12);
  }
}

TEST(ProjectAffine, MatchesPseudoInverseProjection) {
  std::mt19937_64 g(15);
  for (int trial = 0; trial < 30; ++trial) {
    const auto inst = testing_helpers::random_instance(g, 2 + g() % 5, random_dims(g, 1 + g() % 3, 1, 5));
    const auto& L = inst.layout();
    const auto A = oracle::dense_A(L);
    const Vector z = oracle::random_vector(g, L.N());
    NormalSolveWorkspace ws(L);
    const PrimalVector p = project_affine(inst, PrimalVector(inst.layout_ptr(), z), ws);
    const Eigen::VectorXd ref = oracle::project_affine(A, oracle::to_eigen(lp_data(inst).b), oracle::to_eigen(z));
    EXPECT_LE((oracle::to_eigen(p.values()) - ref).lpNorm<Eigen::Infinity>(), 1e-10);
    Vector Ap(L.M());
    apply_A(L, p.values(), Ap);
    for (std::size_t i = 0; i < L.M(); ++i) EXPECT_NEAR(Ap[i], lp_data(inst).b[i], 1e-12);
  }
}
