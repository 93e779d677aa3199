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

// The dual of a standard-form LP,  min -<b, y>  s.t.  A* y + s = c,  s >= 0,
// as a two-block problem: f1(y) = -<b, y>, B1 = A*, f2 = indicator of the
// nonnegative orthant, B2 = I. Both subproblems are closed form once
// A A* can be inverted cheaply.

#pragma once

#include <limits>
#include <memory>

#include "hprwbp/hpr_core.hpp"
#include "hprwbp/ot.hpp"

namespace hprwbp {

struct LpOperators {
  std::size_t M = 0;
  std::size_t N = 0;
  LinearMap A;             // R^N -> R^M
  LinearMap A_adjoint;     // R^M -> R^N
  LinearMap solve_normal;  // R -> (A A*)^{-1} R
  Vector b, c;
};

inline TwoBlockProblem make_lp_dual_two_block(std::shared_ptr<const LpOperators> ops, double sigma) {
  TwoBlockProblem P;
  P.dim_y = ops->M;
  P.dim_s = ops->N;
  P.c = ops->c;
  P.sigma = sigma;
  P.B1 = ops->A_adjoint;
  P.B1_adjoint = ops->A;
  P.B2 = [](std::span<const double> in, std::span<double> out) { std::copy(in.begin(), in.end(), out.begin()); };
  P.B2_adjoint = P.B2;
  // sigma A A* y = b - A p
  P.y_oracle = [ops, sigma](std::span<const double> p, std::span<double> y) {
    Vector Ap(ops->M);
    ops->A(p, Ap);
    for (std::size_t i = 0; i < Ap.size(); ++i) Ap[i] = (ops->b[i] - Ap[i]) / sigma;
    ops->solve_normal(Ap, y);
  };
  P.s_oracle = [sigma](std::span<const double> p, std::span<double> s) {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::max(0.0, -p[i] / sigma);
  };
  P.f1 = [ops](std::span<const double> y) { return -dot(ops->b, y); };
  P.f2 = [](std::span<const double> s) {
    for (double v : s)
      if (v < 0.0) return std::numeric_limits<double>::infinity();
    return 0.0;
  };
  return P;
}

inline std::shared_ptr<const LpOperators> make_wbp_operators(const WbpInstance& inst) {
  auto ops = std::make_shared<LpOperators>();
  const LayoutPtr layout = inst.layout_ptr();
  const LpData lp = lp_data(inst);
  ops->M = layout->M();
  ops->N = layout->N();
  ops->b = lp.b;
  ops->c = lp.c;
  ops->A = [layout](std::span<const double> x, std::span<double> y) { apply_A(*layout, x, y); };
  ops->A_adjoint = [layout](std::span<const double> y, std::span<double> x) { apply_Astar(*layout, y, x); };
  auto ws = std::make_shared<NormalSolveWorkspace>(*layout);
  ops->solve_normal = [layout, ws](std::span<const double> R, std::span<double> y) {
    solve_wbp_normal(*layout, R, y, *ws);
  };
  return ops;
}

inline std::shared_ptr<const LpOperators> make_ot_operators(const OtProblem& ot) {
  ot.validate();
  auto ops = std::make_shared<LpOperators>();
  const std::size_t mu = ot.m_u(), mv = ot.m_v();
  ops->M = ot.rows();
  ops->N = ot.cols();
  ops->b = ot.b();
  ops->c = ot.c();
  ops->A = [mu, mv](std::span<const double> x, std::span<double> y) { apply_ot_A(mu, mv, x, y); };
  ops->A_adjoint = [mu, mv](std::span<const double> y, std::span<double> x) { apply_ot_Astar(mu, mv, y, x); };
  ops->solve_normal = [mu, mv](std::span<const double> R, std::span<double> y) {
    solve_ot_normal(mu, mv, R.first(mv), R.subspan(mv), y.first(mv), y.subspan(mv));
  };
  return ops;
}

/// ||R(y, s, x)|| for the LP dual: (A x - b; s - Pi_K(s - x); c - A* y - s).
inline double lp_residual_norm(const LpOperators& ops, std::span<const double> y, std::span<const double> s,
                               std::span<const double> x) {
  Vector Ax(ops.M), Aty(ops.N);
  ops.A(x, Ax);
  ops.A_adjoint(y, Aty);
  double acc = 0.0;
  for (std::size_t i = 0; i < ops.M; ++i) acc += (Ax[i] - ops.b[i]) * (Ax[i] - ops.b[i]);
  for (std::size_t i = 0; i < ops.N; ++i) {
    const double comp = s[i] - std::max(0.0, s[i] - x[i]);
    const double d = ops.c[i] - Aty[i] - s[i];
    acc += comp * comp + d * d;
  }
  return std::sqrt(acc);
}

}  // namespace hprwbp
