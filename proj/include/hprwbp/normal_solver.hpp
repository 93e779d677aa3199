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

// Closed-form solves of A A* y = R for the barycenter and transport
// constraint matrices.
//
// For the barycenter matrix, A A* has the block form
//
//   [ E1   E2      0  ]      E1 = diag(m I_{m_t}),  E2 = diag(1_{m_t} 1_{m-1}^T)
//   [ E2*  E3+E4   E5 ]      E3 = diag(m_t I_{m-1}), E4 = (1_T 1_T^T) (x) I_{m-1}
//   [ 0    E5*     m  ]      E5 = -1_T (x) 1_{m-1}
//
// Eliminating y1 and y3 leaves a system in y2 whose matrix is a Kronecker
// product of (diag(m_t) + 1 1^T) and Q = I - 11^T/m. Both factors are
// diagonal-plus-rank-one, so every inverse reduces to sums and scalings:
//
//   yh^t  = R2^t + (1^T R2^t - 1^T R1^t + R3) 1      (= Q^{-1} Rhat2^t)
//   yh^a  = sum_t (mbar / m_t) yh^t,   mbar = (1 + sum_t 1/m_t)^{-1}
//   y2^t  = (yh^t - yh^a) / m_t
//   y1^t  = R1^t / m - (1^T y2^t / m) 1
//   y3    = (R3 + 1^T y2) / m
//
// Cost: 7 T m + 3 sum m_t + O(T) flops, O(T m + sum m_t) memory, none of the
// E blocks or Q is formed.

#pragma once

#include <fstream>

#include "hprwbp/problem.hpp"

namespace hprwbp {

/// Scratch space and layout constants for solve_wbp_normal. Single owner:
/// concurrent solves need separate workspaces.
class NormalSolveWorkspace {
 public:
  explicit NormalSolveWorkspace(const WbpLayout& layout)
      : m_(layout.m()), mt_(layout.mts()), aggregate_(layout.m() - 1, 0.0), inv_mt_(layout.T()), agg_weight_(layout.T()) {
    double s = 1.0;
    for (std::size_t t = 0; t < layout.T(); ++t) s += 1.0 / static_cast<double>(layout.mt(t));
    mbar_ = 1.0 / s;
    for (std::size_t t = 0; t < layout.T(); ++t) {
      inv_mt_[t] = 1.0 / static_cast<double>(layout.mt(t));
      agg_weight_[t] = mbar_ * inv_mt_[t];
    }
  }

  double mbar() const noexcept { return mbar_; }
  bool matches(const WbpLayout& L) const { return L.m() == m_ && L.mts() == mt_; }

  /// yh^a scratch, length m - 1.
  std::span<double> aggregate() noexcept { return aggregate_; }
  double inv_mt(std::size_t t) const { return inv_mt_[t]; }
  /// mbar / m_t.
  double aggregate_weight(std::size_t t) const { return agg_weight_[t]; }

 private:
  std::size_t m_;
  std::vector<std::size_t> mt_;
  double mbar_ = 0.0;
  Vector aggregate_;
  Vector inv_mt_;
  Vector agg_weight_;
};

/// Solves A A* y = R. `y` must not alias `R`. Performs no allocation.
template <class Counter = NoFlops>
void solve_wbp_normal(const WbpLayout& L, std::span<const double> R, std::span<double> y, NormalSolveWorkspace& ws,
                      Counter& flops) {
  if (R.size() != L.M() || y.size() != L.M())
    throw InvalidArgument("solve_wbp_normal: R and y must have length M=" + std::to_string(L.M()));
  if (!ws.matches(L)) throw InvalidArgument("solve_wbp_normal: workspace was built for a different layout");

  const std::size_t T = L.T();
  const std::size_t n2 = L.m() - 1;
  const double inv_m = 1.0 / static_cast<double>(L.m());
  const double R3 = R[L.y3_offset()];
  double* agg = ws.aggregate().data();
  std::fill(agg, agg + n2, 0.0);

  // Step 1a: yh^t into the y2 blocks, accumulating yh^a in index order.
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t mt = L.mt(t);
    const double* r1 = R.data() + L.y1_offset(t);
    const double* r2 = R.data() + L.y2_offset(t);
    double* yh = y.data() + L.y2_offset(t);
    double s2 = 0.0;
    for (std::size_t i = 0; i < n2; ++i) s2 += r2[i];
    double s1 = 0.0;
    for (std::size_t j = 0; j < mt; ++j) s1 += r1[j];
    const double shift = s2 - s1 + R3;
    const double w = ws.aggregate_weight(t);
    for (std::size_t i = 0; i < n2; ++i) {
      const double v = r2[i] + shift;
      yh[i] = v;
      agg[i] += w * v;
    }
    flops.add(n2 + mt + 2 + n2 + 2 * n2);
  }

  // Steps 1b, 2: y2^t, then y1^t; 1^T y2 accumulated for step 3.
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t mt = L.mt(t);
    const double inv = ws.inv_mt(t);
    double* y2 = y.data() + L.y2_offset(t);
    double s = 0.0;
    for (std::size_t i = 0; i < n2; ++i) {
      y2[i] = (y2[i] - agg[i]) * inv;
      s += y2[i];
    }
    total += s;
    const double shift = s * inv_m;
    const double* r1 = R.data() + L.y1_offset(t);
    double* y1 = y.data() + L.y1_offset(t);
    for (std::size_t j = 0; j < mt; ++j) y1[j] = r1[j] * inv_m - shift;
    flops.add(2 * n2 + n2 + 1 + 1 + 2 * mt);
  }

  // Step 3.
  y[L.y3_offset()] = (R3 + total) * inv_m;
  flops.add(2);
}

inline void solve_wbp_normal(const WbpLayout& L, std::span<const double> R, std::span<double> y,
                             NormalSolveWorkspace& ws) {
  NoFlops c;
  solve_wbp_normal(L, R, y, ws, c);
}

/// Allocating convenience form.
inline DualVector solve_wbp_normal(const WbpInstance& inst, const DualVector& R) {
  if (!(R.layout() == inst.layout())) throw InvalidArgument("solve_wbp_normal: R layout does not match instance");
  NormalSolveWorkspace ws(inst.layout());
  DualVector y(inst.layout_ptr());
  solve_wbp_normal(inst.layout(), R.values(), y.values(), ws);
  return y;
}

inline DualVector solve_wbp_normal(const WbpInstance& inst, const DualVector& R, NormalSolveWorkspace& ws) {
  if (!(R.layout() == inst.layout())) throw InvalidArgument("solve_wbp_normal: R layout does not match instance");
  DualVector y(inst.layout_ptr());
  solve_wbp_normal(inst.layout(), R.values(), y.values(), ws);
  return y;
}

/// Solves A A* y = R for the transport matrix
///   A = [ I_{m_v} (x) 1_{m_u}^T ; 1_{m_v}^T (x) [0, I_{m_u - 1}] ],
/// with R = (R1 in R^{m_v}, R2 in R^{m_u - 1}). O(m_u + m_v).
inline void solve_ot_normal(std::size_t m_u, std::size_t m_v, std::span<const double> R1, std::span<const double> R2,
                            std::span<double> y1, std::span<double> y2) {
  if (m_u < 2 || m_v < 1) throw InvalidArgument("solve_ot_normal: need m_u >= 2 and m_v >= 1");
  if (R1.size() != m_v || y1.size() != m_v || R2.size() != m_u - 1 || y2.size() != m_u - 1)
    throw InvalidArgument("solve_ot_normal: block lengths must be (m_v, m_u - 1)");
  const double mu = static_cast<double>(m_u);
  const double mv = static_cast<double>(m_v);
  const double s1 = sum(R1);
  const double s2 = sum(R2);
  const double shift1 = ((mu - 1.0) / mu * s1 - s2) / mv;
  const double shift2 = (s2 - s1) / mv;
  for (std::size_t j = 0; j < m_v; ++j) y1[j] = R1[j] / mu + shift1;
  for (std::size_t i = 0; i + 1 < m_u; ++i) y2[i] = R2[i] / mv + shift2;
}

inline std::pair<Vector, Vector> solve_ot_normal(std::size_t m_u, std::size_t m_v, std::span<const double> R1,
                                                 std::span<const double> R2) {
  Vector y1(m_v), y2(m_u > 0 ? m_u - 1 : 0);
  solve_ot_normal(m_u, m_v, R1, R2, y1, y2);
  return {std::move(y1), std::move(y2)};
}

/// Euclidean projection onto {x : A x = b}: z - A*(AA*)^{-1}(Az - b).
inline void project_affine(const WbpLayout& L, std::span<const double> b, std::span<const double> z,
                           std::span<double> out, NormalSolveWorkspace& ws) {
  Vector r(L.M()), y(L.M());
  apply_A(L, z, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  solve_wbp_normal(L, r, y, ws);
  apply_Astar(L, y, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = z[i] - out[i];
}

inline PrimalVector project_affine(const WbpInstance& inst, const PrimalVector& z, NormalSolveWorkspace& ws) {
  if (!(z.layout() == inst.layout())) throw InvalidArgument("project_affine: layout mismatch");
  const LpData lp = lp_data(inst);
  PrimalVector out(inst.layout_ptr());
  project_affine(inst.layout(), lp.b, z.values(), out.values(), ws);
  return out;
}

namespace debug {

/// A A* as a dense M x M matrix, built column by column from the operators.
/// Intended for tiny layouts only.
inline DenseMatrix densify_normal_matrix(const WbpLayout& L) {
  const std::size_t M = L.M();
  DenseMatrix out(M, M);
  Vector e(M, 0.0), x(L.N()), col(M);
  for (std::size_t k = 0; k < M; ++k) {
    e[k] = 1.0;
    apply_Astar(L, e, x);
    apply_A(L, x, col);
    std::copy(col.begin(), col.end(), out.data.begin() + static_cast<std::ptrdiff_t>(k * M));
    e[k] = 0.0;
  }
  return out;
}

inline void write_normal_matrix_csv(const WbpLayout& L, const std::string& path) {
  const DenseMatrix G = densify_normal_matrix(L);
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.precision(17);
  for (std::size_t i = 0; i < G.rows; ++i) {
    for (std::size_t j = 0; j < G.cols; ++j) f << (j ? "," : "") << G(i, j);
    f << '\n';
  }
  if (!f) throw IoError("write failed for " + path);
}

/// Spectral condition number estimate of A A*: power iteration for the
/// largest eigenvalue, inverse power iteration (through the closed-form
/// solve) for the smallest.
inline double condition_estimate(const WbpLayout& L, int iterations = 200) {
  const std::size_t M = L.M();
  NormalSolveWorkspace ws(L);
  Vector v(M), w(M), x(L.N());
  auto normalize = [](Vector& a) {
    const double n = norm2(a);
    for (double& e : a) e /= n;
    return n;
  };
  for (std::size_t i = 0; i < M; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i % 7);
  normalize(v);
  double lmax = 0.0;
  for (int it = 0; it < iterations; ++it) {
    apply_Astar(L, v, x);
    apply_A(L, x, w);
    lmax = normalize(w);
    v.swap(w);
  }
  for (std::size_t i = 0; i < M; ++i) v[i] = 1.0 - 0.1 * static_cast<double>(i % 5);
  normalize(v);
  double inv_lmin = 0.0;
  for (int it = 0; it < iterations; ++it) {
    solve_wbp_normal(L, v, w, ws);
    inv_lmin = normalize(w);
    v.swap(w);
  }
  return lmax * inv_lmin;
}

}  // namespace debug

}  // namespace hprwbp
