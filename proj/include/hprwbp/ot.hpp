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

// Two-marginal optimal transport in the same reduced standard form:
// x = vec(X) for X in R^{m_u x m_v}, rows of A are the m_v column sums
// followed by row sums 2..m_u (the first row sum is implied).

#pragma once

#include "hprwbp/normal_solver.hpp"

namespace hprwbp {

struct OtProblem {
  Vector a_u;      // row marginal, length m_u
  Vector a_v;      // column marginal, length m_v
  DenseMatrix cost;  // m_u x m_v

  std::size_t m_u() const noexcept { return a_u.size(); }
  std::size_t m_v() const noexcept { return a_v.size(); }
  std::size_t rows() const noexcept { return m_v() + m_u() - 1; }
  std::size_t cols() const noexcept { return m_u() * m_v(); }

  void validate() const {
    if (m_u() < 2 || m_v() < 1) throw InvalidArgument("OtProblem: need m_u >= 2 and m_v >= 1");
    if (cost.rows != m_u() || cost.cols != m_v()) throw InvalidArgument("OtProblem: cost shape mismatch");
  }

  Vector b() const {
    Vector out(a_v.begin(), a_v.end());
    out.insert(out.end(), a_u.begin() + 1, a_u.end());
    return out;
  }
  Vector c() const { return cost.data; }
};

inline void apply_ot_A(std::size_t m_u, std::size_t m_v, std::span<const double> x, std::span<double> y) {
  if (x.size() != m_u * m_v || y.size() != m_v + m_u - 1) throw InvalidArgument("apply_ot_A: length mismatch");
  double* y2 = y.data() + m_v;
  std::fill(y2, y2 + (m_u - 1), 0.0);
  for (std::size_t j = 0; j < m_v; ++j) {
    const double* col = x.data() + j * m_u;
    double s = col[0];
    for (std::size_t i = 1; i < m_u; ++i) {
      s += col[i];
      y2[i - 1] += col[i];
    }
    y[j] = s;
  }
}

inline void apply_ot_Astar(std::size_t m_u, std::size_t m_v, std::span<const double> y, std::span<double> x) {
  if (x.size() != m_u * m_v || y.size() != m_v + m_u - 1) throw InvalidArgument("apply_ot_Astar: length mismatch");
  const double* y2 = y.data() + m_v;
  for (std::size_t j = 0; j < m_v; ++j) {
    double* col = x.data() + j * m_u;
    col[0] = y[j];
    for (std::size_t i = 1; i < m_u; ++i) col[i] = y[j] + y2[i - 1];
  }
}

}  // namespace hprwbp
