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

// Fixed-support Wasserstein barycenter LP in standard form
//
//   min <c, x>  s.t.  A x = b,  x >= 0,
//
// with x = (vec(X^1); ...; vec(X^T); a^c) and A the row-reduced constraint
// matrix (first row of every X^t 1 = a^c block removed, which keeps A full
// row rank). Nothing of size M x N is ever formed: A and A* are applied
// block by block.
//
// Layout contract: vec() is column stacking, so entry (i, j) of the m x m_t
// plan X^t lives at plan_offset(t) + j * m + i. Column sums of X^t are then
// contiguous reductions, which is what the A_1 block needs.

#pragma once

#include <memory>
#include <numeric>
#include <utility>

#include "hprwbp/common.hpp"

namespace hprwbp {

/// Dimensions and flat offsets shared by primal and dual vectors.
class WbpLayout {
 public:
  WbpLayout(std::size_t m, std::vector<std::size_t> mt) : m_(m), mt_(std::move(mt)) {
    if (m_ < 2) throw InvalidArgument("barycenter support size m must be >= 2, got " + std::to_string(m_));
    if (mt_.empty()) throw InvalidArgument("need at least one sample distribution (T >= 1)");
    plan_offset_.resize(mt_.size() + 1, 0);
    y1_offset_.resize(mt_.size() + 1, 0);
    for (std::size_t t = 0; t < mt_.size(); ++t) {
      if (mt_[t] < 1) throw InvalidArgument("sample " + std::to_string(t) + " has no atoms");
      y1_offset_[t + 1] = y1_offset_[t] + mt_[t];
      plan_offset_[t + 1] = plan_offset_[t] + m_ * mt_[t];
    }
  }

  std::size_t m() const noexcept { return m_; }
  std::size_t T() const noexcept { return mt_.size(); }
  std::size_t mt(std::size_t t) const { return mt_[t]; }
  const std::vector<std::size_t>& mts() const noexcept { return mt_; }

  /// Sum of m_t.
  std::size_t M1() const noexcept { return y1_offset_.back(); }
  /// T (m - 1).
  std::size_t M2() const noexcept { return T() * (m_ - 1); }
  /// Number of rows of A.
  std::size_t M() const noexcept { return M1() + M2() + 1; }
  /// Number of plan entries, m * sum m_t.
  std::size_t plan_size() const noexcept { return plan_offset_.back(); }
  /// Number of columns of A.
  std::size_t N() const noexcept { return plan_size() + m_; }

  std::size_t plan_offset(std::size_t t) const { return plan_offset_[t]; }
  std::size_t bary_offset() const noexcept { return plan_size(); }
  std::size_t y1_offset(std::size_t t) const { return y1_offset_[t]; }
  std::size_t y2_offset(std::size_t t) const { return M1() + t * (m_ - 1); }
  std::size_t y3_offset() const noexcept { return M() - 1; }

  bool operator==(const WbpLayout& o) const { return m_ == o.m_ && mt_ == o.mt_; }

 private:
  std::size_t m_;
  std::vector<std::size_t> mt_;
  std::vector<std::size_t> plan_offset_;
  std::vector<std::size_t> y1_offset_;
};

using LayoutPtr = std::shared_ptr<const WbpLayout>;

/// Column-major dense matrix.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vector data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[j * rows + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data[j * rows + i]; }
};

/// Points in R^dim, row-major (point i occupies coords[i*dim .. i*dim+dim)).
/// dim may be 0 for instances that only carry precomputed costs.
struct PointSet {
  std::size_t dim = 0;
  std::size_t count = 0;
  Vector coords;

  PointSet() = default;
  PointSet(std::size_t d, std::size_t n) : dim(d), count(n), coords(d * n, 0.0) {}
  PointSet(std::size_t d, Vector c) : dim(d), count(d == 0 ? 0 : c.size() / d), coords(std::move(c)) {
    if (d != 0 && coords.size() % d != 0) throw InvalidArgument("coordinate count is not a multiple of dim");
  }

  std::size_t size() const noexcept { return count; }
  std::span<const double> point(std::size_t i) const { return {coords.data() + i * dim, dim}; }
  std::span<double> point(std::size_t i) { return {coords.data() + i * dim, dim}; }
};

/// Discrete probability distribution: support points with weights.
struct DiscreteDistribution {
  PointSet supports;
  Vector weights;

  std::size_t size() const noexcept { return weights.size(); }

  void validate() const {
    if (weights.empty()) throw InvalidArgument("distribution has no atoms");
    if (supports.size() != weights.size())
      throw InvalidArgument("distribution has " + std::to_string(supports.size()) + " support points but " +
                            std::to_string(weights.size()) + " weights");
    for (double w : weights)
      if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("distribution weight is negative or not finite");
    const double total = sum(weights);
    if (std::abs(total - 1.0) > 1e-12)
      throw InvalidArgument("distribution weights sum to " + std::to_string(total) + ", expected 1");
  }
};

/// A fixed-support barycenter problem. Immutable after construction.
///
/// `ground_cost[t]` is the m x m_t distance matrix between the barycenter
/// supports and sample t; the LP cost is D^t = omega_t * ground_cost[t].
class WbpInstance {
 public:
  WbpInstance(std::vector<DiscreteDistribution> samples, PointSet barycenter_supports,
              Vector omega, std::vector<DenseMatrix> ground_cost)
      : samples_(std::move(samples)),
        support_(std::move(barycenter_supports)),
        omega_(std::move(omega)),
        ground_(std::move(ground_cost)) {
    if (samples_.empty()) throw InvalidArgument("instance needs at least one sample");
    std::vector<std::size_t> mt;
    for (const auto& s : samples_) {
      s.validate();
      mt.push_back(s.size());
    }
    layout_ = std::make_shared<const WbpLayout>(support_.size(), std::move(mt));
    if (omega_.size() != samples_.size()) throw InvalidArgument("omega must have one entry per sample");
    for (double w : omega_)
      if (!(w > 0.0)) throw InvalidArgument("omega entries must be positive");
    if (std::abs(sum(omega_) - 1.0) > 1e-12) throw InvalidArgument("omega must sum to 1");
    if (ground_.size() != samples_.size()) throw InvalidArgument("need one cost matrix per sample");
    cost_.reserve(ground_.size());
    for (std::size_t t = 0; t < ground_.size(); ++t) {
      const auto& g = ground_[t];
      if (g.rows != layout_->m() || g.cols != layout_->mt(t))
        throw InvalidArgument("cost matrix " + std::to_string(t) + " has shape " + std::to_string(g.rows) + "x" +
                              std::to_string(g.cols) + ", expected " + std::to_string(layout_->m()) + "x" +
                              std::to_string(layout_->mt(t)));
      for (double v : g.data)
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("cost entries must be finite and >= 0");
      DenseMatrix weighted = g;
      for (double& v : weighted.data) v *= omega_[t];
      cost_.push_back(std::move(weighted));
    }
    for (const auto& s : samples_)
      if (s.supports.dim != support_.dim) throw InvalidArgument("sample and barycenter support dimensions differ");
  }

  const WbpLayout& layout() const noexcept { return *layout_; }
  const LayoutPtr& layout_ptr() const noexcept { return layout_; }
  std::size_t T() const noexcept { return samples_.size(); }
  std::size_t m() const noexcept { return layout_->m(); }
  std::size_t dim() const noexcept { return support_.dim; }

  const DiscreteDistribution& sample(std::size_t t) const { return samples_[t]; }
  const std::vector<DiscreteDistribution>& samples() const noexcept { return samples_; }
  const PointSet& barycenter_supports() const noexcept { return support_; }
  const Vector& omega() const noexcept { return omega_; }
  /// LP cost D^t (omega-weighted).
  const DenseMatrix& cost(std::size_t t) const { return cost_[t]; }
  /// Unweighted ground distance.
  const DenseMatrix& ground_cost(std::size_t t) const { return ground_[t]; }

 private:
  std::vector<DiscreteDistribution> samples_;
  PointSet support_;
  Vector omega_;
  std::vector<DenseMatrix> ground_;
  std::vector<DenseMatrix> cost_;
  LayoutPtr layout_;
};

/// x = (vec(X^1); ...; vec(X^T); a^c) with per-block views.
class PrimalVector {
 public:
  explicit PrimalVector(LayoutPtr layout) : layout_(std::move(layout)), values_(layout_->N(), 0.0) {}
  PrimalVector(LayoutPtr layout, Vector values) : layout_(std::move(layout)), values_(std::move(values)) {
    if (values_.size() != layout_->N()) throw InvalidArgument("primal vector length does not match layout N");
  }

  /// Packs per-sample plans and barycenter weights in the column-stacked order.
  static PrimalVector flatten(LayoutPtr layout, const std::vector<DenseMatrix>& plans, std::span<const double> bary) {
    PrimalVector x(layout);
    if (plans.size() != layout->T() || bary.size() != layout->m())
      throw InvalidArgument("flatten: block count or barycenter length mismatch");
    for (std::size_t t = 0; t < plans.size(); ++t) {
      if (plans[t].rows != layout->m() || plans[t].cols != layout->mt(t))
        throw InvalidArgument("flatten: plan shape mismatch");
      std::copy(plans[t].data.begin(), plans[t].data.end(), x.plan(t).begin());
    }
    std::copy(bary.begin(), bary.end(), x.bary().begin());
    return x;
  }

  std::vector<DenseMatrix> unflatten_plans() const {
    std::vector<DenseMatrix> out;
    for (std::size_t t = 0; t < layout_->T(); ++t) {
      DenseMatrix p(layout_->m(), layout_->mt(t));
      auto src = plan(t);
      std::copy(src.begin(), src.end(), p.data.begin());
      out.push_back(std::move(p));
    }
    return out;
  }

  std::span<double> plan(std::size_t t) { return {values_.data() + layout_->plan_offset(t), layout_->m() * layout_->mt(t)}; }
  std::span<const double> plan(std::size_t t) const {
    return {values_.data() + layout_->plan_offset(t), layout_->m() * layout_->mt(t)};
  }
  std::span<double> bary() { return {values_.data() + layout_->bary_offset(), layout_->m()}; }
  std::span<const double> bary() const { return {values_.data() + layout_->bary_offset(), layout_->m()}; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  Vector& storage() noexcept { return values_; }
  const WbpLayout& layout() const noexcept { return *layout_; }
  const LayoutPtr& layout_ptr() const noexcept { return layout_; }

 private:
  LayoutPtr layout_;
  Vector values_;
};

/// y = (y1 blocks of length m_t; y2 blocks of length m-1; y3).
class DualVector {
 public:
  explicit DualVector(LayoutPtr layout) : layout_(std::move(layout)), values_(layout_->M(), 0.0) {}
  DualVector(LayoutPtr layout, Vector values) : layout_(std::move(layout)), values_(std::move(values)) {
    if (values_.size() != layout_->M()) throw InvalidArgument("dual vector length does not match layout M");
  }

  std::span<double> y1(std::size_t t) { return {values_.data() + layout_->y1_offset(t), layout_->mt(t)}; }
  std::span<const double> y1(std::size_t t) const { return {values_.data() + layout_->y1_offset(t), layout_->mt(t)}; }
  std::span<double> y2(std::size_t t) { return {values_.data() + layout_->y2_offset(t), layout_->m() - 1}; }
  std::span<const double> y2(std::size_t t) const { return {values_.data() + layout_->y2_offset(t), layout_->m() - 1}; }
  double& y3() { return values_.back(); }
  double y3() const { return values_.back(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  Vector& storage() noexcept { return values_; }
  const WbpLayout& layout() const noexcept { return *layout_; }
  const LayoutPtr& layout_ptr() const noexcept { return layout_; }

 private:
  LayoutPtr layout_;
  Vector values_;
};

// ---------------------------------------------------------------------------
// Matrix-free operators on flat buffers.

inline void check_sizes(const WbpLayout& L, std::size_t xn, std::size_t yn) {
  if (xn != L.N()) throw InvalidArgument("primal buffer has length " + std::to_string(xn) + ", expected N=" + std::to_string(L.N()));
  if (yn != L.M()) throw InvalidArgument("dual buffer has length " + std::to_string(yn) + ", expected M=" + std::to_string(L.M()));
}

/// y = A x.
template <class Counter = NoFlops>
void apply_A(const WbpLayout& L, std::span<const double> x, std::span<double> y, Counter& flops) {
  check_sizes(L, x.size(), y.size());
  const std::size_t m = L.m();
  const double* bary = x.data() + L.bary_offset();
  auto block = [&](std::size_t t) {
    const std::size_t mt = L.mt(t);
    const double* X = x.data() + L.plan_offset(t);
    double* y1 = y.data() + L.y1_offset(t);
    double* y2 = y.data() + L.y2_offset(t);
    for (std::size_t i = 1; i < m; ++i) y2[i - 1] = -bary[i];
    for (std::size_t j = 0; j < mt; ++j) {
      const double* col = X + j * m;
      double s = col[0];
      for (std::size_t i = 1; i < m; ++i) {
        s += col[i];
        y2[i - 1] += col[i];
      }
      y1[j] = s;
    }
  };
  for_each_block(L.T(), block, Counter::enabled ? 1u : kernel_threads());
  double s3 = 0.0;
  for (std::size_t i = 0; i < m; ++i) s3 += bary[i];
  y[L.y3_offset()] = s3;
  flops.add(2 * L.plan_size() + L.M2() + m);
}

template <class Counter = NoFlops>
void apply_A(const WbpLayout& L, std::span<const double> x, std::span<double> y) {
  Counter c;
  apply_A(L, x, y, c);
}

/// x = A* y.
template <class Counter = NoFlops>
void apply_Astar(const WbpLayout& L, std::span<const double> y, std::span<double> x, Counter& flops) {
  check_sizes(L, x.size(), y.size());
  const std::size_t m = L.m();
  auto block = [&](std::size_t t) {
    const std::size_t mt = L.mt(t);
    double* X = x.data() + L.plan_offset(t);
    const double* y1 = y.data() + L.y1_offset(t);
    const double* y2 = y.data() + L.y2_offset(t);
    for (std::size_t j = 0; j < mt; ++j) {
      double* col = X + j * m;
      const double a = y1[j];
      col[0] = a;
      for (std::size_t i = 1; i < m; ++i) col[i] = a + y2[i - 1];
    }
  };
  for_each_block(L.T(), block, Counter::enabled ? 1u : kernel_threads());
  double* bary = x.data() + L.bary_offset();
  const double y3 = y[L.y3_offset()];
  bary[0] = y3;
  for (std::size_t i = 1; i < m; ++i) bary[i] = y3;
  for (std::size_t t = 0; t < L.T(); ++t) {
    const double* y2 = y.data() + L.y2_offset(t);
    for (std::size_t i = 1; i < m; ++i) bary[i] -= y2[i - 1];
  }
  flops.add(L.plan_size() + L.M2());
}

template <class Counter = NoFlops>
void apply_Astar(const WbpLayout& L, std::span<const double> y, std::span<double> x) {
  Counter c;
  apply_Astar(L, y, x, c);
}

inline DualVector apply_A(const WbpInstance& inst, const PrimalVector& x) {
  if (!(x.layout() == inst.layout())) throw InvalidArgument("apply_A: primal vector layout does not match instance");
  DualVector y(inst.layout_ptr());
  apply_A(inst.layout(), x.values(), y.values());
  return y;
}

inline PrimalVector apply_Astar(const WbpInstance& inst, const DualVector& y) {
  if (!(y.layout() == inst.layout())) throw InvalidArgument("apply_Astar: dual vector layout does not match instance");
  PrimalVector x(inst.layout_ptr());
  apply_Astar(inst.layout(), y.values(), x.values());
  return x;
}

/// Componentwise max(0, v): the Euclidean projection onto the nonnegative orthant.
inline Vector project_nonneg(std::span<const double> v) {
  Vector out(v.begin(), v.end());
  for (double& e : out) e = std::max(0.0, e);
  return out;
}

/// Right-hand side b and cost c of the reduced LP.
struct LpData {
  Vector b;
  Vector c;
};

inline LpData lp_data(const WbpInstance& inst) {
  const WbpLayout& L = inst.layout();
  LpData d{Vector(L.M(), 0.0), Vector(L.N(), 0.0)};
  for (std::size_t t = 0; t < L.T(); ++t) {
    const auto& w = inst.sample(t).weights;
    std::copy(w.begin(), w.end(), d.b.begin() + static_cast<std::ptrdiff_t>(L.y1_offset(t)));
    const auto& D = inst.cost(t).data;
    std::copy(D.begin(), D.end(), d.c.begin() + static_cast<std::ptrdiff_t>(L.plan_offset(t)));
  }
  d.b[L.y3_offset()] = 1.0;
  return d;
}

/// sum_t <D^t, X^t>.
inline double primal_objective(const WbpInstance& inst, std::span<const double> x) {
  const WbpLayout& L = inst.layout();
  if (x.size() != L.N()) throw InvalidArgument("primal_objective: length mismatch");
  double acc = 0.0;
  for (std::size_t t = 0; t < L.T(); ++t) acc += dot(inst.cost(t).data, x.subspan(L.plan_offset(t), L.m() * L.mt(t)));
  return acc;
}

/// <b, y>.
inline double dual_objective(const WbpInstance& inst, std::span<const double> y) {
  const WbpLayout& L = inst.layout();
  if (y.size() != L.M()) throw InvalidArgument("dual_objective: length mismatch");
  double acc = y[L.y3_offset()];
  for (std::size_t t = 0; t < L.T(); ++t) acc += dot(inst.sample(t).weights, y.subspan(L.y1_offset(t), L.mt(t)));
  return acc;
}

inline double relative_obj_gap(double obj, double obj_ref) { return std::abs(obj - obj_ref) / (std::abs(obj_ref) + 1.0); }

// ---------------------------------------------------------------------------
// KKT residuals.

struct KktResidual {
  double primal_infeas = 0.0;     // ||b - Ax|| / (1 + ||b||)
  double nonneg_violation = 0.0;  // ||min(x, 0)|| / (1 + ||x||)
  double dual_infeas = 0.0;       // ||A*y + s - c|| / (1 + ||c|| + ||s||)
  double complementarity = 0.0;   // ||s - Pi_K(s - x)|| / (1 + ||x|| + ||s||)
  double max_relative = 0.0;
};

/// Norms gathered in one pass over the iterate; both the standalone residual
/// and the solvers' checkpoints build their KktResidual from this.
struct KktNorms {
  double primal_sq = 0.0;
  double nonneg_sq = 0.0;
  double dual_sq = 0.0;
  double compl_sq = 0.0;
  double x_sq = 0.0;
  double s_sq = 0.0;

  KktResidual relative(double norm_b, double norm_c) const {
    KktResidual r;
    const double nx = std::sqrt(x_sq);
    const double ns = std::sqrt(s_sq);
    r.primal_infeas = std::sqrt(primal_sq) / (1.0 + norm_b);
    r.nonneg_violation = std::sqrt(nonneg_sq) / (1.0 + nx);
    r.dual_infeas = std::sqrt(dual_sq) / (1.0 + norm_c + ns);
    r.complementarity = std::sqrt(compl_sq) / (1.0 + nx + ns);
    r.max_relative = std::max({r.primal_infeas, r.nonneg_violation, r.dual_infeas, r.complementarity});
    return r;
  }

  /// Norm of the unscaled residual map (Ax - b; s - Pi_K(s - x); c - A*y - s).
  double absolute() const { return std::sqrt(primal_sq + compl_sq + dual_sq); }
};

/// `Ax` and `Aty_minus_c` (= A*y - c) are supplied by the caller so solvers
/// can reuse buffers they already hold.
inline KktNorms kkt_norms(std::span<const double> b, std::span<const double> x, std::span<const double> s,
                          std::span<const double> Ax, std::span<const double> Aty_minus_c) {
  KktNorms n;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double r = b[i] - Ax[i];
    n.primal_sq += r * r;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double si = s[i];
    const double neg = std::min(xi, 0.0);
    n.nonneg_sq += neg * neg;
    const double d = Aty_minus_c[i] + si;
    n.dual_sq += d * d;
    const double comp = si - std::max(0.0, si - xi);
    n.compl_sq += comp * comp;
    n.x_sq += xi * xi;
    n.s_sq += si * si;
  }
  return n;
}

inline KktNorms kkt_norms(const WbpInstance& inst, const LpData& lp, std::span<const double> x,
                          std::span<const double> y, std::span<const double> s) {
  const WbpLayout& L = inst.layout();
  check_sizes(L, x.size(), y.size());
  if (s.size() != L.N()) throw InvalidArgument("kkt_residual: s has wrong length");
  Vector Ax(L.M());
  Vector g(L.N());
  apply_A(L, x, Ax);
  apply_Astar(L, y, g);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] -= lp.c[i];
  return kkt_norms(lp.b, x, s, Ax, g);
}

/// Relative KKT residual of (x, y, s); denominators are recomputed every call.
inline KktResidual kkt_residual(const WbpInstance& inst, const LpData& lp, std::span<const double> x,
                                std::span<const double> y, std::span<const double> s) {
  return kkt_norms(inst, lp, x, y, s).relative(norm2(lp.b), norm2(lp.c));
}

inline KktResidual kkt_residual(const WbpInstance& inst, std::span<const double> x, std::span<const double> y,
                                std::span<const double> s) {
  return kkt_residual(inst, lp_data(inst), x, y, s);
}

}  // namespace hprwbp
