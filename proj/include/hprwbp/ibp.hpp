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

// Iterative Bregman projections for the entropy-regularized barycenter.
//
// Plan t is diag(u_t) K_t diag(v_t) with K_t = exp(-C_t / epsilon), where C_t
// is the unweighted ground cost. One sweep:
//   v_t = a^t / (K_t^T u_t)                       sample marginals exact
//   a^c = prod_t (u_t * K_t v_t)^{omega_t}, normalized
//   u_t = a^c / (K_t v_t)                         barycenter marginals exact
// The log-domain variant carries log u, log v and uses log-sum-exp.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "hprwbp/solvers.hpp"

namespace hprwbp {

struct IbpOptions {
  double epsilon = 0.01;
  double tol = 1e-6;
  std::size_t max_iters = 10000;
  bool log_domain = false;
  std::size_t record_every = 50;
  std::optional<double> time_limit_secs;

  void validate() const {
    if (!(epsilon > 0.0)) throw InvalidArgument("IBP epsilon must be positive");
    if (!(tol > 0.0)) throw InvalidArgument("IBP tol must be positive");
    if (record_every < 1) throw InvalidArgument("record_every must be >= 1");
  }
};

namespace detail {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

inline double safe_log(double v) { return v > 0.0 ? std::log(v) : neg_inf; }

// Scaling state for either domain. In the plain domain u, v are the scalings
// themselves; in the log domain they are their logarithms.
class IbpState {
 public:
  IbpState(const WbpInstance& inst, const IbpOptions& opt) : inst_(inst), opt_(opt), L_(inst.layout()) {
    const std::size_t T = L_.T(), m = L_.m();
    u_.assign(T, Vector(m, opt.log_domain ? 0.0 : 1.0));
    v_.resize(T);
    Kv_.assign(T, Vector(m, 0.0));
    bary_.assign(m, 1.0 / static_cast<double>(m));
    for (std::size_t t = 0; t < T; ++t) v_[t].assign(L_.mt(t), opt.log_domain ? 0.0 : 1.0);
    if (!opt.log_domain) {
      K_.resize(T);
      for (std::size_t t = 0; t < T; ++t) {
        const DenseMatrix& C = inst.ground_cost(t);
        K_[t] = DenseMatrix(C.rows, C.cols);
        for (std::size_t e = 0; e < C.data.size(); ++e) K_[t].data[e] = std::exp(-C.data[e] / opt.epsilon);
        for (std::size_t j = 0; j < C.cols; ++j) {
          double col = 0.0;
          for (std::size_t i = 0; i < C.rows; ++i) col += K_[t](i, j);
          if (!(col > 0.0)) underflow("kernel column " + std::to_string(j) + " of sample " + std::to_string(t));
        }
      }
    }
  }

  /// One full sweep; returns the l1 change of the barycenter weights.
  double sweep() {
    const std::size_t T = L_.T(), m = L_.m();
    for (std::size_t t = 0; t < T; ++t) {
      update_v(t);
      update_Kv(t);
    }
    Vector next(m, 0.0);
    const Vector& w = inst_.omega();
    if (opt_.log_domain) {
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i < m; ++i) next[i] += w[t] * (u_[t][i] + Kv_[t][i]);
      const double lse = log_sum_exp(next);
      for (double& v : next) v = std::exp(v - lse);
    } else {
      std::fill(next.begin(), next.end(), 1.0);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i < m; ++i) next[i] *= std::pow(u_[t][i] * Kv_[t][i], w[t]);
      const double total = sum(next);
      if (!(total > 0.0) || !std::isfinite(total)) underflow("barycenter geometric mean");
      for (double& v : next) v /= total;
    }
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < m; ++i) {
        if (opt_.log_domain) {
          u_[t][i] = safe_log(next[i]) - Kv_[t][i];
        } else {
          if (!(Kv_[t][i] > 0.0)) underflow("K v of sample " + std::to_string(t));
          u_[t][i] = next[i] / Kv_[t][i];
        }
      }
    }
    double change = 0.0;
    for (std::size_t i = 0; i < m; ++i) change += std::abs(next[i] - bary_[i]);
    bary_ = std::move(next);
    return change;
  }

  double plan_entry(std::size_t t, std::size_t i, std::size_t j) const {
    if (opt_.log_domain) return std::exp(u_[t][i] + v_[t][j] - inst_.ground_cost(t)(i, j) / opt_.epsilon);
    return u_[t][i] * K_[t](i, j) * v_[t][j];
  }

  /// x = (plans; a^c) in the LP layout.
  Vector primal() const {
    Vector x(L_.N(), 0.0);
    for (std::size_t t = 0; t < L_.T(); ++t) {
      const std::size_t off = L_.plan_offset(t);
      for (std::size_t j = 0; j < L_.mt(t); ++j)
        for (std::size_t i = 0; i < L_.m(); ++i) x[off + j * L_.m() + i] = plan_entry(t, i, j);
    }
    std::copy(bary_.begin(), bary_.end(), x.begin() + static_cast<std::ptrdiff_t>(L_.bary_offset()));
    return x;
  }

  /// Sum over t of ||X_t^T 1 - a^t||_1, the marginal family not projected last.
  double marginal_error() const {
    double err = 0.0;
    for (std::size_t t = 0; t < L_.T(); ++t) {
      const Vector& a = inst_.sample(t).weights;
      for (std::size_t j = 0; j < L_.mt(t); ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < L_.m(); ++i) col += plan_entry(t, i, j);
        err += std::abs(col - a[j]);
      }
    }
    return err;
  }

  const Vector& barycenter() const noexcept { return bary_; }

 private:
  [[noreturn]] void underflow(const std::string& where) const {
    throw NumericalError("IBP: scaling underflow/overflow in " + where + " (epsilon=" +
                         std::to_string(opt_.epsilon) + "); retry with log_domain=true");
  }

  static double log_sum_exp(std::span<const double> v) {
    double mx = neg_inf;
    for (double e : v) mx = std::max(mx, e);
    if (mx == neg_inf) return neg_inf;
    double acc = 0.0;
    for (double e : v) acc += std::exp(e - mx);
    return mx + std::log(acc);
  }

  void update_v(std::size_t t) {
    const std::size_t m = L_.m();
    const Vector& a = inst_.sample(t).weights;
    const Vector& u = u_[t];
    Vector& v = v_[t];
    if (opt_.log_domain) {
      const DenseMatrix& C = inst_.ground_cost(t);
      Vector col(m);
      for (std::size_t j = 0; j < v.size(); ++j) {
        for (std::size_t i = 0; i < m; ++i) col[i] = u[i] - C(i, j) / opt_.epsilon;
        v[j] = safe_log(a[j]) - log_sum_exp(col);
      }
      return;
    }
    const DenseMatrix& K = K_[t];
    for (std::size_t j = 0; j < v.size(); ++j) {
      double ktu = 0.0;
      for (std::size_t i = 0; i < m; ++i) ktu += K(i, j) * u[i];
      if (!(ktu > 0.0) || !std::isfinite(ktu)) underflow("K^T u of sample " + std::to_string(t));
      v[j] = a[j] / ktu;
    }
  }

  void update_Kv(std::size_t t) {
    const std::size_t m = L_.m();
    const Vector& v = v_[t];
    Vector& kv = Kv_[t];
    if (opt_.log_domain) {
      const DenseMatrix& C = inst_.ground_cost(t);
      Vector row(v.size());
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < v.size(); ++j) row[j] = v[j] - C(i, j) / opt_.epsilon;
        kv[i] = log_sum_exp(row);
      }
      return;
    }
    const DenseMatrix& K = K_[t];
    std::fill(kv.begin(), kv.end(), 0.0);
    for (std::size_t j = 0; j < v.size(); ++j)
      for (std::size_t i = 0; i < m; ++i) kv[i] += K(i, j) * v[j];
    for (double e : kv)
      if (!std::isfinite(e)) underflow("K v of sample " + std::to_string(t));
  }

  const WbpInstance& inst_;
  const IbpOptions& opt_;
  const WbpLayout& L_;
  std::vector<DenseMatrix> K_;
  std::vector<Vector> u_, v_, Kv_;
  Vector bary_;
};

}  // namespace detail

/// Plans and barycenter of the entropic problem. The report's x uses the LP
/// layout so objectives and gaps are comparable with the LP solvers; y and s
/// are left empty.
inline SolveReport solve_ibp(const WbpInstance& inst, const IbpOptions& opt) {
  opt.validate();
  for (std::size_t t = 0; t < inst.T(); ++t)
    if (!all_finite(inst.ground_cost(t).data)) throw InvalidArgument("IBP requires finite costs");
  detail::Clock clock;
  detail::IbpState st(inst, opt);
  SolveReport rep;
  rep.method = Method::ibp;
  rep.termination = Termination::max_iters;
  const LpData lp = lp_data(inst);
  auto record = [&](std::size_t k, double change) {
    ConvergenceRecord rec;
    rec.iter = k;
    rec.marginal_error = st.marginal_error();
    rec.weight_change = change;
    rec.primal_obj = dot(lp.c, st.primal());
    rec.elapsed_secs = clock.elapsed();
    rec.method = "ibp";
    rep.history.push_back(rec);
  };
  double change = 0.0;
  for (std::size_t k = 1; k <= opt.max_iters; ++k) {
    change = st.sweep();
    if (!std::isfinite(change))
      throw NumericalError("IBP: non-finite barycenter at sweep " + std::to_string(k) + "; retry with log_domain=true");
    rep.iterations = k;
    // Weight change alone stalls at small epsilon, so the marginals must agree too.
    const bool done = change < opt.tol && st.marginal_error() < opt.tol;
    const bool out_of_time = opt.time_limit_secs && clock.elapsed() >= *opt.time_limit_secs;
    if (done || out_of_time || k % opt.record_every == 0 || k == opt.max_iters) record(k, change);
    if (done) {
      rep.termination = Termination::tolerance;
      break;
    }
    if (out_of_time) {
      rep.termination = Termination::time_limit;
      break;
    }
  }
  rep.x = st.primal();
  rep.primal_obj = dot(lp.c, rep.x);
  rep.elapsed_secs = clock.elapsed();
  return rep;
}

}  // namespace hprwbp
