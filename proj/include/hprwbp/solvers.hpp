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

// Production solvers for the dual barycenter LP
//
//   min -<b, y>   s.t.  A* y + s = c,  s >= 0,
//
// whose multiplier x is the primal plan/barycenter vector:
//  * HPR: Halpern-Peaceman-Rachford with weight 1/(k+2) and restarts;
//  * fast-ADMM: ADMM with dual step size gamma in (0, 2);
//  * hybrid: fast-ADMM first, HPR after a switching checkpoint.
// Every y-update is one closed-form normal-equation solve.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "hprwbp/normal_solver.hpp"

namespace hprwbp {

enum class Method { hpr, admm, hybrid, ibp };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::hpr: return "hpr";
    case Method::admm: return "admm";
    case Method::hybrid: return "hybrid";
    case Method::ibp: return "ibp";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "hpr") return Method::hpr;
  if (s == "admm") return Method::admm;
  if (s == "hybrid") return Method::hybrid;
  if (s == "ibp") return Method::ibp;
  throw InvalidArgument("unknown method '" + s + "' (expected hpr, admm, hybrid or ibp)");
}

enum class Termination { tolerance, max_iters, time_limit };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::tolerance: return "tolerance";
    case Termination::max_iters: return "max_iters";
    case Termination::time_limit: return "time_limit";
  }
  return "?";
}

/// Restart schedule: restart at every checkpoint while k <= phase_boundary;
/// afterwards restart when the residual improved since the previous
/// checkpoint or when k is a multiple of `period`.
struct RestartPolicy {
  bool enabled = true;
  std::size_t window = 50;
  std::size_t phase_boundary = 500;
  std::size_t period = 500;

  bool should_restart(std::size_t k, double kkt_old, double kkt_now) const {
    if (!enabled) return false;
    if (k <= phase_boundary) return k % window == 0;
    return kkt_old > kkt_now || k % period == 0;
  }
};

struct HybridPolicy {
  std::size_t switch_iteration = 800;
  double switch_threshold = 2e-4;

  /// True while fast-ADMM should keep running.
  bool stay_in_admm(std::size_t k, double kkt) const { return k <= switch_iteration && kkt >= switch_threshold; }
};

struct SolverOptions {
  double sigma = 1.0;
  double gamma = 1.9;
  std::size_t max_iters = 10000;
  double kkt_tol = 1e-5;
  std::size_t check_every = 50;
  std::optional<double> time_limit_secs;
  RestartPolicy restart;
  HybridPolicy hybrid;

  void validate() const {
    if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
    if (!(gamma > 0.0 && gamma < 2.0)) throw InvalidArgument("gamma must lie in (0, 2)");
    if (check_every < 1) throw InvalidArgument("check_every must be >= 1");
    if (!(kkt_tol > 0.0)) throw InvalidArgument("kkt_tol must be positive");
    if (time_limit_secs && !(*time_limit_secs > 0.0)) throw InvalidArgument("time limit must be positive");
  }
};

struct ConvergenceRecord {
  std::size_t iter = 0;
  KktResidual kkt;
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  double elapsed_secs = 0.0;
  bool restarted = false;
  std::string method;
  // IBP only.
  double marginal_error = 0.0;
  double weight_change = 0.0;
};

/// Restart decision at checkpoint k given the history recorded so far
/// (the previous checkpoint supplies KKT_old).
inline bool restart_controller(const std::vector<ConvergenceRecord>& history, std::size_t k,
                               double kkt_now, const RestartPolicy& policy) {
  const double old = history.empty() ? kkt_now : history.back().kkt.max_relative;
  return policy.should_restart(k, old, kkt_now);
}

struct SolveReport {
  Method method = Method::hpr;
  Vector x, y, s;
  std::size_t iterations = 0;
  Termination termination = Termination::max_iters;
  std::vector<ConvergenceRecord> history;
  KktResidual final_kkt;
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  std::size_t restarts = 0;
  std::optional<std::size_t> switch_iteration;  // hybrid handoff
  double elapsed_secs = 0.0;
};

struct InitialPoint {
  Vector y;  // length M
  Vector x;  // length N
};

/// Iteration state and fused kernels shared by all three LP solvers.
/// Buffers hold the most recent iterate; g caches A* y - c for the current y.
class DualLpEngine {
 public:
  DualLpEngine(const WbpInstance& inst, double sigma, const InitialPoint* init = nullptr)
      : inst_(inst), L_(inst.layout()), lp_(lp_data(inst)), ws_(L_), sigma_(sigma) {
    if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
    const std::size_t N = L_.N(), M = L_.M();
    x_.assign(N, 0.0);
    s_.assign(N, 0.0);
    g_.assign(N, 0.0);
    x_hat_.assign(N, 0.0);
    x_hat0_.assign(N, 0.0);
    g0_.assign(N, 0.0);
    y_.assign(M, 0.0);
    rhs_.assign(M, 0.0);
    Ax_.assign(M, 0.0);
    if (init != nullptr) {
      if (init->y.size() != M || init->x.size() != N) throw InvalidArgument("initial point has wrong dimensions");
      y_ = init->y;
      x_ = init->x;
    }
    apply_Astar(L_, y_, g_);
    for (std::size_t i = 0; i < N; ++i) g_[i] -= lp_.c[i];
    // s^0 = c - A* y^0
    for (std::size_t i = 0; i < N; ++i) s_[i] = -g_[i];
    reset_anchor();
  }

  /// x_hat^0 := x, y^0 := y, Halpern index restarts from 0.
  void reset_anchor() {
    x_hat_ = x_;
    x_hat0_ = x_;
    g0_ = g_;
  }

  /// One HPR iteration with Halpern index k.
  template <class Counter = NoFlops>
  void hpr_step(std::size_t k, Counter& flops) {
    step_s_and_half(x_hat_, flops);
    solve_y(flops);
    const double kk = static_cast<double>(k);
    const double a = 1.0 / (kk + 2.0), b = (kk + 1.0) / (kk + 2.0), gs = sigma_ / (kk + 2.0);
    update_g_and_x(1.0, flops, [&](std::size_t i) {
      x_hat_[i] = a * x_hat0_[i] + b * x_[i] + gs * (g0_[i] - g_[i]);
    });
    flops.add(6 * L_.N());
  }

  /// One fast-ADMM iteration with dual step size gamma.
  template <class Counter = NoFlops>
  void admm_step(double gamma, Counter& flops) {
    step_s_and_half(x_, flops, /*write_half=*/false);
    solve_y(flops);
    update_g_and_x(gamma, flops, [](std::size_t) {});
  }

  void hpr_step(std::size_t k) {
    NoFlops f;
    hpr_step(k, f);
  }
  void admm_step(double gamma) {
    NoFlops f;
    admm_step(gamma, f);
  }

  KktResidual kkt() {
    apply_A(L_, x_, Ax_);
    norms_ = kkt_norms(lp_.b, x_, s_, Ax_, g_);
    return norms_.relative(norm2(lp_.b), norm2(lp_.c));
  }
  /// ||AA* y - rhs|| / (1 + ||rhs||) for the latest y-update.
  double normal_solve_error() const {
    Vector u(L_.N()), v(L_.M());
    apply_Astar(L_, y_, u);
    apply_A(L_, u, v);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= rhs_[i];
    return norm2(v) / (1.0 + norm2(rhs_));
  }

  /// Norms from the last kkt() call.
  const KktNorms& last_norms() const noexcept { return norms_; }

  double primal_objective() const { return dot(lp_.c, x_); }
  double dual_objective() const { return dot(lp_.b, y_); }

  const Vector& x() const noexcept { return x_; }
  const Vector& y() const noexcept { return y_; }
  const Vector& s() const noexcept { return s_; }
  const Vector& x_hat() const noexcept { return x_hat_; }
  /// A* y - c for the current y.
  const Vector& g() const noexcept { return g_; }
  /// Right-hand side of the most recent normal-equation solve.
  const Vector& last_rhs() const noexcept { return rhs_; }
  const LpData& lp() const noexcept { return lp_; }
  const WbpInstance& instance() const noexcept { return inst_; }
  double sigma() const noexcept { return sigma_; }

 private:
  // s = max(0, -(g + v/sigma)); then (HPR) x_half = v + sigma (s + g) into x.
  template <class Counter>
  void step_s_and_half(const Vector& v, Counter& flops, bool write_half = true) {
    const double inv_sigma = 1.0 / sigma_;
    const std::size_t N = L_.N();
    const double* vp = v.data();
    double* sp = s_.data();
    const double* gp = g_.data();
    double* xp = x_.data();
    if (write_half) {
      for (std::size_t i = 0; i < N; ++i) {
        const double si = std::max(0.0, -(gp[i] + vp[i] * inv_sigma));
        sp[i] = si;
        xp[i] = vp[i] + sigma_ * (si + gp[i]);
      }
      flops.add(7 * N);
    } else {
      for (std::size_t i = 0; i < N; ++i) sp[i] = std::max(0.0, -(gp[i] + vp[i] * inv_sigma));
      flops.add(4 * N);
    }
  }

  // rhs = b/sigma - A(x/sigma + s - c), y = (AA*)^{-1} rhs. x holds x_half
  // (HPR) or the current multiplier (ADMM).
  template <class Counter>
  void solve_y(Counter& flops) {
    const double inv_sigma = 1.0 / sigma_;
    const std::size_t m = L_.m();
    const double* xp = x_.data();
    const double* sp = s_.data();
    const double* cp = lp_.c.data();
    double* r = rhs_.data();
    const std::size_t bo = L_.bary_offset();
    auto block = [&](std::size_t t) {
      const std::size_t off = L_.plan_offset(t);
      double* r1 = r + L_.y1_offset(t);
      double* r2 = r + L_.y2_offset(t);
      for (std::size_t i = 1; i < m; ++i) r2[i - 1] = -(xp[bo + i] * inv_sigma + sp[bo + i] - cp[bo + i]);
      for (std::size_t j = 0; j < L_.mt(t); ++j) {
        const std::size_t base = off + j * m;
        double col = xp[base] * inv_sigma + sp[base] - cp[base];
        for (std::size_t i = 1; i < m; ++i) {
          const double z = xp[base + i] * inv_sigma + sp[base + i] - cp[base + i];
          col += z;
          r2[i - 1] += z;
        }
        r1[j] = col;
      }
    };
    for_each_block(L_.T(), block, Counter::enabled ? 1u : kernel_threads());
    double z3 = 0.0;
    for (std::size_t i = 0; i < m; ++i) z3 += xp[bo + i] * inv_sigma + sp[bo + i] - cp[bo + i];
    r[L_.y3_offset()] = z3;
    flops.add(5 * L_.plan_size() + 4 * m + 3 * L_.M2());
    for (std::size_t i = 0; i < rhs_.size(); ++i) r[i] = lp_.b[i] * inv_sigma - r[i];
    flops.add(2 * L_.M());
    solve_wbp_normal(L_, rhs_, y_, ws_, flops);
  }

  // g = A* y - c and x = x + step * sigma (s + g); `after(i)` runs per entry
  // once g[i] and x[i] are final.
  template <class Counter, class After>
  void update_g_and_x(double step, Counter& flops, After&& after) {
    const std::size_t m = L_.m();
    const double ss = step * sigma_;
    const double* yp = y_.data();
    const double* cp = lp_.c.data();
    const double* sp = s_.data();
    double* gp = g_.data();
    double* xp = x_.data();
    auto block = [&](std::size_t t) {
      const std::size_t off = L_.plan_offset(t);
      const double* y1 = yp + L_.y1_offset(t);
      const double* y2 = yp + L_.y2_offset(t);
      for (std::size_t j = 0; j < L_.mt(t); ++j) {
        const std::size_t base = off + j * m;
        const double a = y1[j];
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t e = base + i;
          const double ast = i == 0 ? a : a + y2[i - 1];
          gp[e] = ast - cp[e];
          xp[e] += ss * (sp[e] + gp[e]);
          after(e);
        }
      }
    };
    for_each_block(L_.T(), block, Counter::enabled ? 1u : kernel_threads());
    const std::size_t bo = L_.bary_offset();
    const double y3 = yp[L_.y3_offset()];
    for (std::size_t i = 0; i < m; ++i) {
      double ast = y3;
      for (std::size_t t = 0; i > 0 && t < L_.T(); ++t) ast -= yp[L_.y2_offset(t) + i - 1];
      const std::size_t e = bo + i;
      gp[e] = ast - cp[e];
      xp[e] += ss * (sp[e] + gp[e]);
      after(e);
    }
    flops.add(5 * L_.N() + L_.M2());
  }

  const WbpInstance& inst_;
  const WbpLayout& L_;
  LpData lp_;
  NormalSolveWorkspace ws_;
  double sigma_;
  Vector x_, s_, g_, x_hat_, x_hat0_, g0_;
  Vector y_, rhs_, Ax_;
  KktNorms norms_;
};

namespace detail {

class Clock {
 public:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void check_finite(const KktResidual& r, std::size_t iter, const std::string& method) {
  if (!std::isfinite(r.max_relative))
    throw NumericalError(method + ": non-finite iterate detected at iteration " + std::to_string(iter));
}

inline SolveReport finish(DualLpEngine& eng, SolveReport rep, const KktResidual& kkt, const Clock& clock) {
  rep.x = eng.x();
  rep.y = eng.y();
  rep.s = eng.s();
  rep.final_kkt = kkt;
  rep.primal_obj = eng.primal_objective();
  rep.dual_obj = eng.dual_objective();
  rep.elapsed_secs = clock.elapsed();
  return rep;
}

// Shared loop: `phase(k_total)` performs one iteration and returns the tag of
// the method that ran it; `on_checkpoint` may request a restart or switch.
struct LoopHooks {
  std::function<std::string(std::size_t)> step;
  std::function<bool(std::size_t, const KktResidual&, std::optional<double>)> on_checkpoint;  // returns restarted
};

inline SolveReport run_loop(DualLpEngine& eng, const SolverOptions& opt, Method method, LoopHooks hooks) {
  Clock clock;
  SolveReport rep;
  rep.method = method;
  std::optional<double> prev_kkt;
  KktResidual kkt = eng.kkt();
  std::string tag = to_string(method);
  for (std::size_t k = 1; k <= opt.max_iters; ++k) {
    tag = hooks.step(k);
    const bool last = k == opt.max_iters;
    if (k % opt.check_every != 0 && !last) continue;
    kkt = eng.kkt();
    check_finite(kkt, k, to_string(method));
#ifndef NDEBUG
    if (eng.normal_solve_error() > 1e-10)
      throw NumericalError("normal-equation solve lost accuracy at iteration " + std::to_string(k));
#endif
    ConvergenceRecord rec;
    rec.iter = k;
    rec.kkt = kkt;
    rec.primal_obj = eng.primal_objective();
    rec.dual_obj = eng.dual_objective();
    rec.elapsed_secs = clock.elapsed();
    rec.method = tag;
    rep.iterations = k;
    if (kkt.max_relative <= opt.kkt_tol) {
      rep.history.push_back(rec);
      rep.termination = Termination::tolerance;
      return finish(eng, std::move(rep), kkt, clock);
    }
    if (opt.time_limit_secs && rec.elapsed_secs >= *opt.time_limit_secs) {
      rep.history.push_back(rec);
      rep.termination = Termination::time_limit;
      return finish(eng, std::move(rep), kkt, clock);
    }
    if (!last) {
      rec.restarted = hooks.on_checkpoint(k, kkt, prev_kkt);
      if (rec.restarted) ++rep.restarts;
    }
    prev_kkt = kkt.max_relative;
    rep.history.push_back(rec);
  }
  rep.termination = Termination::max_iters;
  return finish(eng, std::move(rep), kkt, clock);
}

}  // namespace detail

/// HPR for the dual LP. Default initial point is all zeros.
inline SolveReport solve_hpr(const WbpInstance& inst, const SolverOptions& opt,
                             const std::optional<InitialPoint>& initial = std::nullopt) {
  opt.validate();
  DualLpEngine eng(inst, opt.sigma, initial ? &*initial : nullptr);
  std::size_t halpern_k = 0;
  detail::LoopHooks hooks;
  hooks.step = [&](std::size_t) {
    eng.hpr_step(halpern_k++);
    return std::string("hpr");
  };
  hooks.on_checkpoint = [&](std::size_t k, const KktResidual& kkt, std::optional<double> prev) {
    if (!opt.restart.should_restart(k, prev.value_or(kkt.max_relative), kkt.max_relative)) return false;
    eng.reset_anchor();
    halpern_k = 0;
    return true;
  };
  return detail::run_loop(eng, opt, Method::hpr, hooks);
}

/// fast-ADMM: s = Pi_K(c - A*y - x/sigma), y from the normal equations,
/// x += gamma sigma (A*y + s - c).
inline SolveReport solve_admm(const WbpInstance& inst, const SolverOptions& opt,
                              const std::optional<InitialPoint>& initial = std::nullopt) {
  opt.validate();
  DualLpEngine eng(inst, opt.sigma, initial ? &*initial : nullptr);
  detail::LoopHooks hooks;
  hooks.step = [&](std::size_t) {
    eng.admm_step(opt.gamma);
    return std::string("admm");
  };
  hooks.on_checkpoint = [](std::size_t, const KktResidual&, std::optional<double>) { return false; };
  return detail::run_loop(eng, opt, Method::admm, hooks);
}

/// fast-ADMM until the first checkpoint with k > switch_iteration or
/// KKT_res < switch_threshold, then HPR from (x, y) with a fresh anchor.
inline SolveReport solve_hybrid(const WbpInstance& inst, const SolverOptions& opt,
                                const std::optional<InitialPoint>& initial = std::nullopt) {
  opt.validate();
  DualLpEngine eng(inst, opt.sigma, initial ? &*initial : nullptr);
  bool in_admm = true;
  std::size_t halpern_k = 0;
  std::size_t phase_start = 0;
  std::optional<std::size_t> switched_at;
  detail::LoopHooks hooks;
  hooks.step = [&](std::size_t) {
    if (in_admm) {
      eng.admm_step(opt.gamma);
      return std::string("admm");
    }
    eng.hpr_step(halpern_k++);
    return std::string("hpr");
  };
  hooks.on_checkpoint = [&](std::size_t k, const KktResidual& kkt, std::optional<double> prev) {
    if (in_admm) {
      if (!opt.hybrid.stay_in_admm(k, kkt.max_relative)) {
        in_admm = false;
        switched_at = k;
        phase_start = k;
        eng.reset_anchor();
        halpern_k = 0;
      }
      return false;
    }
    const std::size_t local = k - phase_start;
    // Residuals recorded before the handoff belong to ADMM.
    const double old = (k - opt.check_every > phase_start) ? prev.value_or(kkt.max_relative) : kkt.max_relative;
    if (!opt.restart.should_restart(local, old, kkt.max_relative)) return false;
    eng.reset_anchor();
    halpern_k = 0;
    return true;
  };
  SolveReport rep = detail::run_loop(eng, opt, Method::hybrid, hooks);
  rep.switch_iteration = switched_at;
  return rep;
}

inline SolveReport solve(Method method, const WbpInstance& inst, const SolverOptions& opt,
                         const std::optional<InitialPoint>& initial = std::nullopt) {
  switch (method) {
    case Method::hpr: return solve_hpr(inst, opt, initial);
    case Method::admm: return solve_admm(inst, opt, initial);
    case Method::hybrid: return solve_hybrid(inst, opt, initial);
    case Method::ibp: break;
  }
  throw InvalidArgument("solve(): IBP is solved through solve_ibp()");
}

}  // namespace hprwbp
