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

// Generic Halpern-Peaceman-Rachford machinery for
//
//   min f1(y) + f2(s)   s.t.  B1 y + B2 s = c,
//
// in three equivalent forms:
//  * the inclusion form, Halpern averaging of the Peaceman-Rachford operator
//    R_{sigma M1} o R_{sigma M2} with weight 1/(k+2);
//  * the optimisation form that carries the Halpern sequence eta explicitly;
//  * the lean optimisation form that carries x_hat = eta - sigma (B1 y - c)
//    instead, which is what the production solvers implement.
//
// The forms produce identical iterates from matched starting points
// (eta^0 = x_hat^0 + sigma (B1 y^0 - c)); verify_equivalence() checks that
// numerically. Subproblem oracles must be exact.

#pragma once

#include <functional>
#include <optional>
#include <random>

#include "hprwbp/common.hpp"

namespace hprwbp {

using LinearMap = std::function<void(std::span<const double> in, std::span<double> out)>;

/// Two-block problem described by its subproblem oracles:
///   y_oracle(p) = argmin_y f1(y) + <p, B1 y> + sigma/2 ||B1 y||^2
///   s_oracle(p) = argmin_s f2(s) + <p, B2 s> + sigma/2 ||B2 s||^2
/// Every subproblem of the three iteration forms reduces to one of these
/// with a suitable linear term p. Oracles are built for a fixed sigma.
struct TwoBlockProblem {
  std::size_t dim_y = 0;
  std::size_t dim_s = 0;
  Vector c;  // in X, dim_x = c.size()
  double sigma = 1.0;
  LinearMap B1, B1_adjoint, B2, B2_adjoint;
  LinearMap y_oracle, s_oracle;
  // Objective pieces, optional; used by the objective-gap diagnostics.
  std::function<double(std::span<const double>)> f1, f2;

  std::size_t dim_x() const noexcept { return c.size(); }

  /// Checks sigma > 0 and <B u, v> = <u, B* v> on random probes.
  void validate(unsigned probes = 5, double tol = 1e-10, std::uint64_t seed = 17) const {
    if (!(sigma > 0.0)) throw InvalidArgument("TwoBlockProblem: sigma must be positive");
    std::mt19937_64 gen(seed);
    auto fill = [&](Vector& v) {
      for (double& e : v) e = static_cast<double>(gen() >> 11) * 0x1.0p-53 - 0.5;
    };
    auto check = [&](const LinearMap& B, const LinearMap& Bt, std::size_t n, const char* name) {
      Vector u(n), v(dim_x()), Bu(dim_x()), Btv(n);
      for (unsigned k = 0; k < probes; ++k) {
        fill(u);
        fill(v);
        B(u, Bu);
        Bt(v, Btv);
        const double lhs = dot(Bu, v), rhs = dot(u, Btv);
        if (std::abs(lhs - rhs) > tol * (1.0 + std::abs(lhs)))
          throw InvalidArgument(std::string("TwoBlockProblem: adjoint identity fails for ") + name);
      }
    };
    check(B1, B1_adjoint, dim_y, "B1");
    check(B2, B2_adjoint, dim_s, "B2");
  }
};

/// Halpern weight 1/(k+2).
inline double halpern_weight(std::size_t k) { return 1.0 / (static_cast<double>(k) + 2.0); }

struct HalpernSchedule {
  Vector anchor;      // eta^0
  std::size_t k = 0;  // current index
  double weight() const { return halpern_weight(k); }
};

// ---------------------------------------------------------------------------
// Inclusion form.

struct Resolvents {
  LinearMap J_M2;  // J_{sigma M2}
  LinearMap J_M1;  // J_{sigma M1}
};

struct InclusionStep {
  Vector eta;  // eta^{k+1}
  Vector w, x, v;
};

/// One step with an explicit averaging weight; weight 0 is a plain
/// Peaceman-Rachford step.
inline InclusionStep hpr_step_inclusion(const Resolvents& J, std::span<const double> anchor, double weight,
                                        std::span<const double> eta) {
  const std::size_t n = eta.size();
  InclusionStep out{Vector(n), Vector(n), Vector(n), Vector(n)};
  J.J_M2(eta, out.w);
  Vector reflected(n);
  for (std::size_t i = 0; i < n; ++i) reflected[i] = 2.0 * out.w[i] - eta[i];
  J.J_M1(reflected, out.x);
  for (std::size_t i = 0; i < n; ++i) {
    out.v[i] = 2.0 * out.x[i] - reflected[i];
    out.eta[i] = weight * anchor[i] + (1.0 - weight) * out.v[i];
  }
  return out;
}

/// One Halpern step; advances the schedule index.
inline InclusionStep hpr_step_inclusion(const Resolvents& J, HalpernSchedule& schedule, std::span<const double> eta) {
  InclusionStep out = hpr_step_inclusion(J, schedule.anchor, schedule.weight(), eta);
  ++schedule.k;
  return out;
}

/// Resolvents of M1 = d(f1* o -B1*) + c and M2 = d(f2* o -B2*), expressed
/// through the subproblem oracles:
///   J_{sigma M2}(eta) = eta + sigma B2 s,        s = s_oracle(eta)
///   J_{sigma M1}(u)   = u + sigma (B1 y - c),    y = y_oracle(u - sigma c)
inline Resolvents make_resolvents(const TwoBlockProblem& P) {
  Resolvents J;
  J.J_M2 = [&P](std::span<const double> eta, std::span<double> out) {
    Vector s(P.dim_s), Bs(P.dim_x());
    P.s_oracle(eta, s);
    P.B2(s, Bs);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = eta[i] + P.sigma * Bs[i];
  };
  J.J_M1 = [&P](std::span<const double> u, std::span<double> out) {
    Vector p(P.dim_x()), y(P.dim_y), By(P.dim_x());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = u[i] - P.sigma * P.c[i];
    P.y_oracle(p, y);
    P.B1(y, By);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = u[i] + P.sigma * (By[i] - P.c[i]);
  };
  return J;
}

// ---------------------------------------------------------------------------
// Optimisation form carrying eta.

struct HprEtaState {
  Vector eta0, eta;
  Vector y, s, w, x, v;
};

inline HprEtaState make_eta_state(const TwoBlockProblem& P, std::span<const double> eta0) {
  HprEtaState st;
  st.eta0.assign(eta0.begin(), eta0.end());
  st.eta = st.eta0;
  st.y.assign(P.dim_y, 0.0);
  st.s.assign(P.dim_s, 0.0);
  st.w.assign(P.dim_x(), 0.0);
  st.x.assign(P.dim_x(), 0.0);
  st.v.assign(P.dim_x(), 0.0);
  return st;
}

inline void hpr_step_eta(const TwoBlockProblem& P, HprEtaState& st, std::size_t k) {
  const std::size_t n = P.dim_x();
  const double sg = P.sigma;
  Vector Bs(n), By(n), p(n);
  P.s_oracle(st.eta, st.s);
  P.B2(st.s, Bs);
  for (std::size_t i = 0; i < n; ++i) st.w[i] = st.eta[i] + sg * Bs[i];
  // argmin f1 + <eta + 2 sigma B2 s, B1 y - c> + sigma/2 ||B1 y - c||^2
  for (std::size_t i = 0; i < n; ++i) p[i] = st.eta[i] + 2.0 * sg * Bs[i] - sg * P.c[i];
  P.y_oracle(p, st.y);
  P.B1(st.y, By);
  const double lam = halpern_weight(k);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = By[i] - P.c[i];
    st.x[i] = st.eta[i] + sg * r + 2.0 * sg * Bs[i];
    st.v[i] = st.eta[i] + 2.0 * sg * (r + Bs[i]);
    st.eta[i] = lam * st.eta0[i] + (1.0 - lam) * st.v[i];
  }
}

// ---------------------------------------------------------------------------
// Lean optimisation form (x_hat instead of eta).

struct HprIterate {
  Vector y, s, x, x_hat;
  Vector x_half;
  // Anchor: x_hat^0 and B1 y^0 - c.
  Vector x_hat0, B1y0_minus_c;

  /// eta = x_hat + sigma (B1 y - c); only reconstructed for diagnostics.
  Vector eta(const TwoBlockProblem& P) const {
    Vector By(P.dim_x()), out(P.dim_x());
    P.B1(y, By);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x_hat[i] + P.sigma * (By[i] - P.c[i]);
    return out;
  }
};

inline HprIterate make_iterate(const TwoBlockProblem& P, std::span<const double> y0, std::span<const double> x0) {
  HprIterate it;
  it.y.assign(y0.begin(), y0.end());
  it.s.assign(P.dim_s, 0.0);
  it.x.assign(x0.begin(), x0.end());
  it.x_hat = it.x;
  it.x_half = it.x;
  it.x_hat0 = it.x;
  it.B1y0_minus_c.assign(P.dim_x(), 0.0);
  P.B1(it.y, it.B1y0_minus_c);
  for (std::size_t i = 0; i < it.B1y0_minus_c.size(); ++i) it.B1y0_minus_c[i] -= P.c[i];
  return it;
}

/// One iteration of the lean form:
///   s      = argmin L_sigma(y^k, s; x_hat^k)
///   x_half = x_hat^k + sigma (B1 y^k + B2 s - c)
///   y      = argmin L_sigma(y, s; x_half)
///   x      = x_half + sigma (B1 y + B2 s - c)
///   x_hat  = (x_hat^0 + (k+1) x)/(k+2) + sigma/(k+2) [(B1 y^0 - c) - (B1 y - c)]
inline void hpr_step_optform(const TwoBlockProblem& P, HprIterate& it, std::size_t k) {
  const std::size_t n = P.dim_x();
  const double sg = P.sigma;
  Vector By(n), Bs(n), p(n);
  P.B1(it.y, By);
  for (std::size_t i = 0; i < n; ++i) p[i] = it.x_hat[i] + sg * (By[i] - P.c[i]);
  P.s_oracle(p, it.s);
  P.B2(it.s, Bs);
  for (std::size_t i = 0; i < n; ++i) it.x_half[i] = it.x_hat[i] + sg * (By[i] + Bs[i] - P.c[i]);
  for (std::size_t i = 0; i < n; ++i) p[i] = it.x_half[i] + sg * (Bs[i] - P.c[i]);
  P.y_oracle(p, it.y);
  P.B1(it.y, By);
  const double kk = static_cast<double>(k);
  const double a = 1.0 / (kk + 2.0), b = (kk + 1.0) / (kk + 2.0), g = sg / (kk + 2.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = By[i] - P.c[i];
    it.x[i] = it.x_half[i] + sg * (r + Bs[i]);
    it.x_hat[i] = a * it.x_hat0[i] + b * it.x[i] + g * (it.B1y0_minus_c[i] - r);
  }
}

// ---------------------------------------------------------------------------
// Side-by-side verification.

struct EquivalenceReport {
  double max_dev_inclusion_vs_eta = 0.0;  // w, x, v, eta
  double max_dev_eta_vs_lean = 0.0;       // s, y, x and reconstructed eta
  double max_deviation = 0.0;
  std::optional<std::size_t> first_divergence;  // 1-based iteration index
  bool init_mismatch = false;
  bool passed = false;
};

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// Runs the three forms in lockstep from (y0, x0). The inclusion form
/// starts from `eta0_override` when given, otherwise from the matched
/// eta^0 = x0 + sigma (B1 y0 - c).
inline EquivalenceReport verify_equivalence(const TwoBlockProblem& P, std::size_t iterations, double tol,
                                            std::span<const double> y0, std::span<const double> x0,
                                            std::optional<Vector> eta0_override = std::nullopt) {
  EquivalenceReport rep;
  HprIterate lean = make_iterate(P, y0, x0);
  const Vector eta0 = lean.eta(P);
  const Vector incl_eta0 = eta0_override ? *eta0_override : eta0;
  if (incl_eta0.size() != eta0.size()) throw InvalidArgument("verify_equivalence: eta0 has wrong length");
  rep.init_mismatch = max_abs_diff(incl_eta0, eta0) > tol;

  HprEtaState mid = make_eta_state(P, eta0);
  const Resolvents J = make_resolvents(P);
  HalpernSchedule sched{incl_eta0, 0};
  Vector eta = incl_eta0;

  for (std::size_t k = 0; k < iterations; ++k) {
    InclusionStep inc = hpr_step_inclusion(J, sched, eta);
    eta = inc.eta;
    hpr_step_eta(P, mid, k);
    hpr_step_optform(P, lean, k);

    const double d1 = std::max({max_abs_diff(inc.w, mid.w), max_abs_diff(inc.x, mid.x), max_abs_diff(inc.v, mid.v),
                                max_abs_diff(inc.eta, mid.eta)});
    const Vector lean_eta = lean.eta(P);
    const double d2 = std::max({max_abs_diff(mid.s, lean.s), max_abs_diff(mid.y, lean.y), max_abs_diff(mid.x, lean.x),
                                max_abs_diff(mid.eta, lean_eta)});
    rep.max_dev_inclusion_vs_eta = std::max(rep.max_dev_inclusion_vs_eta, d1);
    rep.max_dev_eta_vs_lean = std::max(rep.max_dev_eta_vs_lean, d2);
    if (!rep.first_divergence && std::max(d1, d2) > tol) rep.first_divergence = k + 1;
  }
  rep.max_deviation = std::max(rep.max_dev_inclusion_vs_eta, rep.max_dev_eta_vs_lean);
  rep.passed = !rep.first_divergence && !rep.init_mismatch;
  return rep;
}

// ---------------------------------------------------------------------------
// Worst-case bounds, used by the verification tests.

/// (1/(k+1)) ((sigma ||B2*|| + 1)/sigma) (||x0 - x*|| + sigma ||B1 y0 - B1 y*||):
/// bound on ||R(y^{k+1}, s^{k+1}, x^{k+1})||.
inline double kkt_rate_bound(std::size_t k, double sigma, double B2_norm, double dist_x, double dist_B1y) {
  return (sigma * B2_norm + 1.0) / sigma * (dist_x + sigma * dist_B1y) / (static_cast<double>(k) + 1.0);
}

struct ObjectiveGapBounds {
  double lower;
  double upper;
};

/// Sandwich on h(y^{k+1}, s^{k+1}) = f1 + f2 - (f1* + f2*) at optimum.
inline ObjectiveGapBounds objective_gap_bounds(std::size_t k, double sigma, double norm_x_star, double dist_x,
                                               double dist_B1y) {
  const double r = dist_x + sigma * dist_B1y;
  const double kk = static_cast<double>(k) + 1.0;
  return {-(norm_x_star / sigma) * r / kk, (r * r + norm_x_star * r) / sigma / kk};
}

}  // namespace hprwbp
