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

// Acceptance gate. Prints one PASS/FAIL line per criterion; run with
// criterion names (AC1 ... AC11) to select a subset. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <string>

#include "hprwbp/hprwbp.hpp"
#include "hprwbp/io.hpp"
#include "oracles/dense_oracles.hpp"

using namespace hprwbp;

namespace {

const fs::path kFixture = HPRWBP_FIXTURE_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::size_t> dims(std::mt19937_64& g, std::size_t T, std::size_t hi) {
  std::vector<std::size_t> v(T);
  for (auto& e : v) e = 1 + g() % hi;
  return v;
}

// Cost-only tiny instance with random costs, shared by AC4-AC6.
WbpInstance seeded_tiny() {
  std::mt19937_64 g(20260611);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t m = 4;
  const std::vector<std::size_t> mt{3, 5};
  std::vector<DiscreteDistribution> samples;
  std::vector<DenseMatrix> costs;
  for (auto n : mt) {
    DiscreteDistribution d;
    d.supports.count = n;
    d.weights.resize(n);
    double s = 0.0;
    for (double& w : d.weights) s += (w = 0.1 + u(g));
    for (double& w : d.weights) w /= s;
    samples.push_back(d);
    DenseMatrix C(m, n);
    for (double& v : C.data) v = u(g);
    costs.push_back(C);
  }
  PointSet bary;
  bary.count = m;
  return WbpInstance(samples, bary, {0.4, 0.6}, costs);
}

Outcome ac1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 g(1);
  double worst = 0.0;
  const int cases = 1000;
  for (int k = 0; k < cases; ++k) {
    const WbpLayout L(2 + g() % 7, dims(g, 1 + g() % 5, 8));
    const auto A = oracle::dense_A(L);
    const Eigen::MatrixXd G = A * A.transpose();
    const Vector R = oracle::random_vector(g, L.M(), -10.0, 10.0);
    NormalSolveWorkspace ws(L);
    Vector y(L.M());
    solve_wbp_normal(L, R, y, ws);
    const double rel = (G * oracle::to_eigen(y) - oracle::to_eigen(R)).norm() / (1.0 + norm2(R));
    worst = std::max(worst, rel);
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-10 && t < 5.0, fmt("%d cases, max ||AA*y-R||/(1+||R||)=%.2e (<=1e-10), %.2fs (<5s)", cases, worst, t)};
}

Outcome ac2() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 g(2);
  double worst = 0.0;
  const int cases = 1000;
  for (int k = 0; k < cases; ++k) {
    const std::size_t mu = 2 + g() % 11, mv = 1 + g() % 12;
    const auto A = oracle::dense_ot_A(mu, mv);
    const Vector R = oracle::random_vector(g, mu + mv - 1, -10.0, 10.0);
    const auto [y1, y2] = solve_ot_normal(mu, mv, std::span(R).first(mv), std::span(R).subspan(mv));
    Vector y(y1);
    y.insert(y.end(), y2.begin(), y2.end());
    const double rel = (A * A.transpose() * oracle::to_eigen(y) - oracle::to_eigen(R)).norm() / (1.0 + norm2(R));
    worst = std::max(worst, rel);
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-10 && t < 5.0, fmt("%d cases, max relative residual %.2e (<=1e-10), %.2fs (<5s)", cases, worst, t)};
}

Outcome ac3() {
  std::mt19937_64 g(3);
  std::size_t tested = 0;
  double worst_solve = 0.0, worst_iter = 0.0;
  bool ok = true;
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> cases{{2, {1}}, {100, std::vector<std::size_t>(10, 100)},
                                                                      {7, {1, 2, 3}}, {50, std::vector<std::size_t>(20, 50)}};
  for (int k = 0; k < 40; ++k) cases.emplace_back(2 + g() % 80, dims(g, 1 + g() % 12, 80));
  for (const auto& [m, mt] : cases) {
    const WbpLayout L(m, mt);
    std::size_t sum_mt = 0;
    for (auto v : mt) sum_mt += v;
    NormalSolveWorkspace ws(L);
    Vector y(L.M());
    FlopCounter fs;
    solve_wbp_normal(L, oracle::random_vector(g, L.M()), y, ws, fs);
    const double bs = static_cast<double>(7 * L.T() * m + 3 * sum_mt + 64 * L.T());
    worst_solve = std::max(worst_solve, static_cast<double>(fs.count) / bs);
    ok = ok && fs.count <= 7 * L.T() * m + 3 * sum_mt + 64 * L.T();

    std::vector<DiscreteDistribution> samples;
    std::vector<DenseMatrix> costs;
    for (auto n : mt) {
      DiscreteDistribution d;
      d.supports.count = n;
      d.weights.assign(n, 1.0 / static_cast<double>(n));
      samples.push_back(d);
      costs.emplace_back(m, n, 0.5);
    }
    PointSet bary;
    bary.count = m;
    const WbpInstance inst(samples, bary, Vector(mt.size(), 1.0 / static_cast<double>(mt.size())), costs);
    DualLpEngine eng(inst, 1.0);
    FlopCounter fi;
    eng.hpr_step(0, fi);
    const std::size_t bi = 26 * m * sum_mt + 64 * (L.T() * m + sum_mt);
    worst_iter = std::max(worst_iter, static_cast<double>(fi.count) / static_cast<double>(bi));
    ok = ok && fi.count <= bi;
    ++tested;
  }
  return {ok, fmt("%zu layouts; max count/bound: normal solve %.3f, HPR iteration %.3f (<=1)", tested, worst_solve,
                  worst_iter)};
}

Outcome ac4() {
  const WbpInstance inst = seeded_tiny();
  const TwoBlockProblem P = make_lp_dual_two_block(make_wbp_operators(inst), 1.0);
  const EquivalenceReport r =
      verify_equivalence(P, 200, 1e-9, Vector(P.dim_y, 0.0), Vector(P.dim_x(), 0.0));
  return {r.passed && r.max_deviation <= 1e-9,
          fmt("200 iterations, max deviation %.2e (inclusion vs eta %.2e, eta vs lean %.2e), <=1e-9", r.max_deviation,
              r.max_dev_inclusion_vs_eta, r.max_dev_eta_vs_lean)};
}

// Reference run with restarts off for AC5/AC6.
struct Reference {
  Vector eta, x, s;
  double residual = 0.0;
};

const Reference& reference() {
  static const Reference ref = [] {
    const WbpInstance inst = seeded_tiny();
    DualLpEngine eng(inst, 1.0);
    for (std::size_t k = 0; k < 1000000; ++k) eng.hpr_step(k);
    Reference r;
    r.eta = eng.x_hat();
    for (std::size_t i = 0; i < r.eta.size(); ++i) r.eta[i] += eng.sigma() * eng.g()[i];
    r.x = eng.x();
    r.s = eng.s();
    eng.kkt();
    r.residual = eng.last_norms().absolute();
    return r;
  }();
  return ref;
}

Outcome ac5() {
  const WbpInstance inst = seeded_tiny();
  const Reference& ref = reference();
  DualLpEngine eng(inst, 1.0);
  const double sg = eng.sigma();
  const std::size_t n = eng.x().size();
  Vector eta(n), eta0(n);
  auto current_eta = [&](Vector& out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = eng.x_hat()[i] + sg * eng.g()[i];
  };
  current_eta(eta0);
  double d0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) d0 += (eta0[i] - ref.eta[i]) * (eta0[i] - ref.eta[i]);
  const double bound = 2.0 * std::sqrt(d0) * (1.0 + 1e-6);
  double worst = 0.0;
  std::size_t violations = 0;
  for (std::size_t k = 0; k <= 5000; ++k) {
    current_eta(eta);
    eng.hpr_step(k);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = eta[i] + 2.0 * sg * (eng.g()[i] + eng.s()[i]);
      acc += (v - eta[i]) * (v - eta[i]);
    }
    const double lhs = (static_cast<double>(k) + 1.0) * std::sqrt(acc);
    worst = std::max(worst, lhs / bound);
    if (lhs > bound) ++violations;
  }
  return {violations == 0, fmt("k<=5000: max (k+1)||v-eta|| / (2||eta0-eta*||(1+1e-6)) = %.4f, %zu violations; "
                               "reference residual %.1e",
                               worst, violations, ref.residual)};
}

Outcome ac6() {
  const WbpInstance inst = seeded_tiny();
  const Reference& ref = reference();
  DualLpEngine eng(inst, 1.0);
  const double sg = eng.sigma();
  double dx = 0.0, ds = 0.0;
  for (std::size_t i = 0; i < ref.x.size(); ++i) {
    dx += (eng.x()[i] - ref.x[i]) * (eng.x()[i] - ref.x[i]);
    ds += (eng.s()[i] - ref.s[i]) * (eng.s()[i] - ref.s[i]);
  }
  const double C = (1.0 + sg) / sg * (std::sqrt(dx) + sg * std::sqrt(ds)) * (1.0 + 1e-6);
  std::string detail;
  bool ok = true;
  std::size_t k = 0;
  for (std::size_t target : {10u, 100u, 1000u}) {
    for (; k <= target; ++k) eng.hpr_step(k);
    eng.kkt();
    const double lhs = eng.last_norms().absolute() * (static_cast<double>(target) + 1.0);
    ok = ok && lhs <= C;
    detail += fmt("k=%zu: %.3e<=%.3e; ", target, lhs, C);
  }
  return {ok, detail + fmt("reference residual %.1e", ref.residual)};
}

Outcome ac7() {
  const auto t0 = std::chrono::steady_clock::now();
  const LoadedInstance li = read_instance(kFixture);
  std::ifstream in(kFixture / "oracle.json");
  const double ref = json::parse(in)["objective"].get<double>();
  bool ok = true;
  std::string detail;
  for (Method m : {Method::hpr, Method::admm, Method::hybrid}) {
    const SolveReport r = solve(m, li.instance, SolverOptions{});
    const double gap = relative_obj_gap(r.primal_obj, ref);
    ok = ok && r.termination == Termination::tolerance && r.final_kkt.max_relative <= 1e-5 && gap <= 1e-4;
    detail += fmt("%s iter=%zu kkt=%.2e gap=%.2e; ", to_string(m).c_str(), r.iterations, r.final_kkt.max_relative, gap);
  }
  const double t = seconds_since(t0);
  ok = ok && t < 60.0;
  return {ok, detail + fmt("%.1fs (<60s)", t)};
}

Outcome ac8() {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticConfig cfg;
  cfg.T = 100;
  cfg.m = 100;
  cfg.mt_default = 100;
  cfg.seed = 2024;
  const WbpInstance inst = generate_synthetic(cfg).instance;
  SolverOptions o;
  const SolveReport h = solve_hpr(inst, o);
  const SolveReport y = solve_hybrid(inst, o);
  const SolveReport a = solve_admm(inst, o);
  const double t = seconds_since(t0);
  const bool ok = h.termination == Termination::tolerance && h.iterations <= 3500 &&
                  y.termination == Termination::tolerance && y.iterations <= 3000 && a.iterations > h.iterations &&
                  t < 600.0;
  return {ok, fmt("(100,100,100) seed %llu: HPR %zu iters (<=3500), hybrid %zu (<=3000), fast-ADMM %zu (>HPR); "
                  "HPR-hybrid obj gap %.1e; %.0fs (<600s)",
                  static_cast<unsigned long long>(cfg.seed), h.iterations, y.iterations, a.iterations,
                  relative_obj_gap(y.primal_obj, h.primal_obj), t)};
}

Outcome ac9() {
  const auto t0 = std::chrono::steady_clock::now();
  const LoadedInstance li = read_instance(kFixture);
  std::ifstream in(kFixture / "oracle.json");
  const double ref = json::parse(in)["objective"].get<double>();
  IbpOptions o;
  o.log_domain = true;
  o.epsilon = 0.01;
  const SolveReport coarse = solve_ibp(li.instance, o);
  o.epsilon = 0.001;
  o.max_iters = 200000;
  const SolveReport fine = solve_ibp(li.instance, o);
  const double g1 = relative_obj_gap(coarse.primal_obj, ref), g2 = relative_obj_gap(fine.primal_obj, ref);
  const double t = seconds_since(t0);
  const bool converged = coarse.termination == Termination::tolerance && fine.termination == Termination::tolerance;
  return {converged && g2 < g1 && t < 60.0, fmt("gap(eps=0.001)=%.3e < gap(eps=0.01)=%.3e (sweeps %zu, %zu); %.1fs (<60s)", g2, g1,
                                   fine.iterations, coarse.iterations, t)};
}

Outcome ac10() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(10);
  const std::size_t m = 12;
  PointSet pts(2, m);
  for (double& v : pts.coords) v = rng.normal();
  DiscreteDistribution s;
  s.supports = pts;
  s.weights = random_simplex_point(rng, m);
  const WbpInstance inst({s}, pts, {1.0}, build_cost(pts, std::vector<PointSet>{pts}));
  SolverOptions o;
  o.kkt_tol = 1e-9;
  bool ok = true;
  std::string detail;
  for (Method mth : {Method::hpr, Method::admm, Method::hybrid}) {
    const SolveReport r = solve(mth, inst, o);
    double dev = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      dev = std::max(dev, std::abs(r.x[inst.layout().bary_offset() + i] - s.weights[i]));
    ok = ok && r.primal_obj <= 1e-8 && dev <= 1e-6;
    detail += fmt("%s obj=%.1e dev=%.1e; ", to_string(mth).c_str(), r.primal_obj, dev);
  }
  const double t = seconds_since(t0);
  return {ok && t < 5.0, detail + fmt("kkt_tol 1e-9, %.2fs (<5s)", t)};
}

double per_iteration_seconds(std::size_t m, std::size_t mt, std::size_t T) {
  std::vector<DiscreteDistribution> samples;
  std::vector<DenseMatrix> costs;
  Rng rng(m * 1000 + mt * 10 + T);
  for (std::size_t t = 0; t < T; ++t) {
    DiscreteDistribution d;
    d.supports.count = mt;
    d.weights = random_simplex_point(rng, mt);
    samples.push_back(d);
    DenseMatrix C(m, mt);
    for (double& v : C.data) v = rng.uniform();
    costs.push_back(C);
  }
  PointSet bary;
  bary.count = m;
  const WbpInstance inst(samples, bary, random_simplex_point(rng, T), costs);
  DualLpEngine eng(inst, 1.0);
  std::size_t k = 0;
  for (; k < 20; ++k) eng.hpr_step(k);
  std::vector<double> samples_t;
  const std::size_t batch = 40;
  for (int rep = 0; rep < 9; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < batch; ++i, ++k) eng.hpr_step(k);
    samples_t.push_back(seconds_since(t0) / batch);
  }
  std::nth_element(samples_t.begin(), samples_t.begin() + 4, samples_t.end());
  return samples_t[4];
}

Outcome ac11() {
  const auto t0 = std::chrono::steady_clock::now();
  const double base = per_iteration_seconds(50, 50, 20);
  const double rm = per_iteration_seconds(100, 50, 20) / base;
  const double rmt = per_iteration_seconds(50, 100, 20) / base;
  const double rT = per_iteration_seconds(50, 50, 40) / base;
  const double t = seconds_since(t0);
  const bool ok = rm <= 2.6 && rmt <= 2.6 && rT <= 2.6 && t < 300.0;
  return {ok, fmt("base (50,50,20) %.3f ms/iter; ratios m x2 %.2f, m_t x2 %.2f, T x2 %.2f (<=2.6); %.1fs", base * 1e3,
                  rm, rmt, rT, t)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::pair<std::string, std::function<Outcome()>>>> criteria{
      {"AC1", {"normal-solver oracle equivalence", ac1}},
      {"AC2", {"OT normal-solver oracle equivalence", ac2}},
      {"AC3", {"flop-count conformance", ac3}},
      {"AC4", {"algorithm equivalence (inclusion / eta / lean forms)", ac4}},
      {"AC5", {"Halpern fixed-point residual bound", ac5}},
      {"AC6", {"KKT-rate bound", ac6}},
      {"AC7", {"solution quality vs exact LP oracle", ac7}},
      {"AC8", {"(100,100,100) iteration counts", ac8}},
      {"AC9", {"IBP bias direction", ac9}},
      {"AC10", {"self-barycenter sanity", ac10}},
      {"AC11", {"linear per-iteration scaling", ac11}},
  };
  std::vector<std::string> wanted(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [id, entry] : criteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), id) == wanted.end()) continue;
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s -- %s\n", o.pass ? "PASS" : "FAIL", id.c_str(), entry.first.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed;
}
