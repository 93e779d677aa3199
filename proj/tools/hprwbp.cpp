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

// hprwbp command-line tool.
//
// Exit codes: 0 converged to tolerance, 1 I/O failure, 2 budget exhausted,
// 3 numerical failure, 64 usage error.

#include <CLI11.hpp>
#include <cstdio>
#include <iomanip>
#include <iostream>

#include "hprwbp/hprwbp.hpp"
#include "hprwbp/io.hpp"

namespace {

using namespace hprwbp;

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitBudget = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitUsage = 64;

constexpr double kProtocolTimeLimit = 3600.0;

struct GenerateArgs {
  std::size_t T = 10, m = 20, mt = 20, d = 3;
  std::vector<std::size_t> mt_list;
  std::uint64_t seed = 1;
  std::string out;
  bool write_costs = false;
};

struct IngestArgs {
  std::vector<std::string> images;
  std::vector<double> omega;
  std::string out;
  bool write_costs = false;
};

struct SolveArgs {
  std::string instance;
  std::string method = "hpr";
  SolverOptions lp;
  IbpOptions ibp;
  std::string restart = "on";
  double time_limit = 0.0;
  bool paper_protocol = false;
  std::uint64_t seed = 0;
  std::string out;
  std::string dump_normal;
};

struct CompareArgs {
  std::vector<std::string> instances;
  std::vector<std::string> methods{"hpr", "admm", "hybrid"};
  SolveArgs common;
  std::string oracle;
  std::string out;
};

void add_solver_flags(CLI::App* cmd, SolveArgs& a) {
  cmd->add_option("--sigma", a.lp.sigma, "Penalty parameter sigma > 0")->capture_default_str();
  cmd->add_option("--gamma", a.lp.gamma, "fast-ADMM dual step size in (0,2)")->capture_default_str();
  cmd->add_option("--kkt-tol", a.lp.kkt_tol, "Relative KKT tolerance")->capture_default_str();
  cmd->add_option("--max-iters", a.lp.max_iters, "Iteration budget (IBP sweeps for ibp)")->capture_default_str();
  cmd->add_option("--check-every", a.lp.check_every, "Checkpoint cadence")->capture_default_str();
  cmd->add_option("--restart", a.restart, "Restart policy")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  cmd->add_option("--epsilon", a.ibp.epsilon, "IBP regularization")->capture_default_str();
  cmd->add_option("--ibp-tol", a.ibp.tol, "IBP tolerance on weight change and marginal error")->capture_default_str();
  cmd->add_flag("--log-domain", a.ibp.log_domain, "Log-domain IBP scaling");
  cmd->add_option("--time-limit", a.time_limit, "Wall-time budget in seconds (0 = none)");
  cmd->add_flag("--paper-protocol", a.paper_protocol, "One-hour wall-time budget");
  cmd->add_option("--seed", a.seed, "Recorded in the summary");
}

void finalize_options(SolveArgs& a) {
  a.lp.restart.enabled = a.restart == "on";
  a.ibp.max_iters = a.lp.max_iters;
  a.ibp.record_every = a.lp.check_every;
  double limit = a.time_limit;
  if (a.paper_protocol && limit <= 0.0) limit = kProtocolTimeLimit;
  if (limit > 0.0) {
    a.lp.time_limit_secs = limit;
    a.ibp.time_limit_secs = limit;
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_file(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

int cmd_generate(const GenerateArgs& a) {
  SyntheticConfig cfg;
  cfg.T = a.T;
  cfg.m = a.m;
  cfg.mt_default = a.mt;
  cfg.mt = a.mt_list;
  cfg.d = a.d;
  cfg.seed = a.seed;
  cfg.validate();
  const SyntheticInstance gen = generate_synthetic(cfg);
  InstanceWriteOptions wo;
  wo.write_costs = a.write_costs;
  wo.provenance = {{"generator", "gaussian-mixture"},
                   {"T", cfg.T},
                   {"m", cfg.m},
                   {"mt", cfg.mt.empty() ? json(cfg.mt_default) : json(cfg.mt)},
                   {"d", cfg.d},
                   {"seed", cfg.seed},
                   {"mixture_means", cfg.mixture.means},
                   {"mixture_variance", cfg.mixture.variance},
                   {"mixture_proportions", gen.mixture_proportions},
                   {"kmeans_sweeps", cfg.kmeans_sweeps},
                   {"cost", "squared-euclidean, joint max normalized to 1"}};
  write_instance(gen.instance, a.out, wo);
  std::cout << "wrote instance T=" << cfg.T << " m=" << cfg.m << " to " << a.out << '\n';
  return kExitOk;
}

int cmd_ingest(const IngestArgs& a) {
  std::vector<GrayImage> imgs;
  for (const auto& p : a.images) imgs.push_back(read_pgm(p));
  const WbpInstance inst = image_instance(imgs, a.omega);
  InstanceWriteOptions wo;
  wo.write_costs = a.write_costs;
  wo.image_shape = std::make_pair(imgs[0].rows, imgs[0].cols);
  wo.provenance = {{"generator", "pgm-images"}, {"images", a.images}};
  write_instance(inst, a.out, wo);
  std::cout << "wrote image instance T=" << inst.T() << " m=" << inst.m() << " to " << a.out << '\n';
  return kExitOk;
}

SolveReport run_method(const std::string& method, const WbpInstance& inst, const SolveArgs& a, json& opts) {
  const Method mth = parse_method(method);
  if (mth == Method::ibp) {
    opts = options_json(a.ibp);
    return solve_ibp(inst, a.ibp);
  }
  opts = options_json(a.lp);
  return solve(mth, inst, a.lp);
}

int exit_code(const SolveReport& rep) { return rep.termination == Termination::tolerance ? kExitOk : kExitBudget; }

int cmd_solve(SolveArgs a) {
  finalize_options(a);
  parse_method(a.method);
  if (parse_method(a.method) == Method::ibp) a.ibp.validate();
  else a.lp.validate();
  const LoadedInstance li = read_instance(a.instance);
  const WbpInstance& inst = li.instance;
  const fs::path out = a.out;
  ensure_dir(out);
  if (!a.dump_normal.empty()) debug::write_normal_matrix_csv(inst.layout(), a.dump_normal);

  json opts;
  const SolveReport rep = run_method(a.method, inst, a, opts);
  {
    auto f = open_file(out / "convergence.csv");
    write_history_csv(f, rep);
  }
  {
    auto f = open_file(out / "barycenter.csv");
    write_barycenter_csv(f, inst, rep.x);
  }
  json summary = summary_json(inst, rep, opts);
  summary["instance"]["path"] = a.instance;
  summary["seed"] = a.seed;
  open_file(out / "summary.json") << summary.dump(2) << '\n';
  if (li.image_shape) {
    const auto bary = std::span<const double>(rep.x).subspan(inst.layout().bary_offset(), inst.m());
    write_pgm((out / "barycenter.pgm").string(), li.image_shape->first, li.image_shape->second, bary);
  }
  std::cout << a.method << ": " << to_string(rep.termination) << " after " << rep.iterations
            << " iterations, primal_obj=" << format_double(rep.primal_obj);
  if (rep.method != Method::ibp) std::cout << " kkt=" << format_double(rep.final_kkt.max_relative);
  std::cout << " time=" << rep.elapsed_secs << "s\n";
  return exit_code(rep);
}

struct CompareRow {
  std::string instance, method;
  std::size_t iterations = 0;
  double time = 0.0;
  bool is_ibp = false;
  double residual = 0.0;  // KKT max or marginal error
  double primal_obj = 0.0;
  double gap = std::numeric_limits<double>::quiet_NaN();
  std::string termination, error;
};

int cmd_compare(CompareArgs a) {
  finalize_options(a.common);
  if (a.methods.size() < 2) throw CLI::ValidationError("--methods", "compare needs at least two methods");
  std::optional<double> oracle_obj;
  if (!a.oracle.empty()) {
    std::ifstream in(a.oracle);
    if (!in) throw IoError("cannot open " + a.oracle);
    json j;
    in >> j;
    oracle_obj = j.at("objective").get<double>();
  }
  std::vector<CompareRow> rows;
  for (const auto& path : a.instances) {
    const LoadedInstance li = read_instance(path);
    std::vector<CompareRow> block;
    for (const auto& spec : a.methods) {
      CompareRow r;
      r.instance = path;
      r.method = spec;
      SolveArgs sa = a.common;
      std::string name = spec;
      if (const auto colon = spec.find(':'); colon != std::string::npos) {
        name = spec.substr(0, colon);
        sa.ibp.epsilon = std::stod(spec.substr(colon + 1));
      }
      try {
        json opts;
        const SolveReport rep = run_method(name, li.instance, sa, opts);
        r.iterations = rep.iterations;
        r.time = rep.elapsed_secs;
        r.is_ibp = rep.method == Method::ibp;
        r.residual = r.is_ibp ? (rep.history.empty() ? 0.0 : rep.history.back().marginal_error)
                              : rep.final_kkt.max_relative;
        r.primal_obj = rep.primal_obj;
        r.termination = to_string(rep.termination);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      block.push_back(r);
    }
    double ref = std::numeric_limits<double>::quiet_NaN();
    if (oracle_obj) {
      ref = *oracle_obj;
    } else {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& r : block)
        if (r.error.empty() && !r.is_ibp && r.residual < best) {
          best = r.residual;
          ref = r.primal_obj;
        }
    }
    for (auto& r : block)
      if (r.error.empty() && std::isfinite(ref)) r.gap = relative_obj_gap(r.primal_obj, ref);
    rows.insert(rows.end(), block.begin(), block.end());
  }

  const fs::path out = a.out.empty() ? fs::path(".") : fs::path(a.out);
  ensure_dir(out);
  auto csv = open_file(out / "compare.csv");
  csv << "instance,method,iterations,elapsed_secs,residual_kind,residual,primal_obj,rel_obj_gap,termination,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    csv << r.instance << ',' << r.method << ',' << r.iterations << ',' << format_double(r.time) << ','
        << (r.is_ibp ? "marginal_error" : "kkt_max") << ',' << format_double(r.residual) << ','
        << format_double(r.primal_obj) << ',' << format_double(r.gap) << ',' << r.termination << ',' << err << '\n';
  }
  std::cout << std::left << std::setw(12) << "method" << std::right << std::setw(8) << "iter" << std::setw(11)
            << "time(s)" << std::setw(16) << "residual" << std::setw(15) << "primal_obj" << std::setw(12) << "rel_gap"
            << "  status\n";
  std::string last_instance;
  for (const auto& r : rows) {
    if (r.instance != last_instance) {
      std::cout << "# " << r.instance << (oracle_obj ? " (reference: oracle)" : " (reference: best KKT)") << '\n';
      last_instance = r.instance;
    }
    if (!r.error.empty()) {
      std::cout << std::left << std::setw(12) << r.method << "  failed: " << r.error << '\n';
      continue;
    }
    char res[32], gap[32], obj[32];
    std::snprintf(res, sizeof res, "%s%.2e", r.is_ibp ? "me " : "kkt ", r.residual);
    std::snprintf(obj, sizeof obj, "%.6e", r.primal_obj);
    std::snprintf(gap, sizeof gap, "%.2e", r.gap);
    std::cout << std::left << std::setw(12) << r.method << std::right << std::setw(8) << r.iterations << std::setw(11)
              << std::fixed << std::setprecision(3) << r.time << std::defaultfloat << std::setw(16) << res
              << std::setw(15) << obj << std::setw(12) << gap << "  " << r.termination << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-support Wasserstein barycenter solvers (HPR, fast-ADMM, hybrid, IBP)"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate a seeded Gaussian-mixture instance");
  g->add_option("--T", gen.T, "Number of sample distributions")->capture_default_str();
  g->add_option("--m", gen.m, "Barycenter support size (>= 2)")->capture_default_str();
  g->add_option("--mt", gen.mt, "Atoms per sample")->capture_default_str();
  g->add_option("--mt-list", gen.mt_list, "Per-sample atom counts (overrides --mt)");
  g->add_option("--d", gen.d, "Dimension of support points")->capture_default_str();
  g->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_flag("--write-costs", gen.write_costs, "Also write binary cost matrices");

  IngestArgs ing;
  auto* in = app.add_subcommand("ingest", "Build an instance from same-sized PGM images");
  in->add_option("--images", ing.images, "PGM files (P2 or P5)")->required()->check(CLI::ExistingFile);
  in->add_option("--omega", ing.omega, "Sample weights (default uniform)");
  in->add_option("--out", ing.out, "Output directory")->required();
  in->add_flag("--write-costs", ing.write_costs, "Also write binary cost matrices");

  SolveArgs sol;
  auto* s = app.add_subcommand("solve", "Solve one instance");
  s->add_option("instance", sol.instance, "Instance directory or manifest")->required();
  s->add_option("--method", sol.method, "Solver")
      ->check(CLI::IsMember({"hpr", "admm", "hybrid", "ibp"}))
      ->capture_default_str();
  s->add_option("--out", sol.out, "Report directory")->required();
  s->add_option("--dump-normal-matrix", sol.dump_normal, "Write dense A A* as CSV (small instances)");
  add_solver_flags(s, sol);

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "Run several methods and tabulate relative objective gaps");
  c->add_option("instances", cmp.instances, "Instance directories")->required();
  c->add_option("--methods", cmp.methods, "Methods; ibp:<epsilon> selects an IBP regularization")->delimiter(',');
  c->add_option("--oracle", cmp.oracle, "JSON file with an 'objective' used as the reference");
  c->add_option("--out", cmp.out, "Directory for compare.csv");
  add_solver_flags(c, cmp.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*in) return cmd_ingest(ing);
    if (*s) return cmd_solve(sol);
    if (*c) {
      for (const auto& mth : cmp.methods) parse_method(mth.substr(0, mth.find(':')));
      return cmd_compare(cmp);
    }
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}
