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

// Instance files, convergence histories and run summaries.
//
// Instance directory layout (format "hprwbp-instance", version 1):
//   instance.json          manifest: T, m, d, omega, file names
//   sample_<t>.csv         header "weight,coord_1,...,coord_d", one atom per row
//   barycenter_supports.csv  header "coord_1,...,coord_d"
//   cost_<t>.bin           optional: u32 rows, u32 cols, then rows*cols
//                          little-endian f64 in row-major order
// Costs are rebuilt from supports when no cost files are listed. Requires
// nlohmann/json on the include path.

#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hprwbp/datagen.hpp"
#include "hprwbp/ibp.hpp"

namespace hprwbp {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kInstanceFormat = "hprwbp-instance";
inline constexpr int kInstanceVersion = 1;
inline constexpr int kSummaryVersion = 1;

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* b = s.data();
  while (b != s.data() + s.size() && *b == ' ') ++b;
  const auto res = std::from_chars(b, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError(where + ": cannot parse number '" + s + "'");
  return v;
}

// Rows of numbers below a header line; every row must have `width` columns.
inline std::vector<Vector> read_numeric_csv(const fs::path& path, std::size_t width) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  if (split_csv_line(line).size() != width)
    throw IoError(path.string() + ": header has wrong column count (expected " + std::to_string(width) + ")");
  std::vector<Vector> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != width) throw IoError(where + ": expected " + std::to_string(width) + " columns");
    Vector row(width);
    for (std::size_t k = 0; k < width; ++k) row[k] = parse_double(cells[k], where);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

inline std::string coord_header(std::size_t d) {
  std::string h;
  for (std::size_t k = 1; k <= d; ++k) h += (k > 1 ? ",coord_" : "coord_") + std::to_string(k);
  return h;
}

}  // namespace detail

inline void write_cost_binary(const fs::path& path, const DenseMatrix& D) {
  auto out = detail::open_out(path, std::ios::binary);
  auto put_u32 = [&](std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xffu));
  };
  if (D.rows > UINT32_MAX || D.cols > UINT32_MAX) throw InvalidArgument("cost matrix too large for u32 header");
  put_u32(static_cast<std::uint32_t>(D.rows));
  put_u32(static_cast<std::uint32_t>(D.cols));
  for (std::size_t i = 0; i < D.rows; ++i)
    for (std::size_t j = 0; j < D.cols; ++j) {
      const auto bits = std::bit_cast<std::uint64_t>(D(i, j));
      for (int b = 0; b < 8; ++b) out.put(static_cast<char>((bits >> (8 * b)) & 0xffu));
    }
  if (!out) throw IoError("failed writing " + path.string());
}

inline DenseMatrix read_cost_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  unsigned char hdr[8];
  in.read(reinterpret_cast<char*>(hdr), 8);
  if (in.gcount() != 8) throw IoError(path.string() + ": truncated header");
  auto u32 = [&](int o) {
    return static_cast<std::uint32_t>(hdr[o]) | (static_cast<std::uint32_t>(hdr[o + 1]) << 8) |
           (static_cast<std::uint32_t>(hdr[o + 2]) << 16) | (static_cast<std::uint32_t>(hdr[o + 3]) << 24);
  };
  DenseMatrix D(u32(0), u32(4));
  std::vector<unsigned char> raw(D.rows * D.cols * 8);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw IoError(path.string() + ": truncated data");
  for (std::size_t i = 0; i < D.rows; ++i)
    for (std::size_t j = 0; j < D.cols; ++j) {
      std::uint64_t bits = 0;
      const unsigned char* p = raw.data() + 8 * (i * D.cols + j);
      for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
      D.data[j * D.rows + i] = std::bit_cast<double>(bits);
    }
  return D;
}

struct InstanceWriteOptions {
  bool write_costs = false;
  std::optional<std::pair<std::size_t, std::size_t>> image_shape;
  json provenance;  // written to generator.json when not null
};

inline void write_instance(const WbpInstance& inst, const fs::path& dir, const InstanceWriteOptions& opt = {}) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const std::size_t d = inst.dim();
  json man;
  man["format"] = kInstanceFormat;
  man["version"] = kInstanceVersion;
  man["T"] = inst.T();
  man["m"] = inst.m();
  man["d"] = d;
  man["omega"] = inst.omega();
  man["samples"] = json::array();
  for (std::size_t t = 0; t < inst.T(); ++t) {
    const std::string name = "sample_" + std::to_string(t) + ".csv";
    man["samples"].push_back(name);
    auto out = detail::open_out(dir / name);
    out << "weight" << (d > 0 ? "," + detail::coord_header(d) : "") << '\n';
    const auto& s = inst.sample(t);
    for (std::size_t i = 0; i < s.size(); ++i) {
      out << format_double(s.weights[i]);
      for (std::size_t k = 0; k < d; ++k) out << ',' << format_double(s.supports.coords[i * d + k]);
      out << '\n';
    }
  }
  if (d > 0) {
    man["barycenter_supports"] = "barycenter_supports.csv";
    auto out = detail::open_out(dir / "barycenter_supports.csv");
    out << detail::coord_header(d) << '\n';
    const auto& P = inst.barycenter_supports();
    for (std::size_t i = 0; i < P.size(); ++i) {
      for (std::size_t k = 0; k < d; ++k) out << (k ? "," : "") << format_double(P.coords[i * d + k]);
      out << '\n';
    }
  }
  if (opt.write_costs || d == 0) {
    man["costs"] = json::array();
    for (std::size_t t = 0; t < inst.T(); ++t) {
      const std::string name = "cost_" + std::to_string(t) + ".bin";
      write_cost_binary(dir / name, inst.ground_cost(t));
      man["costs"].push_back(name);
    }
  }
  if (opt.image_shape) man["image_shape"] = {opt.image_shape->first, opt.image_shape->second};
  detail::open_out(dir / "instance.json") << man.dump(2) << '\n';
  if (!opt.provenance.is_null()) detail::open_out(dir / "generator.json") << opt.provenance.dump(2) << '\n';
}

struct LoadedInstance {
  WbpInstance instance;
  std::optional<std::pair<std::size_t, std::size_t>> image_shape;
};

/// Accepts the instance directory or the manifest path.
inline LoadedInstance read_instance(const fs::path& where) {
  const fs::path manifest = fs::is_directory(where) ? where / "instance.json" : where;
  const fs::path dir = manifest.parent_path();
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open " + manifest.string());
  json man;
  try {
    in >> man;
  } catch (const json::exception& e) {
    throw IoError(manifest.string() + ": " + e.what());
  }
  try {
    if (man.value("format", std::string()) != kInstanceFormat) throw IoError(manifest.string() + ": unknown format");
    if (man.value("version", 0) != kInstanceVersion) throw IoError(manifest.string() + ": unsupported version");
    const std::size_t T = man.at("T"), m = man.at("m"), d = man.at("d");
    const Vector omega = man.at("omega").get<Vector>();
    const auto sample_files = man.at("samples").get<std::vector<std::string>>();
    if (sample_files.size() != T || omega.size() != T) throw IoError(manifest.string() + ": T does not match lists");
    std::vector<DiscreteDistribution> samples(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto rows = detail::read_numeric_csv(dir / sample_files[t], d + 1);
      samples[t].supports = PointSet(d, rows.size());
      samples[t].weights.resize(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        samples[t].weights[i] = rows[i][0];
        for (std::size_t k = 0; k < d; ++k) samples[t].supports.coords[i * d + k] = rows[i][k + 1];
      }
      if (d == 0) samples[t].supports.count = rows.size();
    }
    PointSet bary(d, m);
    if (d > 0) {
      const auto rows = detail::read_numeric_csv(dir / man.at("barycenter_supports").get<std::string>(), d);
      if (rows.size() != m) throw IoError(manifest.string() + ": barycenter support count differs from m");
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < d; ++k) bary.coords[i * d + k] = rows[i][k];
    } else {
      bary.count = m;
    }
    std::vector<DenseMatrix> costs;
    if (man.contains("costs")) {
      for (const auto& name : man.at("costs").get<std::vector<std::string>>()) costs.push_back(read_cost_binary(dir / name));
      if (costs.size() != T) throw IoError(manifest.string() + ": expected one cost file per sample");
    } else {
      if (d == 0) throw IoError(manifest.string() + ": d = 0 requires cost files");
      costs = build_cost(bary, samples);
    }
    LoadedInstance out{WbpInstance(std::move(samples), std::move(bary), omega, std::move(costs)), std::nullopt};
    if (man.contains("image_shape")) {
      const auto shape = man.at("image_shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2 || shape[0] * shape[1] != m) throw IoError(manifest.string() + ": bad image_shape");
      out.image_shape = std::make_pair(shape[0], shape[1]);
    }
    return out;
  } catch (const json::exception& e) {
    throw IoError(manifest.string() + ": " + e.what());
  }
}

inline constexpr const char* kLpHistoryHeader =
    "iter,kkt_primal,kkt_nonneg,kkt_dual,kkt_compl,kkt_max,primal_obj,dual_obj,elapsed_secs,restarted,method";
inline constexpr const char* kIbpHistoryHeader = "iter,marginal_error,weight_change,primal_obj,elapsed_secs,method";

inline void write_history_csv(std::ostream& out, const SolveReport& rep) {
  const bool ibp = rep.method == Method::ibp;
  out << (ibp ? kIbpHistoryHeader : kLpHistoryHeader) << '\n';
  for (const auto& r : rep.history) {
    if (ibp) {
      out << r.iter << ',' << format_double(r.marginal_error) << ',' << format_double(r.weight_change) << ','
          << format_double(r.primal_obj) << ',' << format_double(r.elapsed_secs) << ',' << r.method << '\n';
    } else {
      out << r.iter << ',' << format_double(r.kkt.primal_infeas) << ',' << format_double(r.kkt.nonneg_violation) << ','
          << format_double(r.kkt.dual_infeas) << ',' << format_double(r.kkt.complementarity) << ','
          << format_double(r.kkt.max_relative) << ',' << format_double(r.primal_obj) << ','
          << format_double(r.dual_obj) << ',' << format_double(r.elapsed_secs) << ',' << (r.restarted ? 1 : 0) << ','
          << r.method << '\n';
    }
  }
}

inline void write_barycenter_csv(std::ostream& out, const WbpInstance& inst, std::span<const double> x) {
  const std::size_t d = inst.dim(), m = inst.m();
  const std::size_t off = inst.layout().bary_offset();
  out << "index,weight" << (d > 0 ? "," + detail::coord_header(d) : "") << '\n';
  for (std::size_t i = 0; i < m; ++i) {
    out << i << ',' << format_double(x[off + i]);
    for (std::size_t k = 0; k < d; ++k) out << ',' << format_double(inst.barycenter_supports().coords[i * d + k]);
    out << '\n';
  }
}

inline json options_json(const SolverOptions& o) {
  return {{"sigma", o.sigma},
          {"gamma", o.gamma},
          {"max_iters", o.max_iters},
          {"kkt_tol", o.kkt_tol},
          {"check_every", o.check_every},
          {"time_limit_secs", o.time_limit_secs ? json(*o.time_limit_secs) : json(nullptr)},
          {"restart", o.restart.enabled}};
}

inline json options_json(const IbpOptions& o) {
  return {{"epsilon", o.epsilon},
          {"tol", o.tol},
          {"max_iters", o.max_iters},
          {"log_domain", o.log_domain},
          {"time_limit_secs", o.time_limit_secs ? json(*o.time_limit_secs) : json(nullptr)}};
}

/// Run summary. LP methods carry KKT components; IBP carries the marginal
/// error and last weight change instead.
inline json summary_json(const WbpInstance& inst, const SolveReport& rep, const json& options) {
  json j;
  j["schema_version"] = kSummaryVersion;
  j["method"] = to_string(rep.method);
  j["termination"] = to_string(rep.termination);
  j["iterations"] = rep.iterations;
  j["elapsed_secs"] = rep.elapsed_secs;
  j["primal_obj"] = rep.primal_obj;
  j["instance"] = {{"T", inst.T()}, {"m", inst.m()}, {"M", inst.layout().M()}, {"N", inst.layout().N()}};
  j["options"] = options;
  if (rep.method == Method::ibp) {
    const ConvergenceRecord last = rep.history.empty() ? ConvergenceRecord{} : rep.history.back();
    j["marginal_error"] = last.marginal_error;
    j["weight_change"] = last.weight_change;
  } else {
    j["dual_obj"] = rep.dual_obj;
    j["restarts"] = rep.restarts;
    j["kkt"] = {{"primal", rep.final_kkt.primal_infeas},
                {"nonneg", rep.final_kkt.nonneg_violation},
                {"dual", rep.final_kkt.dual_infeas},
                {"compl", rep.final_kkt.complementarity},
                {"max", rep.final_kkt.max_relative}};
    j["switch_iteration"] = rep.switch_iteration ? json(*rep.switch_iteration) : json(nullptr);
  }
  return j;
}

}  // namespace hprwbp
