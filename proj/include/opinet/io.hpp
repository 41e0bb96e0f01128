#pragma once

// File formats: network / multiplex / report documents (JSON), trajectory,
// stream, centrality and plot tables (CSV with a JSON sidecar). Reals are
// written with 17 significant digits so every table parses back bit-exactly.

#include "opinet/centrality.hpp"
#include "opinet/dynamics.hpp"
#include "opinet/identify/report.hpp"
#include "opinet/observe.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <tuple>

#ifndef OPINET_VERSION
#define OPINET_VERSION "0.0.0"
#endif

namespace opinet::io {

using nlohmann::json;
namespace fs = std::filesystem;

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Deterministic JSON text: sorted keys, reals at 17 significant digits,
// non-finite reals as null.
inline void write_json(const json& j, std::string& out, int indent, int depth) {
  const auto nl = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) { out += "{}"; return; }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        nl(depth + 1);
        out += json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        write_json(it.value(), out, indent, depth + 1);
      }
      nl(depth);
      out += '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) { out += "[]"; return; }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& e : j) flat = flat && !e.is_structured();
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += flat ? ", " : ",";
        if (!flat) nl(depth + 1);
        write_json(j[i], out, flat ? -1 : indent, depth + 1);
      }
      if (!flat) nl(depth);
      out += ']';
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? fmt17(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

inline std::string dump(const json& j, int indent = 2) {
  std::string s;
  write_json(j, s, indent, 0);
  s += '\n';
  return s;
}

// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Manifest {
  std::string artifact;
  std::string config_hash;
  std::optional<std::uint64_t> seed;

  json to_json() const {
    json j = {{"tool", "opinet"}, {"version", OPINET_VERSION}, {"artifact", artifact}};
    if (!config_hash.empty()) j["config_hash"] = config_hash;
    if (seed) j["seed"] = *seed;
    return j;
  }
};

inline void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(f), ErrorKind::config, "cannot open " + p.string() + " for writing");
  f << content;
  require(static_cast<bool>(f), ErrorKind::config, "failed writing " + p.string());
}

inline std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::config, "cannot open " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, what + ": " + e.what());
  }
}

inline json read_json(const fs::path& p) { return parse_json(read_file(p), p.string()); }

inline fs::path sidecar(const fs::path& csv) { return fs::path(csv.string() + ".meta.json"); }

// Rejects keys outside `allowed`.
inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require(j.is_object(), ErrorKind::config, where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    require(ok, ErrorKind::config, "unknown key '" + it.key() + "' in " + where);
  }
}

template <class T>
T get_as(const json& j, const char* key, const std::string& where) {
  require(j.contains(key), ErrorKind::config, where + " is missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::config, where + ": '" + key + "' has the wrong type");
  }
}

inline json vector_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vector vector_from(const json& a, const std::string& where) {
  require(a.is_array(), ErrorKind::config, where + " must be an array");
  Vector v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a[i].is_number(), ErrorKind::config, where + " must hold numbers");
    v(static_cast<Index>(i)) = a[i].get<double>();
  }
  return v;
}

inline json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
  return rows;
}

inline Matrix matrix_from(const json& a, const std::string& where) {
  require(a.is_array(), ErrorKind::config, where + " must be an array of rows");
  const Index r = static_cast<Index>(a.size());
  if (r == 0) return Matrix(0, 0);
  const Index c = static_cast<Index>(a[0].size());
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    const Vector row = vector_from(a[static_cast<std::size_t>(i)], where);
    require(row.size() == c, ErrorKind::config, where + " rows differ in length");
    m.row(i) = row.transpose();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Networks

inline json network_json(const InfluenceNetwork& net) {
  json e = json::array();
  for (const auto& ed : edges(net.W)) e.push_back(json::array({ed.i, ed.j, ed.w}));
  return {{"n", net.n()}, {"directed", net.directed}, {"lambda", vector_json(net.lambda)}, {"edges", e}};
}

inline InfluenceNetwork network_from(const json& j, const std::string& where = "network") {
  check_keys(j, {"n", "directed", "lambda", "edges", "manifest"}, where);
  const auto n = get_as<Index>(j, "n", where);
  require(n >= 1, ErrorKind::config, where + ": n must be >= 1");
  InfluenceNetwork net;
  net.directed = j.value("directed", true);
  net.lambda = vector_from(j.at("lambda"), where + ".lambda");
  require(net.lambda.size() == n, ErrorKind::config, where + ": lambda needs n entries");
  net.W = Matrix::Zero(n, n);
  const json& e = j.at("edges");
  require(e.is_array(), ErrorKind::config, where + ".edges must be an array");
  for (const auto& t : e) {
    require(t.is_array() && t.size() == 3 && t[0].is_number_integer() && t[1].is_number_integer() && t[2].is_number(),
            ErrorKind::config, where + ": each edge is [i, j, w]");
    const auto i = t[0].get<Index>(), k = t[1].get<Index>();
    require(i >= 0 && i < n && k >= 0 && k < n, ErrorKind::config, where + ": edge index out of range");
    require(net.W(i, k) == 0.0, ErrorKind::config, where + ": duplicate edge");
    net.W(i, k) = t[2].get<double>();
  }
  return net;
}

inline json multiplex_json(const MultiplexNetwork& mx) {
  json layers = json::array();
  for (const auto& l : mx.layers) layers.push_back(network_json(l));
  json j = {{"model_tag", to_string(mx.model_tag)}, {"layers", layers}};
  if (mx.base) j["base"] = network_json(*mx.base);
  return j;
}

inline MultiplexModel multiplex_model_from(const std::string& s) {
  if (s == "common_component") return MultiplexModel::common_component;
  if (s == "common_support") return MultiplexModel::common_support;
  if (s == "independent") return MultiplexModel::independent;
  throw Error(ErrorKind::config, "unknown multiplex model '" + s + "'");
}

inline MultiplexNetwork multiplex_from(const json& j) {
  check_keys(j, {"model_tag", "layers", "base", "manifest"}, "multiplex");
  MultiplexNetwork mx;
  mx.model_tag = multiplex_model_from(get_as<std::string>(j, "model_tag", "multiplex"));
  const json& ls = j.at("layers");
  require(ls.is_array() && !ls.empty(), ErrorKind::config, "multiplex.layers must be a non-empty array");
  for (std::size_t s = 0; s < ls.size(); ++s) mx.layers.push_back(network_from(ls[s], "layer " + std::to_string(s)));
  if (j.contains("base")) mx.base = network_from(j.at("base"), "base");
  for (const auto& l : mx.layers)
    require(l.n() == mx.layers.front().n(), ErrorKind::config, "multiplex layers differ in size");
  return mx;
}

inline bool is_multiplex_document(const json& j) { return j.is_object() && j.contains("layers"); }

inline void save_json(const fs::path& p, json doc, const Manifest& m) {
  doc["manifest"] = m.to_json();
  write_file(p, dump(doc));
}

// ---------------------------------------------------------------------------
// CSV tables

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_real(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  require(end && end != s.c_str() && *end == '\0', ErrorKind::config, where + ": not a number '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  require(end && end != s.c_str() && *end == '\0', ErrorKind::config, where + ": not an integer '" + s + "'");
  return v;
}

// Reads a CSV body after checking its header; returns the data rows.
inline std::vector<std::vector<std::string>> read_table(const fs::path& p, const std::string& header) {
  std::istringstream in(read_file(p));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::config, p.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == header, ErrorKind::config, p.string() + ": expected header '" + header + "'");
  const std::size_t cols = split_csv(header).size();
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = split_csv(line);
    require(f.size() == cols, ErrorKind::config, p.string() + ": row with wrong number of fields");
    rows.push_back(std::move(f));
  }
  return rows;
}

}  // namespace detail

inline json model_info_json(const ModelInfo& m) {
  json params = json::object();
  for (const auto& [k, v] : m.params) params[k] = v;
  json j = {{"kind", m.kind}, {"params", params}};
  if (m.seed) j["seed"] = *m.seed;
  return j;
}

inline void save_trajectory(const fs::path& p, const OpinionTrajectory& t, const Manifest& m) {
  std::string s = "k,agent,issue,value\n";
  for (std::size_t idx = 0; idx < t.X.size(); ++idx) {
    const auto& x = t.X[idx];
    const std::string k = std::to_string(t.steps[idx]);
    for (Index i = 0; i < x.rows(); ++i)
      for (Index l = 0; l < x.cols(); ++l)
        s += k + ',' + std::to_string(i) + ',' + std::to_string(l) + ',' + fmt17(x(i, l)) + '\n';
  }
  write_file(p, s);
  json meta = {{"model", model_info_json(t.model)}, {"manifest", m.to_json()}};
  if (t.converged_at) meta["converged_at"] = *t.converged_at;
  write_file(sidecar(p), dump(meta));
}

inline OpinionTrajectory load_trajectory(const fs::path& p) {
  const auto rows = detail::read_table(p, "k,agent,issue,value");
  require(!rows.empty(), ErrorKind::config, p.string() + " holds no states");
  Index n = 0, m = 0;
  std::map<long long, std::vector<std::tuple<Index, Index, double>>> by_k;
  for (const auto& r : rows) {
    const auto k = detail::parse_int(r[0], p.string());
    const auto i = static_cast<Index>(detail::parse_int(r[1], p.string()));
    const auto l = static_cast<Index>(detail::parse_int(r[2], p.string()));
    require(i >= 0 && l >= 0, ErrorKind::config, p.string() + ": negative index");
    n = std::max(n, i + 1);
    m = std::max(m, l + 1);
    by_k[k].emplace_back(i, l, detail::parse_real(r[3], p.string()));
  }
  OpinionTrajectory t;
  for (const auto& [k, entries] : by_k) {
    require(static_cast<Index>(entries.size()) == n * m, ErrorKind::config,
            p.string() + ": state at step " + std::to_string(k) + " is incomplete");
    Matrix x = Matrix::Constant(n, m, std::numeric_limits<double>::quiet_NaN());
    for (const auto& [i, l, v] : entries) x(i, l) = v;
    require(x.allFinite(), ErrorKind::config, p.string() + ": duplicate entry at step " + std::to_string(k));
    t.X.push_back(std::move(x));
    t.steps.push_back(k);
  }
  if (fs::exists(sidecar(p))) {
    const json meta = read_json(sidecar(p));
    if (meta.contains("model")) {
      t.model.kind = meta["model"].value("kind", "");
      if (meta["model"].contains("params"))
        for (auto it = meta["model"]["params"].begin(); it != meta["model"]["params"].end(); ++it)
          t.model.params.emplace_back(it.key(), it.value().get<double>());
      if (meta["model"].contains("seed")) t.model.seed = meta["model"]["seed"].get<std::uint64_t>();
    }
    if (meta.contains("converged_at")) t.converged_at = meta["converged_at"].get<std::int64_t>();
  }
  return t;
}

inline json sampling_json(const SamplingModel& m) {
  json j = {{"kind", to_string(m.kind)}};
  if (m.kind == SamplingKind::intermittent) j["rho"] = m.rho;
  if (m.kind == SamplingKind::independent) j["rho_agents"] = vector_json(m.rho_agents);
  return j;
}

inline SamplingModel sampling_from(const json& j) {
  check_keys(j, {"kind", "rho", "rho_agents"}, "sampling model");
  const auto kind = get_as<std::string>(j, "kind", "sampling model");
  if (kind == "full") return SamplingModel::full();
  if (kind == "intermittent") return SamplingModel::intermittent(get_as<double>(j, "rho", "sampling model"));
  if (kind == "independent") return SamplingModel::independent(vector_from(j.at("rho_agents"), "rho_agents"));
  throw Error(ErrorKind::config, "unknown sampling model '" + kind + "'");
}

// The sidecar may carry the initial state x(0), which gossip identification
// needs for b = beta (I - Lambda) x(0).
inline void save_stream(const fs::path& p, const ObservationStream& s, const Manifest& m,
                        const std::optional<Vector>& initial_state = std::nullopt) {
  std::string out = "k,agent,value\n";
  for (const auto& r : s.records) out += std::to_string(r.k) + ',' + std::to_string(r.agent) + ',' + fmt17(r.z) + '\n';
  write_file(p, out);
  json meta = {{"sampling", sampling_json(s.model)}, {"n", s.n}, {"horizon", s.horizon},
               {"first_step", s.first_step}, {"seed", s.seed}, {"manifest", m.to_json()}};
  if (initial_state) meta["initial_state"] = vector_json(*initial_state);
  write_file(sidecar(p), dump(meta));
}

struct LoadedStream {
  ObservationStream stream;
  std::optional<Vector> initial_state;
};

inline LoadedStream load_stream(const fs::path& p) {
  require(fs::exists(sidecar(p)), ErrorKind::config,
          "stream descriptor " + sidecar(p).string() + " is missing; it records the sampling model");
  const json meta = read_json(sidecar(p));
  LoadedStream out;
  auto& s = out.stream;
  s.model = sampling_from(meta.at("sampling"));
  s.n = get_as<Index>(meta, "n", "stream descriptor");
  s.horizon = get_as<std::int64_t>(meta, "horizon", "stream descriptor");
  s.first_step = meta.value("first_step", std::int64_t{0});
  s.seed = meta.value("seed", std::uint64_t{0});
  if (meta.contains("initial_state")) out.initial_state = vector_from(meta["initial_state"], "initial_state");
  for (const auto& r : detail::read_table(p, "k,agent,value")) {
    const ObservationRecord rec{detail::parse_int(r[0], p.string()),
                                static_cast<Index>(detail::parse_int(r[1], p.string())),
                                detail::parse_real(r[2], p.string())};
    require(rec.agent >= 0 && rec.agent < s.n, ErrorKind::config, p.string() + ": agent index out of range");
    s.records.push_back(rec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports and tables

inline json report_json(const EstimationReport& r) {
  json sup = json::array();
  for (const auto& [i, j] : r.support) sup.push_back(json::array({i, j}));
  json metrics = json::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = v;
  json j = {{"estimator", r.estimator}, {"n", r.n()}, {"W_hat", matrix_json(r.W_hat)}, {"support", sup},
            {"support_threshold", r.support_threshold}, {"metrics", metrics},
            {"solver_log", r.solver_log}, {"warnings", r.warnings}};
  if (r.Lambda_hat) j["Lambda_hat"] = vector_json(*r.Lambda_hat);
  if (r.Gamma_hat) j["Gamma_hat"] = matrix_json(*r.Gamma_hat);
  return j;
}

inline EstimationReport report_from(const json& j) {
  check_keys(j, {"estimator", "n", "W_hat", "Lambda_hat", "Gamma_hat", "support", "support_threshold", "metrics",
                 "solver_log", "warnings", "manifest", "layer"},
             "report");
  EstimationReport r;
  r.estimator = j.value("estimator", "");
  r.W_hat = matrix_from(j.at("W_hat"), "W_hat");
  if (j.contains("Lambda_hat")) r.Lambda_hat = vector_from(j["Lambda_hat"], "Lambda_hat");
  if (j.contains("Gamma_hat")) r.Gamma_hat = matrix_from(j["Gamma_hat"], "Gamma_hat");
  for (const auto& e : j.at("support")) r.support.insert({e.at(0).get<Index>(), e.at(1).get<Index>()});
  r.support_threshold = j.value("support_threshold", 0.0);
  if (j.contains("metrics"))
    for (auto it = j["metrics"].begin(); it != j["metrics"].end(); ++it) r.metrics[it.key()] = it.value().get<double>();
  if (j.contains("solver_log")) r.solver_log = j["solver_log"].get<std::vector<std::string>>();
  if (j.contains("warnings")) r.warnings = j["warnings"].get<std::vector<std::string>>();
  return r;
}

inline std::string centrality_csv(const CentralityVector& c) {
  std::string s = "agent,value\n";
  for (Index i = 0; i < c.values.size(); ++i) s += std::to_string(i) + ',' + fmt17(c.values(i)) + '\n';
  return s;
}

struct PlotPoint {
  double x, y;
  std::string series;
};

inline std::string plot_csv(const std::vector<PlotPoint>& pts) {
  std::string s = "x,y,series\n";
  for (const auto& p : pts) s += fmt17(p.x) + ',' + fmt17(p.y) + ',' + p.series + '\n';
  return s;
}

}  // namespace opinet::io
