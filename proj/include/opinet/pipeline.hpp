#pragma once

// Config-driven experiment runner: generate -> simulate -> observe ->
// identify -> evaluate -> report, plus parameter sweeps over such configs.

#include "opinet/identify.hpp"
#include "opinet/io.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace opinet::pipeline {

using io::json;
namespace fs = std::filesystem;

inline fs::path default_output_dir() {
  const char* env = std::getenv("OPINET_OUTPUT_DIR");
  return env && *env ? fs::path(env) : fs::path("opinet-out");
}

// Seed of stage `index` derived from the experiment seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) { return CounterRng(seed).split(index)(); }

// ---------------------------------------------------------------------------
// Config parsing helpers

namespace detail {

inline double num(const json& j, const char* key, double def) {
  if (!j.contains(key)) return def;
  require(j.at(key).is_number(), ErrorKind::config, std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

inline std::int64_t integer(const json& j, const char* key, std::int64_t def) {
  if (!j.contains(key)) return def;
  require(j.at(key).is_number_integer(), ErrorKind::config, std::string("'") + key + "' must be an integer");
  return j.at(key).get<std::int64_t>();
}

inline bool flag(const json& j, const char* key, bool def) {
  if (!j.contains(key)) return def;
  require(j.at(key).is_boolean(), ErrorKind::config, std::string("'") + key + "' must be true or false");
  return j.at(key).get<bool>();
}

inline std::string text(const json& j, const char* key, const std::string& def) {
  if (!j.contains(key)) return def;
  require(j.at(key).is_string(), ErrorKind::config, std::string("'") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

inline std::optional<double> opt_num(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return num(j, key, 0.0);
}

}  // namespace detail

inline GraphModel graph_model_from(const std::string& s) {
  if (s == "erdos_renyi") return GraphModel::erdos_renyi;
  if (s == "watts_strogatz") return GraphModel::watts_strogatz;
  if (s == "barabasi_albert") return GraphModel::barabasi_albert;
  if (s == "k_out") return GraphModel::k_out;
  throw Error(ErrorKind::config, "unknown graph model '" + s + "'");
}

inline WeightScheme weight_scheme_from(const std::string& s) {
  if (s == "equal") return WeightScheme::equal;
  if (s == "uniform") return WeightScheme::uniform;
  throw Error(ErrorKind::config, "unknown weight scheme '" + s + "'");
}

inline GeneratorSpec generator_spec_from(const json& j) {
  using namespace detail;
  GeneratorSpec g;
  g.model = graph_model_from(text(j, "model", "erdos_renyi"));
  g.p = num(j, "p", g.p);
  g.k = static_cast<int>(integer(j, "k", g.k));
  g.rewire = num(j, "rewire", g.rewire);
  g.m0 = static_cast<int>(integer(j, "m0", g.m0));
  g.out_degree = static_cast<int>(integer(j, "out_degree", g.out_degree));
  g.weights = weight_scheme_from(text(j, "weights", "uniform"));
  g.weight_lo = num(j, "weight_lo", g.weight_lo);
  g.lambda_lo = num(j, "lambda_lo", g.lambda_lo);
  g.lambda_hi = num(j, "lambda_hi", g.lambda_hi);
  return g;
}

// Allowed keys per stage type; everything else is rejected.
inline const std::map<std::string, std::vector<std::string>>& stage_keys() {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"generate",
       {"stage", "model", "n", "p", "k", "rewire", "m0", "out_degree", "weights", "weight_lo", "lambda_lo",
        "lambda_hi", "layers", "multiplex_model", "innovation_scale", "innovation_density"}},
      {"load", {"stage", "network"}},
      {"simulate", {"stage", "dynamics", "steps", "issues", "stride", "activation_size", "noise", "x0",
                    "stop_at_convergence"}},
      {"observe", {"stage", "sampling", "rho"}},
      {"identify", {"stage", "estimator", "eps", "nonneg", "known_lambda", "n_sigma", "max_lag", "burn_in",
                    "threshold", "threshold_ratio", "mode", "eta", "bayesian", "support_threshold"}},
      {"evaluate", {"stage"}},
      {"report", {"stage"}},
  };
  return keys;
}

struct ExperimentConfig {
  json raw;  // validated document
  std::uint64_t seed = 0;
  fs::path output_dir;
  bool emit_reports = true, emit_trajectories = true, emit_plot_data = true;
  std::vector<json> stages;
  json params = json::object();  // sweep coordinates, copied into metrics
  std::string hash;              // of the canonical document without output_dir
};

inline bool is_seed(const json& j) {
  return j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0);
}

inline std::string config_hash(json doc) {
  doc.erase("output_dir");
  return io::fnv1a_hex(io::dump(doc, -1));
}

inline ExperimentConfig parse_config(const json& doc, const fs::path& base_dir = {}) {
  io::check_keys(doc, {"seed", "output_dir", "emit", "stages", "params"}, "config");
  ExperimentConfig c;
  c.raw = doc;
  require(doc.contains("seed") && is_seed(doc["seed"]), ErrorKind::config,
          "config needs a nonnegative integer 'seed'");
  c.seed = doc["seed"].get<std::uint64_t>();
  c.output_dir = doc.contains("output_dir") ? fs::path(io::get_as<std::string>(doc, "output_dir", "config"))
                                            : default_output_dir();
  if (doc.contains("emit")) {
    const json& e = doc["emit"];
    io::check_keys(e, {"reports", "trajectories", "plot_data"}, "emit");
    c.emit_reports = detail::flag(e, "reports", true);
    c.emit_trajectories = detail::flag(e, "trajectories", true);
    c.emit_plot_data = detail::flag(e, "plot_data", true);
  }
  if (doc.contains("params")) c.params = doc["params"];
  require(doc.contains("stages") && doc["stages"].is_array() && !doc["stages"].empty(), ErrorKind::config,
          "config needs a non-empty 'stages' list");

  // Stages run in order; each may only consume what an earlier stage produced.
  bool network = false, traj = false, stream = false, report = false;
  for (std::size_t i = 0; i < doc["stages"].size(); ++i) {
    json st = doc["stages"][i];
    const std::string where = "stage " + std::to_string(i);
    require(st.is_object() && st.contains("stage") && st["stage"].is_string(), ErrorKind::config,
            where + " needs a 'stage' name");
    const std::string name = st["stage"].get<std::string>();
    const auto it = stage_keys().find(name);
    require(it != stage_keys().end(), ErrorKind::config, where + ": unknown stage '" + name + "'");
    for (auto k = st.begin(); k != st.end(); ++k)
      require(std::find(it->second.begin(), it->second.end(), k.key()) != it->second.end(), ErrorKind::config,
              "unknown key '" + k.key() + "' in " + where + " (" + name + ")");
    if (name == "generate") {
      require(st.contains("n"), ErrorKind::config, where + ": generate needs 'n'");
      network = true;
    } else if (name == "load") {
      fs::path p = io::get_as<std::string>(st, "network", where);
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      require(fs::exists(p), ErrorKind::config, where + ": network file " + p.string() + " does not exist");
      st["network"] = p.string();
      network = true;
    } else if (name == "simulate") {
      require(network, ErrorKind::config, where + ": simulate needs a network from an earlier stage");
      traj = true;
    } else if (name == "observe") {
      require(traj, ErrorKind::config, where + ": observe needs a trajectory from an earlier stage");
      stream = true;
    } else if (name == "identify") {
      require(traj || stream, ErrorKind::config, where + ": identify needs data from an earlier stage");
      report = true;
    } else if (name == "evaluate") {
      require(report && network, ErrorKind::config, where + ": evaluate needs an identify stage and a network");
    } else if (name == "report") {
      require(network, ErrorKind::config, where + ": report needs earlier results");
    }
    c.stages.push_back(st);
  }
  c.hash = config_hash(doc);
  return c;
}

inline ExperimentConfig load_config(const fs::path& p) {
  return parse_config(io::read_json(p), p.has_parent_path() ? p.parent_path() : fs::path{});
}

// ---------------------------------------------------------------------------
// Execution

struct RunState {
  std::optional<InfluenceNetwork> net;
  std::optional<MultiplexNetwork> mx;
  std::vector<OpinionTrajectory> trajs;  // one per layer (a single entry for plain networks)
  std::vector<ObservationStream> streams;
  Matrix u;          // multiplex anchors, one column per layer
  double beta = 0.0; // gossip activation ratio; 0 for synchronous models
  std::string dynamics;
  std::vector<EstimationReport> reports;
  std::map<std::string, double> metrics;
};

struct RunResult {
  std::vector<fs::path> artifacts;
  std::map<std::string, double> metrics;
};

class Runner {
 public:
  explicit Runner(ExperimentConfig cfg) : cfg_(std::move(cfg)) {}

  RunResult run() {
    fs::create_directories(cfg_.output_dir);
    for (std::size_t i = 0; i < cfg_.stages.size(); ++i) {
      const json& st = cfg_.stages[i];
      const std::string name = st["stage"].get<std::string>();
      try {
        const std::uint64_t seed = derive_seed(cfg_.seed, i);
        if (name == "generate") generate(st, seed);
        else if (name == "load") load(st);
        else if (name == "simulate") simulate(st, seed);
        else if (name == "observe") observe(st, seed);
        else if (name == "identify") identify(st);
        else if (name == "evaluate") evaluate();
        else if (name == "report") report();
      } catch (const Error& e) {
        std::string msg = e.what();
        const std::string prefix = std::string(to_string(e.kind())) + " error: ";
        if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
        throw Error(e.kind(), "stage " + std::to_string(i) + " (" + name + ") failed: " + msg);
      }
    }
    write_manifest();
    return {artifacts_, st_.metrics};
  }

  const RunState& state() const { return st_; }

 private:
  io::Manifest manifest(const std::string& artifact) const { return {artifact, cfg_.hash, cfg_.seed}; }

  void emit(const std::string& name, const std::string& content) {
    const fs::path p = cfg_.output_dir / name;
    io::write_file(p, content);
    artifacts_.push_back(p);
  }

  void emit_json(const std::string& name, json doc) {
    doc["manifest"] = manifest(name).to_json();
    emit(name, io::dump(doc));
  }

  void emit_with_sidecar(const std::string& name) {
    artifacts_.push_back(cfg_.output_dir / name);
    artifacts_.push_back(io::sidecar(cfg_.output_dir / name));
  }

  std::string layer_name(const std::string& stem, std::size_t s, const std::string& ext) const {
    return st_.mx ? stem + "_layer" + std::to_string(s) + ext : stem + ext;
  }

  std::vector<InfluenceNetwork> layers() const {
    if (st_.mx) return st_.mx->layers;
    return {*st_.net};
  }

  void generate(const json& st, std::uint64_t seed) {
    using namespace detail;
    const GeneratorSpec g = generator_spec_from(st);
    const Index n = static_cast<Index>(integer(st, "n", 0));
    const auto n_layers = integer(st, "layers", 1);
    require(n_layers >= 1, ErrorKind::config, "layers must be >= 1");
    if (n_layers == 1 && !st.contains("multiplex_model")) {
      st_.net = generate_network(g, n, seed);
      emit_json("network.json", io::network_json(*st_.net));
      return;
    }
    InnovationSpec innov;
    innov.scale = num(st, "innovation_scale", innov.scale);
    innov.density = num(st, "innovation_density", innov.density);
    const auto tag = io::multiplex_model_from(text(st, "multiplex_model", "common_support"));
    st_.mx = build_multiplex(tag, g, innov, n, static_cast<std::size_t>(n_layers), seed);
    st_.net = st_.mx->layers.front();
    emit_json("multiplex.json", io::multiplex_json(*st_.mx));
  }

  void load(const json& st) {
    const json doc = io::read_json(st["network"].get<std::string>());
    if (io::is_multiplex_document(doc)) {
      st_.mx = io::multiplex_from(doc);
      st_.net = st_.mx->layers.front();
    } else {
      st_.net = io::network_from(doc);
    }
  }

  static Matrix initial_state(const std::string& kind, Index n, Index m, std::uint64_t seed) {
    CounterRng rng(seed);
    Matrix x(n, m);
    if (kind == "uniform") {
      for (Index i = 0; i < n; ++i)
        for (Index l = 0; l < m; ++l) x(i, l) = rng.uniform();
    } else if (kind == "gaussian") {
      std::normal_distribution<double> nd;
      for (Index i = 0; i < n; ++i)
        for (Index l = 0; l < m; ++l) x(i, l) = nd(rng);
    } else {
      throw Error(ErrorKind::config, "x0 must be 'uniform' or 'gaussian'");
    }
    return x;
  }

  void simulate(const json& st, std::uint64_t seed) {
    using namespace detail;
    st_.dynamics = text(st, "dynamics", "fj");
    const auto steps = integer(st, "steps", 1000);
    const auto issues = static_cast<Index>(integer(st, "issues", 1));
    require(issues >= 1, ErrorKind::config, "issues must be >= 1");
    SimOptions so;
    so.stride = integer(st, "stride", 1);
    so.stop_at_convergence = flag(st, "stop_at_convergence", false);
    const std::string x0k = text(st, "x0", "uniform");
    const Index n = st_.net->n();
    st_.trajs.clear();
    if (st_.dynamics == "fj" || st_.dynamics == "degroot") {
      require(!st_.mx, ErrorKind::config, "use dynamics 'multiplex' for multiplex networks");
      const Matrix x0 = initial_state(x0k, n, issues, seed);
      st_.trajs.push_back(st_.dynamics == "fj" ? simulate_fj(*st_.net, x0, steps, so)
                                               : simulate_degroot(st_.net->W, x0, steps, so));
    } else if (st_.dynamics == "gossip") {
      require(!st_.mx, ErrorKind::config, "gossip runs on a single network");
      require(issues == 1, ErrorKind::config, "gossip dynamics carry a single issue");
      GossipParams p;
      p.activation_size = static_cast<Index>(integer(st, "activation_size", 1));
      p.seed = CounterRng(seed).split(1)();
      st_.beta = p.beta(n);
      st_.trajs.push_back(simulate_gossip_fj(*st_.net, initial_state(x0k, n, 1, seed).col(0), p, steps, so));
    } else if (st_.dynamics == "multiplex") {
      require(st_.mx.has_value(), ErrorKind::config, "multiplex dynamics need a multiplex network");
      st_.u = initial_state(x0k, n, static_cast<Index>(st_.mx->layers.size()), seed);
      const Matrix q = num(st, "noise", 0.01) * Matrix::Identity(n, n);
      st_.trajs = simulate_multiplex_fj(*st_.mx, st_.u, q, steps, CounterRng(seed).split(1)(), so);
    } else {
      throw Error(ErrorKind::config, "unknown dynamics '" + st_.dynamics + "'");
    }
    if (cfg_.emit_trajectories)
      for (std::size_t s = 0; s < st_.trajs.size(); ++s) {
        const std::string name = layer_name("trajectory", s, ".csv");
        io::save_trajectory(cfg_.output_dir / name, st_.trajs[s], manifest(name));
        emit_with_sidecar(name);
      }
  }

  void observe(const json& st, std::uint64_t seed) {
    const std::string kind = detail::text(st, "sampling", "full");
    const Index n = st_.net->n();
    SamplingModel m;
    if (kind == "full") {
      m = SamplingModel::full();
    } else if (kind == "intermittent") {
      m = SamplingModel::intermittent(detail::num(st, "rho", 1.0));
    } else if (kind == "independent") {
      if (st.contains("rho") && st["rho"].is_array())
        m = SamplingModel::independent(io::vector_from(st["rho"], "rho"));
      else
        m = SamplingModel::homogeneous(n, detail::num(st, "rho", 1.0));
    } else {
      throw Error(ErrorKind::config, "unknown sampling model '" + kind + "'");
    }
    st_.streams.clear();
    for (std::size_t s = 0; s < st_.trajs.size(); ++s) {
      st_.streams.push_back(sample_observations(st_.trajs[s], m, CounterRng(seed).split(s)()));
      if (cfg_.emit_trajectories) {
        const std::string name = layer_name("stream", s, ".csv");
        io::save_stream(cfg_.output_dir / name, st_.streams.back(), manifest(name),
                        Vector(st_.trajs[s].initial().col(0)));
        emit_with_sidecar(name);
      }
    }
  }

  std::vector<ObservationStream> streams_or_full() const {
    if (!st_.streams.empty()) return st_.streams;
    std::vector<ObservationStream> out;
    for (const auto& t : st_.trajs) out.push_back(sample_observations(t, SamplingModel::full(), 0));
    return out;
  }

  void identify(const json& st) {
    using namespace detail;
    const std::string est = text(st, "estimator", "infinite_horizon");
    HorizonOptions ho;
    ho.eps = num(st, "eps", 0.0);
    ho.nonneg = flag(st, "nonneg", false);
    ho.support_threshold = num(st, "support_threshold", ho.support_threshold);
    MomentOptions mo;
    mo.n_sigma = static_cast<std::size_t>(integer(st, "n_sigma", 5));
    mo.max_lag = static_cast<std::size_t>(integer(st, "max_lag", 0));
    mo.burn_in = integer(st, "burn_in", 0);
    st_.reports.clear();
    require(!st_.trajs.empty() || est == "yule_walker" || est == "multiplex", ErrorKind::config,
            est + " needs a simulated trajectory");
    if (est == "finite_horizon") {
      const bool known = flag(st, "known_lambda", true);
      st_.reports.push_back(identify_finite_horizon(st_.trajs.front(),
                                                    known ? std::optional<Vector>(st_.net->lambda) : std::nullopt, ho));
    } else if (est == "infinite_horizon") {
      const auto& t = st_.trajs.front();
      st_.reports.push_back(identify_infinite_horizon(t.initial(), t.final_state(), st_.net->lambda, ho));
    } else if (est == "unknown_lambda") {
      const auto& t = st_.trajs.front();
      st_.reports.push_back(identify_unknown_lambda(t.initial(), t.final_state(), ho));
    } else if (est == "yule_walker") {
      require(st_.dynamics == "gossip", ErrorKind::config, "yule_walker expects gossip dynamics");
      const auto s = streams_or_full().front();
      const auto me = estimate_cross_correlations(s, mo);
      const Vector x0 = st_.trajs.front().initial().col(0);
      const Vector b = st_.beta * (Vector::Ones(x0.size()) - st_.net->lambda).cwiseProduct(x0);
      const std::string mode = text(st, "mode", "dense");
      require(mode == "dense" || mode == "sparse", ErrorKind::config, "mode must be dense or sparse");
      const auto g = estimate_gamma(me, b, mode == "dense" ? GammaMode::dense : GammaMode::sparse, num(st, "eta", 0.0));
      RecoveryOptions ro;
      ro.threshold = opt_num(st, "threshold");
      ro.threshold_ratio = num(st, "threshold_ratio", ro.threshold_ratio);
      auto rep = recover_topology_and_w(g.Gamma, st_.net->lambda, st_.beta, ro);
      rep.warnings.insert(rep.warnings.end(), g.warnings.begin(), g.warnings.end());
      rep.solver_log.insert(rep.solver_log.begin(), g.log.begin(), g.log.end());
      st_.reports.push_back(std::move(rep));
    } else if (est == "multiplex") {
      require(st_.mx.has_value() && st_.dynamics == "multiplex", ErrorKind::config,
              "multiplex estimation needs multiplex dynamics");
      MultiplexOptions opt;
      opt.moments = mo;
      opt.bayesian = flag(st, "bayesian", true);
      opt.threshold = opt_num(st, "threshold");
      opt.threshold_ratio = num(st, "threshold_ratio", opt.threshold_ratio);
      std::vector<Vector> lambdas;
      for (const auto& l : st_.mx->layers) lambdas.push_back(l.lambda);
      st_.reports = identify_multiplex(streams_or_full(), st_.mx->model_tag, lambdas, st_.u, opt);
    } else {
      throw Error(ErrorKind::config, "unknown estimator '" + est + "'");
    }
    write_reports();
  }

  void write_reports() {
    if (!cfg_.emit_reports) return;
    for (std::size_t s = 0; s < st_.reports.size(); ++s) {
      json doc = io::report_json(st_.reports[s]);
      if (st_.mx) doc["layer"] = s;
      emit_json(layer_name("report", s, ".json"), doc);
    }
  }

  void evaluate() {
    const auto truth = layers();
    require(truth.size() == st_.reports.size(), ErrorKind::config, "number of reports does not match the layers");
    st_.metrics.clear();
    for (std::size_t s = 0; s < st_.reports.size(); ++s) {
      const auto m = evaluate_estimate(truth[s].W, st_.reports[s]);
      for (const auto& [k, v] : m) {
        st_.metrics[k] += v / static_cast<double>(st_.reports.size());
        if (st_.mx) st_.metrics["layer" + std::to_string(s) + "." + k] = v;
      }
    }
    write_reports();
    json metrics = json::object();
    for (const auto& [k, v] : st_.metrics) metrics[k] = v;
    emit_json("metrics.json", {{"metrics", metrics}, {"params", cfg_.params}});
  }

  void report() {
    std::string summary = "metric,value\n";
    for (const auto& [k, v] : st_.metrics) summary += k + ',' + io::fmt17(v) + '\n';
    emit("summary.csv", summary);
    if (!cfg_.emit_plot_data || st_.reports.empty()) return;
    // True vs estimated weight for every entry in either support.
    std::vector<io::PlotPoint> pts;
    const auto truth = layers();
    for (std::size_t s = 0; s < st_.reports.size() && s < truth.size(); ++s) {
      const std::string series = st_.mx ? "layer" + std::to_string(s) : "W";
      const Matrix& w = truth[s].W;
      const Matrix& wh = st_.reports[s].W_hat;
      for (Index i = 0; i < w.rows(); ++i)
        for (Index j = 0; j < w.cols(); ++j)
          if (is_edge(w(i, j)) || is_edge(wh(i, j))) pts.push_back({w(i, j), wh(i, j), series});
    }
    emit("plot.csv", io::plot_csv(pts));
  }

  void write_manifest() {
    json files = json::array();
    std::vector<fs::path> sorted = artifacts_;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (const auto& p : sorted)
      files.push_back({{"file", fs::relative(p, cfg_.output_dir).generic_string()},
                       {"fnv1a", io::fnv1a_hex(io::read_file(p))}});
    json doc = {{"config", cfg_.raw}, {"files", files}, {"manifest", manifest("manifest.json").to_json()}};
    doc["config"].erase("output_dir");
    io::write_file(cfg_.output_dir / "manifest.json", io::dump(doc));
    artifacts_.push_back(cfg_.output_dir / "manifest.json");
  }

  ExperimentConfig cfg_;
  RunState st_;
  std::vector<fs::path> artifacts_;
};

inline RunResult run_pipeline(const ExperimentConfig& cfg) { return Runner(cfg).run(); }

// ---------------------------------------------------------------------------
// Sweeps: a base pipeline evaluated over a Cartesian grid of stage parameters.
//
// {"seed": 1, "output_dir": "...", "repeats": 3, "pipeline": {"stages": [...]},
//  "grid": {"simulate.issues": [5, 10, 20]}, "plot": {"x": "simulate.issues", "y": "support_f1"}}

struct SweepPoint {
  std::size_t point = 0, repeat = 0;
  std::uint64_t seed = 0;
  json coords;
  std::map<std::string, double> metrics;
  std::string error;
};

struct SweepResult {
  std::vector<SweepPoint> points;  // sorted by (grid point, repeat)
  std::vector<fs::path> artifacts;
};

inline void set_grid_value(json& stages, const std::string& key, const json& value) {
  const auto dot = key.find('.');
  require(dot != std::string::npos, ErrorKind::config, "grid key '" + key + "' must look like stage.parameter");
  const std::string stage = key.substr(0, dot), param = key.substr(dot + 1);
  for (auto& st : stages) {
    if (st.value("stage", "") == stage) {
      st[param] = value;
      return;
    }
  }
  char* end = nullptr;
  const long idx = std::strtol(stage.c_str(), &end, 10);
  require(end && *end == '\0' && idx >= 0 && static_cast<std::size_t>(idx) < stages.size(), ErrorKind::config,
          "grid key '" + key + "' names no stage");
  stages[static_cast<std::size_t>(idx)][param] = value;
}

inline SweepResult run_sweep(const json& doc, unsigned jobs, const fs::path& base_dir = {}) {
  io::check_keys(doc, {"seed", "output_dir", "repeats", "pipeline", "grid", "plot"}, "sweep");
  require(doc.contains("seed") && is_seed(doc["seed"]), ErrorKind::config, "sweep needs a 'seed'");
  const auto seed = doc["seed"].get<std::uint64_t>();
  const fs::path out = doc.contains("output_dir") ? fs::path(doc["output_dir"].get<std::string>()) : default_output_dir();
  const auto repeats = static_cast<std::size_t>(detail::integer(doc, "repeats", 1));
  require(repeats >= 1, ErrorKind::config, "repeats must be >= 1");
  require(doc.contains("pipeline") && doc["pipeline"].is_object(), ErrorKind::config, "sweep needs a 'pipeline'");
  io::check_keys(doc["pipeline"], {"stages", "emit"}, "sweep pipeline");
  const json grid = doc.value("grid", json::object());
  require(grid.is_object(), ErrorKind::config, "grid must map stage.parameter keys to value lists");

  std::vector<std::pair<std::string, json>> axes;
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    require(it.value().is_array() && !it.value().empty(), ErrorKind::config, "grid axis '" + it.key() + "' is empty");
    axes.emplace_back(it.key(), it.value());
  }
  std::size_t n_points = 1;
  for (const auto& a : axes) n_points *= a.second.size();

  // Validate every point before running anything.
  std::vector<ExperimentConfig> cfgs;
  std::vector<SweepPoint> points;
  for (std::size_t p = 0; p < n_points; ++p) {
    json coords = json::object();
    json pipe = doc["pipeline"];
    std::size_t rem = p;
    for (std::size_t a = axes.size(); a-- > 0;) {
      const auto& vals = axes[a].second;
      const json& v = vals[rem % vals.size()];
      rem /= vals.size();
      coords[axes[a].first] = v;
      set_grid_value(pipe["stages"], axes[a].first, v);
    }
    for (std::size_t r = 0; r < repeats; ++r) {
      char dir[64];
      std::snprintf(dir, sizeof dir, "p%04zu_r%02zu", p, r);
      json c = pipe;
      c["seed"] = CounterRng(seed).split(p).split(r)();
      c["output_dir"] = (out / "points" / dir).string();
      c["params"] = coords;
      cfgs.push_back(parse_config(c, base_dir));
      points.push_back({p, r, cfgs.back().seed, coords, {}, {}});
    }
  }

  std::atomic<std::size_t> next{0};
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cfgs.size())));
  auto work = [&] {
    for (std::size_t t = next++; t < cfgs.size(); t = next++) {
      try {
        points[t].metrics = run_pipeline(cfgs[t]).metrics;
      } catch (const std::exception& e) {
        points[t].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  SweepResult res;
  res.points = points;
  std::set<std::string> metric_keys;
  for (const auto& p : points)
    for (const auto& [k, v] : p.metrics) metric_keys.insert(k);
  std::string csv = "point,repeat,seed";
  for (const auto& a : axes) csv += ',' + a.first;
  for (const auto& k : metric_keys) csv += ',' + k;
  csv += ",error\n";
  for (const auto& p : points) {
    csv += std::to_string(p.point) + ',' + std::to_string(p.repeat) + ',' + std::to_string(p.seed);
    for (const auto& a : axes) {
      const json& v = p.coords[a.first];
      csv += ',' + (v.is_string() ? v.get<std::string>() : io::dump(v, -1).substr(0, io::dump(v, -1).size() - 1));
    }
    for (const auto& k : metric_keys) {
      const auto it = p.metrics.find(k);
      csv += ',' + (it == p.metrics.end() ? std::string() : io::fmt17(it->second));
    }
    std::string err = p.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    csv += ',' + err + '\n';
  }
  io::write_file(out / "sweep.csv", csv);
  res.artifacts.push_back(out / "sweep.csv");

  if (doc.contains("plot")) {
    const json& pl = doc["plot"];
    io::check_keys(pl, {"x", "y", "series"}, "plot");
    const auto xk = io::get_as<std::string>(pl, "x", "plot"), yk = io::get_as<std::string>(pl, "y", "plot");
    const std::string sk = pl.value("series", "");
    // Median over repeats of metric y at each grid point.
    std::vector<io::PlotPoint> pts;
    for (std::size_t p = 0; p < n_points; ++p) {
      std::vector<double> ys;
      const SweepPoint* first = nullptr;
      for (const auto& sp : points)
        if (sp.point == p) {
          if (!first) first = &sp;
          const auto it = sp.metrics.find(yk);
          if (it != sp.metrics.end()) ys.push_back(it->second);
        }
      if (ys.empty() || !first) continue;
      std::sort(ys.begin(), ys.end());
      const double med = ys.size() % 2 ? ys[ys.size() / 2] : 0.5 * (ys[ys.size() / 2 - 1] + ys[ys.size() / 2]);
      require(first->coords.contains(xk) && first->coords[xk].is_number(), ErrorKind::config,
              "plot x '" + xk + "' must be a numeric grid axis");
      std::string series = yk;
      if (!sk.empty() && first->coords.contains(sk))
        series = first->coords[sk].is_string() ? first->coords[sk].get<std::string>() : io::dump(first->coords[sk], -1);
      while (!series.empty() && series.back() == '\n') series.pop_back();
      pts.push_back({first->coords[xk].get<double>(), med, series});
    }
    io::write_file(out / "plot.csv", io::plot_csv(pts));
    res.artifacts.push_back(out / "plot.csv");
  }
  return res;
}

}  // namespace opinet::pipeline
