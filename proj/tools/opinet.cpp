// opinet: command-line driver for network generation, simulation, sampling,
// identification, evaluation, sweeps and config-driven experiment runs.

#include "opinet/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace opinet;
using io::json;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string output_dir;
  bool quiet = false;

  fs::path out_path(const std::string& explicit_out, const std::string& default_name) const {
    if (!explicit_out.empty()) return explicit_out;
    return (output_dir.empty() ? pipeline::default_output_dir() : fs::path(output_dir)) / default_name;
  }
};

json provenance() {
  return {{"tool", "opinet"},
          {"version", OPINET_VERSION},
          {"compiler", __VERSION__},
          {"cxx_standard", static_cast<long>(__cplusplus)},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION}};
}

// Manifest of a file written by a single subcommand: the hash covers the
// command name and its parameters, not the output location.
io::Manifest manifest(const std::string& artifact, const json& params, std::optional<std::uint64_t> seed) {
  return {artifact, io::fnv1a_hex(io::dump(params, -1)), seed};
}

void say(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cout << msg << '\n';
}

InfluenceNetwork read_network(const std::string& path) {
  const json doc = io::read_json(path);
  if (io::is_multiplex_document(doc)) {
    const auto mx = io::multiplex_from(doc);
    return mx.layers.front();
  }
  return io::network_from(doc);
}

void print_warnings(const EstimationReport& r) {
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string model = "erdos_renyi", weights = "uniform", multiplex_model = "common_support", out;
  long n = 20;
  std::uint64_t seed = 0;
  GeneratorSpec spec;
  std::size_t layers = 1;
  InnovationSpec innov;
};

void setup_generate(CLI::App& app, GenerateArgs& a, const Globals& g) {
  auto* c = app.add_subcommand("generate", "Generate a random influence network or multiplex");
  c->add_option("--model", a.model, "Graph model")
      ->check(CLI::IsMember({"erdos_renyi", "watts_strogatz", "barabasi_albert", "k_out"}))
      ->capture_default_str();
  c->add_option("--n", a.n, "Number of agents")->required();
  c->add_option("--seed", a.seed, "Random seed")->capture_default_str();
  c->add_option("--p", a.spec.p, "Erdos-Renyi edge probability")->capture_default_str();
  c->add_option("--k", a.spec.k, "Watts-Strogatz ring degree")->capture_default_str();
  c->add_option("--rewire", a.spec.rewire, "Watts-Strogatz rewiring probability")->capture_default_str();
  c->add_option("--m0", a.spec.m0, "Barabasi-Albert edges per new node")->capture_default_str();
  c->add_option("--out-degree", a.spec.out_degree, "k-out influencers per agent")->capture_default_str();
  c->add_option("--weights", a.weights, "Weight scheme")->check(CLI::IsMember({"equal", "uniform"}))->capture_default_str();
  c->add_option("--weight-lo", a.spec.weight_lo, "Lower end of uniform raw weights")->capture_default_str();
  c->add_option("--lambda-lo", a.spec.lambda_lo, "Smallest susceptibility")->capture_default_str();
  c->add_option("--lambda-hi", a.spec.lambda_hi, "Largest susceptibility")->capture_default_str();
  c->add_option("--layers", a.layers, "Number of multiplex layers (1: single network)")->capture_default_str();
  c->add_option("--multiplex-model", a.multiplex_model, "Layer correlation model")
      ->check(CLI::IsMember({"common_component", "common_support", "independent"}))
      ->capture_default_str();
  c->add_option("--innovation-scale", a.innov.scale, "Per-layer innovation magnitude")->capture_default_str();
  c->add_option("--innovation-density", a.innov.density, "Per-layer innovation edge density")->capture_default_str();
  c->add_option("--out", a.out, "Output file (default <output-dir>/network.json)");
  c->callback([&a, &g] {
    a.spec.model = pipeline::graph_model_from(a.model);
    a.spec.weights = pipeline::weight_scheme_from(a.weights);
    const json params = {{"command", "generate"}, {"model", a.model}, {"n", a.n}, {"seed", a.seed},
                         {"p", a.spec.p}, {"k", a.spec.k}, {"rewire", a.spec.rewire}, {"m0", a.spec.m0},
                         {"out_degree", a.spec.out_degree}, {"weights", a.weights}, {"weight_lo", a.spec.weight_lo},
                         {"lambda_lo", a.spec.lambda_lo}, {"lambda_hi", a.spec.lambda_hi}, {"layers", a.layers},
                         {"multiplex_model", a.multiplex_model}};
    require(a.n >= 1, ErrorKind::config, "--n must be >= 1");
    require(a.layers >= 1, ErrorKind::config, "--layers must be >= 1");
    if (a.layers == 1) {
      const auto p = g.out_path(a.out, "network.json");
      io::save_json(p, io::network_json(generate_network(a.spec, a.n, a.seed)), manifest("network", params, a.seed));
      say(g, p.string());
    } else {
      const auto p = g.out_path(a.out, "multiplex.json");
      const auto mx = build_multiplex(io::multiplex_model_from(a.multiplex_model), a.spec, a.innov, a.n, a.layers, a.seed);
      io::save_json(p, io::multiplex_json(mx), manifest("multiplex", params, a.seed));
      say(g, p.string());
    }
  });
}

// ---------------------------------------------------------------------------

struct CentralityArgs {
  std::string network, kind = "friedkin", out;
  bool weighted = false;
  double damping = 0.15;
  std::optional<double> alpha;
};

void setup_centrality(CLI::App& app, CentralityArgs& a, const Globals& g) {
  auto* c = app.add_subcommand("centrality", "Compute a centrality index for a network");
  c->add_option("--network", a.network, "Network file")->required()->check(CLI::ExistingFile);
  c->add_option("--kind", a.kind, "Index")
      ->check(CLI::IsMember({"in_degree", "out_degree", "closeness", "betweenness", "eigenvector", "pagerank",
                             "friedkin"}))
      ->capture_default_str();
  c->add_flag("--weighted", a.weighted, "Use edge weights (degree, closeness, betweenness)");
  c->add_option("--damping", a.damping, "PageRank teleport probability m")->capture_default_str();
  c->add_option("--alpha", a.alpha, "Friedkin centrality with Lambda = alpha I");
  c->add_option("--out", a.out, "Output CSV (default <output-dir>/centrality_<kind>.csv)");
  c->callback([&a, &g] {
    const auto net = read_network(a.network);
    CentralityVector v;
    if (a.kind == "in_degree") v = degree_centrality(net, Direction::in, a.weighted);
    else if (a.kind == "out_degree") v = degree_centrality(net, Direction::out, a.weighted);
    else if (a.kind == "closeness") v = closeness_centrality(net, a.weighted);
    else if (a.kind == "betweenness") v = betweenness_centrality(net, a.weighted);
    else if (a.kind == "eigenvector") v = eigenvector_centrality(net.W.transpose());
    else if (a.kind == "pagerank") v = pagerank(net.W, a.damping, true);
    else v = friedkin_centrality(net, a.alpha);
    for (const auto& w : v.warnings) std::cerr << "warning: " << w << '\n';
    const auto p = g.out_path(a.out, "centrality_" + a.kind + ".csv");
    io::write_file(p, io::centrality_csv(v));
    json params = {{"command", "centrality"}, {"network", a.network}, {"kind", a.kind}, {"weighted", a.weighted},
                   {"damping", a.damping}};
    if (a.alpha) params["alpha"] = *a.alpha;
    io::write_file(io::sidecar(p), io::dump({{"kind", a.kind}, {"manifest", manifest("centrality", params, {}).to_json()}}));
    say(g, p.string());
  });
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string network, dynamics = "fj", x0 = "uniform", out;
  std::int64_t steps = 1000, stride = 1;
  long issues = 1, activation_size = 1;
  double noise = 0.01;
  std::uint64_t seed = 0;
  bool stop = false;
};

Matrix initial_state(const std::string& kind, Index n, Index m, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix x(n, m);
  if (kind == "uniform") {
    for (Index i = 0; i < n; ++i)
      for (Index l = 0; l < m; ++l) x(i, l) = rng.uniform();
  } else {
    std::normal_distribution<double> nd;
    for (Index i = 0; i < n; ++i)
      for (Index l = 0; l < m; ++l) x(i, l) = nd(rng);
  }
  return x;
}

void setup_simulate(CLI::App& app, SimulateArgs& a, const Globals& g) {
  auto* c = app.add_subcommand("simulate", "Simulate opinion dynamics on a network");
  c->add_option("--network", a.network, "Network or multiplex file")->required()->check(CLI::ExistingFile);
  c->add_option("--model,--dynamics", a.dynamics, "Dynamics")
      ->check(CLI::IsMember({"fj", "degroot", "gossip", "multiplex"}))
      ->capture_default_str();
  c->add_option("--steps", a.steps, "Number of steps")->capture_default_str();
  c->add_option("--issues", a.issues, "Independent issues (columns of X)")->capture_default_str();
  c->add_option("--stride", a.stride, "Store every stride-th state")->capture_default_str();
  c->add_option("--x0", a.x0, "Initial opinions")->check(CLI::IsMember({"uniform", "gaussian"}))->capture_default_str();
  c->add_option("--activation-size", a.activation_size, "Gossip agents activated per step")->capture_default_str();
  c->add_option("--noise", a.noise, "Multiplex noise variance per agent")->capture_default_str();
  c->add_option("--seed", a.seed, "Random seed")->capture_default_str();
  c->add_flag("--stop-at-convergence", a.stop, "End once the state stops changing");
  c->add_option("--out", a.out, "Output CSV (default <output-dir>/trajectory.csv)");
  c->callback([&a, &g] {
    const json params = {{"command", "simulate"}, {"network", a.network}, {"dynamics", a.dynamics},
                         {"steps", a.steps}, {"issues", a.issues}, {"stride", a.stride}, {"x0", a.x0},
                         {"activation_size", a.activation_size}, {"noise", a.noise}, {"seed", a.seed}};
    SimOptions so;
    so.stride = a.stride;
    so.stop_at_convergence = a.stop;
    const json doc = io::read_json(a.network);
    std::vector<OpinionTrajectory> trajs;
    if (a.dynamics == "multiplex") {
      require(io::is_multiplex_document(doc), ErrorKind::config, "multiplex dynamics need a multiplex file");
      const auto mx = io::multiplex_from(doc);
      const Index n = mx.n();
      const Matrix u = initial_state(a.x0, n, static_cast<Index>(mx.layers.size()), a.seed);
      trajs = simulate_multiplex_fj(mx, u, a.noise * Matrix::Identity(n, n), a.steps, CounterRng(a.seed).split(1)(), so);
    } else {
      const auto net = io::is_multiplex_document(doc) ? io::multiplex_from(doc).layers.front() : io::network_from(doc);
      require(a.issues >= 1, ErrorKind::config, "--issues must be >= 1");
      if (a.dynamics == "gossip") {
        require(a.issues == 1, ErrorKind::config, "gossip dynamics carry a single issue");
        GossipParams gp;
        gp.activation_size = a.activation_size;
        gp.seed = CounterRng(a.seed).split(1)();
        trajs.push_back(simulate_gossip_fj(net, initial_state(a.x0, net.n(), 1, a.seed).col(0), gp, a.steps, so));
      } else {
        const Matrix x0 = initial_state(a.x0, net.n(), a.issues, a.seed);
        trajs.push_back(a.dynamics == "fj" ? simulate_fj(net, x0, a.steps, so) : simulate_degroot(net.W, x0, a.steps, so));
      }
    }
    const fs::path base = g.out_path(a.out, "trajectory.csv");
    for (std::size_t s = 0; s < trajs.size(); ++s) {
      fs::path p = base;
      if (trajs.size() > 1)
        p = base.parent_path() / (base.stem().string() + "_layer" + std::to_string(s) + base.extension().string());
      io::save_trajectory(p, trajs[s], manifest("trajectory", params, a.seed));
      say(g, p.string());
    }
  });
}

// ---------------------------------------------------------------------------

struct ObserveArgs {
  std::string trajectory, sampling = "full", out;
  std::vector<double> rho;
  std::uint64_t seed = 0;
  long issue = 0;
};

void setup_observe(CLI::App& app, ObserveArgs& a, const Globals& g) {
  auto* c = app.add_subcommand("observe", "Sample a partially observed stream from a trajectory");
  c->add_option("--trajectory", a.trajectory, "Trajectory CSV")->required()->check(CLI::ExistingFile);
  c->add_option("--sampling", a.sampling, "Sampling model")
      ->check(CLI::IsMember({"full", "intermittent", "independent"}))
      ->capture_default_str();
  c->add_option("--rho", a.rho, "Observation probability (one value, or one per agent for independent)");
  c->add_option("--issue", a.issue, "Issue column to observe")->capture_default_str();
  c->add_option("--seed", a.seed, "Random seed")->capture_default_str();
  c->add_option("--out", a.out, "Output CSV (default <output-dir>/stream.csv)");
  c->callback([&a, &g] {
    const auto traj = io::load_trajectory(a.trajectory);
    const Index n = traj.initial().rows();
    SamplingModel m = SamplingModel::full();
    if (a.sampling != "full") require(!a.rho.empty(), ErrorKind::config, "--rho is required for " + a.sampling);
    if (a.sampling == "intermittent") {
      require(a.rho.size() == 1, ErrorKind::config, "intermittent sampling takes a single --rho");
      m = SamplingModel::intermittent(a.rho.front());
    } else if (a.sampling == "independent") {
      m = a.rho.size() == 1 ? SamplingModel::homogeneous(n, a.rho.front())
                            : SamplingModel::independent(Eigen::Map<const Vector>(a.rho.data(), static_cast<Index>(a.rho.size())));
    }
    require(a.issue >= 0 && a.issue < traj.initial().cols(), ErrorKind::config, "--issue out of range");
    const auto s = sample_observations(traj, m, a.seed, a.issue);
    const json params = {{"command", "observe"}, {"trajectory", a.trajectory}, {"sampling", a.sampling},
                         {"rho", a.rho}, {"issue", a.issue}, {"seed", a.seed}};
    const auto p = g.out_path(a.out, "stream.csv");
    io::save_stream(p, s, manifest("stream", params, a.seed), Vector(traj.initial().col(a.issue)));
    say(g, p.string() + " (" + std::to_string(s.records.size()) + " observations)");
  });
}

// ---------------------------------------------------------------------------

struct IdentifyArgs {
  std::string estimator = "infinite_horizon", network, trajectory, mode = "dense", out;
  std::vector<std::string> streams;
  double eps = 0.0, eta = 0.0, threshold_ratio = 0.05, support_threshold = 1e-8;
  std::optional<double> threshold, beta;
  bool nonneg = false, unknown_lambda = false, no_bayesian = false;
  std::size_t n_sigma = 5, max_lag = 0;
  std::int64_t burn_in = 0;
  long activation_size = 1;
};

void setup_identify(CLI::App& app, IdentifyArgs& a, const Globals& g) {
  auto* c = app.add_subcommand("identify", "Estimate the influence matrix from opinion data");
  c->add_option("--estimator", a.estimator, "Estimator")
      ->check(CLI::IsMember({"finite_horizon", "infinite_horizon", "unknown_lambda", "yule_walker", "multiplex"}))
      ->capture_default_str();
  c->add_option("--network", a.network, "Network file supplying Lambda (and the multiplex tag)")
      ->check(CLI::ExistingFile);
  c->add_option("--trajectory", a.trajectory, "Trajectory CSV (horizon estimators)")->check(CLI::ExistingFile);
  c->add_option("--stream", a.streams, "Observation stream CSV; repeat once per layer for multiplex")
      ->check(CLI::ExistingFile);
  c->add_option("--eps", a.eps, "Residual tolerance of the l1 programs")->capture_default_str();
  c->add_flag("--nonneg", a.nonneg, "Constrain weights to be nonnegative");
  c->add_flag("--unknown-lambda", a.unknown_lambda, "Finite horizon: estimate Lambda jointly");
  c->add_option("--support-threshold", a.support_threshold, "Magnitude that counts as an edge")->capture_default_str();
  c->add_option("--n-sigma", a.n_sigma, "Lag window length")->capture_default_str();
  c->add_option("--max-lag", a.max_lag, "Largest lag estimated (0: n-sigma)")->capture_default_str();
  c->add_option("--burn-in", a.burn_in, "Leading stream steps to discard")->capture_default_str();
  c->add_option("--mode", a.mode, "Gamma estimator")->check(CLI::IsMember({"dense", "sparse"}))->capture_default_str();
  c->add_option("--eta", a.eta, "Sparse Gamma residual budget")->capture_default_str();
  c->add_option("--threshold", a.threshold, "Absolute support threshold on Gamma");
  c->add_option("--threshold-ratio", a.threshold_ratio, "Support threshold relative to the largest entry")
      ->capture_default_str();
  c->add_option("--beta", a.beta, "Gossip activation ratio (default activation-size / n)");
  c->add_option("--activation-size", a.activation_size, "Gossip agents activated per step")->capture_default_str();
  c->add_flag("--no-bayesian", a.no_bayesian, "Multiplex: skip covariance shrinkage");
  c->add_option("--out", a.out, "Output report (default <output-dir>/report.json)");
  c->callback([&a, &g] {
    HorizonOptions ho;
    ho.eps = a.eps;
    ho.nonneg = a.nonneg;
    ho.support_threshold = a.support_threshold;
    MomentOptions mo;
    mo.n_sigma = a.n_sigma;
    mo.max_lag = a.max_lag;
    mo.burn_in = a.burn_in;
    std::vector<EstimationReport> reports;
    const bool needs_net = a.estimator != "unknown_lambda" && !(a.estimator == "finite_horizon" && a.unknown_lambda);
    require(!needs_net || !a.network.empty(), ErrorKind::config, a.estimator + " needs --network for Lambda");
    if (a.estimator == "finite_horizon" || a.estimator == "infinite_horizon" || a.estimator == "unknown_lambda") {
      require(!a.trajectory.empty(), ErrorKind::config, a.estimator + " needs --trajectory");
      const auto traj = io::load_trajectory(a.trajectory);
      if (a.estimator == "finite_horizon") {
        std::optional<Vector> lambda;
        if (!a.unknown_lambda) lambda = read_network(a.network).lambda;
        reports.push_back(identify_finite_horizon(traj, lambda, ho));
      } else if (a.estimator == "infinite_horizon") {
        reports.push_back(identify_infinite_horizon(traj.initial(), traj.final_state(), read_network(a.network).lambda, ho));
      } else {
        reports.push_back(identify_unknown_lambda(traj.initial(), traj.final_state(), ho));
      }
    } else if (a.estimator == "yule_walker") {
      require(a.streams.size() == 1, ErrorKind::config, "yule_walker takes exactly one --stream");
      const auto ls = io::load_stream(a.streams.front());
      require(ls.initial_state.has_value(), ErrorKind::config, "stream sidecar lacks the initial state");
      const auto net = read_network(a.network);
      const double beta = a.beta.value_or(static_cast<double>(a.activation_size) / static_cast<double>(net.n()));
      const Vector b = beta * (Vector::Ones(net.n()) - net.lambda).cwiseProduct(*ls.initial_state);
      const auto me = estimate_cross_correlations(ls.stream, mo);
      const auto gm = estimate_gamma(me, b, a.mode == "dense" ? GammaMode::dense : GammaMode::sparse, a.eta);
      RecoveryOptions ro;
      ro.threshold = a.threshold;
      ro.threshold_ratio = a.threshold_ratio;
      auto rep = recover_topology_and_w(gm.Gamma, net.lambda, beta, ro);
      rep.warnings.insert(rep.warnings.end(), gm.warnings.begin(), gm.warnings.end());
      rep.solver_log.insert(rep.solver_log.begin(), gm.log.begin(), gm.log.end());
      reports.push_back(std::move(rep));
    } else {
      const auto mx = io::multiplex_from(io::read_json(a.network));
      require(a.streams.size() == mx.layers.size(), ErrorKind::config, "multiplex needs one --stream per layer");
      std::vector<ObservationStream> streams;
      std::vector<Vector> lambdas;
      Matrix u(mx.n(), static_cast<Index>(mx.layers.size()));
      for (std::size_t s = 0; s < a.streams.size(); ++s) {
        auto ls = io::load_stream(a.streams[s]);
        require(ls.initial_state.has_value(), ErrorKind::config, a.streams[s] + ": sidecar lacks the initial state");
        u.col(static_cast<Index>(s)) = *ls.initial_state;
        streams.push_back(std::move(ls.stream));
        lambdas.push_back(mx.layers[s].lambda);
      }
      MultiplexOptions opt;
      opt.moments = mo;
      opt.bayesian = !a.no_bayesian;
      opt.threshold = a.threshold;
      opt.threshold_ratio = a.threshold_ratio;
      reports = identify_multiplex(streams, mx.model_tag, lambdas, u, opt);
    }
    json params = {{"command", "identify"}, {"estimator", a.estimator}, {"network", a.network},
                   {"trajectory", a.trajectory}, {"streams", a.streams}, {"eps", a.eps}, {"nonneg", a.nonneg},
                   {"n_sigma", a.n_sigma}, {"burn_in", a.burn_in}, {"mode", a.mode}, {"eta", a.eta},
                   {"threshold_ratio", a.threshold_ratio}};
    if (a.threshold) params["threshold"] = *a.threshold;
    const fs::path base = g.out_path(a.out, "report.json");
    for (std::size_t s = 0; s < reports.size(); ++s) {
      print_warnings(reports[s]);
      fs::path p = base;
      json doc = io::report_json(reports[s]);
      if (reports.size() > 1) {
        p = base.parent_path() / (base.stem().string() + "_layer" + std::to_string(s) + base.extension().string());
        doc["layer"] = s;
      }
      io::save_json(p, doc, manifest("report", params, {}));
      say(g, p.string());
    }
  });
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string network, report, out;
  long layer = 0;
};

void setup_evaluate(CLI::App& app, EvaluateArgs& a, const Globals& g) {
  auto* c = app.add_subcommand("evaluate", "Score an estimate against the true network");
  c->add_option("--network", a.network, "True network or multiplex file")->required()->check(CLI::ExistingFile);
  c->add_option("--report", a.report, "Estimation report")->required()->check(CLI::ExistingFile);
  c->add_option("--layer", a.layer, "Multiplex layer the report belongs to (default: the report's own)");
  c->add_option("--out", a.out, "Output metrics (default <output-dir>/metrics.json)");
  c->callback([&a, &g] {
    const json rdoc = io::read_json(a.report);
    auto rep = io::report_from(rdoc);
    const json ndoc = io::read_json(a.network);
    InfluenceNetwork truth;
    if (io::is_multiplex_document(ndoc)) {
      const auto mx = io::multiplex_from(ndoc);
      const long layer = rdoc.contains("layer") ? rdoc["layer"].get<long>() : a.layer;
      require(layer >= 0 && static_cast<std::size_t>(layer) < mx.layers.size(), ErrorKind::config, "layer out of range");
      truth = mx.layers[static_cast<std::size_t>(layer)];
    } else {
      truth = io::network_from(ndoc);
    }
    const auto m = evaluate_estimate(truth.W, rep);
    json metrics = json::object();
    for (const auto& [k, v] : m) metrics[k] = v;
    const json params = {{"command", "evaluate"}, {"network", a.network}, {"report", a.report}};
    const auto p = g.out_path(a.out, "metrics.json");
    io::save_json(p, {{"metrics", metrics}, {"params", json::object()}}, manifest("metrics", params, {}));
    say(g, io::dump(metrics));
  });
}

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string config;
  unsigned jobs = 1;
};

void setup_run(CLI::App& app, RunArgs& a, const Globals& g) {
  auto* c = app.add_subcommand("run", "Run a config-driven experiment pipeline");
  c->add_option("--config", a.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  c->callback([&a, &g] {
    auto cfg = pipeline::load_config(a.config);
    if (!g.output_dir.empty() && !cfg.raw.contains("output_dir")) cfg.output_dir = g.output_dir;
    const auto res = pipeline::run_pipeline(cfg);
    for (const auto& p : res.artifacts) say(g, p.string());
  });
}

void setup_sweep(CLI::App& app, RunArgs& a, const Globals& g) {
  auto* c = app.add_subcommand("sweep", "Run a pipeline over a parameter grid");
  c->add_option("--config", a.config, "Sweep config (JSON)")->required()->check(CLI::ExistingFile);
  c->add_option("--jobs", a.jobs, "Maximum parallel grid points")->capture_default_str()->check(CLI::PositiveNumber);
  c->callback([&a, &g] {
    json doc = io::read_json(a.config);
    if (!g.output_dir.empty() && !doc.contains("output_dir")) doc["output_dir"] = g.output_dir;
    const fs::path cfg_path(a.config);
    const auto res = pipeline::run_sweep(doc, a.jobs, cfg_path.has_parent_path() ? cfg_path.parent_path() : fs::path{});
    std::size_t failed = 0;
    for (const auto& p : res.points)
      if (!p.error.empty()) {
        ++failed;
        std::cerr << "point " << p.point << " repeat " << p.repeat << ": " << p.error << '\n';
      }
    for (const auto& p : res.artifacts) say(g, p.string());
    require(failed == 0, ErrorKind::config,
            std::to_string(failed) + " of " + std::to_string(res.points.size()) + " sweep runs failed");
  });
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string x, y = "support_f1", series, out_dir;
};

void setup_report(CLI::App& app, ReportArgs& a, const Globals& g) {
  auto* c = app.add_subcommand("report", "Aggregate metrics.json files into summary and plot tables");
  c->add_option("--inputs", a.inputs, "Run directories or metrics files (searched recursively)")->required();
  c->add_option("--x", a.x, "Parameter for the plot x axis");
  c->add_option("--y", a.y, "Metric for the plot y axis")->capture_default_str();
  c->add_option("--series", a.series, "Parameter that splits plot series");
  c->add_option("--out-dir", a.out_dir, "Directory for summary.csv and plot.csv (default <output-dir>)");
  c->callback([&a, &g] {
    std::vector<fs::path> files;
    for (const auto& in : a.inputs) {
      require(fs::exists(in), ErrorKind::config, in + " does not exist");
      if (fs::is_directory(in)) {
        for (const auto& e : fs::recursive_directory_iterator(in))
          if (e.is_regular_file() && e.path().filename() == "metrics.json") files.push_back(e.path());
      } else {
        files.push_back(in);
      }
    }
    require(!files.empty(), ErrorKind::config, "no metrics.json files found");
    std::sort(files.begin(), files.end());
    std::vector<json> docs;
    std::set<std::string> pkeys, mkeys;
    for (const auto& f : files) {
      docs.push_back(io::read_json(f));
      const json& d = docs.back();
      require(d.contains("metrics"), ErrorKind::config, f.string() + " is not a metrics file");
      for (auto it = d["metrics"].begin(); it != d["metrics"].end(); ++it) mkeys.insert(it.key());
      if (d.contains("params"))
        for (auto it = d["params"].begin(); it != d["params"].end(); ++it) pkeys.insert(it.key());
    }
    const auto cell = [](const json& v) {
      if (v.is_string()) return v.get<std::string>();
      std::string s = io::dump(v, -1);
      s.pop_back();
      return s;
    };
    std::string csv = "file";
    for (const auto& k : pkeys) csv += ',' + k;
    for (const auto& k : mkeys) csv += ',' + k;
    csv += '\n';
    std::map<std::pair<std::string, double>, std::vector<double>> groups;
    for (std::size_t r = 0; r < docs.size(); ++r) {
      const json& d = docs[r];
      const json params = d.value("params", json::object());
      csv += files[r].generic_string();
      for (const auto& k : pkeys) csv += ',' + (params.contains(k) ? cell(params[k]) : std::string());
      for (const auto& k : mkeys) csv += ',' + (d["metrics"].contains(k) ? cell(d["metrics"][k]) : std::string());
      csv += '\n';
      if (!a.x.empty() && params.contains(a.x) && params[a.x].is_number() && d["metrics"].contains(a.y) &&
          d["metrics"][a.y].is_number()) {
        const std::string s = a.series.empty() ? a.y : (params.contains(a.series) ? cell(params[a.series]) : "");
        groups[{s, params[a.x].get<double>()}].push_back(d["metrics"][a.y].get<double>());
      }
    }
    const fs::path dir = a.out_dir.empty() ? g.out_path("", "") : fs::path(a.out_dir);
    io::write_file(dir / "summary.csv", csv);
    say(g, (dir / "summary.csv").string());
    if (a.x.empty()) return;
    std::vector<io::PlotPoint> pts;
    for (auto& [key, ys] : groups) {
      std::sort(ys.begin(), ys.end());
      const std::size_t m = ys.size();
      pts.push_back({key.second, m % 2 ? ys[m / 2] : 0.5 * (ys[m / 2 - 1] + ys[m / 2]), key.first});
    }
    io::write_file(dir / "plot.csv", io::plot_csv(pts));
    say(g, (dir / "plot.csv").string());
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"opinet: opinion dynamics simulation and influence network identification"};
  app.set_version_flag("--version", OPINET_VERSION);
  app.require_subcommand(0, 1);
  Globals g;
  bool show_manifest = false;
  app.add_option("--output-dir", g.output_dir, "Default directory for outputs (else $OPINET_OUTPUT_DIR or opinet-out)");
  app.add_flag("--quiet", g.quiet, "Do not list written files");
  app.add_flag("--manifest", show_manifest, "Print build provenance as JSON and exit");

  GenerateArgs gen;
  CentralityArgs cen;
  SimulateArgs sim;
  ObserveArgs obs;
  IdentifyArgs idf;
  EvaluateArgs evl;
  RunArgs run, swp;
  ReportArgs rep;
  setup_generate(app, gen, g);
  setup_centrality(app, cen, g);
  setup_simulate(app, sim, g);
  setup_observe(app, obs, g);
  setup_identify(app, idf, g);
  setup_evaluate(app, evl, g);
  setup_sweep(app, swp, g);
  setup_report(app, rep, g);
  setup_run(app, run, g);

  try {
    app.parse(argc, argv);
    if (show_manifest) {
      std::cout << io::dump(provenance());
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cout << app.help();
      return 1;
    }
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code(ErrorKind::config);
  } catch (const Error& e) {
    std::cerr << "opinet: " << e.what() << '\n';
    if (const auto* inf = dynamic_cast<const InfeasibleError*>(&e))
      std::cerr << "opinet: smallest feasible tolerance " << io::fmt17(inf->min_feasible_tolerance()) << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "opinet: internal error: " << e.what() << '\n';
    return exit_code(ErrorKind::internal);
  }
  return 0;
}
