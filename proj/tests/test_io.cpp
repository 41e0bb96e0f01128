#include "opinet/io.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace opinet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("opinet_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::uint64_t bits(double v) {
  std::uint64_t b;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

InfluenceNetwork sample_network(std::uint64_t seed) {
  GeneratorSpec g;
  g.model = GraphModel::k_out;
  g.out_degree = 3;
  return generate_network(g, 12, seed);
}

}  // namespace

TEST(Json, SeventeenDigitsRoundTrip) {
  CounterRng rng(5);
  for (int t = 0; t < 1000; ++t) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(t % 40) - 20.0);
    const double back = std::strtod(io::fmt17(v).c_str(), nullptr);
    ASSERT_EQ(bits(v), bits(back)) << io::fmt17(v);
  }
}

TEST(Json, DumpIsSortedAndStable) {
  io::json a = {{"zeta", 1}, {"alpha", {1.5, 2.0}}, {"mid", {{"b", 0.1}, {"a", nullptr}}}};
  const std::string s = io::dump(a);
  EXPECT_LT(s.find("alpha"), s.find("mid"));
  EXPECT_LT(s.find("mid"), s.find("zeta"));
  EXPECT_NE(s.find("[1.5, 2]"), std::string::npos);
  EXPECT_EQ(io::parse_json(s, "x"), a);
  EXPECT_EQ(io::dump(io::json(std::nan(""))), "null\n");
}

TEST(Json, FnvKnownValues) {
  EXPECT_EQ(io::fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(io::fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(Json, MalformedTextIsConfigError) {
  try {
    io::parse_json("{\"a\": ", "broken.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_NE(std::string(e.what()).find("broken.json"), std::string::npos);
  }
}

TEST(NetworkFile, RoundTripIsBitExact) {
  const auto dir = scratch("net");
  const auto net = sample_network(3);
  io::save_json(dir / "net.json", io::network_json(net), {"network.json", "abc", 3});
  const auto back = io::network_from(io::read_json(dir / "net.json"));
  ASSERT_EQ(back.n(), net.n());
  for (Index i = 0; i < net.n(); ++i) {
    EXPECT_EQ(bits(back.lambda(i)), bits(net.lambda(i)));
    for (Index j = 0; j < net.n(); ++j) EXPECT_EQ(bits(back.W(i, j)), bits(net.W(i, j)));
  }
  const auto meta = io::read_json(dir / "net.json")["manifest"];
  EXPECT_EQ(meta["tool"], "opinet");
  EXPECT_EQ(meta["seed"], 3);
  EXPECT_EQ(meta["config_hash"], "abc");
  EXPECT_TRUE(meta.contains("version"));
}

TEST(NetworkFile, UnknownKeyAndBadEdgesRejected) {
  io::json doc = io::network_json(sample_network(1));
  doc["colour"] = "red";
  EXPECT_THROW(io::network_from(doc), Error);
  doc.erase("colour");
  doc["edges"].push_back({0, 99, 0.5});
  EXPECT_THROW(io::network_from(doc), Error);
  doc["edges"].erase(doc["edges"].size() - 1);
  doc["edges"].push_back(doc["edges"][0]);
  EXPECT_THROW(io::network_from(doc), Error);
}

TEST(MultiplexFile, RoundTrip) {
  GeneratorSpec g;
  g.model = GraphModel::k_out;
  const auto mx = build_multiplex(MultiplexModel::common_component, g, {}, 8, 3, 4);
  const auto back = io::multiplex_from(io::parse_json(io::dump(io::multiplex_json(mx)), "mx"));
  ASSERT_EQ(back.layers.size(), 3u);
  EXPECT_EQ(back.model_tag, MultiplexModel::common_component);
  ASSERT_TRUE(back.base.has_value());
  for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(back.layers[s].W, mx.layers[s].W);
  EXPECT_TRUE(io::is_multiplex_document(io::multiplex_json(mx)));
  EXPECT_FALSE(io::is_multiplex_document(io::network_json(mx.layers[0])));
}

TEST(TrajectoryFile, RoundTripWithSidecar) {
  const auto dir = scratch("traj");
  const auto net = sample_network(2);
  CounterRng rng(9);
  Matrix x0(net.n(), 2);
  for (Index i = 0; i < x0.size(); ++i) x0(i) = rng.uniform();
  SimOptions so;
  so.stride = 7;
  const auto t = simulate_fj(net, x0, 50, so);
  io::save_trajectory(dir / "t.csv", t, {"trajectory.csv", "", std::nullopt});
  ASSERT_TRUE(fs::exists(io::sidecar(dir / "t.csv")));
  const auto back = io::load_trajectory(dir / "t.csv");
  EXPECT_EQ(back.steps, t.steps);
  ASSERT_EQ(back.X.size(), t.X.size());
  for (std::size_t k = 0; k < t.X.size(); ++k) EXPECT_EQ(back.X[k], t.X[k]);
  EXPECT_EQ(back.model.kind, t.model.kind);
  EXPECT_EQ(back.model.params, t.model.params);
}

TEST(TrajectoryFile, IncompleteStateRejected) {
  const auto dir = scratch("bad_traj");
  io::write_file(dir / "t.csv", "k,agent,issue,value\n0,0,0,1\n0,1,0,2\n1,0,0,3\n");
  EXPECT_THROW(io::load_trajectory(dir / "t.csv"), Error);
  io::write_file(dir / "h.csv", "step,agent,issue,value\n0,0,0,1\n");
  EXPECT_THROW(io::load_trajectory(dir / "h.csv"), Error);
}

TEST(StreamFile, RoundTripKeepsSamplingModel) {
  const auto dir = scratch("stream");
  const auto net = sample_network(4);
  GossipParams gp;
  gp.seed = 1;
  const Vector x0 = Vector::LinSpaced(net.n(), 0.0, 1.0);
  const auto t = simulate_gossip_fj(net, x0, gp, 300);
  const auto s = sample_observations(t, SamplingModel::homogeneous(net.n(), 0.4), 11);
  io::save_stream(dir / "s.csv", s, {"stream.csv", "", 11}, x0);
  const auto back = io::load_stream(dir / "s.csv");
  EXPECT_EQ(back.stream.records, s.records);
  EXPECT_EQ(back.stream.model.kind, SamplingKind::independent);
  EXPECT_EQ(back.stream.model.rho_agents, s.model.rho_agents);
  EXPECT_EQ(back.stream.horizon, s.horizon);
  EXPECT_EQ(back.stream.first_step, s.first_step);
  ASSERT_TRUE(back.initial_state.has_value());
  EXPECT_EQ(*back.initial_state, x0);
}

TEST(StreamFile, MissingSidecarIsConfigError) {
  const auto dir = scratch("nosidecar");
  io::write_file(dir / "s.csv", "k,agent,value\n0,0,1\n");
  try {
    io::load_stream(dir / "s.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

TEST(ReportFile, RoundTrip) {
  EstimationReport r;
  r.estimator = "infinite_horizon";
  r.W_hat = Matrix::Random(4, 4);
  r.Lambda_hat = Vector::Constant(4, 0.3);
  r.support = {{0, 1}, {2, 3}};
  r.support_threshold = 1e-8;
  r.metrics["support_f1"] = 0.75;
  r.warnings = {"careful"};
  r.solver_log = {"row 0 ok"};
  const auto back = io::report_from(io::parse_json(io::dump(io::report_json(r)), "r"));
  EXPECT_EQ(back.W_hat, r.W_hat);
  EXPECT_EQ(back.support, r.support);
  EXPECT_EQ(*back.Lambda_hat, *r.Lambda_hat);
  EXPECT_EQ(back.metrics, r.metrics);
  EXPECT_EQ(back.warnings, r.warnings);
  EXPECT_EQ(back.solver_log, r.solver_log);
}

TEST(Tables, CentralityAndPlotLayout) {
  CentralityVector c;
  c.values = Vector::LinSpaced(3, 0.0, 1.0);
  EXPECT_EQ(io::centrality_csv(c), "agent,value\n0,0\n1,0.5\n2,1\n");
  EXPECT_EQ(io::plot_csv({{1.0, 0.25, "a"}}), "x,y,series\n1,0.25,a\n");
}
