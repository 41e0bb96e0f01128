#pragma once

// Random partial observation of opinion trajectories and the exact
// first/second moments of the sampling masks.

#include "opinet/dynamics.hpp"

#include <string>
#include <vector>

namespace opinet {

enum class SamplingKind { full, intermittent, independent };

inline const char* to_string(SamplingKind k) {
  switch (k) {
    case SamplingKind::full: return "full";
    case SamplingKind::intermittent: return "intermittent";
    case SamplingKind::independent: return "independent";
  }
  return "unknown";
}

// intermittent: the whole vector is observed with probability rho per step.
// independent: agent i is observed with probability rho_i, independently
// across agents and steps.
struct SamplingModel {
  SamplingKind kind = SamplingKind::full;
  double rho = 1.0;   // intermittent
  Vector rho_agents;  // independent

  static SamplingModel full() { return {}; }
  static SamplingModel intermittent(double r) { return {SamplingKind::intermittent, r, {}}; }
  static SamplingModel independent(const Vector& r) { return {SamplingKind::independent, 1.0, r}; }
  static SamplingModel homogeneous(Index n, double r) { return independent(Vector::Constant(n, r)); }
};

inline void validate_model(const SamplingModel& m, Index n) {
  switch (m.kind) {
    case SamplingKind::full: break;
    case SamplingKind::intermittent:
      require(m.rho >= 0.0 && m.rho <= 1.0, ErrorKind::parameter, "sampling probability must lie in [0,1]");
      break;
    case SamplingKind::independent:
      require(m.rho_agents.size() == n, ErrorKind::structural, "one sampling probability per agent required");
      require(n == 0 || (m.rho_agents.minCoeff() >= 0.0 && m.rho_agents.maxCoeff() <= 1.0), ErrorKind::parameter,
              "sampling probabilities must lie in [0,1]");
      break;
  }
}

struct ObservationRecord {
  std::int64_t k;
  Index agent;
  double z;
  friend bool operator==(const ObservationRecord&, const ObservationRecord&) = default;
};

struct ObservationStream {
  std::vector<ObservationRecord> records;  // sorted by (k, agent), each pair at most once
  SamplingModel model;
  Index n = 0;
  std::int64_t first_step = 0;
  std::int64_t horizon = 0;  // number of consecutive steps that were sampled
  std::uint64_t seed = 0;
};

inline ObservationStream sample_observations(const OpinionTrajectory& traj, const SamplingModel& model,
                                             std::uint64_t seed, Index issue = 0) {
  require(!traj.X.empty(), ErrorKind::parameter, "empty trajectory");
  const Index n = traj.X.front().rows();
  require(issue >= 0 && issue < traj.X.front().cols(), ErrorKind::structural, "issue index out of range");
  validate_model(model, n);
  ObservationStream s;
  s.model = model;
  s.n = n;
  s.seed = seed;
  s.horizon = static_cast<std::int64_t>(traj.X.size());
  s.first_step = traj.steps.empty() ? 0 : traj.steps.front();
  for (std::size_t t = 1; t < traj.steps.size(); ++t)
    require(traj.steps[t] == traj.steps[t - 1] + 1, ErrorKind::structural,
            "sampling needs consecutive states (simulate with stride 1)");
  CounterRng rng(seed);
  for (std::size_t t = 0; t < traj.X.size(); ++t) {
    const std::int64_t k = traj.steps.empty() ? static_cast<std::int64_t>(t) : traj.steps[t];
    const auto& x = traj.X[t];
    switch (model.kind) {
      case SamplingKind::full:
        for (Index i = 0; i < n; ++i) s.records.push_back({k, i, x(i, issue)});
        break;
      case SamplingKind::intermittent:
        if (rng.uniform() < model.rho)
          for (Index i = 0; i < n; ++i) s.records.push_back({k, i, x(i, issue)});
        break;
      case SamplingKind::independent:
        for (Index i = 0; i < n; ++i)
          if (rng.uniform() < model.rho_agents(i)) s.records.push_back({k, i, x(i, issue)});
        break;
    }
  }
  return s;
}

// Dense n x T view: Z holds observed values and zeros where mask is false.
struct DenseObservations {
  Matrix Z;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
};

inline DenseObservations to_dense(const ObservationStream& s) {
  DenseObservations d;
  const Index T = static_cast<Index>(s.horizon);
  d.Z = Matrix::Zero(s.n, T);
  d.mask.setConstant(s.n, T, false);
  for (const auto& r : s.records) {
    const Index col = static_cast<Index>(r.k - s.first_step);
    require(r.agent >= 0 && r.agent < s.n, ErrorKind::structural, "observation agent index out of range");
    require(col >= 0 && col < T, ErrorKind::structural, "observation step outside the stream horizon");
    require(!d.mask(r.agent, col), ErrorKind::structural, "duplicate observation record");
    d.Z(r.agent, col) = r.z;
    d.mask(r.agent, col) = true;
  }
  return d;
}

struct SamplingMoments {
  Vector pi;               // P(agent i observed at a step)
  std::vector<Matrix> Pi;  // Pi[l](i,j) = P(i observed at k and j observed at k+l)
  bool has_zero = false;   // some Pi entry vanishes, so moment division is impossible
};

inline SamplingMoments observation_moments(const SamplingModel& model, Index n, std::size_t max_lag) {
  validate_model(model, n);
  SamplingMoments m;
  const Matrix ones = Matrix::Ones(n, n);
  switch (model.kind) {
    case SamplingKind::full:
      m.pi = Vector::Ones(n);
      m.Pi.assign(max_lag + 1, ones);
      break;
    case SamplingKind::intermittent:
      m.pi = Vector::Constant(n, model.rho);
      m.Pi.push_back(model.rho * ones);
      for (std::size_t l = 1; l <= max_lag; ++l) m.Pi.push_back(model.rho * model.rho * ones);
      break;
    case SamplingKind::independent: {
      const Vector& r = model.rho_agents;
      m.pi = r;
      Matrix p0 = r * r.transpose();
      p0.diagonal() = r;
      m.Pi.push_back(p0);
      for (std::size_t l = 1; l <= max_lag; ++l) m.Pi.push_back(r * r.transpose());
      break;
    }
  }
  for (const auto& p : m.Pi)
    if (p.size() && p.minCoeff() <= 0.0) m.has_zero = true;
  return m;
}

}  // namespace opinet
