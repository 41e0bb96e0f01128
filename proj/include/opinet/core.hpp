#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace opinet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Entries with magnitude below this are structural zeros of an influence matrix.
inline constexpr double kStructuralZero = 1e-12;

enum class ErrorKind {
  config,          // malformed input, parameters or files
  structural,      // dimension mismatch, empty neighbourhoods
  parameter,       // parameter outside its admissible range
  identifiability, // data cannot determine the unknowns
  stability,       // Lambda*W not Schur stable
  numerical,       // singular solves, divergence, non-convergence
  infeasible,      // optimisation problem has no feasible point
  capacity,        // combinatorial search above the size cap
  internal         // consistency checks that should never fire
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return "config";
    case ErrorKind::structural: return "structural";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::identifiability: return "identifiability";
    case ErrorKind::stability: return "stability";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::internal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by constrained estimators; carries the smallest tolerance that would
// have made the problem feasible.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double min_feasible)
      : Error(ErrorKind::infeasible, what), min_feasible_(min_feasible) {}

  double min_feasible_tolerance() const noexcept { return min_feasible_; }

 private:
  double min_feasible_;
};

// Process exit code for an error class: 1 config, 2 identifiability,
// 3 numerical, 4 capacity.
inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::identifiability: return 2;
    case ErrorKind::stability:
    case ErrorKind::numerical:
    case ErrorKind::infeasible:
    case ErrorKind::internal: return 3;
    case ErrorKind::capacity: return 4;
    default: return 1;
  }
}

using Diagnostics = std::vector<std::string>;

inline void warn(Diagnostics* diag, std::string msg) {
  if (diag) diag->push_back(std::move(msg));
}

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) throw Error(kind, msg);
}

inline bool is_symmetric(const Matrix& m, double tol = 1e-12) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace opinet
