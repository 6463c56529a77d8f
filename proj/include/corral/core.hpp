#pragma once

#include <Eigen/Core>

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace corral {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Error hierarchy. The C API and CLI map these onto status / exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or infeasible configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A numerical routine failed to converge (exit code 3).
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// A caller broke a documented precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// A state invariant that the algorithm guarantees was observed broken.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

// Argument outside the domain of a mirror map (e.g. ||x||_p >= 1).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A loss sequence l_1..l_T, one row per round (rows are 0-based internally).
struct LossSequence {
  int d = 0;
  int T = 0;
  double p = 2.0;  // norm exponent of the action domain the losses were built for
  RowMajorMat rows;

  LossSequence() = default;
  LossSequence(int dim, int horizon, double norm_p)
      : d(dim), T(horizon), p(norm_p), rows(RowMajorMat::Zero(horizon, dim)) {}

  auto row(int t) const { return rows.row(t); }
  auto row(int t) { return rows.row(t); }
};

// Piecewise-constant comparator sequence. Segment k covers rounds
// [starts[k], starts[k+1]) (0-based, last segment ends at T).
struct SwitchingComparator {
  int T = 0;
  std::vector<int> starts;
  std::vector<Vec> anchors;

  int segments() const { return static_cast<int>(starts.size()); }
  int segment_end(int k) const { return k + 1 < segments() ? starts[k + 1] : T; }
  int segment_of(int t) const;

  // Checks that starts partition [0, T) and anchors match in count.
  void validate() const;
};

struct RoundRecord {
  int t = 0;  // 1-based round index
  Vec x;
  double realized_loss = 0.0;
  int rho = 0;
  int xi = 0;
  int chosen = -1;  // selected base (0-based), -1 when exploring
  double p_max = 1.0;
  std::vector<std::pair<std::string_view, double>> diagnostics;
};

struct RegretReport {
  double cumulative_regret = 0.0;
  std::vector<double> per_segment_regret;
  std::vector<double> per_round;  // l_t.x_t - l_t.u_t
};

// Switching regret of realized losses against the comparator. Sums run left
// to right: per round, then within segment, then across segments.
RegretReport compute_regret(std::span<const double> realized, const LossSequence& losses,
                            const SwitchingComparator& comparator);

// Renders diagnostics as "k=v;k=v" with 17 significant digits.
std::string format_diagnostics(const std::vector<std::pair<std::string_view, double>>& diag);

}  // namespace corral
