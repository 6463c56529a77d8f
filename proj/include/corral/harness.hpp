#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "corral/base_learner.hpp"
#include "corral/core.hpp"
#include "corral/corral_learner.hpp"
#include "corral/environments.hpp"
#include "corral/rng.hpp"

namespace corral {

inline constexpr const char* kCsvHeader =
    "run_id,seed,algorithm,t,realized_loss,cum_loss,cum_regret,segment_id,p_max,diag";

// Individually overridable tuning; unset fields keep the derived defaults.
struct ParamOverrides {
  std::optional<double> gamma, eta, epsilon, mu, beta, lambda;
  // mab_recipe
  std::optional<double> mab_eta, mab_epsilon;
  std::optional<int> mab_copies;
};

struct ComparatorConfig {
  int switches = 0;             // 0: use the environment's S
  std::vector<double> norms;    // unconstrained comparator norms U (default {1})
  std::vector<int> starts;      // user-supplied comparator (0-based starts)
  std::vector<Vec> anchors;
  bool user_supplied() const { return !starts.empty(); }
};

struct UnconstrainedConfig {
  double d_max = 1048576.0;  // 2^20
  bool full_grid = false;
  double v_min = 0.0;        // 0: use 1/T^2
  std::string magnitude = "oco";  // "oco" or "frozen"
  double frozen_value = 1.0;
};

struct GaugeConfig {
  std::string type = "lp";   // "lp" or "ellipsoid"
  double alpha = 1.0;
  // ellipsoid only: either the full shape matrix A (x^T A x <= 1), row by row,
  // or the diagonal of A.
  std::vector<std::vector<double>> shape;
  std::vector<double> weights;
};

struct ExperimentConfig {
  std::string run_id = "run";
  std::vector<std::string> algorithms;
  EnvConfig env;
  std::string loss_file;  // if set, losses are loaded instead of generated
  ComparatorConfig comparator;
  std::vector<std::uint64_t> seeds{1};
  ParamOverrides overrides;
  UnconstrainedConfig unconstrained;
  GaugeConfig gauge;
  bool full_trace = false;
  bool check_invariants = false;
  std::string output;

  void validate() const;
};

bool is_known_algorithm(const std::string& name);
bool is_unconstrained_algorithm(const std::string& name);

// Parses the JSON config text. Throws ConfigError with the offending key.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Restart period ceil((T/S)^(1/3)), computed in integers.
int restart_period(int T, int S);

// Parameters of one restart block: derive_params(p, d, period, 1) with gamma
// clamped to 1/2 (short periods push the formula past 1).
CorralParams restart_params(double p, int d, int period);

// Single base learner with the beta-mixture exploration and its own estimator,
// restarted every period rounds.
class RestartBaseline {
 public:
  RestartBaseline(double p, int d, int T, int S);

  const Vec& select(RngStream& rng);
  void observe(double realized);

  int period() const { return period_; }
  const CorralParams& params() const { return params_; }
  const BaseLearner& base() const { return base_; }
  const RoundRecord& last_record() const { return record_; }

 private:
  CorralParams params_;
  DomainSpec domain_;
  int d_;
  int T_;
  int period_;
  int t_ = 0;
  BaseLearner base_;
  int rho_ = 0;
  Proposal played_;
  Vec x_;
  RoundRecord record_;
};

// Realized losses and per-round side data of one algorithm on one sequence.
struct AlgorithmTrace {
  std::vector<double> realized;
  std::vector<double> p_max;
  std::vector<std::string> diag;  // per round, filled when keep_diag is set
  std::string params;             // effective parameters, "k=v;..." form
  long long invariant_checks = 0;
  long long invariant_violations = 0;
  std::vector<std::string> invariant_messages;
  // Reduction runs only: played magnitudes v_t and directions z_t.
  std::vector<double> v;
  std::vector<Vec> z;
};

// Runs one algorithm over the losses with the learner stream RngStream(seed, 2).
// The learner only ever sees the scalar l_t . x_t.
AlgorithmTrace run_algorithm(const ExperimentConfig& cfg, const std::string& algorithm,
                             const LossSequence& losses, std::uint64_t seed,
                             bool keep_diag = false);

// Environment losses for a seed: the loss file if configured, else generate() with
// the environment stream RngStream(seed, 1).
LossSequence make_losses(const ExperimentConfig& cfg, std::uint64_t seed);

struct LabeledComparator {
  std::string label;  // algorithm label used in the CSV
  SwitchingComparator comparator;
};

// Comparators for an algorithm: the DP comparator (constrained), the best arm per
// segment (mab_recipe), U * DP anchors for each U (unconstrained), or the
// user-supplied sequence.
std::vector<LabeledComparator> make_comparators(const ExperimentConfig& cfg,
                                                const std::string& algorithm,
                                                const LossSequence& losses);

struct TraceRow {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string algorithm;
  int t = 0;
  double realized_loss = 0.0;
  double cum_loss = 0.0;
  double cum_regret = 0.0;
  int segment_id = 0;
  double p_max = 0.0;
  std::string diag;
};

struct ExperimentResult {
  std::vector<TraceRow> rows;
  bool numerical_failure = false;
  std::vector<std::string> errors;
};

// Reported rounds: T/4, T/2, T (deduplicated, at least 1), or every round.
std::vector<int> checkpoints(int T, bool full_trace);

// All seeds, bounded worker pool of `jobs` threads. Rows come back sorted by
// (seed position, algorithm position, t) regardless of scheduling.
ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs = 1);

std::string format_double(double v);
void write_csv(std::ostream& os, const std::vector<TraceRow>& rows);
// Throws ConfigError on a header or field-count mismatch.
std::vector<TraceRow> read_csv(std::istream& is);

struct SummaryRow {
  std::string algorithm;
  int t = 0;
  int n = 0;
  double mean = 0.0;
  double stderr_ = 0.0;  // sample sd / sqrt(n); 0 when n = 1
};

struct RatioRow {
  std::string algorithm;
  double final_over_quarter = 0.0;
  double final_over_half = 0.0;
};

// Mean and standard error of cum_regret per (algorithm, t).
std::vector<SummaryRow> summarize(const std::vector<TraceRow>& rows);
std::vector<RatioRow> ratio_table(const std::vector<SummaryRow>& summary);
void print_summary(std::ostream& os, const std::vector<SummaryRow>& summary,
                   const std::vector<RatioRow>& ratios);

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};
MeanStderr mean_stderr(const std::vector<double>& xs);

}  // namespace corral
