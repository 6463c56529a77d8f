#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "corral/core.hpp"
#include "corral/rng.hpp"

namespace corral {

struct EnvConfig {
  enum class Kind {
    PiecewiseFixed,   // fixed unit-q-norm direction per segment, optional sign-flip noise
    PiecewiseDrift,   // per-segment direction rotating slowly inside the segment
    StochasticNoise,  // signal * direction_k + noise, normalized into the dual ball
    Zero,             // all-zero losses
    BernoulliArms,    // [0,1] arm losses with per-segment means (mab_recipe)
  };

  Kind kind = Kind::PiecewiseFixed;
  int d = 2;
  int T = 1;
  int S = 1;
  double p = 2.0;
  // PiecewiseFixed: probability of flipping a round's sign. StochasticNoise: noise
  // standard deviation. PiecewiseDrift: rotation amplitude. BernoulliArms: gap
  // between the best arm and the rest.
  double noise = 0.0;
  double signal = 1.0;  // StochasticNoise only
  bool unconstrained = false;  // normalize by the l_2 norm instead of the l_q norm

  void validate() const;
};

EnvConfig::Kind parse_env_kind(const std::string& name);
std::string env_kind_name(EnvConfig::Kind kind);

// Segment starts (0-based) splitting [0, T) into S nearly equal parts.
std::vector<int> even_partition(int T, int S);

// Draws the whole loss sequence from rng. Every row satisfies ||l||_q <= 1
// (||l||_2 <= 1 when unconstrained; l in [0,1]^d for BernoulliArms).
LossSequence generate(const EnvConfig& cfg, RngStream& rng);

// Cumulative sums P[t] = l_0 + ... + l_{t-1}, P[0] = 0.
class PrefixSums {
 public:
  explicit PrefixSums(const LossSequence& losses);
  // Sum of rows [s, e) (0-based, half open).
  Vec interval(int s, int e) const;
  void interval(int s, int e, Vec& out) const;
  int T() const { return T_; }
  int d() const { return d_; }

 private:
  int T_;
  int d_;
  RowMajorMat P_;
};

// min over ||u||_p <= 1 of <sum_{t in [s,e)} l_t, u> = -||L||_q. Empty interval gives 0.
double best_interval_value(const PrefixSums& prefix, int s, int e, double p);

struct DpResult {
  SwitchingComparator comparator;
  double value = 0.0;
};

// Optimal comparator with exactly S nonempty segments. V[k][t] = min_s V[k-1][s] +
// best_interval_value([s, t)); the earliest boundary wins ties. O(S T^2) time.
DpResult dp_switching_comparator(const LossSequence& losses, int S, double p);

// Comparator value sum_t <l_t, u_t>.
double comparator_value(const LossSequence& losses, const SwitchingComparator& comparator);

// Per segment, the best arm (vertex of the simplex) over the given partition.
SwitchingComparator best_arm_comparator(const LossSequence& losses, const std::vector<int>& starts);

// Text format: "# d=<d> T=<T> p=<p>" header then one row of d reals per line.
void write_losses(std::ostream& os, const LossSequence& losses);
LossSequence read_losses(std::istream& is);
LossSequence load_losses(const std::string& path);
void save_losses(const std::string& path, const LossSequence& losses);

}  // namespace corral
