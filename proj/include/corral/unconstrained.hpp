#pragma once

#include <memory>
#include <string>
#include <vector>

#include "corral/corral_learner.hpp"
#include "corral/core.hpp"
#include "corral/rng.hpp"
#include "corral/simplex.hpp"

namespace corral {

// Scales c_i = 2^(i-1)/T (i = 1..H) times rates eta_r = 1/(32 2^r) (r = 1..R).
// Entry j = (i-1) * R + (r-1).
struct LearnerGrid {
  int T = 0;
  int H = 0;
  int R = 0;
  std::vector<double> scales;  // c_i, length H
  std::vector<double> rates;   // eta_r, length R
  Vec floors;                  // 1 / (T^2 4^i), length N
  Vec prior;                   // proportional to eta_r^2 / c_i^2, length N
  Vec step_rates;              // eta_r / c_i, length N

  int N() const { return H * R; }
  int scale_of(int j) const { return j / R; }
  int rate_of(int j) const { return j % R; }
};

// H = ceil(log2 T) + ceil(log2 D_max) + 1, R = ceil(log2 T). Needs T >= 2 and
// D_max >= 1/T.
LearnerGrid build_grid(int T, double D_max);
// Uncapped grid with D_max = 2^T, i.e. H = ceil(log2 T) + T + 1. Small T only.
LearnerGrid build_full_grid(int T);

int ceil_log2(double x);

// Any-interval learner on the Euclidean ball of the given radius.
class IntervalLearner {
 public:
  virtual ~IntervalLearner() = default;
  // Prediction for the current round; norm never exceeds radius().
  virtual const Vec& predict() = 0;
  virtual void update(const Vec& gradient) = 0;
  virtual double radius() const = 0;
};

// Geometric covering construction: level j runs a projected-gradient expert that
// restarts whenever 2^j divides the round count, with step radius / sqrt(elapsed).
// Experts are mixed by multiplicative weights w *= (1 + eta_I r), eta_I =
// min(1/2, 1/sqrt(|I|)), prediction weight eta_I w_I, rewards r = <g, v - v_I> / (2 radius).
// Weights are kept in log space.
class StronglyAdaptiveLearner final : public IntervalLearner {
 public:
  StronglyAdaptiveLearner(int d, double radius, int T);

  const Vec& predict() override;
  void update(const Vec& gradient) override;
  double radius() const override { return radius_; }

  int levels() const { return levels_; }

 private:
  int d_;
  double radius_;
  int levels_;
  long long tau_ = 0;  // completed rounds
  bool predicted_ = false;
  std::vector<double> iterates_;  // levels x d
  std::vector<double> elapsed_;
  std::vector<double> log_w_;
  std::vector<double> eta_;
  std::vector<double> mix_;
  Vec out_;
};

// argmin over Omega = {w in simplex, w >= floors} of <w, loss + correction> + D_psi(w, prev),
// psi(w) = sum (c_i/eta_r) w ln w.
Vec weighted_entropy_omd_update(const Vec& w, const Vec& meta_loss, const Vec& correction,
                                const LearnerGrid& grid);

struct OcoInvariantReport {
  long long checks = 0;
  long long violations = 0;
  double worst_correction = 0.0;  // max of 32 (eta_r/c_i) |l|
};

// Two-layer comparator-adaptive learner for unconstrained OCO with linear losses.
// One interval learner per scale c_i; learners with the same scale and different
// rates see identical gradients, so they share an instance.
class UnconstrainedOco {
 public:
  UnconstrainedOco(int d, LearnerGrid grid);

  const Vec& predict();
  void update(const Vec& gradient);

  const LearnerGrid& grid() const { return grid_; }
  const Vec& weights() const { return w_; }
  const Vec& last_meta_loss() const { return meta_loss_; }
  const OcoInvariantReport& invariants() const { return report_; }
  void enable_invariant_checks(bool on) { check_ = on; }
  const Vec& base_prediction(int scale) const { return base_preds_[scale]; }

 private:
  int d_;
  LearnerGrid grid_;
  std::vector<std::unique_ptr<IntervalLearner>> bases_;
  std::vector<Vec> base_preds_;
  Vec w_;
  Vec v_;
  Vec meta_loss_;
  Vec correction_;
  bool predicted_ = false;
  bool check_ = false;
  OcoInvariantReport report_;
};

// One-dimensional learner interface for the reduction's magnitude component.
class ScalarLearner {
 public:
  virtual ~ScalarLearner() = default;
  virtual double predict() = 0;
  virtual void update(double gradient) = 0;
};

// Always plays the same value.
class FrozenScalar final : public ScalarLearner {
 public:
  explicit FrozenScalar(double value) : value_(value) {}
  double predict() override { return value_; }
  void update(double) override {}

 private:
  double value_;
};

class OcoScalar final : public ScalarLearner {
 public:
  explicit OcoScalar(LearnerGrid grid);
  double predict() override;
  void update(double gradient) override;
  const UnconstrainedOco& oco() const { return oco_; }
  UnconstrainedOco& oco() { return oco_; }

 private:
  UnconstrainedOco oco_;
  Vec g_;
};

// Unconstrained linear bandit: x_t = v_t z_t with z_t from the l_2-ball corral
// learner and v_t from a scalar learner. |v_t| below v_min is replaced by
// +-v_min (+ at zero) and that floored value is what gets played.
class Reduction {
 public:
  Reduction(CorralLearner direction, std::unique_ptr<ScalarLearner> magnitude, double v_min);

  const Vec& select(RngStream& rng);
  void observe(double realized);

  double last_v() const { return v_; }
  double last_v_raw() const { return v_raw_; }
  const Vec& last_z() const { return z_; }
  // Feedback passed to both components: realized / v.
  double last_scaled_feedback() const { return scaled_; }
  int floored_rounds() const { return floored_; }
  const CorralLearner& direction() const { return direction_; }
  CorralLearner& direction() { return direction_; }
  double v_min() const { return v_min_; }

 private:
  CorralLearner direction_;
  std::unique_ptr<ScalarLearner> magnitude_;
  double v_min_;
  double v_ = 1.0;
  double v_raw_ = 1.0;
  double scaled_ = 0.0;
  int floored_ = 0;
  Vec z_;
  Vec x_;
};

}  // namespace corral
