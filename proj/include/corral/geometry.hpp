#pragma once

#include <memory>
#include <string>

#include "corral/core.hpp"
#include "corral/rng.hpp"

namespace corral {

// q = p / (p - 1). p must lie in (1, inf).
double dual_exponent(double p);

// (sum |x_n|^p)^(1/p), computed with max-abs scaling. Throws ContractViolation for p < 1.
double lp_norm(const Vec& x, double p);

// sum |x_n|^p without the root.
double lp_norm_pow(const Vec& x, double p);

struct LinearMin {
  Vec minimizer;
  double value = 0.0;
};

// argmin over ||u||_p <= r of <L, u>. The minimizer is the Hoelder-equality point
// -r sign(L) |L|^(q-1) / ||L||_q^(q-1); L = 0 returns the origin with value 0.
LinearMin linear_min_over_ball(const Vec& L, double p, double r);

// ---------------------------------------------------------------------------
// Barrier R(x) = -ln(1 - ||x||_p^p) on the open unit l_p ball.

double barrier_lp(const Vec& x, double p);

// D_R(x, y) = R(x) - R(y) - <grad R(y), x - y>.
double bregman_lp(const Vec& x, const Vec& y, double p);

// p sign(x) |x|^(p-1) / (1 - ||x||_p^p). Throws DomainError if ||x||_p >= 1.
Vec grad_R_lp(const Vec& x, double p);

struct MirrorScalar {
  double s = 1.0;  // slack 1 - ||x||_p^p of the recovered point
  int iterations = 0;
  double residual = 0.0;
};

// Root of f(s) = s^q A + s - 1 on (0, 1]. f is increasing and convex, so Newton
// started right of the root decreases monotonically; a bisection bracket guards it.
// q == 2 uses the closed form 2 / (1 + sqrt(1 + 4A)).
MirrorScalar solve_mirror_scalar(double A, double q);

// Inverse of grad_R_lp: the unique x with ||x||_p < 1 and grad_R_lp(x) = g.
// If slack is non-null it receives 1 - ||x||_p^p.
Vec inv_grad_R_lp(const Vec& g, double p, double* slack = nullptr);

// Bregman projection of w (||w||_p < 1) onto {||a||_p <= r} under R. The KKT
// conditions force sign(a)|a|^(p-1) to be proportional to grad_R_lp(w), which pins
// the projection to the boundary point along that direction.
Vec bregman_project_lp(const Vec& w, double p, double r);

// Largest violation of the projection's KKT system (stationarity with a
// nonnegative multiplier, feasibility, complementary slackness).
double lp_projection_kkt_residual(const Vec& a, const Vec& w, double p, double r);

// One mirror-descent step: argmin_{||a'||_p <= r} <a', loss> + D_R(a', a) / eta.
// A zero loss returns a unchanged.
Vec omd_step_lp(const Vec& a, const Vec& loss, double eta, double p, double r);

// ---------------------------------------------------------------------------
// Gauge-function domains.

class GaugeOracle {
 public:
  virtual ~GaugeOracle() = default;

  // ||x||_X
  virtual double gauge(const Vec& x) const = 0;
  // Gradient of ||.||_X; the zero vector at the origin.
  virtual Vec gauge_grad(const Vec& x) const = 0;
  // ||h||_{X polar}
  virtual double dual_gauge(const Vec& h) const = 0;
  virtual Vec dual_gauge_grad(const Vec& h) const = 0;

  virtual std::string name() const = 0;
};

// Gauge of the unit l_p ball; its polar gauge is the l_q norm.
class LpGauge final : public GaugeOracle {
 public:
  explicit LpGauge(double p);

  double gauge(const Vec& x) const override;
  Vec gauge_grad(const Vec& x) const override;
  double dual_gauge(const Vec& h) const override;
  Vec dual_gauge_grad(const Vec& h) const override;
  std::string name() const override;

  double p() const { return p_; }

 private:
  double p_;
  double q_;
};

// {x : x^T A x <= 1} with A symmetric positive definite. The polar set is
// {h : h^T A^{-1} h <= 1}.
class EllipsoidGauge final : public GaugeOracle {
 public:
  explicit EllipsoidGauge(Mat shape);
  static EllipsoidGauge diagonal(const Vec& weights);

  double gauge(const Vec& x) const override;
  Vec gauge_grad(const Vec& x) const override;
  double dual_gauge(const Vec& h) const override;
  Vec dual_gauge_grad(const Vec& h) const override;
  std::string name() const override;

  const Mat& shape() const { return shape_; }

 private:
  Mat shape_;
  Mat inverse_;
};

struct DomainSpec {
  enum class Kind { LpBall, Gauge };

  Kind kind = Kind::LpBall;
  double p = 2.0;
  double alpha = 1.0;  // curvature, gauge domains only
  double radius = 1.0;
  std::shared_ptr<const GaugeOracle> oracle;

  static DomainSpec lp_ball(double p, double radius = 1.0);
  static DomainSpec gauge(std::shared_ptr<const GaugeOracle> oracle, double p, double alpha);

  double q() const { return dual_exponent(p); }
  // ||x||_p for l_p balls, ||x||_X for gauge domains.
  double norm(const Vec& x) const;
  void validate() const;
};

// grad R for R(x) = -ln(1 - ||x||_X) - ||x||_X:  (g / (1 - g)) grad||.||_X(x), g = ||x||_X.
// Returns 0 at the origin (R's minimizer). Throws DomainError if ||x||_X >= 1.
Vec grad_R_gauge(const Vec& x, const GaugeOracle& oracle);

// grad R*(h) = (n / (1 + n)) grad||.||_polar(h), n = ||h||_polar.
Vec inv_grad_R_gauge(const Vec& h, const GaugeOracle& oracle);

double barrier_gauge(const Vec& x, const GaugeOracle& oracle);

// Radial scaling x * min(1, r / ||x||_X).
Vec clip_to_gauge_ball(const Vec& x, const GaugeOracle& oracle, double r);

// Spot check of l_p(1) within X within l_q(1) on random directions. Returns the
// number of sampled points violating either inclusion by more than tol.
int gauge_sandwich_violations(const GaugeOracle& oracle, int d, double p, int samples,
                              RngStream& rng, double tol = 1e-10);

}  // namespace corral
