#include "corral/geometry.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace corral {
namespace {

constexpr int kMaxScalarIterations = 200;
constexpr double kScalarTolerance = 1e-12;

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void require_p(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) {
    throw ContractViolation("norm exponent must lie in (1, inf), got " + std::to_string(p));
  }
}

}  // namespace

double dual_exponent(double p) {
  require_p(p);
  return p / (p - 1.0);
}

double lp_norm(const Vec& x, double p) {
  if (!(p >= 1.0)) throw ContractViolation("lp_norm needs p >= 1, got " + std::to_string(p));
  if (p == 1.0) return x.cwiseAbs().sum();
  if (p == 2.0) {
    const double n = x.norm();
    return std::isfinite(n) ? n : x.stableNorm();
  }
  const double m = x.cwiseAbs().maxCoeff();
  if (m == 0.0 || x.size() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index n = 0; n < x.size(); ++n) acc += std::pow(std::abs(x[n]) / m, p);
  return m * std::pow(acc, 1.0 / p);
}

double lp_norm_pow(const Vec& x, double p) {
  if (p == 2.0) return x.squaredNorm();
  double acc = 0.0;
  for (Eigen::Index n = 0; n < x.size(); ++n) acc += std::pow(std::abs(x[n]), p);
  return acc;
}

LinearMin linear_min_over_ball(const Vec& L, double p, double r) {
  const double q = dual_exponent(p);
  if (!(r > 0.0)) throw ContractViolation("linear_min_over_ball needs r > 0");
  LinearMin out;
  out.minimizer = Vec::Zero(L.size());
  const double nq = lp_norm(L, q);
  if (nq == 0.0) return out;
  // Scale by ||L||_q first so |L_n| / ||L||_q <= 1 keeps the power in range.
  for (Eigen::Index n = 0; n < L.size(); ++n) {
    out.minimizer[n] = -r * sign_of(L[n]) * std::pow(std::abs(L[n]) / nq, q - 1.0);
  }
  out.value = -r * nq;
  return out;
}

double barrier_lp(const Vec& x, double p) {
  const double s = 1.0 - lp_norm_pow(x, p);
  if (!(s > 0.0)) throw DomainError("barrier evaluated outside the open unit ball");
  return -std::log(s);
}

double bregman_lp(const Vec& x, const Vec& y, double p) {
  return barrier_lp(x, p) - barrier_lp(y, p) - grad_R_lp(y, p).dot(x - y);
}

Vec grad_R_lp(const Vec& x, double p) {
  require_p(p);
  const double s = 1.0 - lp_norm_pow(x, p);
  if (!(s > 0.0)) throw DomainError("grad_R_lp: point not inside the unit l_p ball");
  Vec g(x.size());
  if (p == 2.0) {
    g = (2.0 / s) * x;
    return g;
  }
  for (Eigen::Index n = 0; n < x.size(); ++n) {
    g[n] = p * sign_of(x[n]) * std::pow(std::abs(x[n]), p - 1.0) / s;
  }
  return g;
}

MirrorScalar solve_mirror_scalar(double A, double q) {
  MirrorScalar out;
  if (!(A >= 0.0) || !std::isfinite(A)) {
    throw NumericalError("mirror scalar: invalid coefficient", A);
  }
  if (A == 0.0) return out;
  if (q == 2.0) {
    out.s = 2.0 / (1.0 + std::sqrt(1.0 + 4.0 * A));
    out.residual = std::abs(out.s * out.s * A + out.s - 1.0);
    return out;
  }
  auto f = [&](double s) { return std::pow(s, q) * A + s - 1.0; };
  double lo = 0.0, hi = 1.0;
  // A^(-1/q) sits right of the root (f there equals s > 0) and is much closer
  // than 1 when A is large.
  double s = std::min(1.0, std::pow(A, -1.0 / q));
  double fs = f(s);
  for (int it = 1; it <= kMaxScalarIterations; ++it) {
    out.iterations = it;
    if (fs > 0.0) {
      hi = s;
    } else {
      lo = s;
    }
    if (std::abs(fs) <= 1e-15) break;
    const double df = q * std::pow(s, q - 1.0) * A + 1.0;
    double next = s - fs / df;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == s || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
    s = next;
    fs = f(s);
  }
  out.s = s;
  out.residual = std::abs(fs);
  if (!(out.residual <= kScalarTolerance)) {
    throw NumericalError("mirror scalar root-finder did not converge", out.residual);
  }
  return out;
}

Vec inv_grad_R_lp(const Vec& g, double p, double* slack) {
  const double q = dual_exponent(p);
  Vec x(g.size());
  if (p == 2.0) {
    const MirrorScalar ms = solve_mirror_scalar(0.25 * g.squaredNorm(), 2.0);
    x = (0.5 * ms.s) * g;
    if (slack) *slack = ms.s;
    return x;
  }
  double A = 0.0;
  for (Eigen::Index n = 0; n < g.size(); ++n) A += std::pow(std::abs(g[n]) / p, q);
  const MirrorScalar ms = solve_mirror_scalar(A, q);
  const double root = 1.0 / (p - 1.0);
  for (Eigen::Index n = 0; n < g.size(); ++n) {
    x[n] = sign_of(g[n]) * std::pow(ms.s * std::abs(g[n]) / p, root);
  }
  if (slack) *slack = ms.s;
  return x;
}

Vec bregman_project_lp(const Vec& w, double p, double r) {
  require_p(p);
  if (!(r > 0.0 && r < 1.0)) throw ContractViolation("projection radius must lie in (0, 1)");
  const double nw = lp_norm(w, p);
  if (nw <= r) return w;
  if (!(nw < 1.0)) throw DomainError("bregman_project_lp: point not inside the unit l_p ball");
  const Vec g = grad_R_lp(w, p);
  Vec a(w.size());
  const double root = 1.0 / (p - 1.0);
  for (Eigen::Index n = 0; n < g.size(); ++n) {
    a[n] = sign_of(g[n]) * std::pow(std::abs(g[n]), root);
  }
  const double na = lp_norm(a, p);
  return a * (r / na);
}

double lp_projection_kkt_residual(const Vec& a, const Vec& w, double p, double r) {
  const double na = lp_norm(a, p);
  double worst = std::max(0.0, na - r);
  const Vec v1 = grad_R_lp(w, p) - grad_R_lp(a, p);
  Vec v2(a.size());
  for (Eigen::Index n = 0; n < a.size(); ++n) {
    v2[n] = p * sign_of(a[n]) * std::pow(std::abs(a[n]), p - 1.0);
  }
  const double vv = v2.squaredNorm();
  double nu = vv > 0.0 ? std::max(0.0, v1.dot(v2) / vv) : 0.0;
  const double scale = std::max(1.0, v1.norm());
  worst = std::max(worst, (v1 - nu * v2).norm() / scale);
  if (nu * vv > 0.0) worst = std::max(worst, std::abs(na - r));
  return worst;
}

Vec omd_step_lp(const Vec& a, const Vec& loss, double eta, double p, double r) {
  if (!(eta > 0.0)) throw ContractViolation("OMD step size must be positive");
  if (loss.isZero(0.0)) return a;
  const Vec w = inv_grad_R_lp(grad_R_lp(a, p) - eta * loss, p);
  return bregman_project_lp(w, p, r);
}

// ---------------------------------------------------------------------------

LpGauge::LpGauge(double p) : p_(p), q_(dual_exponent(p)) {}

double LpGauge::gauge(const Vec& x) const { return lp_norm(x, p_); }

Vec LpGauge::gauge_grad(const Vec& x) const {
  const double n = lp_norm(x, p_);
  Vec g = Vec::Zero(x.size());
  if (n == 0.0) return g;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    g[i] = sign_of(x[i]) * std::pow(std::abs(x[i]) / n, p_ - 1.0);
  }
  return g;
}

double LpGauge::dual_gauge(const Vec& h) const { return lp_norm(h, q_); }

Vec LpGauge::dual_gauge_grad(const Vec& h) const {
  const double n = lp_norm(h, q_);
  Vec g = Vec::Zero(h.size());
  if (n == 0.0) return g;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    g[i] = sign_of(h[i]) * std::pow(std::abs(h[i]) / n, q_ - 1.0);
  }
  return g;
}

std::string LpGauge::name() const { return "lp(" + std::to_string(p_) + ")"; }

EllipsoidGauge::EllipsoidGauge(Mat shape) : shape_(std::move(shape)) {
  if (shape_.rows() == 0 || shape_.rows() != shape_.cols()) {
    throw ConfigError("ellipsoid shape must be a nonempty square matrix");
  }
  if ((shape_ - shape_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * shape_.cwiseAbs().maxCoeff()) {
    throw ConfigError("ellipsoid shape must be symmetric");
  }
  Eigen::LLT<Mat> llt(shape_);
  if (llt.info() != Eigen::Success) throw ConfigError("ellipsoid shape must be positive definite");
  inverse_ = llt.solve(Mat::Identity(shape_.rows(), shape_.cols()));
  inverse_ = 0.5 * (inverse_ + inverse_.transpose());
}

EllipsoidGauge EllipsoidGauge::diagonal(const Vec& weights) {
  if (weights.size() == 0 || !(weights.minCoeff() > 0.0)) {
    throw ConfigError("ellipsoid weights must be positive");
  }
  return EllipsoidGauge(Mat(weights.asDiagonal()));
}

double EllipsoidGauge::gauge(const Vec& x) const { return std::sqrt(x.dot(shape_ * x)); }

Vec EllipsoidGauge::gauge_grad(const Vec& x) const {
  const double g = gauge(x);
  if (g == 0.0) return Vec::Zero(x.size());
  return shape_ * x / g;
}

double EllipsoidGauge::dual_gauge(const Vec& h) const { return std::sqrt(h.dot(inverse_ * h)); }

Vec EllipsoidGauge::dual_gauge_grad(const Vec& h) const {
  const double g = dual_gauge(h);
  if (g == 0.0) return Vec::Zero(h.size());
  return inverse_ * h / g;
}

std::string EllipsoidGauge::name() const { return "ellipsoid"; }

DomainSpec DomainSpec::lp_ball(double p, double radius) {
  DomainSpec spec;
  spec.kind = Kind::LpBall;
  spec.p = p;
  spec.radius = radius;
  spec.validate();
  return spec;
}

DomainSpec DomainSpec::gauge(std::shared_ptr<const GaugeOracle> oracle, double p, double alpha) {
  DomainSpec spec;
  spec.kind = Kind::Gauge;
  spec.p = p;
  spec.alpha = alpha;
  spec.oracle = std::move(oracle);
  spec.validate();
  return spec;
}

double DomainSpec::norm(const Vec& x) const {
  return kind == Kind::Gauge ? oracle->gauge(x) : lp_norm(x, p);
}

void DomainSpec::validate() const {
  if (!(p > 1.0 && p <= 2.0)) throw ConfigError("domain exponent p must lie in (1, 2]");
  if (!(radius > 0.0 && radius <= 1.0)) throw ConfigError("domain radius must lie in (0, 1]");
  if (kind == Kind::Gauge) {
    if (!oracle) throw ConfigError("gauge domain needs an oracle");
    if (!(alpha > 0.0)) throw ConfigError("gauge curvature alpha must be positive");
  }
}

Vec grad_R_gauge(const Vec& x, const GaugeOracle& oracle) {
  const double g = oracle.gauge(x);
  if (!(g < 1.0)) throw DomainError("grad_R_gauge: point not inside the unit gauge ball");
  if (g == 0.0) return Vec::Zero(x.size());
  return (g / (1.0 - g)) * oracle.gauge_grad(x);
}

Vec inv_grad_R_gauge(const Vec& h, const GaugeOracle& oracle) {
  const double n = oracle.dual_gauge(h);
  if (n == 0.0) return Vec::Zero(h.size());
  return (n / (1.0 + n)) * oracle.dual_gauge_grad(h);
}

double barrier_gauge(const Vec& x, const GaugeOracle& oracle) {
  const double g = oracle.gauge(x);
  if (!(g < 1.0)) throw DomainError("barrier evaluated outside the open unit gauge ball");
  return -std::log1p(-g) - g;
}

Vec clip_to_gauge_ball(const Vec& x, const GaugeOracle& oracle, double r) {
  const double g = oracle.gauge(x);
  if (g <= r) return x;
  return x * (r / g);
}

int gauge_sandwich_violations(const GaugeOracle& oracle, int d, double p, int samples,
                              RngStream& rng, double tol) {
  const double q = dual_exponent(p);
  int bad = 0;
  Vec u(d);
  for (int k = 0; k < samples; ++k) {
    for (int n = 0; n < d; ++n) u[n] = rng.normal();
    const double np = lp_norm(u, p);
    if (np == 0.0) continue;
    // a point of the l_p sphere must lie in X
    if (oracle.gauge(u / np) > 1.0 + tol) ++bad;
    // a point of X's boundary must lie in the l_q ball
    const double g = oracle.gauge(u);
    if (g > 0.0 && lp_norm(u / g, q) > 1.0 + tol) ++bad;
  }
  return bad;
}

}  // namespace corral
