#include "corral/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace corral {
namespace {

constexpr int kMaxIterations = 200;
constexpr int kMaxBracketDoublings = 1100;

struct Eval {
  double sum = 0.0;
  double slope = 0.0;  // d sum / d nu, <= 0
};

Eval evaluate(const Vec& logs, const Vec& rates, const Vec& floors, double nu) {
  Eval e;
  for (Eigen::Index j = 0; j < logs.size(); ++j) {
    const double v = std::exp(logs[j] - rates[j] * nu);
    if (v > floors[j]) {
      e.sum += v;
      e.slope -= rates[j] * v;
    } else {
      e.sum += floors[j];
    }
  }
  return e;
}

}  // namespace

FlooredStep floored_mirror_step(const Vec& prev, const Vec& z, const Vec& rates,
                                const Vec& floors) {
  const Eigen::Index n = prev.size();
  if (z.size() != n || rates.size() != n || floors.size() != n || n == 0) {
    throw ContractViolation("floored_mirror_step: dimension mismatch");
  }
  if (!(rates.minCoeff() > 0.0)) throw ContractViolation("floored_mirror_step: rates must be > 0");
  if (!(prev.minCoeff() > 0.0)) throw ContractViolation("floored_mirror_step: prev must be > 0");
  if (!z.allFinite()) throw NumericalError("floored_mirror_step: non-finite loss", 0.0);

  const double floor_mass = floors.sum();
  if (floor_mass > 1.0 + 1e-12) throw ConfigError("floors exceed the simplex (sum > 1)");

  FlooredStep out;
  if (z.isZero(0.0) && (prev.array() >= floors.array()).all() &&
      std::abs(prev.sum() - 1.0) <= 1e-12) {
    out.w = prev;
    out.residual = std::abs(prev.sum() - 1.0);
    return out;
  }
  if (floor_mass >= 1.0 - 1e-15) {
    out.w = floors;
    out.residual = std::abs(floor_mass - 1.0);
    return out;
  }

  Vec logs(n);
  for (Eigen::Index j = 0; j < n; ++j) logs[j] = std::log(prev[j]) - rates[j] * z[j];

  // Bracket: sum(lo) >= 1 >= sum(hi).
  double lo = -1.0, hi = 1.0;
  int guard = 0;
  while (evaluate(logs, rates, floors, lo).sum < 1.0) {
    lo *= 2.0;
    if (++guard > kMaxBracketDoublings) throw NumericalError("floored step: no lower bracket", lo);
  }
  guard = 0;
  while (evaluate(logs, rates, floors, hi).sum > 1.0) {
    hi *= 2.0;
    if (++guard > kMaxBracketDoublings) throw NumericalError("floored step: no upper bracket", hi);
  }

  double nu = (lo <= 0.0 && 0.0 <= hi) ? 0.0 : 0.5 * (lo + hi);
  Eval e = evaluate(logs, rates, floors, nu);
  for (int it = 1; it <= kMaxIterations; ++it) {
    out.iterations = it;
    const double gap = e.sum - 1.0;
    if (std::abs(gap) <= 1e-15) break;
    if (gap > 0.0) {
      lo = nu;
    } else {
      hi = nu;
    }
    double next = e.slope < 0.0 ? nu - gap / e.slope : std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(next) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == nu) break;
    nu = next;
    e = evaluate(logs, rates, floors, nu);
  }

  out.w.resize(n);
  double free_mass = 0.0, fixed_mass = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double v = std::exp(logs[j] - rates[j] * nu);
    if (v > floors[j]) {
      out.w[j] = v;
      free_mass += v;
    } else {
      out.w[j] = floors[j];
      fixed_mass += floors[j];
    }
  }
  // Polish: rescale the free block so the total is 1 to rounding.
  if (free_mass > 0.0) {
    const double scale = (1.0 - fixed_mass) / free_mass;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (out.w[j] > floors[j]) out.w[j] = std::max(floors[j], out.w[j] * scale);
    }
  }
  out.multiplier = nu;
  out.residual = std::abs(out.w.sum() - 1.0);
  if (!(out.residual <= 1e-9)) throw NumericalError("floored step did not normalize", out.residual);
  return out;
}

double floored_kkt_residual(const Vec& w, const Vec& prev, const Vec& z, const Vec& rates,
                            const Vec& floors) {
  const Eigen::Index n = w.size();
  double worst = std::abs(w.sum() - 1.0);
  // Tolerance for telling a floored coordinate from a free one.
  auto is_free = [&](Eigen::Index j) { return w[j] > floors[j] * (1.0 + 1e-12); };

  Eigen::Index anchor = -1;
  for (Eigen::Index j = 0; j < n; ++j) {
    worst = std::max(worst, floors[j] - w[j]);
    if (is_free(j) && (anchor < 0 || rates[j] > rates[anchor])) anchor = j;
  }
  if (anchor < 0) return worst;
  const double nu = -std::log(w[anchor] / prev[anchor]) / rates[anchor] - z[anchor];
  for (Eigen::Index j = 0; j < n; ++j) {
    if (is_free(j)) {
      worst = std::max(worst, std::abs(std::log(w[j] / prev[j]) + rates[j] * (z[j] + nu)));
    } else {
      worst = std::max(worst, -(std::log(floors[j] / prev[j]) + rates[j] * (z[j] + nu)));
    }
  }
  return worst;
}

}  // namespace corral
