// Slow, independent reference computations used by the tests. Nothing here calls
// into the library's solvers.
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;

inline double pnorm(const Vec& x, double p) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += std::pow(std::abs(x[i]), p);
  return std::pow(s, 1.0 / p);
}

inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     int iters = 200) {
  double flo = f(lo);
  for (int k = 0; k < iters; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// min over ||u||_p <= r of <L, u> by sweeping the boundary (d = 2).
inline double grid_linear_min_2d(const Vec& L, double p, double r, int n = 200000) {
  double best = 0.0;
  for (int k = 0; k < n; ++k) {
    const double th = 2.0 * M_PI * k / n;
    Vec u(2);
    u << std::cos(th), std::sin(th);
    u *= r / pnorm(u, p);
    best = std::min(best, L.dot(u));
  }
  return best;
}

// Same for d = 3 over a spherical-angle grid.
inline double grid_linear_min_3d(const Vec& L, double p, double r, int n = 600) {
  double best = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double ph = M_PI * i / n;
    for (int j = 0; j < 2 * n; ++j) {
      const double th = M_PI * j / n;
      Vec u(3);
      u << std::sin(ph) * std::cos(th), std::sin(ph) * std::sin(th), std::cos(ph);
      u *= r / pnorm(u, p);
      best = std::min(best, L.dot(u));
    }
  }
  return best;
}

// Exhaustive search over every split of [0, T) into S nonempty blocks. Each block
// contributes -||sum of its rows||_q.
inline double brute_switching_value(const std::vector<Vec>& rows, int S, double p) {
  const int T = static_cast<int>(rows.size());
  const double q = p / (p - 1.0);
  auto block = [&](int s, int e) {
    Vec sum = Vec::Zero(rows[0].size());
    for (int t = s; t < e; ++t) sum += rows[t];
    return -pnorm(sum, q);
  };
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> cuts(S + 1);
  cuts[0] = 0;
  cuts[S] = T;
  std::function<void(int, int)> rec = [&](int k, int lo) {
    if (k == S) {
      double v = 0.0;
      for (int j = 0; j < S; ++j) v += block(cuts[j], cuts[j + 1]);
      best = std::min(best, v);
      return;
    }
    for (int c = lo; c <= T - (S - k); ++c) {
      cuts[k] = c;
      rec(k + 1, c + 1);
    }
  };
  if (S == 1) return block(0, T);
  rec(1, 1);
  return best;
}

inline double barrier(const Vec& x, double p) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += std::pow(std::abs(x[i]), p);
  return -std::log(1.0 - s);
}

inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

inline double bregman(const Vec& x, const Vec& y, double p) {
  const Vec g = fd_gradient([p](const Vec& v) { return barrier(v, p); }, y, 1e-7);
  return barrier(x, p) - barrier(y, p) - g.dot(x - y);
}

// Compass search for argmin_{||a||_p <= r} f(a), parametrized as
// a = r * sigmoid-free clamp(s) * y / ||y||_p.
inline Vec compass_minimize_on_ball(const std::function<double(const Vec&)>& f, const Vec& start,
                                    double p, double r) {
  const int d = static_cast<int>(start.size());
  auto to_point = [&](const Vec& z) {
    const Vec y = z.head(d);
    const double s = std::clamp(z[d], 0.0, 1.0);
    const double n = pnorm(y, p);
    if (n == 0.0) return Vec(Vec::Zero(d));
    return Vec(y * (r * s / n));
  };
  Vec z(d + 1);
  const double n0 = pnorm(start, p);
  z.head(d) = n0 > 0 ? Vec(start / n0) : Vec(Vec::Ones(d));
  z[d] = std::min(1.0, n0 / r);
  double fz = f(to_point(z));
  double step = 0.25;
  while (step > 1e-10) {
    bool improved = false;
    for (int i = 0; i <= d; ++i) {
      for (double sgn : {1.0, -1.0}) {
        Vec c = z;
        c[i] += sgn * step;
        if (i == d) c[d] = std::clamp(c[d], 0.0, 1.0);
        const double fc = f(to_point(c));
        if (fc < fz) {
          z = c;
          fz = fc;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return to_point(z);
}

// Objective <w, z> + sum_j (1/k_j)(w_j ln(w_j/prev_j) - w_j + prev_j).
inline double floored_objective(const Vec& w, const Vec& prev, const Vec& z, const Vec& rates) {
  double v = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    v += w[j] * z[j] + (w[j] * std::log(w[j] / prev[j]) - w[j] + prev[j]) / rates[j];
  }
  return v;
}

// Pairwise coordinate descent over {sum w = 1, w >= floors}: repeatedly moves
// mass between two coordinates to the exact 1-d optimum (found by bisection).
inline Vec pairwise_descent(const Vec& prev, const Vec& z, const Vec& rates, const Vec& floors,
                            int sweeps = 400) {
  const Eigen::Index n = prev.size();
  // Feasible start: floors plus the rest spread proportionally to prev.
  Vec w = floors;
  const double rest = 1.0 - floors.sum();
  w += rest * prev / prev.sum();
  auto deriv = [&](Eigen::Index j, double wj) {
    return z[j] + std::log(wj / prev[j]) / rates[j];
  };
  for (int s = 0; s < sweeps; ++s) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double total = w[i] + w[j];
        const double lo = floors[i], hi = total - floors[j];
        if (hi <= lo) continue;
        // d/dx of objective with w_i = x, w_j = total - x.
        auto g = [&](double x) { return deriv(i, x) - deriv(j, total - x); };
        double x;
        if (g(lo) >= 0) {
          x = lo;
        } else if (g(hi) <= 0) {
          x = hi;
        } else {
          x = bisect(g, lo, hi, 100);
        }
        w[i] = x;
        w[j] = total - x;
      }
    }
  }
  return w;
}

}  // namespace oracle
