#include "corral/environments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "corral/geometry.hpp"

namespace corral {

void EnvConfig::validate() const {
  if (d < 1) throw ConfigError("environment dimension must be >= 1");
  if (T < 1) throw ConfigError("environment horizon must be >= 1");
  if (S < 1 || S > T) throw ConfigError("environment segments must satisfy 1 <= S <= T");
  if (!(p > 1.0 && p <= 2.0)) throw ConfigError("environment p must lie in (1, 2]");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("noise must be >= 0");
  if (!std::isfinite(signal)) throw ConfigError("signal must be finite");
  if (kind == Kind::PiecewiseFixed && noise > 1.0) {
    throw ConfigError("sign-flip probability must lie in [0, 1]");
  }
  if (kind == Kind::BernoulliArms && (d < 2 || noise > 0.5)) {
    throw ConfigError("bernoulli arms need d >= 2 and gap in [0, 0.5]");
  }
}

EnvConfig::Kind parse_env_kind(const std::string& name) {
  if (name == "piecewise_fixed") return EnvConfig::Kind::PiecewiseFixed;
  if (name == "piecewise_drift") return EnvConfig::Kind::PiecewiseDrift;
  if (name == "stochastic_noise") return EnvConfig::Kind::StochasticNoise;
  if (name == "zero") return EnvConfig::Kind::Zero;
  if (name == "bernoulli_arms") return EnvConfig::Kind::BernoulliArms;
  throw ConfigError("unknown environment kind '" + name + "'");
}

std::string env_kind_name(EnvConfig::Kind kind) {
  switch (kind) {
    case EnvConfig::Kind::PiecewiseFixed: return "piecewise_fixed";
    case EnvConfig::Kind::PiecewiseDrift: return "piecewise_drift";
    case EnvConfig::Kind::StochasticNoise: return "stochastic_noise";
    case EnvConfig::Kind::Zero: return "zero";
    case EnvConfig::Kind::BernoulliArms: return "bernoulli_arms";
  }
  return "unknown";
}

std::vector<int> even_partition(int T, int S) {
  if (S < 1 || S > T) throw ContractViolation("even_partition needs 1 <= S <= T");
  std::vector<int> starts(S);
  for (int k = 0; k < S; ++k) {
    starts[k] = static_cast<int>(static_cast<long long>(k) * T / S);
  }
  return starts;
}

namespace {

Vec random_unit(int d, double norm_p, RngStream& rng) {
  Vec g(d);
  for (;;) {
    for (int n = 0; n < d; ++n) g[n] = rng.normal();
    const double nrm = lp_norm(g, norm_p);
    if (nrm > 1e-12) return g / nrm;
  }
}

// A direction per segment; consecutive directions are obtuse (d >= 2) or
// opposite (d = 1) so the segment optima really change.
std::vector<Vec> segment_directions(int S, int d, double norm_p, RngStream& rng) {
  std::vector<Vec> dirs;
  dirs.reserve(S);
  for (int k = 0; k < S; ++k) {
    if (d == 1) {
      Vec g(1);
      g[0] = (k == 0) ? (rng.bernoulli(0.5) ? 1.0 : -1.0) : -dirs.back()[0];
      dirs.push_back(g);
      continue;
    }
    Vec g = random_unit(d, norm_p, rng);
    for (int tries = 0; k > 0 && tries < 100 && g.dot(dirs.back()) >= 0.0; ++tries) {
      g = random_unit(d, norm_p, rng);
    }
    dirs.push_back(g);
  }
  return dirs;
}

void clamp_to_ball(Eigen::Ref<Vec> row, double norm_p) {
  const double nrm = lp_norm(row, norm_p);
  if (nrm > 1.0) row /= nrm;
}

}  // namespace

LossSequence generate(const EnvConfig& cfg, RngStream& rng) {
  cfg.validate();
  const double q = cfg.unconstrained ? 2.0 : dual_exponent(cfg.p);
  LossSequence out(cfg.d, cfg.T, cfg.unconstrained ? 2.0 : cfg.p);
  if (cfg.kind == EnvConfig::Kind::Zero) return out;

  const std::vector<int> starts = even_partition(cfg.T, cfg.S);
  auto seg_end = [&](int k) { return k + 1 < cfg.S ? starts[k + 1] : cfg.T; };

  if (cfg.kind == EnvConfig::Kind::BernoulliArms) {
    int best = -1;
    Vec means(cfg.d);
    for (int k = 0; k < cfg.S; ++k) {
      int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.d)));
      if (b == best) b = (b + 1) % cfg.d;
      best = b;
      means.setConstant(0.5);
      means[best] = 0.5 - cfg.noise;
      for (int t = starts[k]; t < seg_end(k); ++t) {
        for (int n = 0; n < cfg.d; ++n) out.rows(t, n) = rng.bernoulli(means[n]) ? 1.0 : 0.0;
      }
    }
    return out;
  }

  const std::vector<Vec> dirs = segment_directions(cfg.S, cfg.d, q, rng);
  Vec row(cfg.d);
  for (int k = 0; k < cfg.S; ++k) {
    const Vec& g = dirs[k];
    Vec ortho;
    if (cfg.kind == EnvConfig::Kind::PiecewiseDrift) ortho = random_unit(cfg.d, q, rng);
    const int len = seg_end(k) - starts[k];
    for (int t = starts[k]; t < seg_end(k); ++t) {
      switch (cfg.kind) {
        case EnvConfig::Kind::PiecewiseFixed: {
          const double sign = rng.bernoulli(cfg.noise) ? -1.0 : 1.0;
          row = sign * g;
          break;
        }
        case EnvConfig::Kind::PiecewiseDrift: {
          const double phase = static_cast<double>(t - starts[k]) / std::max(1, len);
          const double theta = cfg.noise * std::sin(2.0 * std::numbers::pi * phase);
          row = std::cos(theta) * g + std::sin(theta) * ortho;
          break;
        }
        case EnvConfig::Kind::StochasticNoise: {
          row = cfg.signal * g;
          for (int n = 0; n < cfg.d; ++n) row[n] += cfg.noise * rng.normal();
          break;
        }
        default:
          break;
      }
      clamp_to_ball(row, q);
      out.rows.row(t) = row.transpose();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

PrefixSums::PrefixSums(const LossSequence& losses)
    : T_(losses.T), d_(losses.d), P_(RowMajorMat::Zero(losses.T + 1, losses.d)) {
  for (int t = 0; t < T_; ++t) P_.row(t + 1) = P_.row(t) + losses.rows.row(t);
}

Vec PrefixSums::interval(int s, int e) const {
  Vec out(d_);
  interval(s, e, out);
  return out;
}

void PrefixSums::interval(int s, int e, Vec& out) const {
  if (s < 0 || e > T_ || s > e) throw ContractViolation("prefix interval out of range");
  out = (P_.row(e) - P_.row(s)).transpose();
}

double best_interval_value(const PrefixSums& prefix, int s, int e, double p) {
  if (e <= s) return 0.0;
  return -lp_norm(prefix.interval(s, e), dual_exponent(p));
}

DpResult dp_switching_comparator(const LossSequence& losses, int S, double p) {
  const int T = losses.T;
  const int d = losses.d;
  if (S < 1 || S > T) throw ContractViolation("dp comparator needs 1 <= S <= T");
  const double q = dual_exponent(p);
  const PrefixSums prefix(losses);

  // Prefix rows copied into a flat array for the O(T^2) inner loop.
  std::vector<double> P(static_cast<std::size_t>(T + 1) * d);
  for (int t = 0; t <= T; ++t) {
    Vec row = prefix.interval(0, t);
    for (int n = 0; n < d; ++n) P[static_cast<std::size_t>(t) * d + n] = row[n];
  }
  auto cost = [&](int s, int e) {
    const double* a = &P[static_cast<std::size_t>(e) * d];
    const double* b = &P[static_cast<std::size_t>(s) * d];
    if (q == 2.0) {
      double acc = 0.0;
      for (int n = 0; n < d; ++n) {
        const double v = a[n] - b[n];
        acc += v * v;
      }
      return -std::sqrt(acc);
    }
    double m = 0.0;
    for (int n = 0; n < d; ++n) m = std::max(m, std::abs(a[n] - b[n]));
    if (m == 0.0) return 0.0;
    double acc = 0.0;
    for (int n = 0; n < d; ++n) acc += std::pow(std::abs(a[n] - b[n]) / m, q);
    return -m * std::pow(acc, 1.0 / q);
  };

  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t W = static_cast<std::size_t>(T + 1);
  // V[k * W + t]: best value covering rounds [0, t) with exactly k segments.
  std::vector<double> V(static_cast<std::size_t>(S + 1) * W, inf);
  std::vector<int> arg(static_cast<std::size_t>(S + 1) * W, -1);
  V[0] = 0.0;
  for (int t = 1; t <= T; ++t) {
    const int kmax = std::min(S, t);
    for (int s = 0; s < t; ++s) {
      const double c = cost(s, t);
      // s rounds covered by k-1 segments needs s >= k-1, and s = 0 only for k = 1.
      for (int k = 1; k <= kmax; ++k) {
        const double prev = V[(k - 1) * W + s];
        if (prev == inf) continue;
        const double cand = prev + c;
        double& cur = V[k * W + t];
        if (cand < cur) {
          cur = cand;
          arg[k * W + t] = s;
        }
      }
    }
  }

  DpResult res;
  res.value = V[S * W + T];
  res.comparator.T = T;
  res.comparator.starts.assign(S, 0);
  int e = T;
  for (int k = S; k >= 1; --k) {
    const int s = arg[k * W + e];
    res.comparator.starts[k - 1] = s;
    e = s;
  }
  res.comparator.anchors.reserve(S);
  for (int k = 0; k < S; ++k) {
    const Vec L = prefix.interval(res.comparator.starts[k], res.comparator.segment_end(k));
    res.comparator.anchors.push_back(linear_min_over_ball(L, p, 1.0).minimizer);
  }
  return res;
}

double comparator_value(const LossSequence& losses, const SwitchingComparator& comparator) {
  double total = 0.0;
  for (int k = 0; k < comparator.segments(); ++k) {
    for (int t = comparator.starts[k]; t < comparator.segment_end(k); ++t) {
      total += losses.rows.row(t).dot(comparator.anchors[k].transpose());
    }
  }
  return total;
}

SwitchingComparator best_arm_comparator(const LossSequence& losses,
                                        const std::vector<int>& starts) {
  SwitchingComparator cmp;
  cmp.T = losses.T;
  cmp.starts = starts;
  const PrefixSums prefix(losses);
  for (int k = 0; k < cmp.segments(); ++k) {
    const Vec L = prefix.interval(cmp.starts[k], cmp.segment_end(k));
    Eigen::Index best = 0;
    L.minCoeff(&best);
    Vec u = Vec::Zero(losses.d);
    u[best] = 1.0;
    cmp.anchors.push_back(u);
  }
  cmp.validate();
  return cmp;
}

// ---------------------------------------------------------------------------

void write_losses(std::ostream& os, const LossSequence& losses) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", losses.p);
  os << "# d=" << losses.d << " T=" << losses.T << " p=" << buf << '\n';
  for (int t = 0; t < losses.T; ++t) {
    for (int n = 0; n < losses.d; ++n) {
      std::snprintf(buf, sizeof buf, "%.17g", losses.rows(t, n));
      if (n) os << ' ';
      os << buf;
    }
    os << '\n';
  }
}

LossSequence read_losses(std::istream& is) {
  std::string line;
  int d = -1, T = -1;
  double p = 2.0;
  bool have_header = false;
  LossSequence out;
  int t = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string tok;
      while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        try {
          if (key == "d") d = std::stoi(val);
          if (key == "T") T = std::stoi(val);
          if (key == "p") p = std::stod(val);
        } catch (const std::exception&) {
          throw ConfigError("loss file: bad header value '" + tok + "'");
        }
      }
      if (d < 1 || T < 1) throw ConfigError("loss file header needs positive d and T");
      out = LossSequence(d, T, p);
      have_header = true;
      continue;
    }
    if (!have_header) throw ConfigError("loss file: data before the '#' header");
    if (t >= T) throw ConfigError("loss file: more rows than T");
    std::istringstream rs(line);
    for (int n = 0; n < d; ++n) {
      double v;
      if (!(rs >> v)) throw ConfigError("loss file: row " + std::to_string(t + 1) + " is short");
      out.rows(t, n) = v;
    }
    std::string extra;
    if (rs >> extra) throw ConfigError("loss file: row " + std::to_string(t + 1) + " is long");
    ++t;
  }
  if (!have_header) throw ConfigError("loss file: missing '#' header");
  if (t != T) throw ConfigError("loss file: expected " + std::to_string(T) + " rows, got " +
                                std::to_string(t));
  return out;
}

LossSequence load_losses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open loss file '" + path + "'");
  return read_losses(in);
}

void save_losses(const std::string& path, const LossSequence& losses) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write loss file '" + path + "'");
  write_losses(out, losses);
}

}  // namespace corral
