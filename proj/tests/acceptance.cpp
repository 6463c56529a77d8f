// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "corral/corral_learner.hpp"
#include "corral/environments.hpp"
#include "corral/geometry.hpp"
#include "corral/harness.hpp"
#include "corral/mab_recipe.hpp"
#include "oracles.hpp"

using namespace corral;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::string csv_of(const ExperimentResult& r) {
  std::ostringstream os;
  write_csv(os, r.rows);
  return os.str();
}

// final-round cum_regret per algorithm label
std::map<std::string, std::vector<double>> final_regrets(const ExperimentResult& r, int T) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& row : r.rows)
    if (row.t == T) out[row.algorithm].push_back(row.cum_regret);
  return out;
}

// ---------------------------------------------------------------------------

Outcome estimator_unbiasedness() {
  const auto t0 = Clock::now();
  const int d = 3;
  const CorralParams cp = derive_params(2.0, d, 1000, 2);
  CorralLearner learner(cp, DomainSpec::lp_ball(2.0));
  RngStream rng(5), env(6);
  Vec loss(d);
  loss << 0.5, -0.7, 0.2;
  loss /= loss.norm();
  // a few rounds with strong losses so the bases move off the origin
  for (int t = 0; t < 5; ++t) {
    const Vec& x = learner.select(rng);
    Vec l(d);
    for (int i = 0; i < d; ++i) l[i] = env.normal();
    l /= l.norm();
    learner.observe(l.dot(x));
  }
  if (learner.active() != 5) return {false, "expected 5 active bases"};

  const long N = 1000000;
  Vec s1 = Vec::Zero(d), q1 = Vec::Zero(d), s2 = Vec::Zero(d), q2 = Vec::Zero(d);
  RoundDraw dr;
  Vec lh, lb;
  RngStream mc(7);
  for (long k = 0; k < N; ++k) {
    learner.draw(mc, dr);
    learner.estimates(dr, loss, lh, lb);
    s1 += lh;
    q1 += lh.cwiseProduct(lh);
    s2 += lb;
    q2 += lb.cwiseProduct(lb);
  }
  double worst = 0.0;
  bool ok = true;
  for (int i = 0; i < d; ++i) {
    for (auto [s, q] : {std::pair{s1[i], q1[i]}, std::pair{s2[i], q2[i]}}) {
      const double mean = s / N;
      const double sd = std::sqrt(std::max(0.0, q / N - mean * mean));
      const double z = std::abs(mean - loss[i]) / (sd / std::sqrt(double(N)));
      worst = std::max(worst, z);
      ok = ok && z <= 5.0;
    }
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 30, fmt("max |mean - l| = %.2f sigma/sqrt(N), %.1f s", worst, secs)};
}

Outcome mirror_solver() {
  const auto t0 = Clock::now();
  RngStream rng(21);
  double round_trip = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int d = 1 + static_cast<int>(rng.below(5));
    const double p = 1.05 + 0.95 * rng.uniform();
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.normal();
    x *= (0.999 * rng.uniform()) / lp_norm(x, p);
    const Vec back = inv_grad_R_lp(grad_R_lp(x, p), p);
    round_trip = std::max(round_trip, (back - x).cwiseAbs().maxCoeff());
  }

  double proj_err = 0.0, kkt = 0.0;
  for (int k = 0; k < 60; ++k) {
    const int d = 2 + static_cast<int>(rng.below(2));
    const double p = 1.2 + 0.8 * rng.uniform();
    const double r = 0.5 + 0.4 * rng.uniform();
    Vec w(d);
    for (int i = 0; i < d; ++i) w[i] = rng.normal();
    w *= (r + (0.995 - r) * rng.uniform()) / lp_norm(w, p);
    const Vec a = bregman_project_lp(w, p, r);
    const Vec ref = oracle::compass_minimize_on_ball(
        [&](const oracle::Vec& u) { return oracle::bregman(u, w, p); }, w, p, r);
    proj_err = std::max(proj_err, (a - ref).cwiseAbs().maxCoeff());
    kkt = std::max(kkt, lp_projection_kkt_residual(a, w, p, r));
  }
  const double secs = seconds_since(t0);
  const bool ok = round_trip <= 1e-9 && proj_err <= 1e-4 && kkt <= 1e-8 && secs < 30;
  return {ok, fmt("round trip %.1e, projection vs oracle %.1e, KKT %.1e, %.1f s", round_trip,
                  proj_err, kkt, secs)};
}

Outcome dp_oracle() {
  RngStream rng(31);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const int T = 1 + static_cast<int>(rng.below(12));
    const int S = 1 + static_cast<int>(rng.below(std::min(3, T)));
    const int d = 1 + static_cast<int>(rng.below(3));
    const double p = 1.1 + 0.9 * rng.uniform();
    LossSequence L(d, T, p);
    std::vector<oracle::Vec> rows;
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < d; ++i) L.rows(t, i) = rng.normal();
      rows.push_back(L.row(t).transpose());
    }
    const double dp = dp_switching_comparator(L, S, p).value;
    worst = std::max(worst, std::abs(dp - oracle::brute_switching_value(rows, S, p)));
  }
  return {worst <= 1e-10, fmt("max |dp - brute force| = %.1e over 200 instances", worst)};
}

Outcome reduction_identity() {
  double worst = 0.0;
  for (int run = 0; run < 10; ++run) {
    ExperimentConfig cfg = parse_config(R"({"algorithm": "unconstrained_reduction",
      "environment": {"kind": "piecewise_fixed", "d": 3, "T": 500, "S": 3, "noise": 0.2},
      "comparator": {"norms": [0.5, 3]}})");
    const std::uint64_t seed = 100 + run;
    const LossSequence L = make_losses(cfg, seed);
    const AlgorithmTrace tr = run_algorithm(cfg, "unconstrained_reduction", L, seed);
    for (const auto& lc : make_comparators(cfg, "unconstrained_reduction", L)) {
      const SwitchingComparator& c = lc.comparator;
      double lhs = 0.0, rhs = 0.0;
      for (int k = 0; k < c.segments(); ++k) {
        const Vec& u = c.anchors[k];
        const double un = u.norm();
        if (un == 0.0) return {false, "zero comparator anchor"};
        double a = 0.0, b = 0.0;
        for (int t = c.starts[k]; t < c.segment_end(k); ++t) {
          const Vec l = L.row(t).transpose();
          lhs += tr.realized[t] - l.dot(u);
          a += (tr.v[t] - un) * l.dot(tr.z[t]);
          b += l.dot(tr.z[t] - u / un);
        }
        rhs += a + un * b;
      }
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  }
  return {worst <= 1e-10, fmt("max |LHS - RHS| = %.1e over 10 runs x 2 comparators", worst)};
}

Outcome sqrt_scaling() {
  const auto t0 = Clock::now();
  auto mean_final = [](int T) {
    ExperimentConfig cfg = parse_config(R"({"algorithm": "corral_lp",
      "environment": {"kind": "piecewise_fixed", "d": 4, "p": 2, "T": 2500, "S": 4, "noise": 0},
      "seeds": {"first": 1, "count": 20}})");
    cfg.env.T = T;
    const auto r = final_regrets(run_experiment(cfg), T);
    return mean_stderr(r.at("corral_lp"));
  };
  const MeanStderr small = mean_final(2500), big = mean_final(10000);
  const double ratio = big.mean / small.mean;
  const double secs = seconds_since(t0);
  return {ratio >= 1.4 && ratio <= 2.8 && secs <= 300,
          fmt("regret(1e4) = %.1f +- %.1f, regret(2500) = %.1f +- %.1f, ratio %.3f, %.0f s",
              big.mean, big.stderr_, small.mean, small.stderr_, ratio, secs)};
}

Outcome beats_restart() {
  const ExperimentConfig cfg = parse_config(R"({"algorithm": ["corral_lp", "restart_baseline"],
    "environment": {"kind": "piecewise_fixed", "d": 4, "p": 2, "T": 10000, "S": 8, "noise": 0},
    "seeds": {"first": 1, "count": 20}})");
  const auto r = final_regrets(run_experiment(cfg), 10000);
  const MeanStderr c = mean_stderr(r.at("corral_lp")), b = mean_stderr(r.at("restart_baseline"));
  const double pooled = std::sqrt(c.stderr_ * c.stderr_ + b.stderr_ * b.stderr_);
  const bool ok = c.mean <= 0.9 * b.mean && (b.mean - c.mean) > 2 * pooled;
  return {ok, fmt("corral %.1f +- %.1f, restart %.1f +- %.1f, gap %.1f pooled stderr", c.mean,
                  c.stderr_, b.mean, b.stderr_, (b.mean - c.mean) / pooled)};
}

Outcome comparator_adaptivity() {
  const ExperimentConfig cfg = parse_config(R"({"algorithm": "unconstrained_oco",
    "environment": {"kind": "piecewise_fixed", "d": 1, "T": 10000, "S": 2, "noise": 0.3},
    "comparator": {"norms": [0.1, 1, 10]},
    "seeds": {"first": 1, "count": 10}})");
  const auto r = final_regrets(run_experiment(cfg), 10000);
  const double r01 = mean_stderr(r.at("unconstrained_oco[U=0.1]")).mean;
  const double r1 = mean_stderr(r.at("unconstrained_oco[U=1]")).mean;
  const double r10 = mean_stderr(r.at("unconstrained_oco[U=10]")).mean;
  const double hi = r10 / r1, lo = r01 / r1;
  const bool ok = r1 > 0 && hi >= 3 && hi <= 30 && lo <= 1;
  return {ok, fmt("regret U=0.1: %.1f, U=1: %.1f, U=10: %.1f; ratios %.2f and %.3f", r01, r1,
                  r10, hi, lo)};
}

Outcome invariant_fuzz() {
  long long checks = 0, violations = 0;
  std::string first;
  for (const char* text : {
           R"({"algorithm": "corral_lp", "check_invariants": true,
               "environment": {"kind": "piecewise_drift", "d": 4, "p": 1.5, "T": 10000, "S": 4, "noise": 0.5}})",
           R"({"algorithm": "corral_gauge", "check_invariants": true, "gauge": {"alpha": 2},
               "environment": {"kind": "stochastic_noise", "d": 3, "p": 1.3, "T": 10000, "S": 5, "noise": 0.4}})",
           R"({"algorithm": ["unconstrained_oco", "unconstrained_reduction"], "check_invariants": true,
               "environment": {"kind": "piecewise_fixed", "d": 3, "T": 10000, "S": 4, "noise": 0.2}})",
       }) {
    const ExperimentConfig cfg = parse_config(text);
    const LossSequence L = make_losses(cfg, 1);
    for (const auto& alg : cfg.algorithms) {
      const AlgorithmTrace tr = run_algorithm(cfg, alg, L, 1);
      checks += tr.invariant_checks;
      violations += tr.invariant_violations;
      if (first.empty() && !tr.invariant_messages.empty()) first = tr.invariant_messages.front();
    }
  }
  return {checks > 0 && violations == 0,
          fmt("%lld checks, %lld violations%s%s", checks, violations, first.empty() ? "" : ": ",
              first.c_str())};
}

Outcome determinism() {
  int configs = 0;
  for (const char* text : {
           R"({"algorithm": ["corral_lp", "restart_baseline"], "environment": {"d": 3, "T": 400, "S": 3, "p": 1.6, "noise": 0.2}, "seeds": [4, 9]})",
           R"({"algorithm": "corral_gauge", "environment": {"kind": "piecewise_drift", "d": 2, "T": 300, "S": 2, "p": 1.5, "noise": 0.5}, "gauge": {"type": "ellipsoid", "weights": [1, 1]}})",
           R"({"algorithm": "mab_recipe", "environment": {"kind": "bernoulli_arms", "d": 5, "T": 500, "S": 2, "noise": 0.2}, "seeds": [1, 2, 3]})",
           R"({"algorithm": ["unconstrained_oco", "unconstrained_reduction"], "environment": {"d": 2, "T": 300, "S": 2}, "comparator": {"norms": [1, 5]}})",
       }) {
    ExperimentConfig cfg = parse_config(text);
    const std::string a = csv_of(run_experiment(cfg, 1));
    const std::string b = csv_of(run_experiment(cfg, 2));
    cfg.full_trace = true;
    const std::string c = csv_of(run_experiment(cfg, 1));
    const std::string e = csv_of(run_experiment(cfg, 1));
    if (a != b || c != e || a.empty()) return {false, fmt("config %d differs between replays", configs)};
    ++configs;
  }
  return {true, fmt("%d configs byte-identical across replays and worker counts", configs)};
}

Outcome bias_identities() {
  double worst_corral = 0.0, worst_mab = 0.0;
  {
    const int T = 1000;
    const CorralParams cp = derive_params(1.7, 3, T, 3);
    CorralLearner learner(cp, DomainSpec::lp_ball(1.7));
    RngStream rng(3), env(4);
    const double target = 1.0 / (cp.lambda * T * (1 - cp.beta));
    for (int t = 0; t < T; ++t) {
      Vec l(3);
      for (int i = 0; i < 3; ++i) l[i] = env.normal();
      l /= lp_norm(l, dual_exponent(1.7));
      const Vec& x = learner.select(rng);
      const Vec p_hat = learner.renormalized();
      learner.observe(l.dot(x));
      worst_corral = std::max(worst_corral, std::abs(p_hat.dot(learner.last_bias()) - target));
    }
  }
  {
    const int T = 1000, d = 6;
    MabCorral mab(default_mab_params(d, T, 8));
    RngStream rng(5), env(6);
    for (int t = 0; t < T; ++t) {
      const Vec p = mab.weights();
      const int arm = mab.select(rng);
      mab.observe(env.uniform() * (arm == 2 ? 0.5 : 1.0));
      worst_mab = std::max(worst_mab, std::abs(p.dot(mab.last_bias()) - mab.params().eta * d));
    }
  }
  return {worst_corral <= 1e-10 && worst_mab <= 1e-10,
          fmt("corral max error %.1e, mab max error %.1e over 1000 rounds", worst_corral, worst_mab)};
}

}  // namespace

int main(int argc, char** argv) {
  // optional: run only the listed criterion numbers
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"estimator unbiasedness", estimator_unbiasedness},
      {"mirror solver", mirror_solver},
      {"dp comparator vs brute force", dp_oracle},
      {"reduction decomposition identity", reduction_identity},
      {"sqrt(T) scaling of switching regret", sqrt_scaling},
      {"corral beats periodic restart", beats_restart},
      {"comparator adaptivity", comparator_adaptivity},
      {"invariant fuzz", invariant_fuzz},
      {"determinism", determinism},
      {"bias identities", bias_identities},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), int(i + 1)) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
