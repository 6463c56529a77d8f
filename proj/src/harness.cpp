#include "corral/harness.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include "corral/mab_recipe.hpp"
#include "corral/unconstrained.hpp"

namespace corral {

int restart_period(int T, int S) {
  if (T < 1 || S < 1 || S > T) throw ConfigError("restart period needs 1 <= S <= T");
  // Smallest k with k^3 * S >= T.
  long long k = static_cast<long long>(std::cbrt(static_cast<double>(T) / S));
  k = std::max(1LL, k - 1);
  while (k * k * k * S < T) ++k;
  return static_cast<int>(k);
}

CorralParams restart_params(double p, int d, int period) {
  // derive_params would reject gamma >= 1 for short periods; evaluate the same
  // formulas, then clamp.
  const double C = std::sqrt(p - 1.0) * std::pow(2.0, -2.0 / (p - 1.0));
  CorralParams cp;
  cp.p = p;
  cp.d = d;
  cp.T = period;
  cp.S = 1;
  cp.C = C;
  const double dd = d, TT = period;
  cp.gamma = std::min(0.5, 4.0 * C * std::sqrt(dd / TT));
  cp.eta = C * std::sqrt(1.0 / (dd * TT));
  cp.epsilon = std::min({std::sqrt(1.0 / (dd * TT)), 1.0 / (16.0 * dd), C * C / 2.0});
  cp.beta = 8.0 * dd * cp.epsilon;
  cp.lambda = C / std::sqrt(dd * TT);
  cp.mu = 1.0 / TT;
  cp.validate();
  return cp;
}

RestartBaseline::RestartBaseline(double p, int d, int T, int S)
    : params_(restart_params(p, d, restart_period(T, S))),
      domain_(DomainSpec::lp_ball(p)),
      d_(d),
      T_(T),
      period_(restart_period(T, S)),
      base_(1, params_.eta, params_.gamma, domain_, d),
      x_(Vec::Zero(d)) {}

const Vec& RestartBaseline::select(RngStream& rng) {
  if (t_ >= T_) throw ContractViolation("horizon exhausted");
  if (t_ % period_ == 0) base_ = BaseLearner(t_ + 1, params_.eta, params_.gamma, domain_, d_);
  ++t_;
  rho_ = rng.bernoulli(params_.beta) ? 1 : 0;
  const Proposal prop = base_.propose(rng);
  if (rho_ == 1) {
    const auto k = static_cast<int>(rng.below(2 * static_cast<std::uint64_t>(d_)));
    played_ = Proposal{0, k >> 1, (k & 1) ? -1.0 : 1.0};
    x_.setZero();
    x_[played_.axis] = played_.sign;
  } else {
    played_ = prop;
    x_ = base_.proposal_vector(prop);
  }
  return x_;
}

void RestartBaseline::observe(double realized) {
  const double D = 1.0 - base_.norm();
  double lhat = 0.0;
  if (rho_ == 0 && played_.xi == 0) {
    lhat = played_.sign * d_ * realized / ((1.0 - params_.beta) * D);
  }
  record_.t = t_;
  record_.x = x_;
  record_.realized_loss = realized;
  record_.rho = rho_;
  record_.xi = rho_ == 0 ? played_.xi : 0;
  record_.chosen = rho_ == 0 ? 0 : -1;
  record_.p_max = 1.0;
  record_.diagnostics.clear();
  record_.diagnostics.emplace_back("D", D);
  base_.update_sparse(played_.axis, lhat);
}

// ---------------------------------------------------------------------------

namespace {

int learner_switches(const ExperimentConfig& cfg) {
  return cfg.comparator.switches > 0 ? cfg.comparator.switches : cfg.env.S;
}

void apply_overrides(const ParamOverrides& o, CorralParams& cp) {
  if (o.gamma) cp.gamma = *o.gamma;
  if (o.eta) cp.eta = *o.eta;
  if (o.epsilon) cp.epsilon = *o.epsilon;
  if (o.mu) cp.mu = *o.mu;
  if (o.beta) cp.beta = *o.beta;
  if (o.lambda) cp.lambda = *o.lambda;
  cp.validate();
}

std::shared_ptr<const GaugeOracle> make_oracle(const ExperimentConfig& cfg, double p, int d) {
  if (cfg.gauge.type == "ellipsoid") {
    if (!cfg.gauge.weights.empty()) {
      if (static_cast<int>(cfg.gauge.weights.size()) != d) {
        throw ConfigError("gauge.weights needs one weight per dimension");
      }
      return std::make_shared<EllipsoidGauge>(
          EllipsoidGauge::diagonal(Eigen::Map<const Vec>(cfg.gauge.weights.data(), d)));
    }
    if (static_cast<int>(cfg.gauge.shape.size()) != d) throw ConfigError("gauge.shape must be d x d");
    Mat A(d, d);
    for (int i = 0; i < d; ++i) {
      if (static_cast<int>(cfg.gauge.shape[i].size()) != d) {
        throw ConfigError("gauge.shape must be d x d");
      }
      for (int j = 0; j < d; ++j) A(i, j) = cfg.gauge.shape[i][j];
    }
    return std::make_shared<EllipsoidGauge>(A);
  }
  return std::make_shared<LpGauge>(p);
}

std::string join_diag(const std::string& a, const std::string& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  return a + ";" + b;
}

template <class Learner>
void run_select_observe(Learner& learner, const LossSequence& losses, RngStream& rng,
                        AlgorithmTrace& tr, bool keep_diag) {
  for (int t = 0; t < losses.T; ++t) {
    const Vec& x = learner.select(rng);
    const double r = losses.rows.row(t).dot(x.transpose());
    learner.observe(r);
    tr.realized[t] = r;
    tr.p_max[t] = learner.last_record().p_max;
    if (keep_diag) tr.diag[t] = format_diagnostics(learner.last_record().diagnostics);
  }
}

}  // namespace

LossSequence make_losses(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!cfg.loss_file.empty()) {
    LossSequence losses = load_losses(cfg.loss_file);
    const bool arms = cfg.algorithms.front() == "mab_recipe";
    const double q = cfg.env.unconstrained ? 2.0 : dual_exponent(losses.p);
    for (int t = 0; t < losses.T; ++t) {
      const Vec row = losses.rows.row(t).transpose();
      const bool ok = arms ? (row.minCoeff() >= 0.0 && row.maxCoeff() <= 1.0)
                           : lp_norm(row, q) <= 1.0 + 1e-12;
      if (!ok) throw ConfigError("loss file row " + std::to_string(t + 1) + " leaves the loss domain");
    }
    return losses;
  }
  RngStream env_rng(seed, kEnvironmentStream);
  LossSequence losses = generate(cfg.env, env_rng);
  const bool gauge_run = std::find(cfg.algorithms.begin(), cfg.algorithms.end(), "corral_gauge") !=
                         cfg.algorithms.end();
  if (gauge_run && cfg.gauge.type == "ellipsoid") {
    // Rows must lie in the polar of the gauge ball, not only the dual l_q ball.
    auto oracle = make_oracle(cfg, losses.p, losses.d);
    for (int t = 0; t < losses.T; ++t) {
      const Vec row = losses.rows.row(t).transpose();
      const double g = oracle->dual_gauge(row);
      if (g > 1.0) losses.rows.row(t) /= g;
    }
  }
  return losses;
}

AlgorithmTrace run_algorithm(const ExperimentConfig& cfg, const std::string& algorithm,
                             const LossSequence& losses, std::uint64_t seed, bool keep_diag) {
  const int T = losses.T, d = losses.d;
  const double p = losses.p;
  const int S = std::min(learner_switches(cfg), T);
  AlgorithmTrace tr;
  tr.realized.assign(T, 0.0);
  tr.p_max.assign(T, 0.0);
  if (keep_diag) tr.diag.assign(T, std::string());
  RngStream rng(seed, kLearnerStream);

  if (algorithm == "corral_lp" || algorithm == "corral_gauge") {
    const bool gauge = algorithm == "corral_gauge";
    CorralParams cp = gauge ? derive_params(p, d, T, S, DomainSpec::Kind::Gauge, cfg.gauge.alpha)
                            : derive_params(p, d, T, S);
    apply_overrides(cfg.overrides, cp);
    DomainSpec domain = DomainSpec::lp_ball(p);
    if (gauge) {
      auto oracle = make_oracle(cfg, p, d);
      RngStream check_rng(seed, 3);
      if (gauge_sandwich_violations(*oracle, d, p, 1000, check_rng) > 0) {
        throw ConfigError("gauge domain is not sandwiched between the l_p and l_q unit balls");
      }
      domain = DomainSpec::gauge(oracle, p, cfg.gauge.alpha);
    }
    tr.params = format_diagnostics(cp.as_diagnostics());
    spdlog::debug("{} seed {}: {}", algorithm, seed, tr.params);
    CorralLearner learner(cp, domain);
    learner.enable_invariant_checks(cfg.check_invariants);
    run_select_observe(learner, losses, rng, tr, keep_diag);
    tr.invariant_checks = learner.invariants().checks;
    tr.invariant_violations = learner.invariants().violations;
    tr.invariant_messages = learner.invariants().messages;
    return tr;
  }

  if (algorithm == "restart_baseline") {
    RestartBaseline learner(p, d, T, S);
    tr.params = join_diag("period=" + std::to_string(learner.period()),
                          format_diagnostics(learner.params().as_diagnostics()));
    spdlog::debug("{} seed {}: {}", algorithm, seed, tr.params);
    run_select_observe(learner, losses, rng, tr, keep_diag);
    return tr;
  }

  if (algorithm == "mab_recipe") {
    MabParams mp = default_mab_params(d, T, cfg.overrides.mab_copies.value_or(8));
    if (cfg.overrides.mab_eta) mp.eta = *cfg.overrides.mab_eta;
    if (cfg.overrides.mab_epsilon) mp.epsilon = *cfg.overrides.mab_epsilon;
    mp.validate();
    char buf[128];
    std::snprintf(buf, sizeof buf, "M=%d;eta=%.17g;epsilon=%.17g", mp.M, mp.eta, mp.epsilon);
    tr.params = buf;
    MabCorral learner(mp);
    for (int t = 0; t < T; ++t) {
      const int arm = learner.select(rng);
      const double r = losses.rows(t, arm);
      learner.observe(r);
      tr.realized[t] = r;
      tr.p_max[t] = learner.last_record().p_max;
      if (cfg.check_invariants) {
        ++tr.invariant_checks;
        if (std::abs(learner.last_bias_mass() - mp.eta * d) > 1e-10) ++tr.invariant_violations;
      }
      if (keep_diag) tr.diag[t] = format_diagnostics(learner.last_record().diagnostics);
    }
    return tr;
  }

  const LearnerGrid grid = cfg.unconstrained.full_grid ? build_full_grid(T)
                                                       : build_grid(T, cfg.unconstrained.d_max);
  if (algorithm == "unconstrained_oco") {
    char buf[96];
    std::snprintf(buf, sizeof buf, "H=%d;R=%d;N=%d", grid.H, grid.R, grid.N());
    tr.params = buf;
    UnconstrainedOco learner(d, grid);
    learner.enable_invariant_checks(cfg.check_invariants);
    Vec g(d);
    for (int t = 0; t < T; ++t) {
      const Vec& v = learner.predict();
      g = losses.rows.row(t).transpose();
      const double r = g.dot(v);
      const double vnorm = v.norm();
      learner.update(g);
      tr.realized[t] = r;
      tr.p_max[t] = learner.weights().maxCoeff();
      if (keep_diag) {
        std::vector<std::pair<std::string_view, double>> dg{{"v_norm", vnorm}};
        tr.diag[t] = format_diagnostics(dg);
      }
    }
    tr.invariant_checks = learner.invariants().checks;
    tr.invariant_violations = learner.invariants().violations;
    return tr;
  }

  if (algorithm == "unconstrained_reduction") {
    CorralParams cp = derive_params(2.0, d, T, S);
    apply_overrides(cfg.overrides, cp);
    CorralLearner direction(cp, DomainSpec::lp_ball(2.0));
    direction.enable_invariant_checks(cfg.check_invariants);
    std::unique_ptr<ScalarLearner> magnitude;
    if (cfg.unconstrained.magnitude == "frozen") {
      magnitude = std::make_unique<FrozenScalar>(cfg.unconstrained.frozen_value);
    } else {
      auto oco = std::make_unique<OcoScalar>(grid);
      oco->oco().enable_invariant_checks(cfg.check_invariants);
      magnitude = std::move(oco);
    }
    ScalarLearner* mag_ptr = magnitude.get();
    const double v_min = cfg.unconstrained.v_min > 0.0 ? cfg.unconstrained.v_min
                                                       : 1.0 / (static_cast<double>(T) * T);
    Reduction red(std::move(direction), std::move(magnitude), v_min);
    char buf[160];
    std::snprintf(buf, sizeof buf, "v_min=%.17g;H=%d;R=%d", v_min, grid.H, grid.R);
    tr.params = join_diag(buf, format_diagnostics(cp.as_diagnostics()));
    tr.v.assign(T, 0.0);
    tr.z.assign(T, Vec());
    for (int t = 0; t < T; ++t) {
      const Vec& x = red.select(rng);
      const double r = losses.rows.row(t).dot(x.transpose());
      red.observe(r);
      tr.realized[t] = r;
      tr.v[t] = red.last_v();
      tr.z[t] = red.last_z();
      tr.p_max[t] = red.direction().last_record().p_max;
      if (keep_diag) {
        std::vector<std::pair<std::string_view, double>> dg{{"v", red.last_v()},
                                                            {"v_raw", red.last_v_raw()}};
        tr.diag[t] = format_diagnostics(dg);
      }
    }
    if (red.floored_rounds() > 0) {
      spdlog::debug("reduction seed {}: |v| floored at {} in {} rounds", seed, v_min,
                   red.floored_rounds());
    }
    tr.params = join_diag(tr.params, "floored=" + std::to_string(red.floored_rounds()));
    tr.invariant_checks = red.direction().invariants().checks;
    tr.invariant_violations = red.direction().invariants().violations;
    tr.invariant_messages = red.direction().invariants().messages;
    if (auto* oco = dynamic_cast<OcoScalar*>(mag_ptr)) {
      tr.invariant_checks += oco->oco().invariants().checks;
      tr.invariant_violations += oco->oco().invariants().violations;
    }
    return tr;
  }

  throw ConfigError("unknown algorithm '" + algorithm + "'");
}

std::vector<LabeledComparator> make_comparators(const ExperimentConfig& cfg,
                                                const std::string& algorithm,
                                                const LossSequence& losses) {
  const int S = std::min(learner_switches(cfg), losses.T);
  SwitchingComparator base;
  if (cfg.comparator.user_supplied()) {
    base.T = losses.T;
    base.starts = cfg.comparator.starts;
    base.anchors = cfg.comparator.anchors;
    base.validate();
    for (const auto& a : base.anchors) {
      if (a.size() != losses.d) throw ConfigError("comparator anchor dimension mismatch");
      if (!is_unconstrained_algorithm(algorithm) && algorithm != "mab_recipe" &&
          lp_norm(a, losses.p) > 1.0 + 1e-12) {
        throw ConfigError("comparator anchor lies outside the unit l_p ball");
      }
    }
  } else if (algorithm == "mab_recipe") {
    base = best_arm_comparator(losses, even_partition(losses.T, S));
  } else {
    base = dp_switching_comparator(losses, S, is_unconstrained_algorithm(algorithm) ? 2.0 : losses.p)
               .comparator;
  }

  std::vector<LabeledComparator> out;
  if (!is_unconstrained_algorithm(algorithm) || cfg.comparator.norms.empty()) {
    out.push_back({algorithm, base});
    return out;
  }
  for (double U : cfg.comparator.norms) {
    LabeledComparator lc;
    char buf[64];
    std::snprintf(buf, sizeof buf, "[U=%g]", U);
    lc.label = algorithm + buf;
    lc.comparator = base;
    for (auto& a : lc.comparator.anchors) a *= U;
    out.push_back(std::move(lc));
  }
  return out;
}

std::vector<int> checkpoints(int T, bool full_trace) {
  std::vector<int> cps;
  if (full_trace) {
    for (int t = 1; t <= T; ++t) cps.push_back(t);
    return cps;
  }
  for (int t : {T / 4, T / 2, T}) {
    if (t >= 1 && (cps.empty() || cps.back() != t)) cps.push_back(t);
  }
  return cps;
}

namespace {

struct SeedOutput {
  std::vector<TraceRow> rows;
  bool numerical = false;
  std::vector<std::string> errors;
};

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '"') c = ' ';
  }
  return s;
}

SeedOutput run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedOutput out;
  const LossSequence losses = make_losses(cfg, seed);
  const std::vector<int> cps = checkpoints(losses.T, cfg.full_trace);
  for (const auto& algorithm : cfg.algorithms) {
    const auto comparators = make_comparators(cfg, algorithm, losses);
    AlgorithmTrace tr;
    try {
      tr = run_algorithm(cfg, algorithm, losses, seed, true);
    } catch (const NumericalError& e) {
      out.numerical = true;
      out.errors.push_back(algorithm + " seed " + std::to_string(seed) + ": " + e.what());
      for (const auto& lc : comparators) {
        TraceRow row;
        row.run_id = cfg.run_id;
        row.seed = seed;
        row.algorithm = lc.label;
        row.t = 0;
        row.realized_loss = std::nan("");
        row.cum_loss = std::nan("");
        row.cum_regret = std::nan("");
        row.p_max = std::nan("");
        row.diag = "error=" + format_double(e.residual()) + ";message=" + sanitize(e.what());
        out.rows.push_back(std::move(row));
      }
      continue;
    } catch (const InvariantViolation& e) {
      // Treated as a numerical failure of the run rather than a config problem.
      out.numerical = true;
      out.errors.push_back(algorithm + " seed " + std::to_string(seed) + ": " + e.what());
      continue;
    }
    if (tr.invariant_violations > 0) {
      out.errors.push_back(algorithm + " seed " + std::to_string(seed) + ": " +
                           std::to_string(tr.invariant_violations) + " invariant violations");
    }
    for (const auto& lc : comparators) {
      const RegretReport rep = compute_regret(tr.realized, losses, lc.comparator);
      double cum_loss = 0.0, cum_regret = 0.0;
      std::size_t next = 0;
      for (int t = 1; t <= losses.T && next < cps.size(); ++t) {
        cum_loss += tr.realized[t - 1];
        cum_regret += rep.per_round[t - 1];
        if (t != cps[next]) continue;
        ++next;
        TraceRow row;
        row.run_id = cfg.run_id;
        row.seed = seed;
        row.algorithm = lc.label;
        row.t = t;
        row.realized_loss = tr.realized[t - 1];
        row.cum_loss = cum_loss;
        row.cum_regret = cum_regret;
        row.segment_id = lc.comparator.segment_of(t - 1) + 1;
        row.p_max = tr.p_max[t - 1];
        std::string diag = tr.diag[t - 1];
        if (t == 1 || t == losses.T || !cfg.full_trace) diag = join_diag(tr.params, diag);
        if (cfg.check_invariants && t == losses.T) {
          diag = join_diag(diag, "invariant_checks=" + std::to_string(tr.invariant_checks) +
                                     ";invariant_violations=" +
                                     std::to_string(tr.invariant_violations));
        }
        row.diag = diag;
        out.rows.push_back(std::move(row));
      }
    }
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  const std::size_t n = cfg.seeds.size();
  std::vector<SeedOutput> outputs(n);
  std::vector<std::exception_ptr> failures(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        spdlog::debug("run {} seed {} starting", cfg.run_id, cfg.seeds[i]);
        outputs[i] = run_seed(cfg, cfg.seeds[i]);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < workers; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  // Config-level problems surface in seed order, independent of scheduling.
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  ExperimentResult res;
  for (auto& o : outputs) {
    res.numerical_failure = res.numerical_failure || o.numerical;
    for (auto& e : o.errors) res.errors.push_back(std::move(e));
    for (auto& r : o.rows) res.rows.push_back(std::move(r));
  }
  return res;
}

}  // namespace corral
