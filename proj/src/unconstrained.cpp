#include "corral/unconstrained.hpp"

#include <algorithm>
#include <cmath>

namespace corral {

int ceil_log2(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw ContractViolation("ceil_log2 needs a positive value");
  int k = static_cast<int>(std::ceil(std::log2(x)));
  while (std::ldexp(1.0, k) < x) ++k;
  while (std::ldexp(1.0, k - 1) >= x) --k;
  return k;
}

namespace {

LearnerGrid make_grid(int T, int H) {
  LearnerGrid g;
  g.T = T;
  g.R = ceil_log2(T);
  g.H = H;
  if (g.H < 1) throw ConfigError("grid has no scales; increase D_max");
  if (g.H > 1000) throw ConfigError("grid too large; use a capped D_max");
  const double TT = T;
  g.scales.resize(g.H);
  for (int i = 1; i <= g.H; ++i) g.scales[i - 1] = std::ldexp(1.0, i - 1) / TT;
  g.rates.resize(g.R);
  for (int r = 1; r <= g.R; ++r) g.rates[r - 1] = 1.0 / (32.0 * std::ldexp(1.0, r));

  const int N = g.N();
  g.floors.resize(N);
  g.prior.resize(N);
  g.step_rates.resize(N);
  for (int i = 1; i <= g.H; ++i) {
    const double c = g.scales[i - 1];
    for (int r = 1; r <= g.R; ++r) {
      const int j = (i - 1) * g.R + (r - 1);
      const double eta = g.rates[r - 1];
      g.floors[j] = 1.0 / (TT * TT * std::ldexp(1.0, 2 * i));
      g.prior[j] = (eta * eta) / (c * c);
      g.step_rates[j] = eta / c;
    }
  }
  g.prior /= g.prior.sum();

  double weighted = 0.0;
  for (int j = 0; j < N; ++j) weighted += g.prior[j] / g.step_rates[j];
  if (weighted > 144.0 / TT * (1.0 + 1e-12)) {
    throw InvariantViolation("grid prior: sum (c/eta) w1 exceeds 144/T");
  }
  for (int j = 0; j < N; ++j) {
    if (g.prior[j] < g.floors[j]) throw InvariantViolation("grid prior below its floor");
  }
  return g;
}

}  // namespace

LearnerGrid build_grid(int T, double D_max) {
  if (T < 2) throw ConfigError("unconstrained grid needs T >= 2");
  if (!(D_max >= 1.0 / T)) throw ConfigError("D_max must be at least 1/T");
  return make_grid(T, ceil_log2(T) + ceil_log2(D_max) + 1);
}

LearnerGrid build_full_grid(int T) {
  if (T < 2) throw ConfigError("unconstrained grid needs T >= 2");
  return make_grid(T, ceil_log2(T) + T + 1);
}

// ---------------------------------------------------------------------------

StronglyAdaptiveLearner::StronglyAdaptiveLearner(int d, double radius, int T)
    : d_(d), radius_(radius) {
  if (d < 1) throw ConfigError("dimension must be positive");
  if (!(radius > 0.0)) throw ConfigError("interval learner radius must be positive");
  levels_ = std::max(1, ceil_log2(std::max(2, T)) + 1);
  iterates_.assign(static_cast<std::size_t>(levels_ * d_), 0.0);
  elapsed_.assign(levels_, 0.0);
  log_w_.assign(levels_, 0.0);
  eta_.resize(levels_);
  mix_.resize(levels_);
  for (int j = 0; j < levels_; ++j) eta_[j] = std::min(0.5, 1.0 / std::sqrt(std::ldexp(1.0, j)));
  out_ = Vec::Zero(d);
}

const Vec& StronglyAdaptiveLearner::predict() {
  if (predicted_) return out_;
  for (int j = 0; j < levels_; ++j) {
    if (tau_ % (1LL << j) == 0) {
      std::fill_n(iterates_.begin() + j * d_, d_, 0.0);
      elapsed_[j] = 0.0;
      log_w_[j] = std::log(eta_[j]);
    }
  }
  double top = -INFINITY;
  for (int j = 0; j < levels_; ++j) {
    mix_[j] = std::log(eta_[j]) + log_w_[j];
    top = std::max(top, mix_[j]);
  }
  double total = 0.0;
  for (int j = 0; j < levels_; ++j) {
    mix_[j] = std::exp(mix_[j] - top);
    total += mix_[j];
  }
  out_.setZero();
  for (int j = 0; j < levels_; ++j) {
    mix_[j] /= total;
    for (int n = 0; n < d_; ++n) out_[n] += mix_[j] * iterates_[j * d_ + n];
  }
  // Convex combination of ball points; rounding can only nudge the norm.
  const double nrm = out_.norm();
  if (nrm > radius_) out_ *= radius_ / nrm;
  predicted_ = true;
  return out_;
}

void StronglyAdaptiveLearner::update(const Vec& gradient) {
  if (!predicted_) predict();
  const double gv = gradient.dot(out_);
  for (int j = 0; j < levels_; ++j) {
    double* v = &iterates_[j * d_];
    double gvj = 0.0;
    for (int n = 0; n < d_; ++n) gvj += gradient[n] * v[n];
    const double r = std::clamp((gv - gvj) / (2.0 * radius_), -1.0, 1.0);
    log_w_[j] += std::log1p(eta_[j] * r);

    elapsed_[j] += 1.0;
    const double step = radius_ / std::sqrt(elapsed_[j]);
    double sq = 0.0;
    for (int n = 0; n < d_; ++n) {
      v[n] -= step * gradient[n];
      sq += v[n] * v[n];
    }
    if (sq > radius_ * radius_) {
      const double s = radius_ / std::sqrt(sq);
      for (int n = 0; n < d_; ++n) v[n] *= s;
    }
  }
  ++tau_;
  predicted_ = false;
}

// ---------------------------------------------------------------------------

Vec weighted_entropy_omd_update(const Vec& w, const Vec& meta_loss, const Vec& correction,
                                const LearnerGrid& grid) {
  if (w.size() != grid.N() || meta_loss.size() != grid.N() || correction.size() != grid.N()) {
    throw ContractViolation("weighted entropy update: size mismatch with grid");
  }
  const Vec z = meta_loss + correction;
  FlooredStep step = floored_mirror_step(w, z, grid.step_rates, grid.floors);
  if (!(step.residual <= 1e-9)) throw NumericalError("weighted entropy update", step.residual);
  return std::move(step.w);
}

UnconstrainedOco::UnconstrainedOco(int d, LearnerGrid grid) : d_(d), grid_(std::move(grid)) {
  if (d < 1) throw ConfigError("dimension must be positive");
  for (int i = 0; i < grid_.H; ++i) {
    bases_.push_back(std::make_unique<StronglyAdaptiveLearner>(d, grid_.scales[i], grid_.T));
  }
  base_preds_.assign(grid_.H, Vec::Zero(d));
  w_ = grid_.prior;
  v_ = Vec::Zero(d);
  meta_loss_ = Vec::Zero(grid_.N());
  correction_ = Vec::Zero(grid_.N());
}

const Vec& UnconstrainedOco::predict() {
  if (predicted_) return v_;
  v_.setZero();
  for (int i = 0; i < grid_.H; ++i) {
    base_preds_[i] = bases_[i]->predict();
    double mass = 0.0;
    for (int r = 0; r < grid_.R; ++r) mass += w_[i * grid_.R + r];
    v_ += mass * base_preds_[i];
  }
  predicted_ = true;
  return v_;
}

void UnconstrainedOco::update(const Vec& gradient) {
  if (gradient.size() != d_) throw ContractViolation("gradient dimension mismatch");
  if (gradient.norm() > 1.0 + 1e-12) throw ContractViolation("gradient norm exceeds 1");
  if (!predicted_) predict();
  for (int i = 0; i < grid_.H; ++i) {
    const double li = gradient.dot(base_preds_[i]);
    for (int r = 0; r < grid_.R; ++r) {
      const int j = i * grid_.R + r;
      const double k = grid_.step_rates[j];
      meta_loss_[j] = li;
      correction_[j] = 32.0 * k * li * li;
      if (check_) {
        const double bound = 32.0 * k * std::abs(li);
        report_.worst_correction = std::max(report_.worst_correction, bound);
        ++report_.checks;
        if (bound > 1.0 + 1e-12) ++report_.violations;
      }
    }
  }
  w_ = weighted_entropy_omd_update(w_, meta_loss_, correction_, grid_);
  if (check_) {
    report_.checks += 2;
    if (std::abs(w_.sum() - 1.0) > 1e-12) ++report_.violations;
    if (((w_ - grid_.floors).array() < -1e-15).any()) ++report_.violations;
  }
  for (auto& base : bases_) base->update(gradient);
  predicted_ = false;
}

OcoScalar::OcoScalar(LearnerGrid grid) : oco_(1, std::move(grid)), g_(Vec::Zero(1)) {}

double OcoScalar::predict() { return oco_.predict()[0]; }

void OcoScalar::update(double gradient) {
  g_[0] = gradient;
  oco_.update(g_);
}

// ---------------------------------------------------------------------------

Reduction::Reduction(CorralLearner direction, std::unique_ptr<ScalarLearner> magnitude,
                     double v_min)
    : direction_(std::move(direction)), magnitude_(std::move(magnitude)), v_min_(v_min) {
  if (direction_.params().p != 2.0) throw ConfigError("the reduction needs the p = 2 corral learner");
  if (!magnitude_) throw ConfigError("the reduction needs a magnitude learner");
  if (!(v_min > 0.0)) throw ConfigError("v_min must be positive");
}

const Vec& Reduction::select(RngStream& rng) {
  v_raw_ = magnitude_->predict();
  v_ = v_raw_;
  if (std::abs(v_) < v_min_) {
    v_ = v_raw_ < 0.0 ? -v_min_ : v_min_;
    ++floored_;
  }
  z_ = direction_.select(rng);
  x_ = v_ * z_;
  return x_;
}

void Reduction::observe(double realized) {
  scaled_ = realized / v_;
  direction_.observe(scaled_);
  magnitude_->update(scaled_);
}

}  // namespace corral
