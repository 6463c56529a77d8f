#include "corral/base_learner.hpp"

#include <cmath>

namespace corral {

BaseLearner::BaseLearner(int start_round, double eta, double gamma, DomainSpec domain, int d)
    : start_round_(start_round), eta_(eta), gamma_(gamma), domain_(std::move(domain)) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("clipping gamma must lie in (0, 1)");
  if (!(eta > 0.0)) throw ConfigError("base learning rate must be positive");
  if (d < 1) throw ConfigError("dimension must be positive");
  a_ = Vec::Zero(d);
  grad_ = Vec::Zero(d);
  dir_ = Vec::Zero(d);
  scratch_ = Vec::Zero(d);
}

Proposal BaseLearner::propose(RngStream& rng) const {
  Proposal prop;
  prop.xi = rng.bernoulli(norm_) ? 1 : 0;
  if (prop.xi == 0) {
    const auto k = static_cast<int>(rng.below(2 * static_cast<std::uint64_t>(dim())));
    prop.axis = k >> 1;
    prop.sign = (k & 1) ? -1.0 : 1.0;
  }
  return prop;
}

Vec BaseLearner::proposal_vector(const Proposal& prop) const {
  if (prop.xi == 1) return dir_;
  Vec v = Vec::Zero(dim());
  v[prop.axis] = prop.sign;
  return v;
}

double BaseLearner::dot_proposal(const Proposal& prop, const Vec& v) const {
  if (prop.xi == 1) return dir_.dot(v);
  return prop.sign * v[prop.axis];
}

void BaseLearner::set_iterate(Vec a) {
  a_ = std::move(a);
  norm_ = domain_.norm(a_);
  if (domain_.kind == DomainSpec::Kind::Gauge) {
    grad_ = grad_R_gauge(a_, *domain_.oracle);
  } else {
    grad_ = grad_R_lp(a_, domain_.p);
  }
  if (norm_ > 0.0) {
    dir_ = a_ / norm_;
  } else {
    dir_.setZero();
  }
}

void BaseLearner::update(const Vec& loss_hat) {
  if (loss_hat.size() != dim()) throw ContractViolation("loss estimate dimension mismatch");
  if (loss_hat.isZero(0.0)) return;
  if (domain_.kind == DomainSpec::Kind::Gauge) {
    const Vec w = inv_grad_R_gauge(grad_ - eta_ * loss_hat, *domain_.oracle);
    set_iterate(clip_to_gauge_ball(w, *domain_.oracle, radius()));
  } else {
    set_iterate(omd_step_lp(a_, loss_hat, eta_, domain_.p, radius()));
  }
}

void BaseLearner::update_sparse(int axis, double value) {
  if (value == 0.0) return;
  scratch_ = grad_;
  scratch_[axis] -= eta_ * value;
  const double r = radius();
  if (domain_.kind == DomainSpec::Kind::Gauge) {
    set_iterate(clip_to_gauge_ball(inv_grad_R_gauge(scratch_, *domain_.oracle),
                                   *domain_.oracle, r));
    return;
  }
  const double p = domain_.p;
  if (p == 2.0) {
    // Allocation-free closed form; this is the hot loop of the corral update.
    const double g2 = scratch_.squaredNorm();
    const double s = 2.0 / (1.0 + std::sqrt(1.0 + g2));
    const double nw = 0.5 * s * std::sqrt(g2);
    a_ = (0.5 * s) * scratch_;
    if (nw > r) a_ *= r / nw;
    norm_ = a_.norm();
    grad_ = (2.0 / (1.0 - norm_ * norm_)) * a_;
    if (norm_ > 0.0) {
      dir_ = a_ / norm_;
    } else {
      dir_.setZero();
    }
    return;
  }
  double slack = 1.0;
  Vec w = inv_grad_R_lp(scratch_, p, &slack);
  // The Bregman projection is radial for this barrier, so scaling w suffices.
  const double nw = p == 2.0 ? std::sqrt(1.0 - slack) : std::pow(1.0 - slack, 1.0 / p);
  if (nw > r) w *= r / nw;
  set_iterate(std::move(w));
}

}  // namespace corral
