#include "corral/mab_recipe.hpp"

#include <algorithm>
#include <cmath>

namespace corral {

Vec clipped_entropy_step(const Vec& prev, const Vec& loss_hat, double eta) {
  const auto d = prev.size();
  if (!(eta > 0.0) || d * eta > 1.0 + 1e-15) {
    throw ConfigError("clipped simplex is empty: d * eta must not exceed 1");
  }
  if (loss_hat.isZero(0.0)) return prev;
  return floored_mirror_step(prev, loss_hat, Vec::Constant(d, eta), Vec::Constant(d, eta)).w;
}

void MabParams::validate() const {
  if (d < 2) throw ConfigError("mab_recipe needs d >= 2 arms");
  if (T < 1) throw ConfigError("horizon T must be >= 1");
  if (M < 1) throw ConfigError("mab_recipe needs M >= 1 base copies");
  if (!(eta > 0.0) || d * eta > 1.0) throw ConfigError("clip eta must satisfy 0 < d * eta <= 1");
  if (!(epsilon > 0.0)) throw ConfigError("meta learning rate epsilon must be positive");
}

MabParams default_mab_params(int d, int T, int M) {
  MabParams mp;
  mp.d = d;
  mp.T = T;
  mp.M = M;
  mp.eta = std::sqrt(std::log(static_cast<double>(d)) / (static_cast<double>(d) * T));
  // ln 1 = 0 would zero the rate; a single copy makes the meta layer inert anyway.
  mp.epsilon = std::sqrt(std::log(std::max(2.0, static_cast<double>(M))) /
                         (4.0 * static_cast<double>(d) * T));
  mp.validate();
  return mp;
}

MabCorral::MabCorral(const MabParams& params) : params_(params) {
  params_.validate();
  const int d = params_.d;
  bases_.assign(static_cast<std::size_t>(params_.M), Vec::Constant(d, 1.0 / d));
  p_ = Vec::Constant(params_.M, 1.0 / params_.M);
  q_ = Vec::Constant(d, 1.0 / d);
  b_ = Vec::Zero(params_.M);
  c_hat_ = Vec::Zero(params_.M);
  ell_hat_ = Vec::Zero(d);
  rates_ = Vec::Constant(d, params_.eta);
  floors_ = Vec::Constant(d, params_.eta);
}

int MabCorral::select(RngStream& rng) {
  if (awaiting_feedback_) throw ContractViolation("select called twice without observe");
  if (t_ >= params_.T) throw ContractViolation("horizon exhausted");
  ++t_;
  q_.setZero();
  for (int i = 0; i < params_.M; ++i) q_ += p_[i] * bases_[i];
  arm_ = static_cast<int>(rng.categorical(std::span<const double>(q_.data(), q_.size())));
  awaiting_feedback_ = true;
  return arm_;
}

void MabCorral::observe(double arm_loss) {
  if (!awaiting_feedback_) throw ContractViolation("observe called before select");
  const int d = params_.d;
  const double eta = params_.eta;
  if (q_.minCoeff() < eta - 1e-12) throw InvariantViolation("mixture fell below the clip");

  ell_hat_.setZero();
  ell_hat_[arm_] = arm_loss / q_[arm_];

  bias_mass_ = 0.0;
  for (int j = 0; j < params_.M; ++j) {
    b_[j] = eta * bases_[j].cwiseQuotient(q_).sum();
    c_hat_[j] = bases_[j][arm_] * ell_hat_[arm_] - b_[j];
    bias_mass_ += p_[j] * b_[j];
  }

  record_.t = t_;
  record_.x = Vec::Zero(d);
  record_.x[arm_] = 1.0;
  record_.realized_loss = arm_loss;
  record_.chosen = arm_;
  record_.p_max = p_.maxCoeff();
  record_.diagnostics.clear();
  record_.diagnostics.emplace_back("bias_mass", bias_mass_);

  // Meta: p <- p e^{-eps c_hat} / Z.
  const double m = c_hat_.minCoeff();
  for (int j = 0; j < params_.M; ++j) p_[j] *= std::exp(-params_.epsilon * (c_hat_[j] - m));
  p_ /= p_.sum();

  for (auto& a : bases_) a = clipped_entropy_step(a, ell_hat_, eta);
  awaiting_feedback_ = false;
}

}  // namespace corral
