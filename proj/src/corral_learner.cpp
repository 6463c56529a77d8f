#include "corral/corral_learner.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace corral {
namespace {

constexpr double kDenominatorSlack = 1e-9;

std::string fmt_bound(const char* name, double value, const char* bound) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s = %.6g violates %s", name, value, bound);
  return buf;
}

}  // namespace

void CorralParams::validate() const {
  if (!(p > 1.0 && p <= 2.0)) throw ConfigError(fmt_bound("p", p, "1 < p <= 2"));
  if (d < 1) throw ConfigError("dimension d must be >= 1");
  if (T < 1) throw ConfigError("horizon T must be >= 1");
  if (S < 1 || S > T) throw ConfigError("switch count S must satisfy 1 <= S <= T");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError(fmt_bound("gamma", gamma, "0 < gamma < 1"));
  if (!(beta > 0.0 && beta <= 0.5)) throw ConfigError(fmt_bound("beta", beta, "0 < beta <= 1/2"));
  if (!(eta > 0.0)) throw ConfigError(fmt_bound("eta", eta, "eta > 0"));
  if (!(epsilon > 0.0)) throw ConfigError(fmt_bound("epsilon", epsilon, "epsilon > 0"));
  if (!(lambda > 0.0)) throw ConfigError(fmt_bound("lambda", lambda, "lambda > 0"));
  if (!(mu >= 0.0 && mu <= 1.0)) throw ConfigError(fmt_bound("mu", mu, "0 <= mu <= 1"));
}

std::vector<std::pair<std::string_view, double>> CorralParams::as_diagnostics() const {
  return {{"C", C},     {"gamma", gamma}, {"eta", eta},      {"epsilon", epsilon},
          {"mu", mu},   {"beta", beta},   {"lambda", lambda}};
}

CorralParams derive_params(double p, int d, int T, int S, DomainSpec::Kind variant,
                           double alpha) {
  if (!(p > 1.0 && p <= 2.0)) throw ConfigError(fmt_bound("p", p, "1 < p <= 2"));
  if (d < 1 || T < 1 || S < 1 || S > T) {
    throw ConfigError("derive_params needs d >= 1 and 1 <= S <= T");
  }
  CorralParams cp;
  cp.p = p;
  cp.d = d;
  cp.T = T;
  cp.S = S;
  cp.variant = variant;
  cp.alpha = alpha;
  const double dd = d, TT = T, SS = S;
  cp.mu = 1.0 / TT;
  if (variant == DomainSpec::Kind::LpBall) {
    cp.C = std::sqrt(p - 1.0) * std::pow(2.0, -2.0 / (p - 1.0));
    cp.gamma = 4.0 * cp.C * std::sqrt(dd * SS / TT);
    cp.eta = cp.C * std::sqrt(SS / (dd * TT));
    cp.epsilon = std::min({std::sqrt(SS / (dd * TT)), 1.0 / (16.0 * dd), cp.C * cp.C / 2.0});
    cp.beta = 8.0 * dd * cp.epsilon;
    cp.lambda = cp.C / std::sqrt(dd * SS * TT);
  } else {
    if (!(alpha > 0.0)) throw ConfigError("gauge curvature alpha must be positive");
    const double q = dual_exponent(p);
    cp.C = std::sqrt(alpha / (10.0 * alpha + 8.0));
    cp.gamma = 4.0 * cp.C * std::pow(dd, 1.0 / q) * std::sqrt(SS / TT);
    cp.eta = cp.C * std::pow(dd, -1.0 / p) * std::sqrt(SS / TT);
    const double d2p = std::pow(dd, 2.0 / p);
    cp.epsilon = std::min({std::pow(dd, -1.0 / p) * std::sqrt(SS / TT), 1.0 / (16.0 * d2p),
                           cp.C * cp.C / 2.0});
    cp.beta = 8.0 * d2p * cp.epsilon;
    cp.lambda = cp.C * std::pow(dd, -1.0 / q) / std::sqrt(SS * TT);
  }
  cp.validate();
  return cp;
}

// ---------------------------------------------------------------------------

Vec renormalize(const Vec& p, int t) {
  if (t < 1 || t > p.size()) throw ContractViolation("renormalize: t out of range");
  const double total = p.head(t).sum();
  if (!(total > 0.0)) throw InvariantViolation("renormalize: active mass is zero");
  return p.head(t) / total;
}

SampledAction sample_action(const Vec& p_hat, const std::vector<Vec>& proposals,
                            const std::vector<int>& xis, double beta, RngStream& rng) {
  if (proposals.empty() || static_cast<Eigen::Index>(proposals.size()) != p_hat.size()) {
    throw ContractViolation("sample_action: one proposal per active base required");
  }
  const auto d = proposals.front().size();
  SampledAction out;
  out.rho = rng.bernoulli(beta) ? 1 : 0;
  if (out.rho == 0) {
    out.chosen = static_cast<int>(
        rng.categorical(std::span<const double>(p_hat.data(), p_hat.size())));
    out.x = proposals[out.chosen];
    out.xi = xis[out.chosen];
  } else {
    const auto k = rng.below(2 * static_cast<std::uint64_t>(d));
    out.x = Vec::Zero(d);
    out.x[static_cast<Eigen::Index>(k >> 1)] = (k & 1) ? -1.0 : 1.0;
  }
  return out;
}

double estimator_denominator(const Vec& p_hat, const Vec& norms) {
  return 1.0 - p_hat.dot(norms);
}

Vec base_loss_estimator(const Vec& x, double realized, int rho, int xi, const Vec& p_hat,
                        const Vec& norms, double beta, double gamma) {
  const double D = estimator_denominator(p_hat, norms);
  if (D < gamma - kDenominatorSlack) {
    throw InvariantViolation(fmt_bound("estimator denominator", D, ">= gamma"));
  }
  if (rho != 0 || xi != 0) return Vec::Zero(x.size());
  const double d = static_cast<double>(x.size());
  return (d * realized / ((1.0 - beta) * D)) * x;
}

Mat build_mtilde(const Vec& p_hat, const std::vector<Vec>& proposals, double beta, int d) {
  Mat m = (beta / d) * Mat::Identity(d, d);
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    m += (1.0 - beta) * p_hat[static_cast<Eigen::Index>(i)] * proposals[i] *
         proposals[i].transpose();
  }
  return m;
}

Vec bias_terms(const Vec& p_hat, const Vec& norms, double lambda, double beta, int T,
               double gamma) {
  const double D = estimator_denominator(p_hat, norms);
  if (D < gamma - kDenominatorSlack) {
    throw InvariantViolation(fmt_bound("estimator denominator", D, ">= gamma"));
  }
  const double coef = 1.0 / (lambda * T * (1.0 - beta));
  return (coef / D) * (Vec::Ones(norms.size()) - norms);
}

MetaEstimate meta_loss_estimator(const Mat& mtilde, const Vec& x, double realized,
                                 const std::vector<Vec>& proposals, const Vec& p_hat,
                                 const Vec& b, int T) {
  Eigen::LLT<Mat> llt(mtilde);
  if (llt.info() != Eigen::Success) throw NumericalError("M~ is not positive definite", 0.0);
  MetaEstimate out;
  out.ell_bar = llt.solve(x * realized);
  const auto t = static_cast<Eigen::Index>(proposals.size());
  out.c.resize(t);
  out.c_hat.resize(T);
  double pad = 0.0;
  for (Eigen::Index i = 0; i < t; ++i) {
    out.c[i] = proposals[i].dot(out.ell_bar);
    out.c_hat[i] = out.c[i] - b[i];
    pad += p_hat[i] * out.c_hat[i];
  }
  for (Eigen::Index i = t; i < T; ++i) out.c_hat[i] = pad;
  return out;
}

Vec fixed_share_update(const Vec& p, const Vec& c_hat, double epsilon, double mu) {
  const double m = c_hat.minCoeff();
  Vec w(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) w[i] = p[i] * std::exp(-epsilon * (c_hat[i] - m));
  const double Z = w.sum();
  const double T = static_cast<double>(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) w[i] = (1.0 - mu) * w[i] / Z + mu / T;
  return w;
}

// ---------------------------------------------------------------------------

void InvariantTally::check(bool ok, const char* what, int t, double value) {
  ++checks;
  if (ok) return;
  ++violations;
  if (messages.size() < 16) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "round %d: %s (value %.17g)", t, what, value);
    messages.emplace_back(buf);
  }
}

CorralLearner::CorralLearner(const CorralParams& params, DomainSpec domain)
    : params_(params), domain_(std::move(domain)), d_(params.d), T_(params.T) {
  params_.validate();
  domain_.validate();
  if (domain_.p != params_.p) throw ConfigError("domain exponent differs from params.p");
  if (domain_.kind != params_.variant) throw ConfigError("domain kind differs from params variant");
  pad_ = 1.0 / T_;
  bases_.reserve(static_cast<std::size_t>(T_));
  w_.reserve(static_cast<std::size_t>(T_));
  draw_.proposals.reserve(static_cast<std::size_t>(T_));
  x_ = Vec::Zero(d_);
  ell_bar_ = Vec::Zero(d_);
  mtilde_ = Mat::Zero(d_, d_);
}

void CorralLearner::draw(RngStream& rng, RoundDraw& out) const {
  const int n = active();
  out.rho = rng.bernoulli(params_.beta) ? 1 : 0;
  out.chosen = -1;
  if (out.rho == 0) {
    out.chosen = static_cast<int>(rng.categorical(std::span<const double>(w_.data(), w_.size())));
  }
  out.proposals.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.proposals[i] = bases_[i].propose(rng);
  if (out.rho == 1) {
    const auto k = static_cast<int>(rng.below(2 * static_cast<std::uint64_t>(d_)));
    out.played = Proposal{0, k >> 1, (k & 1) ? -1.0 : 1.0};
  } else {
    out.played = out.proposals[out.chosen];
  }
}

const Vec& CorralLearner::select(RngStream& rng) {
  if (awaiting_feedback_) throw ContractViolation("select called twice without observe");
  if (t_ >= T_) throw ContractViolation("horizon exhausted");
  ++t_;
  bases_.emplace_back(t_, params_.eta, params_.gamma, domain_, d_);
  w_.push_back(pad_);
  draw(rng, draw_);
  if (draw_.rho == 1) {
    x_.setZero();
    x_[draw_.played.axis] = draw_.played.sign;
  } else {
    x_ = bases_[draw_.chosen].proposal_vector(draw_.played);
  }
  awaiting_feedback_ = true;
  return x_;
}

void CorralLearner::accumulate_mtilde(const RoundDraw& draw, const Vec& p_hat, Mat& m) const {
  const double beta = params_.beta;
  m.setZero();
  m.diagonal().setConstant(beta / d_);
  const int n = static_cast<int>(draw.proposals.size());
  for (int i = 0; i < n; ++i) {
    const double wgt = (1.0 - beta) * p_hat[i];
    const Proposal& pr = draw.proposals[i];
    if (pr.xi == 0) {
      m(pr.axis, pr.axis) += wgt;
    } else {
      const Vec& u = bases_[i].direction();
      m.noalias() += wgt * u * u.transpose();
    }
  }
}

void CorralLearner::estimates(const RoundDraw& draw, const Vec& loss, Vec& ell_hat,
                              Vec& ell_bar) const {
  const int n = active();
  Vec x = Vec::Zero(d_);
  if (draw.rho == 1) {
    x[draw.played.axis] = draw.played.sign;
  } else {
    x = bases_[draw.chosen].proposal_vector(draw.played);
  }
  const double realized = loss.dot(x);
  double total = 0.0;
  for (double w : w_) total += w;
  Vec p_hat(n), norms(n);
  for (int i = 0; i < n; ++i) {
    p_hat[i] = w_[i] / total;
    norms[i] = bases_[i].norm();
  }
  const double D = 1.0 - p_hat.dot(norms);
  ell_hat = Vec::Zero(d_);
  if (draw.rho == 0 && draw.played.xi == 0) {
    ell_hat = (d_ * realized / ((1.0 - params_.beta) * D)) * x;
  }
  Mat m(d_, d_);
  accumulate_mtilde(draw, p_hat, m);
  ell_bar = m.llt().solve(x * realized);
}

void CorralLearner::observe(double realized) {
  if (!awaiting_feedback_) throw ContractViolation("observe called before select");
  if (!std::isfinite(realized)) throw NumericalError("non-finite feedback", realized);
  const int n = active();
  const double beta = params_.beta;

  // Renormalized weights and norms of the active bases.
  double total = 0.0;
  for (double w : w_) total += w;
  p_hat_.resize(n);
  norms_.resize(n);
  double weighted_norm = 0.0;
  for (int i = 0; i < n; ++i) {
    p_hat_[i] = w_[i] / total;
    norms_[i] = bases_[i].norm();
    weighted_norm += p_hat_[i] * norms_[i];
  }
  denom_ = 1.0 - weighted_norm;
  if (denom_ < params_.gamma - kDenominatorSlack) {
    throw InvariantViolation(fmt_bound("estimator denominator", denom_, ">= gamma"));
  }

  // Base estimator: one-sparse on the played axis, or zero.
  double lhat = 0.0;
  if (draw_.rho == 0 && draw_.played.xi == 0) {
    lhat = draw_.played.sign * d_ * realized / ((1.0 - beta) * denom_);
  }

  accumulate_mtilde(draw_, p_hat_, mtilde_);
  llt_.compute(mtilde_);
  if (llt_.info() != Eigen::Success) throw NumericalError("M~ is not positive definite", 0.0);
  ell_bar_ = llt_.solve(x_ * realized);

  const double coef = 1.0 / (params_.lambda * T_ * (1.0 - beta));
  b_.resize(n);
  c_hat_.resize(n);
  double pad_c = 0.0;
  for (int i = 0; i < n; ++i) {
    b_[i] = coef * (1.0 - norms_[i]) / denom_;
    c_hat_[i] = bases_[i].dot_proposal(draw_.proposals[i], ell_bar_) - b_[i];
    pad_c += p_hat_[i] * c_hat_[i];
  }
  c_hat_pad_ = pad_c;

  record_.t = t_;
  record_.x = x_;
  record_.realized_loss = realized;
  record_.rho = draw_.rho;
  record_.xi = draw_.rho == 0 ? draw_.played.xi : 0;
  record_.chosen = draw_.chosen;
  double pmax = n < T_ ? pad_ : 0.0;
  for (double w : w_) pmax = std::max(pmax, w);
  record_.p_max = pmax;
  record_.diagnostics.clear();
  record_.diagnostics.emplace_back("D", denom_);
  record_.diagnostics.emplace_back("lhat", lhat);

  if (check_invariants_) {
    // Padding identity <p_t, c_hat> = sum p_hat c_hat, with pre-update weights.
    double full = 0.0;
    for (int i = 0; i < n; ++i) full += w_[i] * c_hat_[i];
    full += (T_ - n) * pad_ * c_hat_pad_;
    tally_.check(std::abs(full - c_hat_pad_) <= 1e-10 * std::max(1.0, std::abs(c_hat_pad_)),
                 "padding identity", t_, full - c_hat_pad_);
    tally_.check(std::abs(p_hat_.dot(b_) - coef) <= 1e-10 * std::max(1.0, coef),
                 "bias identity", t_, p_hat_.dot(b_) - coef);
    tally_.check(denom_ >= params_.gamma - 1e-12, "denominator >= gamma", t_, denom_);
    Eigen::SelfAdjointEigenSolver<Mat> eig(mtilde_, Eigen::EigenvaluesOnly);
    const double lmin = eig.eigenvalues().minCoeff();
    tally_.check(lmin >= beta / d_ - 1e-12, "lambda_min(M~) >= beta/d", t_, lmin);
  }

  if (lhat != 0.0) {
    const int axis = draw_.played.axis;
    for (auto& base : bases_) base.update_sparse(axis, lhat);
  }

  // Fixed share over all T slots; inactive slots share the padded loss.
  const double eps = params_.epsilon, mu = params_.mu;
  double m = c_hat_pad_;
  for (int i = 0; i < n; ++i) m = std::min(m, c_hat_[i]);
  double Z = 0.0;
  for (int i = 0; i < n; ++i) {
    w_[i] *= std::exp(-eps * (c_hat_[i] - m));
    Z += w_[i];
  }
  double pad_new = pad_ * std::exp(-eps * (c_hat_pad_ - m));
  Z += (T_ - n) * pad_new;
  const double floor = mu / T_;
  for (int i = 0; i < n; ++i) w_[i] = (1.0 - mu) * w_[i] / Z + floor;
  pad_ = (1.0 - mu) * pad_new / Z + floor;

  if (check_invariants_) check_round_invariants();
  awaiting_feedback_ = false;
}

void CorralLearner::check_round_invariants() {
  const int n = active();
  double sum = 0.0;
  double wmin = n < T_ ? pad_ : 1.0;
  for (double w : w_) {
    sum += w;
    wmin = std::min(wmin, w);
  }
  sum += (T_ - n) * pad_;
  tally_.check(std::abs(sum - 1.0) <= 1e-12, "simplex sum", t_, sum);
  const double floor = params_.mu / T_;
  tally_.check(wmin >= floor * (1.0 - 1e-12), "fixed-share floor", t_, wmin);
  double worst = 0.0;
  for (const auto& base : bases_) worst = std::max(worst, base.norm());
  tally_.check(worst <= 1.0 - params_.gamma + 1e-12, "base feasibility", t_, worst);
}

const RoundRecord& CorralLearner::round(const std::function<double(const Vec&)>& feedback,
                                        RngStream& rng) {
  const Vec& x = select(rng);
  observe(feedback(x));
  return record_;
}

Vec CorralLearner::weights() const {
  Vec p = Vec::Constant(T_, pad_);
  for (int i = 0; i < active(); ++i) p[i] = w_[i];
  return p;
}

Vec CorralLearner::renormalized() const {
  Vec p(active());
  double total = 0.0;
  for (double w : w_) total += w;
  for (int i = 0; i < active(); ++i) p[i] = w_[i] / total;
  return p;
}

}  // namespace corral
